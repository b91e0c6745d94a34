#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "convreg/groundtruth.hpp"
#include "convreg/layers.hpp"
#include "convreg/tensor.hpp"

namespace convreg {

// One convolution block: conv + ReLU, then optional 2x max-pool, optional
// cross-channel normalization, optional 2x up-sampling (in that order).
// Up-sampling requires pooling in the same block.
struct BlockSpec {
  int num_filters = 0;
  int filter_size = 0;  // odd, square
  bool pool = false;
  bool lrn = false;
  bool upsample = false;
};

struct NetworkSpec {
  int input_channels = 1;
  std::vector<BlockSpec> blocks;
  CombinerMode combiner = CombinerMode::kLinear;
  int target_factor = 1;  // required input -> output downsampling factor
};

// Net downsampling factor implied by the block layout.
int computed_factor(const NetworkSpec& spec);

struct LossConfig {
  double lambda = 1e-4;  // L2 coefficient over all parameters
};

struct LossAndGrad {
  double loss = 0.0;
  Tensor d_map;
};

// Masked mean-squared error over unmasked cells:
//   loss = sum(M . (map - target)^2) / (2 * |M|),  d_map = M . (map - target) / |M|
LossAndGrad loss_and_grad(const Tensor& map, const Tensor& target,
                          const Tensor& mask);

// Which backward rule the up-sampling layers use. kSumBlock is the exact
// adjoint; kCornerScaled is the simplified block-corner rule, valid only for
// block-constant upstream gradients (gradcheck negative control).
enum class UpsampleGradRule { kSumBlock, kCornerScaled };

struct BlockCache {
  Tensor conv_in;
  Tensor conv_out;  // pre-ReLU
  std::vector<std::uint32_t> pool_argmax;
  int pre_pool_h = 0;
  int pre_pool_w = 0;
  Tensor lrn_in;
};

struct ForwardCache {
  std::vector<BlockCache> blocks;
  Tensor channels;  // combiner input
  Tensor map;       // combiner output (same tensor as ForwardResult::map)
};

struct ForwardResult {
  Tensor map;  // single channel, image size / target_factor, values in (0,1)
  ForwardCache cache;
};

struct BackwardResult {
  std::vector<double> param_grad;  // canonical ParamVector order
  Tensor input_grad;
};

// Trainable regression network: convolution blocks plus the output combiner.
// Parameters flatten to a canonical vector: per block ascending, filter
// weights (out, in, row, col) then biases; finally combiner weights and bias
// (linear mode only).
class Network {
 public:
  Network(NetworkSpec spec, std::uint64_t init_seed);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::uint64_t init_seed() const noexcept { return init_seed_; }

  std::size_t num_params() const noexcept;
  std::vector<double> flatten_params() const;
  void unflatten_params(std::span<const double> v);

  const std::vector<FilterBank>& banks() const noexcept { return banks_; }
  std::vector<FilterBank>& banks() noexcept { return banks_; }
  const CombinerParams& combiner() const noexcept { return combiner_; }
  CombinerParams& combiner() noexcept { return combiner_; }

  ForwardResult forward(const Tensor& image) const;

  // Gradient of (loss + (lambda/2) * ||params||^2) with respect to the
  // canonical parameter vector and the input image. d_map is expected
  // pre-masked, as produced by loss_and_grad.
  BackwardResult backward(const ForwardCache& cache, const Tensor& d_map,
                          const LossConfig& cfg) const;

  // Input height/width must be divisible by this for forward to succeed.
  int input_divisor() const noexcept;

  LrnParams lrn_params;
  UpsampleGradRule upsample_grad_rule = UpsampleGradRule::kSumBlock;

 private:
  NetworkSpec spec_;
  std::uint64_t init_seed_ = 0;
  std::vector<FilterBank> banks_;
  CombinerParams combiner_;
};

struct BatchObjective {
  double value = 0.0;
  std::vector<double> grad;
};

// Mean of per-sample losses plus one L2 penalty term; mean of per-sample
// gradients plus lambda * params. Per-sample passes may run concurrently;
// the reduction always runs in ascending sample order.
BatchObjective batch_objective(const Network& net,
                               std::span<const Sample> samples,
                               const LossConfig& cfg);

}  // namespace convreg
