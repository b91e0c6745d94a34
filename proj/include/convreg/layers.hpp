#pragma once

#include <cstdint>
#include <vector>

#include "convreg/tensor.hpp"

namespace convreg {

// Cross-channel local response normalization:
//   b[c] = a[c] / (k + alpha * sum_{j in nbhd(c)} a[j]^2)^beta
// with the neighborhood of n channels centered on c and clipped at the
// channel boundaries (no wraparound).
struct LrnParams {
  double k = 2.0;
  double alpha = 1e-4;
  double beta = 0.75;
  int n = 5;  // neighborhood size in channels, odd
};

enum class CombinerMode { kLinear, kChannelMax };

// Output combiner: a per-channel linear weighting plus bias, or a max across
// channels, followed by a sigmoid in either case.
struct CombinerParams {
  CombinerMode mode = CombinerMode::kLinear;
  std::vector<double> weights;  // one per input channel, linear mode only
  double bias = 0.0;
};

double sigmoid(double z);

// Same-padded cross-correlation: output keeps the input's spatial size,
// padding (k-1)/2 zeros per side.
Tensor conv_same_forward(const Tensor& input, const FilterBank& bank);

struct ConvGrads {
  Tensor input;                 // d loss / d input
  std::vector<double> weights;  // same layout as FilterBank::weights
  std::vector<double> biases;
};
ConvGrads conv_same_backward(const Tensor& input, const FilterBank& bank,
                             const Tensor& d_out);

Tensor relu(const Tensor& input);
// Passes the upstream gradient where input > 0; the subgradient at 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& d_out);

struct MaxPoolResult {
  Tensor out;
  // flat y*w + x index into the input plane, one entry per output cell,
  // ordered (channel, row, col); ties resolve to the first maximal cell in
  // row-major order within the block
  std::vector<std::uint32_t> argmax;
};
MaxPoolResult maxpool_forward(const Tensor& input, int p);
Tensor maxpool_backward(const Tensor& d_out,
                        const std::vector<std::uint32_t>& argmax, int in_height,
                        int in_width);

Tensor lrn_forward(const Tensor& input, const LrnParams& params);
Tensor lrn_backward(const Tensor& input, const LrnParams& params,
                    const Tensor& d_out);

// Copies each source cell to a p x p output block.
Tensor upsample_forward(const Tensor& input, int p);
// Exact adjoint of the copy rule: each source cell receives the SUM of the
// upstream gradient over its block.
Tensor upsample_backward(const Tensor& upstream, int p);
// Simplified rule d_in(y,x) = p^2 * upstream(corner of block). Agrees with
// the exact adjoint only when the upstream gradient is constant within each
// block; kept for the gradcheck negative control.
Tensor upsample_backward_corner_scaled(const Tensor& upstream, int p);

struct CombineResult {
  Tensor a_o;  // sigmoid output, single channel, values in (0,1)
  Tensor z;    // pre-activation
};
CombineResult combine_forward(const Tensor& channels,
                              const CombinerParams& params);

struct CombineGrads {
  Tensor d_z;
  std::vector<double> d_weights;  // empty in channel-max mode
  double d_bias = 0.0;
  Tensor d_channels;
};
// mask gates the output gradient cell-wise: dZ = M . dA_o . A_o . (1 - A_o).
// In channel-max mode the cell gradient goes to the first channel (lowest
// index) attaining the max.
CombineGrads combine_backward(const Tensor& d_a_o, const Tensor& a_o,
                              const Tensor& channels, const Tensor& mask,
                              const CombinerParams& params);

}  // namespace convreg
