#include "convreg/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>
#include <utility>

#include "convreg/errors.hpp"
#include "convreg/rng.hpp"

namespace convreg {

int computed_factor(const NetworkSpec& spec) {
  int f = 1;
  for (const BlockSpec& b : spec.blocks) {
    if (b.pool && !b.upsample) {
      f *= 2;
    }
  }
  return f;
}

namespace {

void validate_spec(const NetworkSpec& spec) {
  if (spec.input_channels < 1) {
    throw ConfigError("input_channels must be >= 1");
  }
  if (spec.blocks.empty()) {
    throw ConfigError("network needs at least one block");
  }
  for (const BlockSpec& b : spec.blocks) {
    if (b.num_filters < 1) {
      throw ConfigError("block filter count must be >= 1");
    }
    if (b.filter_size < 1 || b.filter_size % 2 == 0) {
      throw ConfigError("filter size must be odd, got " +
                        std::to_string(b.filter_size));
    }
    if (b.upsample && !b.pool) {
      throw ConfigError("up-sampling requires pooling in the same block");
    }
  }
  const int actual = computed_factor(spec);
  if (actual != spec.target_factor) {
    throw ConfigError("block layout yields factor " + std::to_string(actual) +
                      ", spec requires " + std::to_string(spec.target_factor));
  }
}

}  // namespace

Network::Network(NetworkSpec spec, std::uint64_t init_seed)
    : spec_(std::move(spec)), init_seed_(init_seed) {
  validate_spec(spec_);
  Rng rng(init_seed_);
  int in_ch = spec_.input_channels;
  for (const BlockSpec& b : spec_.blocks) {
    FilterBank bank(b.num_filters, in_ch, b.filter_size, b.filter_size);
    const double fan_in =
        static_cast<double>(in_ch) * b.filter_size * b.filter_size;
    const double s = std::sqrt(3.0 / fan_in);
    for (double& w : bank.weights) {
      w = rng.uniform(-s, s);
    }
    banks_.push_back(std::move(bank));
    in_ch = b.num_filters;
  }
  combiner_.mode = spec_.combiner;
  if (spec_.combiner == CombinerMode::kLinear) {
    combiner_.weights.resize(in_ch);
    for (double& w : combiner_.weights) {
      w = rng.uniform(-0.1, 0.1);
    }
    combiner_.bias = 0.0;
  }
}

std::size_t Network::num_params() const noexcept {
  std::size_t n = 0;
  for (const FilterBank& b : banks_) {
    n += b.weights.size() + b.biases.size();
  }
  if (combiner_.mode == CombinerMode::kLinear) {
    n += combiner_.weights.size() + 1;
  }
  return n;
}

std::vector<double> Network::flatten_params() const {
  std::vector<double> v;
  v.reserve(num_params());
  for (const FilterBank& b : banks_) {
    v.insert(v.end(), b.weights.begin(), b.weights.end());
    v.insert(v.end(), b.biases.begin(), b.biases.end());
  }
  if (combiner_.mode == CombinerMode::kLinear) {
    v.insert(v.end(), combiner_.weights.begin(), combiner_.weights.end());
    v.push_back(combiner_.bias);
  }
  return v;
}

void Network::unflatten_params(std::span<const double> v) {
  if (v.size() != num_params()) {
    throw ShapeError("parameter vector length " + std::to_string(v.size()) +
                     ", expected " + std::to_string(num_params()));
  }
  std::size_t at = 0;
  for (FilterBank& b : banks_) {
    std::copy(v.begin() + at, v.begin() + at + b.weights.size(),
              b.weights.begin());
    at += b.weights.size();
    std::copy(v.begin() + at, v.begin() + at + b.biases.size(),
              b.biases.begin());
    at += b.biases.size();
  }
  if (combiner_.mode == CombinerMode::kLinear) {
    std::copy(v.begin() + at, v.begin() + at + combiner_.weights.size(),
              combiner_.weights.begin());
    at += combiner_.weights.size();
    combiner_.bias = v[at];
  }
}

int Network::input_divisor() const noexcept {
  // each pool needs an even size at its own scale
  int divisor = 1;
  int scale_num = 1;  // current size = input * scale_num / scale_den
  int scale_den = 1;
  for (const BlockSpec& b : spec_.blocks) {
    if (b.pool) {
      const int need = 2 * scale_den / std::gcd(2 * scale_den, scale_num);
      divisor = std::max(divisor, need);
      scale_den *= 2;
    }
    if (b.upsample) {
      scale_num *= 2;
    }
    const int g = std::gcd(scale_num, scale_den);
    scale_num /= g;
    scale_den /= g;
  }
  return divisor;
}

ForwardResult Network::forward(const Tensor& image) const {
  if (image.channels() != spec_.input_channels) {
    throw ShapeError("input has " + std::to_string(image.channels()) +
                     " channels, network expects " +
                     std::to_string(spec_.input_channels));
  }
  ForwardResult res;
  res.cache.blocks.resize(spec_.blocks.size());
  Tensor t = image;
  for (std::size_t i = 0; i < spec_.blocks.size(); ++i) {
    const BlockSpec& b = spec_.blocks[i];
    BlockCache& cache = res.cache.blocks[i];
    cache.conv_in = t;
    cache.conv_out = conv_same_forward(t, banks_[i]);
    t = relu(cache.conv_out);
    if (b.pool) {
      cache.pre_pool_h = t.height();
      cache.pre_pool_w = t.width();
      MaxPoolResult mp = maxpool_forward(t, 2);
      cache.pool_argmax = std::move(mp.argmax);
      t = std::move(mp.out);
    }
    if (b.lrn) {
      cache.lrn_in = t;
      t = lrn_forward(t, lrn_params);
    }
    if (b.upsample) {
      t = upsample_forward(t, 2);
    }
  }
  res.cache.channels = t;
  CombineResult c = combine_forward(t, combiner_);
  res.map = c.a_o;
  res.cache.map = std::move(c.a_o);
  return res;
}

BackwardResult Network::backward(const ForwardCache& cache,
                                 const Tensor& d_map,
                                 const LossConfig& cfg) const {
  if (cache.blocks.size() != spec_.blocks.size()) {
    throw UsageError("forward cache does not match this network");
  }
  if (!d_map.same_shape(cache.map)) {
    throw UsageError("output gradient does not match cached forward pass");
  }

  // mask is already folded into d_map by loss_and_grad
  const Tensor ones(1, d_map.height(), d_map.width(), 1.0);
  CombineGrads cg =
      combine_backward(d_map, cache.map, cache.channels, ones, combiner_);

  BackwardResult res;
  res.param_grad.assign(num_params(), 0.0);

  // combiner slot sits at the tail of the parameter vector
  if (combiner_.mode == CombinerMode::kLinear) {
    std::size_t at = res.param_grad.size() - combiner_.weights.size() - 1;
    for (std::size_t i = 0; i < cg.d_weights.size(); ++i) {
      res.param_grad[at + i] = cg.d_weights[i];
    }
    res.param_grad.back() = cg.d_bias;
  }

  Tensor d_t = std::move(cg.d_channels);
  std::size_t slot_end = 0;
  for (const FilterBank& b : banks_) {
    slot_end += b.weights.size() + b.biases.size();
  }
  for (std::size_t idx = spec_.blocks.size(); idx-- > 0;) {
    const BlockSpec& b = spec_.blocks[idx];
    const BlockCache& bc = cache.blocks[idx];
    if (bc.conv_in.channels() == 0) {
      throw UsageError("forward cache is incomplete");
    }
    if (b.upsample) {
      d_t = upsample_grad_rule == UpsampleGradRule::kSumBlock
                ? upsample_backward(d_t, 2)
                : upsample_backward_corner_scaled(d_t, 2);
    }
    if (b.lrn) {
      d_t = lrn_backward(bc.lrn_in, lrn_params, d_t);
    }
    if (b.pool) {
      d_t = maxpool_backward(d_t, bc.pool_argmax, bc.pre_pool_h, bc.pre_pool_w);
    }
    d_t = relu_backward(bc.conv_out, d_t);
    ConvGrads g = conv_same_backward(bc.conv_in, banks_[idx], d_t);
    const std::size_t slot_begin =
        slot_end - banks_[idx].weights.size() - banks_[idx].biases.size();
    std::copy(g.weights.begin(), g.weights.end(),
              res.param_grad.begin() + slot_begin);
    std::copy(g.biases.begin(), g.biases.end(),
              res.param_grad.begin() + slot_begin + g.weights.size());
    slot_end = slot_begin;
    d_t = std::move(g.input);
  }
  res.input_grad = std::move(d_t);

  if (cfg.lambda != 0.0) {
    const std::vector<double> p = flatten_params();
    for (std::size_t i = 0; i < p.size(); ++i) {
      res.param_grad[i] += cfg.lambda * p[i];
    }
  }
  return res;
}

LossAndGrad loss_and_grad(const Tensor& map, const Tensor& target,
                          const Tensor& mask) {
  if (!map.same_shape(target) || !map.same_shape(mask)) {
    throw ShapeError("loss: map, target, and mask must share a shape");
  }
  std::size_t active = 0;
  for (double v : mask.data()) {
    if (v == 1.0) {
      ++active;
    } else if (v != 0.0) {
      throw InputError("mask values must be exactly 0 or 1");
    }
  }
  if (active == 0) {
    throw DegenerateError("sample mask is all zero");
  }
  LossAndGrad out;
  out.d_map = Tensor(map.channels(), map.height(), map.width());
  const double inv = 1.0 / static_cast<double>(active);
  const double* a = map.data().data();
  const double* t = target.data().data();
  const double* m = mask.data().data();
  double* d = out.d_map.data().data();
  double loss = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (m[i] == 1.0) {
      const double diff = a[i] - t[i];
      loss += diff * diff;
      d[i] = diff * inv;
    }
  }
  out.loss = 0.5 * loss * inv;
  return out;
}

BatchObjective batch_objective(const Network& net,
                               std::span<const Sample> samples,
                               const LossConfig& cfg) {
  if (samples.empty()) {
    throw UsageError("batch_objective requires at least one sample");
  }
  const std::size_t n = samples.size();
  std::vector<double> values(n);
  std::vector<std::vector<double>> grads(n);

  const LossConfig no_penalty{0.0};
  auto eval_one = [&](std::size_t i) {
    const Sample& s = samples[i];
    ForwardResult f = net.forward(s.image);
    LossAndGrad lg = loss_and_grad(f.map, s.target, s.mask);
    values[i] = lg.loss;
    grads[i] = net.backward(f.cache, lg.d_map, no_penalty).param_grad;
  };

  const unsigned hw = std::thread::hardware_concurrency();
  const std::size_t n_threads = std::min<std::size_t>(hw > 0 ? hw : 1, n);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      eval_one(i);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          eval_one(i);
        }
      });
    }
    for (std::thread& th : pool) {
      th.join();
    }
  }

  // fixed ascending reduction order for bit-reproducibility
  BatchObjective out;
  out.grad.assign(net.num_params(), 0.0);
  double value = 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    value += values[i];
    for (std::size_t j = 0; j < out.grad.size(); ++j) {
      out.grad[j] += grads[i][j];
    }
  }
  out.value = value * inv;
  for (double& g : out.grad) {
    g *= inv;
  }
  if (cfg.lambda != 0.0) {
    const std::vector<double> p = net.flatten_params();
    double sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      sq += p[i] * p[i];
      out.grad[i] += cfg.lambda * p[i];
    }
    out.value += 0.5 * cfg.lambda * sq;
  }
  return out;
}

}  // namespace convreg
