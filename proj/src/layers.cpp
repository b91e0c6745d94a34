#include "convreg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "convreg/errors.hpp"

namespace convreg {

namespace {

void require_valid_lrn(const LrnParams& p) {
  if (p.k <= 0.0) {
    throw ConfigError("lrn k must be > 0");
  }
  if (p.n < 1 || p.n % 2 == 0) {
    throw ConfigError("lrn neighborhood size must be odd and >= 1");
  }
  if (p.beta <= 0.0) {
    throw ConfigError("lrn beta must be > 0");
  }
}

void require_binary_mask(const Tensor& mask) {
  for (double v : mask.data()) {
    if (v != 0.0 && v != 1.0) {
      throw InputError("mask values must be exactly 0 or 1");
    }
  }
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Tensor conv_same_forward(const Tensor& input, const FilterBank& bank) {
  if (input.channels() != bank.in_channels) {
    throw ShapeError("conv input has " + std::to_string(input.channels()) +
                     " channels, bank expects " +
                     std::to_string(bank.in_channels));
  }
  if (bank.k_h % 2 == 0 || bank.k_w % 2 == 0) {
    throw ConfigError("conv kernel must be odd");
  }
  const int h = input.height();
  const int w = input.width();
  const int ch = (bank.k_h - 1) / 2;
  const int cw = (bank.k_w - 1) / 2;

  Tensor out(bank.out_channels, h, w);
  for (int o = 0; o < bank.out_channels; ++o) {
    double* op = out.plane(o);
    const double b = bank.biases[o];
    for (int y = 0; y < h; ++y) {
      const int rlo = std::max(0, ch - y);
      const int rhi = std::min(bank.k_h, h + ch - y);
      for (int x = 0; x < w; ++x) {
        const int clo = std::max(0, cw - x);
        const int chi = std::min(bank.k_w, w + cw - x);
        double acc = b;
        for (int i = 0; i < bank.in_channels; ++i) {
          const double* ip = input.plane(i);
          for (int r = rlo; r < rhi; ++r) {
            const double* irow =
                ip + static_cast<std::size_t>(y + r - ch) * w + (x - cw);
            const double* wrow =
                &bank.weights[((static_cast<std::size_t>(o) * bank.in_channels +
                                i) *
                                   bank.k_h +
                               r) *
                              bank.k_w];
            for (int c = clo; c < chi; ++c) {
              acc += irow[c] * wrow[c];
            }
          }
        }
        op[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
  }
  return out;
}

ConvGrads conv_same_backward(const Tensor& input, const FilterBank& bank,
                             const Tensor& d_out) {
  if (input.channels() != bank.in_channels) {
    throw ShapeError("conv backward: input channel mismatch");
  }
  if (d_out.channels() != bank.out_channels ||
      d_out.height() != input.height() || d_out.width() != input.width()) {
    throw ShapeError("conv backward: upstream gradient shape mismatch");
  }
  const int h = input.height();
  const int w = input.width();
  const int ch = (bank.k_h - 1) / 2;
  const int cw = (bank.k_w - 1) / 2;

  ConvGrads g;
  g.input = Tensor(input.channels(), h, w);
  g.weights.assign(bank.weights.size(), 0.0);
  g.biases.assign(bank.biases.size(), 0.0);

  for (int o = 0; o < bank.out_channels; ++o) {
    const double* dop = d_out.plane(o);
    double bias_acc = 0.0;
    for (int y = 0; y < h; ++y) {
      const int rlo = std::max(0, ch - y);
      const int rhi = std::min(bank.k_h, h + ch - y);
      for (int x = 0; x < w; ++x) {
        const double d = dop[static_cast<std::size_t>(y) * w + x];
        bias_acc += d;
        if (d == 0.0) {
          continue;
        }
        const int clo = std::max(0, cw - x);
        const int chi = std::min(bank.k_w, w + cw - x);
        for (int i = 0; i < bank.in_channels; ++i) {
          const double* ip = input.plane(i);
          double* gip = g.input.plane(i);
          for (int r = rlo; r < rhi; ++r) {
            const std::size_t row_off =
                static_cast<std::size_t>(y + r - ch) * w + (x - cw);
            const std::size_t w_off =
                ((static_cast<std::size_t>(o) * bank.in_channels + i) *
                     bank.k_h +
                 r) *
                bank.k_w;
            for (int c = clo; c < chi; ++c) {
              g.weights[w_off + c] += d * ip[row_off + c];
              gip[row_off + c] += d * bank.weights[w_off + c];
            }
          }
        }
      }
    }
    g.biases[o] = bias_acc;
  }
  return g;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data()) {
    v = std::max(0.0, v);
  }
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& d_out) {
  if (!input.same_shape(d_out)) {
    throw ShapeError("relu backward: shape mismatch");
  }
  Tensor out(input.channels(), input.height(), input.width());
  const double* in = input.data().data();
  const double* d = d_out.data().data();
  double* g = out.data().data();
  for (std::size_t i = 0; i < input.size(); ++i) {
    g[i] = in[i] > 0.0 ? d[i] : 0.0;
  }
  return out;
}

MaxPoolResult maxpool_forward(const Tensor& input, int p) {
  if (p < 1) {
    throw InputError("pool factor must be >= 1");
  }
  if (input.height() % p != 0 || input.width() % p != 0) {
    throw ShapeError("pool input " + std::to_string(input.height()) + "x" +
                     std::to_string(input.width()) + " not divisible by " +
                     std::to_string(p));
  }
  const int oh = input.height() / p;
  const int ow = input.width() / p;
  MaxPoolResult res;
  res.out = Tensor(input.channels(), oh, ow);
  res.argmax.resize(res.out.size());
  std::size_t idx = 0;
  for (int c = 0; c < input.channels(); ++c) {
    const double* ip = input.plane(c);
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        std::uint32_t best_at = 0;
        for (int dy = 0; dy < p; ++dy) {
          const std::uint32_t row =
              static_cast<std::uint32_t>((y * p + dy) * input.width() + x * p);
          for (int dx = 0; dx < p; ++dx) {
            const double v = ip[row + dx];
            if (v > best) {
              best = v;
              best_at = row + dx;
            }
          }
        }
        res.out.at(c, y, x) = best;
        res.argmax[idx++] = best_at;
      }
    }
  }
  return res;
}

Tensor maxpool_backward(const Tensor& d_out,
                        const std::vector<std::uint32_t>& argmax, int in_height,
                        int in_width) {
  if (argmax.size() != d_out.size()) {
    throw UsageError("maxpool backward: argmax cache does not match gradient");
  }
  Tensor g(d_out.channels(), in_height, in_width);
  std::size_t idx = 0;
  for (int c = 0; c < d_out.channels(); ++c) {
    double* gp = g.plane(c);
    const double* dp = d_out.plane(c);
    const std::size_t n =
        static_cast<std::size_t>(d_out.height()) * d_out.width();
    for (std::size_t i = 0; i < n; ++i, ++idx) {
      gp[argmax[idx]] += dp[i];
    }
  }
  return g;
}

Tensor lrn_forward(const Tensor& input, const LrnParams& params) {
  require_valid_lrn(params);
  const int cc = input.channels();
  const int half = params.n / 2;
  Tensor out(cc, input.height(), input.width());
  const std::size_t plane =
      static_cast<std::size_t>(input.height()) * input.width();
  for (std::size_t s = 0; s < plane; ++s) {
    for (int c = 0; c < cc; ++c) {
      const int jlo = std::max(0, c - half);
      const int jhi = std::min(cc - 1, c + half);
      double sum = 0.0;
      for (int j = jlo; j <= jhi; ++j) {
        const double a = input.plane(j)[s];
        sum += a * a;
      }
      out.plane(c)[s] = input.plane(c)[s] *
                        std::pow(params.k + params.alpha * sum, -params.beta);
    }
  }
  return out;
}

Tensor lrn_backward(const Tensor& input, const LrnParams& params,
                    const Tensor& d_out) {
  require_valid_lrn(params);
  if (!input.same_shape(d_out)) {
    throw ShapeError("lrn backward: shape mismatch");
  }
  const int cc = input.channels();
  const int half = params.n / 2;
  Tensor g(cc, input.height(), input.width());
  const std::size_t plane =
      static_cast<std::size_t>(input.height()) * input.width();
  std::vector<double> scale(cc);  // (k + alpha * sum)^-beta
  std::vector<double> inner(cc);  // d_out * a * scale / (k + alpha * sum)
  for (std::size_t s = 0; s < plane; ++s) {
    for (int c = 0; c < cc; ++c) {
      const int jlo = std::max(0, c - half);
      const int jhi = std::min(cc - 1, c + half);
      double sum = 0.0;
      for (int j = jlo; j <= jhi; ++j) {
        const double a = input.plane(j)[s];
        sum += a * a;
      }
      const double denom = params.k + params.alpha * sum;
      scale[c] = std::pow(denom, -params.beta);
      inner[c] = d_out.plane(c)[s] * input.plane(c)[s] * scale[c] / denom;
    }
    for (int i = 0; i < cc; ++i) {
      const int jlo = std::max(0, i - half);
      const int jhi = std::min(cc - 1, i + half);
      double cross = 0.0;
      for (int c = jlo; c <= jhi; ++c) {
        cross += inner[c];
      }
      g.plane(i)[s] = d_out.plane(i)[s] * scale[i] -
                      2.0 * params.alpha * params.beta * input.plane(i)[s] *
                          cross;
    }
  }
  return g;
}

Tensor upsample_forward(const Tensor& input, int p) {
  if (p < 1) {
    throw InputError("upsample factor must be >= 1");
  }
  if (p == 1) {
    return input;
  }
  Tensor out(input.channels(), input.height() * p, input.width() * p);
  for (int c = 0; c < input.channels(); ++c) {
    const double* ip = input.plane(c);
    double* op = out.plane(c);
    for (int y = 0; y < out.height(); ++y) {
      const double* irow =
          ip + static_cast<std::size_t>(y / p) * input.width();
      double* orow = op + static_cast<std::size_t>(y) * out.width();
      for (int x = 0; x < out.width(); ++x) {
        orow[x] = irow[x / p];
      }
    }
  }
  return out;
}

Tensor upsample_backward(const Tensor& upstream, int p) {
  if (p < 1) {
    throw InputError("upsample factor must be >= 1");
  }
  if (p == 1) {
    return upstream;
  }
  if (upstream.height() % p != 0 || upstream.width() % p != 0) {
    throw ShapeError("upsample backward: dimensions not divisible by factor");
  }
  const int oh = upstream.height() / p;
  const int ow = upstream.width() / p;
  Tensor g(upstream.channels(), oh, ow);
  for (int c = 0; c < upstream.channels(); ++c) {
    const double* up = upstream.plane(c);
    double* gp = g.plane(c);
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double sum = 0.0;
        for (int dy = 0; dy < p; ++dy) {
          const double* row =
              up + static_cast<std::size_t>(y * p + dy) * upstream.width() +
              x * p;
          for (int dx = 0; dx < p; ++dx) {
            sum += row[dx];
          }
        }
        gp[static_cast<std::size_t>(y) * ow + x] = sum;
      }
    }
  }
  return g;
}

Tensor upsample_backward_corner_scaled(const Tensor& upstream, int p) {
  if (p < 1) {
    throw InputError("upsample factor must be >= 1");
  }
  if (p == 1) {
    return upstream;
  }
  if (upstream.height() % p != 0 || upstream.width() % p != 0) {
    throw ShapeError("upsample backward: dimensions not divisible by factor");
  }
  const int oh = upstream.height() / p;
  const int ow = upstream.width() / p;
  const double scale = static_cast<double>(p) * p;
  Tensor g(upstream.channels(), oh, ow);
  for (int c = 0; c < upstream.channels(); ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        g.at(c, y, x) =
            scale * upstream.at(c, y * p + p - 1, x * p + p - 1);
      }
    }
  }
  return g;
}

CombineResult combine_forward(const Tensor& channels,
                              const CombinerParams& params) {
  if (params.mode == CombinerMode::kLinear &&
      params.weights.size() != static_cast<std::size_t>(channels.channels())) {
    throw ShapeError("combiner has " + std::to_string(params.weights.size()) +
                     " weights for " + std::to_string(channels.channels()) +
                     " channels");
  }
  CombineResult res;
  res.z = Tensor(1, channels.height(), channels.width());
  const std::size_t plane =
      static_cast<std::size_t>(channels.height()) * channels.width();
  double* zp = res.z.plane(0);
  if (params.mode == CombinerMode::kLinear) {
    for (std::size_t s = 0; s < plane; ++s) {
      zp[s] = params.bias;
    }
    for (int c = 0; c < channels.channels(); ++c) {
      const double w = params.weights[c];
      const double* ap = channels.plane(c);
      for (std::size_t s = 0; s < plane; ++s) {
        zp[s] += w * ap[s];
      }
    }
  } else {
    for (std::size_t s = 0; s < plane; ++s) {
      double best = channels.plane(0)[s];
      for (int c = 1; c < channels.channels(); ++c) {
        best = std::max(best, channels.plane(c)[s]);
      }
      zp[s] = best;
    }
  }
  res.a_o = Tensor(1, channels.height(), channels.width());
  double* op = res.a_o.plane(0);
  for (std::size_t s = 0; s < plane; ++s) {
    op[s] = sigmoid(zp[s]);
  }
  return res;
}

CombineGrads combine_backward(const Tensor& d_a_o, const Tensor& a_o,
                              const Tensor& channels, const Tensor& mask,
                              const CombinerParams& params) {
  if (!d_a_o.same_shape(a_o) || d_a_o.channels() != 1 ||
      d_a_o.height() != channels.height() ||
      d_a_o.width() != channels.width() || !mask.same_shape(d_a_o)) {
    throw ShapeError("combine backward: shape mismatch");
  }
  if (params.mode == CombinerMode::kLinear &&
      params.weights.size() != static_cast<std::size_t>(channels.channels())) {
    throw ShapeError("combine backward: weight count mismatch");
  }
  require_binary_mask(mask);

  const std::size_t plane =
      static_cast<std::size_t>(channels.height()) * channels.width();
  CombineGrads g;
  g.d_z = Tensor(1, channels.height(), channels.width());
  double* dz = g.d_z.plane(0);
  {
    const double* m = mask.plane(0);
    const double* da = d_a_o.plane(0);
    const double* ao = a_o.plane(0);
    for (std::size_t s = 0; s < plane; ++s) {
      dz[s] = m[s] == 0.0 ? 0.0 : da[s] * ao[s] * (1.0 - ao[s]);
    }
  }

  g.d_channels = Tensor(channels.channels(), channels.height(),
                        channels.width());
  if (params.mode == CombinerMode::kLinear) {
    g.d_weights.assign(channels.channels(), 0.0);
    double db = 0.0;
    for (std::size_t s = 0; s < plane; ++s) {
      db += dz[s];
    }
    g.d_bias = db;
    for (int c = 0; c < channels.channels(); ++c) {
      const double* ap = channels.plane(c);
      double* dcp = g.d_channels.plane(c);
      const double w = params.weights[c];
      double dw = 0.0;
      for (std::size_t s = 0; s < plane; ++s) {
        dw += ap[s] * dz[s];
        dcp[s] = w * dz[s];
      }
      g.d_weights[c] = dw;
    }
  } else {
    // gradient routes to the first channel attaining the max
    for (std::size_t s = 0; s < plane; ++s) {
      int best_c = 0;
      double best = channels.plane(0)[s];
      for (int c = 1; c < channels.channels(); ++c) {
        if (channels.plane(c)[s] > best) {
          best = channels.plane(c)[s];
          best_c = c;
        }
      }
      g.d_channels.plane(best_c)[s] = dz[s];
    }
  }
  return g;
}

}  // namespace convreg
