#include "convreg/tensor.hpp"

#include <cstring>
#include <string>
#include <utility>

#include "convreg/errors.hpp"

namespace convreg {

Tensor::Tensor(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 1 || height < 1 || width < 1) {
    throw ShapeError("tensor dimensions must be >= 1, got " +
                     std::to_string(channels) + "x" + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

Tensor Tensor::from_data(int channels, int height, int width,
                         std::vector<double> data) {
  Tensor t(channels, height, width);
  if (data.size() != t.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape");
  }
  t.data_ = std::move(data);
  return t;
}

FilterBank::FilterBank(int out, int in, int kh, int kw)
    : out_channels(out), in_channels(in), k_h(kh), k_w(kw) {
  if (out < 1 || in < 1 || kh < 1 || kw < 1) {
    throw ShapeError("filter bank dimensions must be >= 1");
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ConfigError("kernel size must be odd, got " + std::to_string(kh) +
                      "x" + std::to_string(kw));
  }
  weights.assign(static_cast<std::size_t>(out) * in * kh * kw, 0.0);
  biases.assign(static_cast<std::size_t>(out), 0.0);
}

Tensor pad_zero(const Tensor& t, int top, int bottom, int left, int right) {
  if (top < 0 || bottom < 0 || left < 0 || right < 0) {
    throw InputError("padding margins must be >= 0");
  }
  if (top == 0 && bottom == 0 && left == 0 && right == 0) {
    return t;
  }
  Tensor out(t.channels(), t.height() + top + bottom, t.width() + left + right);
  for (int c = 0; c < t.channels(); ++c) {
    const double* src = t.plane(c);
    double* dst = out.plane(c);
    for (int y = 0; y < t.height(); ++y) {
      std::memcpy(dst + static_cast<std::size_t>(y + top) * out.width() + left,
                  src + static_cast<std::size_t>(y) * t.width(),
                  sizeof(double) * t.width());
    }
  }
  return out;
}

Tensor block_downsample(const Tensor& t, int factor) {
  if (factor < 1) {
    throw InputError("downsample factor must be >= 1");
  }
  if (factor == 1) {
    return t;
  }
  if (t.height() % factor != 0 || t.width() % factor != 0) {
    throw ShapeError("dimensions " + std::to_string(t.height()) + "x" +
                     std::to_string(t.width()) + " not divisible by factor " +
                     std::to_string(factor));
  }
  const int oh = t.height() / factor;
  const int ow = t.width() / factor;
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  Tensor out(t.channels(), oh, ow);
  for (int c = 0; c < t.channels(); ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double sum = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) {
            sum += t.at(c, y * factor + dy, x * factor + dx);
          }
        }
        out.at(c, y, x) = sum * inv;
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& t, int top, int left, int h, int w) {
  if (top < 0 || left < 0 || h < 1 || w < 1 || top + h > t.height() ||
      left + w > t.width()) {
    throw ShapeError("crop region out of bounds");
  }
  Tensor out(t.channels(), h, w);
  for (int c = 0; c < t.channels(); ++c) {
    const double* src = t.plane(c);
    double* dst = out.plane(c);
    for (int y = 0; y < h; ++y) {
      std::memcpy(dst + static_cast<std::size_t>(y) * w,
                  src + static_cast<std::size_t>(y + top) * t.width() + left,
                  sizeof(double) * w);
    }
  }
  return out;
}

}  // namespace convreg
