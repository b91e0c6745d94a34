#pragma once

#include <cstddef>
#include <vector>

namespace convreg {

// Dense rank-3 array of doubles: channels x height x width, channel-major,
// row-major within a channel. The universal carrier for images, feature
// channels, output maps, masks, and gradients. Pure value semantics; all
// free functions below return new tensors and never mutate their inputs.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, double fill = 0.0);
  static Tensor from_data(int channels, int height, int width,
                          std::vector<double> data);

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& at(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  double* plane(int c) noexcept {
    return data_.data() + static_cast<std::size_t>(c) * height_ * width_;
  }
  const double* plane(int c) const noexcept {
    return data_.data() + static_cast<std::size_t>(c) * height_ * width_;
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Tensor& o) const noexcept {
    return channels_ == o.channels_ && height_ == o.height_ &&
           width_ == o.width_;
  }

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Convolution filters and per-output-channel biases. Weight layout is
// out-major, then in, then row, then column; kernels must be odd so
// same-padding is symmetric.
struct FilterBank {
  int out_channels = 0;
  int in_channels = 0;
  int k_h = 0;
  int k_w = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  FilterBank() = default;
  FilterBank(int out, int in, int kh, int kw);

  double& w(int o, int i, int r, int c) noexcept {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * k_h + r) *
                       k_w +
                   c];
  }
  double w(int o, int i, int r, int c) const noexcept {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * k_h + r) *
                       k_w +
                   c];
  }
};

Tensor pad_zero(const Tensor& t, int top, int bottom, int left, int right);

// Per-channel mean over non-overlapping f x f blocks.
Tensor block_downsample(const Tensor& t, int factor);

Tensor crop(const Tensor& t, int top, int left, int h, int w);

}  // namespace convreg
