#include "convreg/groundtruth.hpp"

#include <cmath>
#include <string>

#include "convreg/errors.hpp"

namespace convreg {

Tensor gaussian_map(const std::vector<Window>& windows, int height,
                    int width) {
  Tensor map(1, height, width);
  for (const Window& win : windows) {
    if (win.w <= 0.0 || win.h <= 0.0) {
      throw InputError("window extent must be positive");
    }
    const double sx = win.w / 6.0;
    const double sy = win.h / 6.0;
    const double inv2sx2 = 1.0 / (2.0 * sx * sx);
    const double inv2sy2 = 1.0 / (2.0 * sy * sy);
    double* p = map.plane(0);
    for (int y = 0; y < height; ++y) {
      const double ey = (y - win.cy) * (y - win.cy) * inv2sy2;
      double* row = p + static_cast<std::size_t>(y) * width;
      for (int x = 0; x < width; ++x) {
        const double g =
            std::exp(-((x - win.cx) * (x - win.cx) * inv2sx2 + ey));
        if (g > row[x]) {
          row[x] = g;
        }
      }
    }
  }
  return map;
}

Tensor renormalize_range(const Tensor& map) {
  Tensor out = map;
  for (double& v : out.data()) {
    if (v < 0.0 || v > 1.0) {
      throw InputError("renormalize_range input outside [0,1]: " +
                       std::to_string(v));
    }
    v = 0.1 + 0.8 * v;
  }
  return out;
}

namespace {

// mask cell = 1 iff its whole factor x factor source block is image content
Tensor content_mask(int img_h, int img_w, int canvas_h, int canvas_w,
                    int factor) {
  Tensor mask(1, canvas_h / factor, canvas_w / factor);
  const int full_rows = img_h / factor;
  const int full_cols = img_w / factor;
  for (int y = 0; y < full_rows && y < mask.height(); ++y) {
    for (int x = 0; x < full_cols && x < mask.width(); ++x) {
      mask.at(0, y, x) = 1.0;
    }
  }
  return mask;
}

Tensor place_on_canvas(const Tensor& image, int canvas_h, int canvas_w) {
  if (image.height() > canvas_h || image.width() > canvas_w) {
    throw InputError("image " + std::to_string(image.height()) + "x" +
                     std::to_string(image.width()) +
                     " does not fit on canvas " + std::to_string(canvas_h) +
                     "x" + std::to_string(canvas_w));
  }
  return pad_zero(image, 0, canvas_h - image.height(), 0,
                  canvas_w - image.width());
}

void require_canvas(int canvas_h, int canvas_w, int factor) {
  if (factor < 1 || canvas_h % factor != 0 || canvas_w % factor != 0) {
    throw InputError("canvas must be divisible by the downsampling factor");
  }
}

}  // namespace

Sample prepare_sample(const Tensor& image, const std::vector<Window>& windows,
                      int canvas_h, int canvas_w, int factor) {
  require_canvas(canvas_h, canvas_w, factor);
  Sample s;
  s.image = place_on_canvas(image, canvas_h, canvas_w);
  const Tensor full = gaussian_map(windows, canvas_h, canvas_w);
  s.target = renormalize_range(block_downsample(full, factor));
  s.mask = content_mask(image.height(), image.width(), canvas_h, canvas_w,
                        factor);
  s.windows = windows;
  return s;
}

Sample prepare_sample_from_map(const Tensor& image, const Tensor& target_full,
                               int canvas_h, int canvas_w, int factor) {
  require_canvas(canvas_h, canvas_w, factor);
  if (target_full.channels() != 1 ||
      target_full.height() != image.height() ||
      target_full.width() != image.width()) {
    throw ShapeError("target map must be single-channel and image-sized");
  }
  Sample s;
  s.image = place_on_canvas(image, canvas_h, canvas_w);
  const Tensor full = place_on_canvas(target_full, canvas_h, canvas_w);
  s.target = renormalize_range(block_downsample(full, factor));
  s.mask = content_mask(image.height(), image.width(), canvas_h, canvas_w,
                        factor);
  return s;
}

}  // namespace convreg
