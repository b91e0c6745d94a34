#pragma once

#include <utility>
#include <vector>

#include "convreg/tensor.hpp"

namespace convreg {

// Axis-aligned detection rectangle in image pixels: center plus extent.
// The matching Gaussian has sigma_x = w/6 and sigma_y = h/6.
struct Window {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

// One training / evaluation item. target and mask live at map resolution
// (image size / factor); mask is 1 where the whole source block is real
// image content and 0 over canvas padding.
struct Sample {
  Tensor image;
  Tensor target;
  Tensor mask;
  std::vector<Window> windows;
  std::vector<std::pair<int, int>> fixations;  // (x, y) in image pixels
};

// Peak-1 Gaussian per window, combined across windows by pixelwise max.
// An empty window list yields the zero map.
Tensor gaussian_map(const std::vector<Window>& windows, int height, int width);

// Fixed affine [0,1] -> [0.1, 0.9] for the sigmoid output range.
Tensor renormalize_range(const Tensor& map);

// Places the image at the canvas top-left with zero padding, synthesizes the
// target from the windows on the canvas, and derives the content mask.
Sample prepare_sample(const Tensor& image, const std::vector<Window>& windows,
                      int canvas_h, int canvas_w, int factor);

// Same canvas/mask path, but the target comes from a caller-provided
// image-sized map with values in [0,1] (saliency ground truth).
Sample prepare_sample_from_map(const Tensor& image, const Tensor& target_full,
                               int canvas_h, int canvas_w, int factor);

}  // namespace convreg
