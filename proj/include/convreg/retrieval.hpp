#pragma once

#include <vector>

#include "convreg/groundtruth.hpp"
#include "convreg/tensor.hpp"

namespace convreg {

struct ComponentCell {
  int x = 0;
  int y = 0;
  double value = 0.0;
};

// Maximal 8-connected set of map cells above the detection threshold.
struct Component {
  std::vector<ComponentCell> cells;
  int label = 0;
};

// Cells with value > threshold, labeled in row-major discovery order.
std::vector<Component> components(const Tensor& map, double threshold);

// Inverts the Gaussian synthesis: weighted centroid and standard deviation
// of the response above the 0.1 background floor, scaled back to image
// pixels (w = 6*sigma_x*f, h = 6*sigma_y*f, at least f each). The measured
// sigma is corrected for the tail mass cut off by the detection threshold,
// so the threshold used to extract the component must be passed along.
Window fit_window(const Component& c, int factor, double threshold = 0.2);

// Intersection over union of two axis-aligned rectangles.
double iou(const Window& a, const Window& b);

// Fraction of ground-truth windows matched by a prediction with
// IoU >= iou_min, greedy best-IoU matching, each prediction used once.
double retrieval_rate(const std::vector<std::vector<Window>>& predicted,
                      const std::vector<std::vector<Window>>& truth,
                      double iou_min);

// Per-image matched-truth count under the same greedy matcher.
int matched_windows(const std::vector<Window>& predicted,
                    const std::vector<Window>& truth, double iou_min);

}  // namespace convreg
