#include "convreg/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "convreg/errors.hpp"

namespace convreg {

std::vector<Component> components(const Tensor& map, double threshold) {
  if (map.channels() != 1) {
    throw ShapeError("components expects a single-channel map");
  }
  const int h = map.height();
  const int w = map.width();
  std::vector<bool> visited(static_cast<std::size_t>(h) * w, false);
  std::vector<Component> out;
  std::vector<int> stack;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t at = static_cast<std::size_t>(y) * w + x;
      if (visited[at] || map.at(0, y, x) <= threshold) {
        continue;
      }
      Component comp;
      comp.label = static_cast<int>(out.size());
      stack.assign(1, static_cast<int>(at));
      visited[at] = true;
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cy = cur / w;
        const int cx = cur % w;
        comp.cells.push_back({cx, cy, map.at(0, cy, cx)});
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) {
              continue;
            }
            const int ny = cy + dy;
            const int nx = cx + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) {
              continue;
            }
            const std::size_t nat = static_cast<std::size_t>(ny) * w + nx;
            if (!visited[nat] && map.at(0, ny, nx) > threshold) {
              visited[nat] = true;
              stack.push_back(static_cast<int>(nat));
            }
          }
        }
      }
      out.push_back(std::move(comp));
    }
  }
  return out;
}

namespace {

// Thresholding a Gaussian at g_min of its peak discards tail mass, which
// shrinks the weighted variance of the remaining cells by a factor
//   R = (2 - g_min*(t^2 + 2)) / (2*(1 - g_min)),   t^2 = -2*ln(g_min)
// (isotropic 2-D truncation; the anisotropic case rescales identically).
// Dividing the measured sigma by sqrt(R) undoes the bias.
double truncation_correction(double g_min) {
  if (g_min <= 0.0 || g_min >= 1.0) {
    return 1.0;
  }
  const double t2 = -2.0 * std::log(g_min);
  const double r = (2.0 - g_min * (t2 + 2.0)) / (2.0 * (1.0 - g_min));
  if (r <= 0.0) {
    return 2.5;
  }
  return std::min(1.0 / std::sqrt(r), 2.5);
}

}  // namespace

Window fit_window(const Component& c, int factor, double threshold) {
  if (c.cells.empty()) {
    throw DegenerateError("empty component");
  }
  double total = 0.0;
  double peak = 0.0;
  double mx = 0.0;
  double my = 0.0;
  for (const ComponentCell& cell : c.cells) {
    const double u = std::max(cell.value - 0.1, 0.0);
    total += u;
    peak = std::max(peak, u);
    mx += u * cell.x;
    my += u * cell.y;
  }
  if (total <= 0.0) {
    throw DegenerateError("component carries no weight above the 0.1 floor");
  }
  mx /= total;
  my /= total;
  double vx = 0.0;
  double vy = 0.0;
  for (const ComponentCell& cell : c.cells) {
    const double u = std::max(cell.value - 0.1, 0.0);
    vx += u * (cell.x - mx) * (cell.x - mx);
    vy += u * (cell.y - my) * (cell.y - my);
  }
  vx /= total;
  vy /= total;

  const double correction =
      threshold > 0.1 ? truncation_correction((threshold - 0.1) / peak) : 1.0;
  const double f = static_cast<double>(factor);
  Window win;
  // map cell x covers pixels [x*f, (x+1)*f), centered at x*f + (f-1)/2
  win.cx = mx * f + (f - 1.0) / 2.0;
  win.cy = my * f + (f - 1.0) / 2.0;
  win.w = std::max(6.0 * std::sqrt(vx) * correction * f, f);
  win.h = std::max(6.0 * std::sqrt(vy) * correction * f, f);
  return win;
}

double iou(const Window& a, const Window& b) {
  const double ax1 = a.cx - a.w / 2.0, ax2 = a.cx + a.w / 2.0;
  const double ay1 = a.cy - a.h / 2.0, ay2 = a.cy + a.h / 2.0;
  const double bx1 = b.cx - b.w / 2.0, bx2 = b.cx + b.w / 2.0;
  const double by1 = b.cy - b.h / 2.0, by2 = b.cy + b.h / 2.0;
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

int matched_windows(const std::vector<Window>& predicted,
                    const std::vector<Window>& truth, double iou_min) {
  // all pairs meeting the threshold, best IoU first; ties break on indices
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t p = 0; p < predicted.size(); ++p) {
      const double v = iou(predicted[p], truth[t]);
      if (v >= iou_min) {
        pairs.emplace_back(v, t, p);
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) {
      return std::get<0>(a) > std::get<0>(b);
    }
    if (std::get<1>(a) != std::get<1>(b)) {
      return std::get<1>(a) < std::get<1>(b);
    }
    return std::get<2>(a) < std::get<2>(b);
  });
  std::vector<bool> t_used(truth.size(), false);
  std::vector<bool> p_used(predicted.size(), false);
  int matched = 0;
  for (const auto& [v, t, p] : pairs) {
    if (!t_used[t] && !p_used[p]) {
      t_used[t] = true;
      p_used[p] = true;
      ++matched;
    }
  }
  return matched;
}

double retrieval_rate(const std::vector<std::vector<Window>>& predicted,
                      const std::vector<std::vector<Window>>& truth,
                      double iou_min) {
  if (predicted.size() != truth.size()) {
    throw ShapeError("per-image window lists must align");
  }
  std::size_t total = 0;
  std::size_t matched = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    total += truth[i].size();
    matched += static_cast<std::size_t>(
        matched_windows(predicted[i], truth[i], iou_min));
  }
  if (total == 0) {
    return 1.0;
  }
  return static_cast<double>(matched) / static_cast<double>(total);
}

}  // namespace convreg
