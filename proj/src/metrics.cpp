#include "convreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "convreg/errors.hpp"
#include "convreg/rng.hpp"

namespace convreg {

namespace {

void require_single_channel(const Tensor& map) {
  if (map.channels() != 1) {
    throw ShapeError("metrics expect a single-channel map");
  }
}

void validate_fixations(const Tensor& map, const FixationSet& fixations) {
  if (fixations.points.empty()) {
    throw InputError("fixation set is empty");
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& [x, y] : fixations.points) {
    if (x < 0 || x >= map.width() || y < 0 || y >= map.height()) {
      throw InputError("fixation outside map bounds");
    }
    if (!seen.insert({x, y}).second) {
      throw InputError("duplicate fixation");
    }
  }
}

// Mann-Whitney AUC via tie-averaged ranks.
double rank_auc(std::vector<std::pair<double, bool>>& scored,
                std::size_t n_pos, std::size_t n_neg) {
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < scored.size()) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) {
      ++j;
    }
    // 1-based ranks i+1 .. j averaged over the tie group
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + j);
    for (std::size_t k = i; k < j; ++k) {
      if (scored[k].second) {
        rank_sum_pos += avg_rank;
      }
    }
    i = j;
  }
  const double p = static_cast<double>(n_pos);
  const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

}  // namespace

double auc(const Tensor& map, const FixationSet& fixations) {
  require_single_channel(map);
  validate_fixations(map, fixations);
  const std::size_t cells = map.size();
  const std::size_t n_pos = fixations.points.size();
  if (n_pos >= cells) {
    throw InputError("fixations cover the whole map; no negatives left");
  }
  std::vector<bool> is_fix(cells, false);
  for (const auto& [x, y] : fixations.points) {
    is_fix[static_cast<std::size_t>(y) * map.width() + x] = true;
  }
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(cells);
  const double* v = map.data().data();
  for (std::size_t i = 0; i < cells; ++i) {
    scored.emplace_back(v[i], is_fix[i]);
  }
  return rank_auc(scored, n_pos, cells - n_pos);
}

double sauc(const Tensor& map, const FixationSet& fixations,
            const std::vector<FixationSet>& shuffle_pool, int n_rounds,
            std::uint64_t seed) {
  require_single_channel(map);
  validate_fixations(map, fixations);
  if (n_rounds < 1) {
    throw InputError("sauc needs at least one round");
  }
  std::vector<std::pair<int, int>> pool;
  for (const FixationSet& fs : shuffle_pool) {
    pool.insert(pool.end(), fs.points.begin(), fs.points.end());
  }
  if (pool.empty()) {
    throw InputError("shuffle pool is empty");
  }
  for (const auto& [x, y] : pool) {
    if (x < 0 || x >= map.width() || y < 0 || y >= map.height()) {
      throw InputError("shuffle-pool location outside map bounds");
    }
  }

  const std::size_t n = fixations.points.size();
  std::vector<double> pos(n);
  for (std::size_t i = 0; i < n; ++i) {
    pos[i] = map.at(0, fixations.points[i].second, fixations.points[i].first);
  }

  double total = 0.0;
  std::vector<std::pair<double, bool>> scored;
  for (int round = 0; round < n_rounds; ++round) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(round)));
    scored.clear();
    for (double v : pos) {
      scored.emplace_back(v, true);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& [x, y] = pool[rng.below(pool.size())];
      scored.emplace_back(map.at(0, y, x), false);
    }
    total += rank_auc(scored, n, n);
  }
  return total / n_rounds;
}

FixationSet fixations_from_map(const Tensor& map, double top_fraction) {
  require_single_channel(map);
  if (top_fraction <= 0.0 || top_fraction > 1.0) {
    throw InputError("top_fraction must be in (0, 1]");
  }
  const std::size_t cells = map.size();
  const std::size_t count = static_cast<std::size_t>(
      std::ceil(top_fraction * static_cast<double>(cells)));
  std::vector<std::size_t> order(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    order[i] = i;
  }
  const double* v = map.data().data();
  std::stable_sort(order.begin(), order.end(),
                   [v](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  FixationSet out;
  out.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int y = static_cast<int>(order[i] / map.width());
    const int x = static_cast<int>(order[i] % map.width());
    out.points.emplace_back(x, y);
  }
  return out;
}

}  // namespace convreg
