#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "convreg/tensor.hpp"

namespace convreg {

// Fixation locations at map resolution; coordinates must be in bounds and
// free of duplicates.
struct FixationSet {
  std::vector<std::pair<int, int>> points;  // (x, y)
  std::string image_id;
};

// ROC area with fixation cells as positives and every other map cell as a
// negative; ties count 0.5 (Mann-Whitney U).
double auc(const Tensor& map, const FixationSet& fixations);

// Shuffled AUC: negatives are drawn with replacement from other images'
// fixation locations, evaluated on this map; mean over n_rounds, seeded.
double sauc(const Tensor& map, const FixationSet& fixations,
            const std::vector<FixationSet>& shuffle_pool, int n_rounds,
            std::uint64_t seed);

// Top ceil(top_fraction * cells) cells by value, ties broken row-major.
FixationSet fixations_from_map(const Tensor& map, double top_fraction);

}  // namespace convreg
