#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "convreg/network.hpp"

namespace convreg {

struct LbfgsConfig {
  int memory = 10;
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;  // on the gradient max-norm
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_halvings = 40;
  double initial_step = 1.0;
};

enum class OptStatus { kConverged, kMaxIterations, kLineSearchFailed };

struct TraceRow {
  int iteration = 0;
  double objective = 0.0;
  double grad_max_norm = 0.0;
  double step = 0.0;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  OptStatus status = OptStatus::kMaxIterations;
  std::vector<TraceRow> trace;
};

// value = objective(x, grad_out)
using Objective =
    std::function<double(const std::vector<double>&, std::vector<double>&)>;

// Limited-memory BFGS with two-loop recursion and Armijo backtracking.
// Curvature pairs with s'y <= 1e-10 are dropped. Accepted iterates have
// strictly decreasing objective values.
LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsConfig& cfg);

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 1;
  int batch_size = 1;
  std::uint64_t shuffle_seed = 0;
};

struct SgdResult {
  std::vector<double> x;
  std::vector<double> epoch_loss;  // mean minibatch objective per epoch
  bool batch_clamped = false;      // batch_size exceeded the dataset size
};

// value = objective(minibatch sample indices, x, grad_out)
using MinibatchObjective = std::function<double(
    std::span<const int>, const std::vector<double>&, std::vector<double>&)>;

// Momentum SGD over shuffled minibatches: v <- mu*v - eta*g, x <- x + v.
// Deterministic given the shuffle seed.
SgdResult sgd_minimize(const MinibatchObjective& objective, int num_samples,
                       std::vector<double> x0, const SgdConfig& cfg);

// Convenience wrapper training a network in place on prepared samples.
SgdResult sgd_train(Network& net, std::span<const Sample> samples,
                    const SgdConfig& cfg, const LossConfig& loss_cfg);

void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace);

}  // namespace convreg
