#include "convreg/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <ostream>

#include "convreg/errors.hpp"
#include "convreg/rng.hpp"

namespace convreg {

namespace {

double max_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) {
    m = std::max(m, std::abs(x));
  }
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      return false;
    }
  }
  return true;
}

struct CurvaturePair {
  std::vector<double> s;
  std::vector<double> y;
  double sy = 0.0;
};

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsConfig& cfg) {
  if (cfg.memory < 1 || cfg.gradient_tolerance <= 0.0) {
    throw ConfigError("invalid L-BFGS configuration");
  }
  const std::size_t n = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);

  std::vector<double> grad(n);
  double value = objective(res.x, grad);
  if (!std::isfinite(value) || !all_finite(grad)) {
    throw InputError("objective not finite at the starting point");
  }
  res.trace.push_back({0, value, max_norm(grad), 0.0});

  std::deque<CurvaturePair> pairs;
  std::vector<double> direction(n), x_new(n), grad_new(n), alpha;

  res.status = OptStatus::kMaxIterations;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    if (max_norm(grad) <= cfg.gradient_tolerance) {
      res.status = OptStatus::kConverged;
      break;
    }

    // two-loop recursion; H0 = gamma * I with Nocedal's scaling
    direction = grad;
    alpha.assign(pairs.size(), 0.0);
    for (std::size_t i = pairs.size(); i-- > 0;) {
      alpha[i] = dot(pairs[i].s, direction) / pairs[i].sy;
      for (std::size_t j = 0; j < n; ++j) {
        direction[j] -= alpha[i] * pairs[i].y[j];
      }
    }
    if (!pairs.empty()) {
      const CurvaturePair& last = pairs.back();
      const double gamma = last.sy / dot(last.y, last.y);
      for (double& d : direction) {
        d *= gamma;
      }
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double beta = dot(pairs[i].y, direction) / pairs[i].sy;
      for (std::size_t j = 0; j < n; ++j) {
        direction[j] += (alpha[i] - beta) * pairs[i].s[j];
      }
    }
    for (double& d : direction) {
      d = -d;
    }

    double slope = dot(grad, direction);
    if (slope >= 0.0) {
      // stale curvature; fall back to steepest descent
      pairs.clear();
      for (std::size_t j = 0; j < n; ++j) {
        direction[j] = -grad[j];
      }
      slope = dot(grad, direction);
    }

    // Armijo backtracking
    double step = cfg.initial_step;
    double value_new = 0.0;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h) {
      for (std::size_t j = 0; j < n; ++j) {
        x_new[j] = res.x[j] + step * direction[j];
      }
      value_new = objective(x_new, grad_new);
      if (std::isfinite(value_new) &&
          value_new <= value + cfg.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      res.status = OptStatus::kLineSearchFailed;
      break;
    }

    CurvaturePair pair;
    pair.s.resize(n);
    pair.y.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      pair.s[j] = x_new[j] - res.x[j];
      pair.y[j] = grad_new[j] - grad[j];
    }
    pair.sy = dot(pair.s, pair.y);
    if (pair.sy > 1e-10) {
      pairs.push_back(std::move(pair));
      if (pairs.size() > static_cast<std::size_t>(cfg.memory)) {
        pairs.pop_front();
      }
    }

    res.x.swap(x_new);
    grad.swap(grad_new);
    value = value_new;
    res.trace.push_back({iter, value, max_norm(grad), step});
  }
  if (res.status == OptStatus::kMaxIterations &&
      max_norm(grad) <= cfg.gradient_tolerance) {
    res.status = OptStatus::kConverged;
  }
  res.value = value;
  return res;
}

SgdResult sgd_minimize(const MinibatchObjective& objective, int num_samples,
                       std::vector<double> x0, const SgdConfig& cfg) {
  if (num_samples < 1) {
    throw UsageError("sgd requires a non-empty sample set");
  }
  if (cfg.learning_rate <= 0.0 || cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw ConfigError("invalid SGD configuration");
  }
  SgdResult res;
  res.x = std::move(x0);
  int batch = cfg.batch_size;
  if (batch > num_samples) {
    batch = num_samples;
    res.batch_clamped = true;
  }
  if (batch < 1) {
    throw ConfigError("batch size must be >= 1");
  }

  Rng rng(cfg.shuffle_seed);
  std::vector<int> order(num_samples);
  for (int i = 0; i < num_samples; ++i) {
    order[i] = i;
  }
  std::vector<double> velocity(res.x.size(), 0.0);
  std::vector<double> grad(res.x.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the project RNG; std::shuffle is not
    // platform-stable
    for (int i = num_samples - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
    double epoch_sum = 0.0;
    int batches = 0;
    for (int at = 0; at < num_samples; at += batch) {
      const int count = std::min(batch, num_samples - at);
      const double value = objective(
          std::span<const int>(order.data() + at, static_cast<std::size_t>(count)),
          res.x, grad);
      for (std::size_t j = 0; j < res.x.size(); ++j) {
        velocity[j] = cfg.momentum * velocity[j] - cfg.learning_rate * grad[j];
        res.x[j] += velocity[j];
      }
      epoch_sum += value;
      ++batches;
    }
    res.epoch_loss.push_back(epoch_sum / batches);
  }
  return res;
}

SgdResult sgd_train(Network& net, std::span<const Sample> samples,
                    const SgdConfig& cfg, const LossConfig& loss_cfg) {
  if (samples.empty()) {
    throw UsageError("sgd requires a non-empty sample set");
  }
  std::vector<Sample> scratch;
  auto fn = [&](std::span<const int> idx, const std::vector<double>& x,
                std::vector<double>& grad) {
    net.unflatten_params(x);
    scratch.clear();
    for (int i : idx) {
      scratch.push_back(samples[static_cast<std::size_t>(i)]);
    }
    BatchObjective obj = batch_objective(net, scratch, loss_cfg);
    grad = std::move(obj.grad);
    return obj.value;
  };
  SgdResult res = sgd_minimize(fn, static_cast<int>(samples.size()),
                               net.flatten_params(), cfg);
  net.unflatten_params(res.x);
  return res;
}

void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace) {
  os << std::setprecision(12);
  os << "iteration,objective,grad_max_norm,step\n";
  for (const TraceRow& row : trace) {
    os << row.iteration << ',' << row.objective << ',' << row.grad_max_norm
       << ',' << row.step << '\n';
  }
}

}  // namespace convreg
