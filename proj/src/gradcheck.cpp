#include "convreg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "convreg/errors.hpp"
#include "convreg/rng.hpp"

namespace convreg {

std::vector<double> numeric_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double eps) {
  std::vector<double> grad(x.size());
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double hi = f(probe);
    probe[i] = x[i] - eps;
    const double lo = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw InputError("objective not finite near probe index " +
                       std::to_string(i));
    }
    grad[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

GradGroupReport compare_group(const std::string& name,
                              const double* analytic, const double* numeric,
                              std::size_t count, double tol) {
  GradGroupReport g;
  g.name = name;
  for (std::size_t i = 0; i < count; ++i) {
    const double e = relative_error(analytic[i], numeric[i]);
    if (e > g.max_rel_error) {
      g.max_rel_error = e;
      g.worst_index = i;
    }
  }
  g.pass = g.max_rel_error < tol;
  return g;
}

}  // namespace

GradReport check_network(const NetworkSpec& spec, int height, int width,
                         std::uint64_t seed, double tol) {
  Network net(spec, seed);

  Rng rng(mix_seed(seed, 0x67636b));  // independent of the init stream
  Tensor image(spec.input_channels, height, width);
  for (double& v : image.data()) {
    v = rng.uniform01();
  }
  const int f = spec.target_factor;
  if (height % f != 0 || width % f != 0) {
    throw ConfigError("input size must be divisible by the network factor");
  }
  Tensor target(1, height / f, width / f);
  for (double& v : target.data()) {
    v = rng.uniform(0.1, 0.9);
  }
  Tensor mask(1, height / f, width / f);
  for (double& v : mask.data()) {
    v = rng.uniform01() < 0.75 ? 1.0 : 0.0;
  }
  mask.at(0, 0, 0) = 1.0;  // at least one active cell

  const LossConfig cfg{1e-4};

  ForwardResult fwd = net.forward(image);
  LossAndGrad lg = loss_and_grad(fwd.map, target, mask);
  BackwardResult analytic = net.backward(fwd.cache, lg.d_map, cfg);

  // scratch copy so probes never touch the reporting network
  Network probe_net = net;
  auto objective_at = [&](const std::vector<double>& p) {
    probe_net.unflatten_params(p);
    const ForwardResult r = probe_net.forward(image);
    const LossAndGrad l = loss_and_grad(r.map, target, mask);
    double sq = 0.0;
    for (double v : p) {
      sq += v * v;
    }
    return l.loss + 0.5 * cfg.lambda * sq;
  };
  const std::vector<double> params = net.flatten_params();
  const std::vector<double> numeric_params =
      numeric_gradient(objective_at, params);

  auto objective_at_image = [&](const std::vector<double>& px) {
    const Tensor img =
        Tensor::from_data(image.channels(), image.height(), image.width(), px);
    const ForwardResult r = net.forward(img);
    return loss_and_grad(r.map, target, mask).loss;
  };
  const std::vector<double> numeric_input =
      numeric_gradient(objective_at_image, image.data());

  GradReport report;
  report.tolerance = tol;
  std::size_t at = 0;
  for (std::size_t b = 0; b < net.banks().size(); ++b) {
    const FilterBank& bank = net.banks()[b];
    report.groups.push_back(compare_group(
        "block" + std::to_string(b) + ".weights", analytic.param_grad.data() + at,
        numeric_params.data() + at, bank.weights.size(), tol));
    at += bank.weights.size();
    report.groups.push_back(compare_group(
        "block" + std::to_string(b) + ".biases", analytic.param_grad.data() + at,
        numeric_params.data() + at, bank.biases.size(), tol));
    at += bank.biases.size();
  }
  if (spec.combiner == CombinerMode::kLinear) {
    const std::size_t nw = net.combiner().weights.size();
    report.groups.push_back(compare_group(
        "combiner.weights", analytic.param_grad.data() + at,
        numeric_params.data() + at, nw, tol));
    at += nw;
    report.groups.push_back(compare_group("combiner.bias",
                                          analytic.param_grad.data() + at,
                                          numeric_params.data() + at, 1, tol));
  }
  report.groups.push_back(compare_group("input", analytic.input_grad.data().data(),
                                        numeric_input.data(),
                                        analytic.input_grad.size(), tol));
  report.pass = std::all_of(report.groups.begin(), report.groups.end(),
                            [](const GradGroupReport& g) { return g.pass; });
  return report;
}

void print_report(std::ostream& os, const GradReport& report) {
  os << std::left << std::setw(22) << "group" << std::right << std::setw(14)
     << "max_rel_err" << std::setw(12) << "worst_idx" << std::setw(8)
     << "status" << '\n';
  for (const GradGroupReport& g : report.groups) {
    os << std::left << std::setw(22) << g.name << std::right << std::setw(14)
       << std::scientific << std::setprecision(3) << g.max_rel_error
       << std::setw(12) << g.worst_index << std::setw(8)
       << (g.pass ? "ok" : "FAIL") << '\n';
  }
  os << (report.pass ? "PASS" : "FAIL") << " (tolerance "
     << report.tolerance << ")\n";
}

}  // namespace convreg
