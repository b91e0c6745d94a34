#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "convreg/network.hpp"

namespace convreg {

// Central differences (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps).
std::vector<double> numeric_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double eps = 1e-5);

// |ga - gn| / max(1e-8, |ga| + |gn|)
double relative_error(double analytic, double numeric);

struct GradGroupReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool pass = false;
};

struct GradReport {
  std::vector<GradGroupReport> groups;
  double tolerance = 0.0;
  bool pass = false;
};

// Compares the analytic objective gradient (masked loss + L2 penalty)
// against central differences over every parameter and every input pixel,
// on a seeded random image / target / mask. Meant for toy-sized specs.
GradReport check_network(const NetworkSpec& spec, int height, int width,
                         std::uint64_t seed, double tol = 1e-6);

void print_report(std::ostream& os, const GradReport& report);

}  // namespace convreg
