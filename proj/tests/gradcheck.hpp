#pragma once

// Central-difference gradient checking for the clustering losses, run in
// double precision.

#include <functional>

#include "promptseg/cluster.hpp"

namespace promptseg::testing {

struct GradCheckResult {
  double worst_rel = 0.0;
  bool ok = true;
};

// Compares an analytic gradient against central finite differences,
// elementwise relative error capped at `tol`.
inline GradCheckResult gradcheck(const Grid3<double>& base,
                                 const std::function<double(const Grid3<double>&)>& loss,
                                 const Grid3<double>& analytic, double tol = 1e-4,
                                 double eps = 1e-6) {
  GradCheckResult result;
  Grid3<double> probe = base;
  for (size_t i = 0; i < base.data.size(); ++i) {
    const double x = base.data[i];
    const double h = std::max(eps, eps * std::abs(x));
    probe.data[i] = x + h;
    const double up = loss(probe);
    probe.data[i] = x - h;
    const double down = loss(probe);
    probe.data[i] = x;
    const double fd = (up - down) / (2 * h);
    const double a = analytic.data[i];
    // |a - fd| below the difference-quotient noise floor (loss is O(1)
    // in double, h ~ 1e-6) is numerical fuzz, not a gradient defect.
    if (std::abs(a - fd) < 1e-7) continue;
    const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
    const double rel = std::abs(a - fd) / denom;
    result.worst_rel = std::max(result.worst_rel, rel);
    if (rel > tol) result.ok = false;
  }
  return result;
}

inline Grid3<double> random_logits(int q, int h, int w, uint64_t seed) {
  Grid3<double> g(q, h, w);
  Rng rng(seed);
  for (double& v : g.data) v = rng.uniform(-2.0, 2.0);
  return g;
}

}  // namespace promptseg::testing
