#pragma once

#include <functional>

namespace rfit {

struct BrentResult {
  double argmax = 0.0;
  double value = 0.0;
  int iterations = 0;
  /// False when max_iter was reached before the tolerance test passed; the
  /// best point seen so far is still returned.
  bool converged = true;
};

/// Maximizes f on [lo, hi] with Brent's derivative-free method (golden-section
/// steps mixed with successive parabolic interpolation), single start.  The
/// stopping rule is the classic one: the bracket half-width around the best
/// point falls below 2*(sqrt(eps)*|x| + tol/3).
BrentResult brent_maximize(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-4,
                           int max_iter = 100);

}  // namespace rfit
