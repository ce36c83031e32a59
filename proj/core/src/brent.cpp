#include "rfit/brent.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rfit {

BrentResult brent_maximize(const std::function<double(double)>& f, double lo, double hi, double tol, int max_iter) {
  if (!(lo < hi)) throw std::invalid_argument("brent_maximize: need lo < hi");
  if (!(tol > 0.0)) throw std::invalid_argument("brent_maximize: tol must be positive");

  // Minimize g = -f.
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
  const double tol3 = tol / 3.0;

  double a = lo, b = hi;
  double v = a + golden * (b - a);
  double w = v, x = v;
  double d = 0.0, e = 0.0;
  double fx = -f(x);
  double fv = fx, fw = fx;

  BrentResult res;
  for (;;) {
    const double xm = 0.5 * (a + b);
    const double tol1 = eps * std::fabs(x) + tol3;
    const double t2 = 2.0 * tol1;
    if (std::fabs(x - xm) <= t2 - 0.5 * (b - a)) break;
    if (res.iterations >= max_iter) {
      res.converged = false;
      break;
    }
    ++res.iterations;

    double p = 0.0, q = 0.0, r = 0.0;
    if (std::fabs(e) > tol1) {
      r = (x - w) * (fx - fv);
      q = (x - v) * (fx - fw);
      p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      else q = -q;
      r = e;
      e = d;
    }

    double u;
    if (std::fabs(p) >= std::fabs(0.5 * q * r) || p <= q * (a - x) || p >= q * (b - x)) {
      e = (x < xm) ? b - x : a - x;
      d = golden * e;
    } else {
      d = p / q;
      u = x + d;
      if (u - a < t2 || b - u < t2) d = (x < xm) ? tol1 : -tol1;
    }

    if (std::fabs(d) >= tol1) u = x + d;
    else if (d > 0.0) u = x + tol1;
    else u = x - tol1;

    const double fu = -f(u);
    if (fu <= fx) {
      if (u < x) b = x;
      else a = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x) a = u;
      else b = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  res.argmax = x;
  res.value = -fx;
  return res;
}

}  // namespace rfit
