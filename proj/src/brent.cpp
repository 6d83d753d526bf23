#include "cbsde/brent.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "cbsde/errors.hpp"

namespace cbsde {

double brent_root(const std::function<double(double)>& f, double lo, double hi, double x_tol,
                  double f_tol, int max_iterations) {
  double a = lo;
  double b = hi;
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (!std::isfinite(fa) || !std::isfinite(fb) || (fa > 0.0) == (fb > 0.0)) {
    throw Error(ErrorCode::NoSignChange, "function values at the bracket ends share a sign");
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  double c = a;
  double fc = fa;
  double d = b - a;
  double e = d;
  for (int iter = 0; iter < max_iterations; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * eps * std::abs(b) + 0.5 * x_tol;
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || std::abs(fb) <= f_tol || fb == 0.0) return b;

    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      // Inverse quadratic interpolation, or secant when only two points are distinct.
      double p;
      double q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
        q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) {
        q = -q;
      } else {
        p = -p;
      }
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol ? d : (m > 0.0 ? tol : -tol);
    fb = f(b);
  }
  throw Error(ErrorCode::MaxIterations, "Brent iteration limit reached");
}

double brent_root_expanding(const std::function<double(double)>& f, double lo, double hi,
                            double x_tol, int expansions, double growth) {
  double flo = f(lo);
  double fhi = f(hi);
  for (int i = 0; i < expansions && (flo > 0.0) == (fhi > 0.0) && flo != 0.0 && fhi != 0.0;
       ++i) {
    lo /= growth;
    hi *= growth;
    flo = f(lo);
    fhi = f(hi);
  }
  if (flo != 0.0 && fhi != 0.0 && (flo > 0.0) == (fhi > 0.0)) {
    throw Error(ErrorCode::BracketFailure, "no sign change found while expanding the bracket");
  }
  return brent_root(f, lo, hi, x_tol);
}

}  // namespace cbsde
