#pragma once

#include <functional>

namespace cbsde {

/// Brent's bracketing root finder. Requires f(lo) * f(hi) <= 0; returns once
/// |f(x)| <= f_tol or the bracket is narrower than x_tol. NoSignChange if the
/// bracket is invalid, MaxIterations after max_iterations steps.
double brent_root(const std::function<double(double)>& f, double lo, double hi, double x_tol,
                  double f_tol = 0.0, int max_iterations = 200);

/// Brent with a multiplicative bracket search: grows `hi` by `growth` (and
/// shrinks `lo` by it) until a sign change appears; BracketFailure if none
/// shows up within `expansions` rounds.
double brent_root_expanding(const std::function<double(double)>& f, double lo, double hi,
                            double x_tol, int expansions = 20, double growth = 10.0);

}  // namespace cbsde
