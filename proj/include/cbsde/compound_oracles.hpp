#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cbsde/normal.hpp"
#include "cbsde/payoff.hpp"

namespace cbsde {

struct CompoundQuote {
  double price = 0.0;
  double delta = 0.0;
  /// K_1*, ..., K_M* (the last equals K_M).
  std::vector<double> critical_levels;
  /// Leading blocks P^(1), ..., P^(M) of the time correlation matrix.
  std::vector<Eigen::MatrixXd> correlations;
};

/// Underlying level at T1 where the inner option (strike K2, expiry T2) is
/// worth exactly K1. For K1 = 0 returns 0 for an inner call and +inf for an
/// inner put. BracketFailure if no level exists.
double geske_critical_level(OptionKind inner, double outer_strike, double inner_strike,
                            double outer_maturity, double inner_maturity, double rate,
                            double dividend, double sigma);

/// Closed-form value and delta of an option on an option (Geske).
CompoundQuote geske_quote(OptionKind outer, OptionKind inner, double t, double x,
                          double outer_strike, double inner_strike, double outer_maturity,
                          double inner_maturity, double rate, double dividend, double sigma);

/// As geske_quote with a precomputed critical level.
CompoundQuote geske_quote_at_level(OptionKind outer, OptionKind inner, double t, double x,
                                   double outer_strike, double inner_strike,
                                   double outer_maturity, double inner_maturity, double rate,
                                   double dividend, double sigma, double critical_level);

/// Critical levels K_1*, ..., K_M* of an M-fold call-on-call chain. They do
/// not depend on the valuation time.
std::vector<double> mfold_critical_levels(std::span<const double> strikes,
                                          std::span<const double> times, double rate,
                                          double dividend, double sigma,
                                          const NormalCdfConfig& cfg = {});

struct MfoldValue {
  double price = 0.0;
  /// Lattice size used by the largest-dimensional CDF (0 when m <= 2).
  int points = 0;
};

/// M-fold price at time t < T_1 given the critical levels.
MfoldValue mfold_price(double t, double x, std::span<const double> strikes,
                       std::span<const double> times, std::span<const double> levels,
                       double rate, double dividend, double sigma,
                       const NormalCdfConfig& cfg = {});

/// M-fold compound call price, central-difference delta (step 1e-4 x) and
/// critical levels. RecursionDepth for M > 10.
CompoundQuote mfold_quote(double t, double x, std::span<const double> strikes,
                          std::span<const double> times, double rate, double dividend,
                          double sigma, const NormalCdfConfig& cfg = {});

/// P_il = sqrt((T_i - t) / (T_l - t)) for i <= l.
Eigen::MatrixXd mfold_correlation(double t, std::span<const double> times);

}  // namespace cbsde
