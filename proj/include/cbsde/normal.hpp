#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace cbsde {

double norm_pdf(double x);

/// Standard normal CDF via erfc; absolute error at machine precision.
double norm_cdf(double x);

/// Inverse standard normal CDF for p in (0, 1).
double norm_quantile(double p);

/// P(X <= a, Y <= b) for standard normals with correlation rho.
/// Infinite limits are allowed. InvalidCorrelation if |rho| > 1.
double binorm_cdf(double a, double b, double rho);

struct NormalCdfConfig {
  double tolerance = 1e-7;
  /// Budget across all randomizations.
  int max_points = 200000;
  /// Starting budget. Setting min_points = max_points pins the lattice, which
  /// makes the estimate a smooth function of the limits.
  int min_points = 0;
  int shifts = 10;
  std::uint64_t seed = 0x5eed;
};

struct MvnEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int points = 0;
};

/// P(X_1 <= u_1, ..., X_m <= u_m) for X ~ N(0, corr).
///
/// Separation-of-variables transform integrated with randomly shifted
/// rank-1 lattice rules; the point count grows until the standard error
/// across shifts drops below the tolerance. Deterministic in cfg.seed.
/// m <= 2 is answered by the closed-form routines.
MvnEstimate mvn_cdf_estimate(const Eigen::VectorXd& upper, const Eigen::MatrixXd& corr,
                             const NormalCdfConfig& cfg = {});

/// Estimates of every leading marginal P(X_1 <= u_1, ..., X_k <= u_k),
/// k = 1..m, from one shared set of lattice points.
std::vector<MvnEstimate> mvn_cdf_prefixes(const Eigen::VectorXd& upper,
                                          const Eigen::MatrixXd& corr,
                                          const NormalCdfConfig& cfg = {});

/// As mvn_cdf_estimate, throwing ToleranceNotReached when the budget runs out.
double mvn_cdf(const Eigen::VectorXd& upper, const Eigen::MatrixXd& corr,
               const NormalCdfConfig& cfg = {});

}  // namespace cbsde
