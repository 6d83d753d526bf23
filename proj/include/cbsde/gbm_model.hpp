#pragma once

#include <Eigen/Dense>

namespace cbsde {

/// Risk-neutral multi-asset geometric Brownian motion
///   dX = diag(X) ((r 1 - q) dt + Sigma dW),  d<W^i, W^k> = rho_ik dt.
struct GbmModel {
  double rate = 0.0;
  Eigen::VectorXd dividends;
  Eigen::MatrixXd vol;
  Eigen::MatrixXd correlation;
  Eigen::VectorXd spot;

  int dim() const { return static_cast<int>(spot.size()); }

  /// d assets with identical dividend, diagonal vol, spot and rho = I.
  static GbmModel uniform(int dim, double rate, double dividend, double sigma, double spot);

  /// Throws on inconsistent shapes, non-positive spots, negative vol entries
  /// or a correlation matrix that is not symmetric with unit diagonal.
  void validate() const;

  bool has_diagonal_vol() const;

  /// Lower Cholesky factor of the correlation; CholeskyFailure if not PD.
  Eigen::MatrixXd correlation_factor() const;

  /// Instantaneous log-variance rates (Sigma rho Sigma^T)_kk.
  Eigen::VectorXd log_variance_rates() const;
};

}  // namespace cbsde
