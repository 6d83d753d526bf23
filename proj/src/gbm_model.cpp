#include "cbsde/gbm_model.hpp"

#include <cmath>

#include "cbsde/errors.hpp"

namespace cbsde {

GbmModel GbmModel::uniform(int dim, double rate, double dividend, double sigma, double spot) {
  GbmModel m;
  m.rate = rate;
  m.dividends = Eigen::VectorXd::Constant(dim, dividend);
  m.vol = Eigen::MatrixXd::Identity(dim, dim) * sigma;
  m.correlation = Eigen::MatrixXd::Identity(dim, dim);
  m.spot = Eigen::VectorXd::Constant(dim, spot);
  return m;
}

void GbmModel::validate() const {
  const int d = dim();
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "model dimension must be positive");
  if (dividends.size() != d || vol.rows() != d || vol.cols() != d ||
      correlation.rows() != d || correlation.cols() != d) {
    throw Error(ErrorCode::ShapeMismatch, "model parameter shapes disagree with spot dimension");
  }
  if (!std::isfinite(rate) || !dividends.allFinite() || !vol.allFinite() ||
      !correlation.allFinite() || !spot.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "model parameters must be finite");
  }
  if ((spot.array() <= 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "spot entries must be positive");
  }
  if ((vol.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "volatility entries must be non-negative");
  }
  for (int i = 0; i < d; ++i) {
    if (std::abs(correlation(i, i) - 1.0) > 1e-12) {
      throw Error(ErrorCode::InvalidCorrelation, "correlation diagonal must be 1");
    }
    for (int k = 0; k < i; ++k) {
      if (std::abs(correlation(i, k) - correlation(k, i)) > 1e-12 ||
          std::abs(correlation(i, k)) > 1.0) {
        throw Error(ErrorCode::InvalidCorrelation, "correlation must be symmetric in [-1, 1]");
      }
    }
  }
}

bool GbmModel::has_diagonal_vol() const {
  const Eigen::MatrixXd off = vol - Eigen::MatrixXd(vol.diagonal().asDiagonal());
  return off.cwiseAbs().maxCoeff() == 0.0;
}

Eigen::MatrixXd GbmModel::correlation_factor() const {
  Eigen::LLT<Eigen::MatrixXd> llt(correlation);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::CholeskyFailure, "correlation matrix is not positive definite");
  }
  return llt.matrixL();
}

Eigen::VectorXd GbmModel::log_variance_rates() const {
  return (vol * correlation * vol.transpose()).diagonal();
}

}  // namespace cbsde
