#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cbsde/gbm_model.hpp"

namespace cbsde {

/// One-dimensional GBM followed by the geometric mean of the assets.
struct BasketReduction {
  double spot = 0.0;
  double rate = 0.0;
  double dividend = 0.0;
  double sigma = 0.0;
  int dim = 1;
};

/// NonDiagonalSigma unless the vol matrix is diagonal.
BasketReduction reduce_geobasket(const GbmModel& model);

struct TreeConfig {
  int steps = 10000;
  /// Exercise dates in (0, T]; the last one is the maturity.
  std::vector<double> exercise_dates;
};

struct BermudanTreeResult {
  double price = 0.0;
  /// Sensitivity to the geometric mean, from the first tree layer.
  double delta_hat = 0.0;
  /// Tree layer each exercise date was mapped to.
  std::vector<int> exercise_layers;
};

/// Nearest-layer mapping of dates onto a tree with `steps` layers over
/// [0, dates.back()]. DateMappingCollision if two dates share a layer or a
/// date lands on the root.
std::vector<int> map_exercise_layers(const std::vector<double>& dates, int steps);

/// CRR binomial tree for a put on the reduced asset, exercisable at the
/// configured dates.
BermudanTreeResult binomial_bermudan_put(const BasketReduction& reduction, double strike,
                                         const TreeConfig& cfg);

/// Per-asset deltas of a geometric-basket option: delta_hat * xhat / (d x_i).
Eigen::VectorXd basket_asset_deltas(const BasketReduction& reduction,
                                    const Eigen::VectorXd& spots, double delta_hat);

}  // namespace cbsde
