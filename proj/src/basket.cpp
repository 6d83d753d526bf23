#include "cbsde/basket.hpp"

#include <algorithm>
#include <cmath>

#include "cbsde/errors.hpp"

namespace cbsde {

BasketReduction reduce_geobasket(const GbmModel& model) {
  model.validate();
  if (!model.has_diagonal_vol()) {
    throw Error(ErrorCode::NonDiagonalSigma, "basket reduction needs a diagonal vol matrix");
  }
  const Eigen::VectorXd sig = model.vol.diagonal();
  const double d = model.dim();
  BasketReduction out;
  out.dim = model.dim();
  out.spot = std::exp(model.spot.array().log().sum() / d);
  out.rate = model.rate;
  const double var = sig.dot(model.correlation * sig) / (d * d);
  out.sigma = std::sqrt(std::max(var, 0.0));
  out.dividend =
      (model.dividends.array() + 0.5 * sig.array().square()).sum() / d - 0.5 * var;
  return out;
}

std::vector<int> map_exercise_layers(const std::vector<double>& dates, int steps) {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "tree needs at least one step");
  if (dates.empty()) throw Error(ErrorCode::InvalidArgument, "no exercise dates");
  const double maturity = dates.back();
  if (!(maturity > 0.0)) throw Error(ErrorCode::InvalidTimes, "maturity must be positive");
  const double dt = maturity / steps;
  std::vector<int> layers;
  for (double date : dates) {
    if (!(date > 0.0) || date > maturity) {
      throw Error(ErrorCode::InvalidTimes, "exercise dates must lie in (0, T]");
    }
    const int layer = static_cast<int>(std::lround(date / dt));
    if (layer == 0 || std::find(layers.begin(), layers.end(), layer) != layers.end()) {
      throw Error(ErrorCode::DateMappingCollision,
                  "exercise dates do not map to distinct tree layers");
    }
    layers.push_back(layer);
  }
  return layers;
}

BermudanTreeResult binomial_bermudan_put(const BasketReduction& reduction, double strike,
                                         const TreeConfig& cfg) {
  if (!(strike > 0.0) || !(reduction.spot > 0.0) || !(reduction.sigma > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tree needs positive strike, spot and vol");
  }
  BermudanTreeResult out;
  out.exercise_layers = map_exercise_layers(cfg.exercise_dates, cfg.steps);
  const int n = cfg.steps;
  const double dt = cfg.exercise_dates.back() / n;
  const double u = std::exp(reduction.sigma * std::sqrt(dt));
  const double d = 1.0 / u;
  const double p = (std::exp((reduction.rate - reduction.dividend) * dt) - d) / (u - d);
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "tree probability outside (0, 1); add steps");
  }
  const double disc = std::exp(-reduction.rate * dt);
  const double log_u = std::log(u);

  std::vector<char> exercise(n + 1, 0);
  for (int layer : out.exercise_layers) exercise[layer] = 1;

  auto node = [&](int layer, int i) { return reduction.spot * std::exp((2 * i - layer) * log_u); };
  std::vector<double> v(n + 1);
  for (int i = 0; i <= n; ++i) v[i] = std::max(strike - node(n, i), 0.0);
  double up = 0.0;
  double down = 0.0;
  for (int layer = n - 1; layer >= 0; --layer) {
    for (int i = 0; i <= layer; ++i) v[i] = disc * (p * v[i + 1] + (1.0 - p) * v[i]);
    if (exercise[layer]) {
      for (int i = 0; i <= layer; ++i) v[i] = std::max(v[i], strike - node(layer, i));
    }
    if (layer == 1) {
      down = v[0];
      up = v[1];
    }
  }
  if (n == 1) {
    down = std::max(strike - node(1, 0), 0.0);
    up = std::max(strike - node(1, 1), 0.0);
  }
  out.price = v[0];
  out.delta_hat = (up - down) / (reduction.spot * (u - d));
  return out;
}

Eigen::VectorXd basket_asset_deltas(const BasketReduction& reduction,
                                    const Eigen::VectorXd& spots, double delta_hat) {
  return (delta_hat * reduction.spot / spots.size()) * spots.cwiseInverse();
}

}  // namespace cbsde
