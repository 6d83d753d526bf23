#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cbsde/basket.hpp"
#include "cbsde/black_scholes.hpp"
#include "cbsde/compound_oracles.hpp"
#include "cbsde/harness.hpp"
#include "cbsde/normal.hpp"
#include "cbsde/rng.hpp"

namespace cbsde {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void add(std::vector<CheckResult>& out, std::string name, double value, double tolerance,
         std::string detail = {}) {
  out.push_back({std::move(name), value, tolerance, value <= tolerance, std::move(detail)});
}

// Published reference columns.
constexpr double kGeskePrice[4] = {0.224, 0.120, 0.430, 0.492};
constexpr double kGeskeDelta[4] = {0.291, -0.168, -0.272, 0.269};
constexpr double kMfoldPrice[4] = {3.088, 2.174, 1.315, 0.640};
constexpr double kMfoldDelta[4] = {1.000, 0.998, 0.942, 0.707};
constexpr int kBermudanDims[3] = {1, 5, 20};
constexpr double kBermudanPrice[3] = {3.071, 1.745, 1.223};
constexpr double kBermudanDelta[3] = {-0.510, -0.121, -0.036};

const std::vector<double> kExerciseDates{0.1, 0.2, 0.3, 0.4, 0.5};

void geske_table(std::vector<CheckResult>& out) {
  const OptionKind kinds[4][2] = {{OptionKind::Call, OptionKind::Call},
                                  {OptionKind::Call, OptionKind::Put},
                                  {OptionKind::Put, OptionKind::Call},
                                  {OptionKind::Put, OptionKind::Put}};
  const auto start = Clock::now();
  double worst_price = 0.0;
  double worst_delta = 0.0;
  std::string detail;
  for (int i = 0; i < 4; ++i) {
    const CompoundQuote q =
        geske_quote(kinds[i][0], kinds[i][1], 0.0, 14.0, 1.0, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2);
    worst_price = std::max(worst_price, std::abs(q.price - kGeskePrice[i]));
    worst_delta = std::max(worst_delta, std::abs(q.delta - kGeskeDelta[i]));
    detail += to_string(kinds[i][0]) + "_on_" + to_string(kinds[i][1]) + " " + num(q.price) +
              "/" + num(q.delta) + " ";
  }
  const double elapsed = seconds_since(start);
  add(out, "geske table prices", worst_price, 1e-3, detail);
  add(out, "geske table deltas", worst_delta, 1e-3);
  add(out, "geske table runtime [s]", elapsed, 1.0);
}

void mfold_table(std::vector<CheckResult>& out) {
  const auto start = Clock::now();
  double worst_price = 0.0;
  double worst_delta = 0.0;
  std::string detail;
  for (int m = 2; m <= 5; ++m) {
    std::vector<double> strikes(m, 1.0);
    std::vector<double> times(m);
    for (int j = 0; j < m; ++j) times[j] = j + 1.0;
    const CompoundQuote q = mfold_quote(0.0, 5.0, strikes, times, 0.03, 0.0, 0.2);
    worst_price = std::max(worst_price, std::abs(q.price - kMfoldPrice[m - 2]));
    worst_delta = std::max(worst_delta, std::abs(q.delta - kMfoldDelta[m - 2]));
    detail += "M=" + std::to_string(m) + " " + num(q.price) + "/" + num(q.delta) + " ";
  }
  const double elapsed = seconds_since(start);
  add(out, "mfold table prices", worst_price, 2e-3, detail);
  add(out, "mfold table deltas", worst_delta, 2e-3);
  add(out, "mfold table runtime [s]", elapsed, 5.0);
}

void bermudan_table(std::vector<CheckResult>& out) {
  const auto start = Clock::now();
  double worst_price = 0.0;
  double worst_delta = 0.0;
  std::string detail;
  for (int i = 0; i < 3; ++i) {
    const GbmModel model = GbmModel::uniform(kBermudanDims[i], 0.02, 0.0, 0.2, 49.0);
    const BasketReduction red = reduce_geobasket(model);
    const BermudanTreeResult r = binomial_bermudan_put(red, 50.0, {10000, kExerciseDates});
    const Eigen::VectorXd deltas = basket_asset_deltas(red, model.spot, r.delta_hat);
    worst_price = std::max(worst_price, std::abs(r.price - kBermudanPrice[i]));
    worst_delta = std::max(worst_delta, (deltas.array() - kBermudanDelta[i]).abs().maxCoeff());
    detail += "d=" + std::to_string(kBermudanDims[i]) + " " + num(r.price) + "/" +
              num(deltas[0]) + " ";
  }
  const double elapsed = seconds_since(start);
  add(out, "bermudan table prices", worst_price, 5e-3, detail);
  add(out, "bermudan table deltas", worst_delta, 2e-3);
  add(out, "bermudan table runtime [s]", elapsed, 10.0);
}

void identities(std::vector<CheckResult>& out) {
  // Put-call parity, plain and compound.
  double parity = 0.0;
  const double spots[] = {8.0, 12.0, 14.0, 17.0, 25.0};
  for (double x : spots) {
    const double c = bs_price_delta(OptionKind::Call, 0.1, x, 14.0, 0.6, 0.03, 0.01, 0.25).price;
    const double p = bs_price_delta(OptionKind::Put, 0.1, x, 14.0, 0.6, 0.03, 0.01, 0.25).price;
    parity = std::max(parity, std::abs(c - p - (x * std::exp(-0.01 * 0.5) -
                                                14.0 * std::exp(-0.03 * 0.5))));
    for (OptionKind inner : {OptionKind::Call, OptionKind::Put}) {
      const double co =
          geske_quote(OptionKind::Call, inner, 0.0, x, 1.0, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2).price;
      const double po =
          geske_quote(OptionKind::Put, inner, 0.0, x, 1.0, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2).price;
      const double v = bs_price_delta(inner, 0.0, x, 14.0, 0.4, 0.03, 0.0, 0.2).price;
      parity = std::max(parity, std::abs(co - po - (v - std::exp(-0.03 * 0.2))));
    }
  }
  add(out, "put-call parity", parity, 1e-10);

  // Zero outer strike collapses to the inner Black-Scholes value.
  double collapse = 0.0;
  for (double x : spots) {
    for (OptionKind inner : {OptionKind::Call, OptionKind::Put}) {
      const CompoundQuote q =
          geske_quote(OptionKind::Call, inner, 0.0, x, 0.0, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2);
      const PriceDelta v = bs_price_delta(inner, 0.0, x, 14.0, 0.4, 0.03, 0.0, 0.2);
      collapse = std::max({collapse, std::abs(q.price - v.price), std::abs(q.delta - v.delta)});
    }
  }
  add(out, "geske K1=0 collapse", collapse, 1e-8);

  double single = 0.0;
  for (double x : spots) {
    const double strikes[] = {11.0};
    const double times[] = {0.7};
    const CompoundQuote q = mfold_quote(0.0, x, strikes, times, 0.03, 0.0, 0.2);
    const PriceDelta v = bs_price_delta(OptionKind::Call, 0.0, x, 11.0, 0.7, 0.03, 0.0, 0.2);
    single = std::max(single, std::abs(q.price - v.price));
  }
  add(out, "mfold M=1 collapse", single, 1e-8);

  // Lattice integration in three dimensions with the third limit far in the
  // tail against the closed-form bivariate CDF.
  Rng rng(20240601);
  NormalCdfConfig cfg;
  cfg.tolerance = 1e-8;
  cfg.max_points = 2000000;
  double mvn = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double a = -2.5 + 5.0 * rng.uniform();
    const double b = -2.5 + 5.0 * rng.uniform();
    const double r12 = -0.9 + 1.8 * rng.uniform();
    const double r13 = -0.5 + rng.uniform();
    const double r23 = -0.5 + rng.uniform();
    Eigen::Matrix3d corr;
    corr << 1.0, r12, r13, r12, 1.0, r23, r13, r23, 1.0;
    if (corr.llt().info() != Eigen::Success) {
      --k;
      continue;
    }
    const double lattice = mvn_cdf_estimate(Eigen::Vector3d(a, b, 9.0), corr, cfg).value;
    mvn = std::max(mvn, std::abs(lattice - binorm_cdf(a, b, r12)));
  }
  add(out, "mvn_cdf vs binorm_cdf", mvn, 1e-6);

  // Critical levels solve their defining equation.
  double residual = 0.0;
  for (OptionKind inner : {OptionKind::Call, OptionKind::Put}) {
    const double level = geske_critical_level(inner, 1.0, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2);
    const double v = bs_price_delta(inner, 0.2, level, 14.0, 0.4, 0.03, 0.0, 0.2).price;
    residual = std::max(residual, std::abs(v - 1.0) / 1.0);
  }
  for (int m = 2; m <= 3; ++m) {
    std::vector<double> strikes(m, 1.0);
    std::vector<double> times(m);
    for (int j = 0; j < m; ++j) times[j] = j + 1.0;
    const std::vector<double> levels = mfold_critical_levels(strikes, times, 0.03, 0.0, 0.2);
    const std::span<const double> s(strikes), t(times), l(levels);
    const double v =
        mfold_price(times[0], levels[0], s.subspan(1), t.subspan(1), l.subspan(1), 0.03, 0.0, 0.2)
            .price;
    residual = std::max(residual, std::abs(v - strikes[0]) / strikes[0]);
  }
  add(out, "critical level residual / K", residual, 1e-8);

  // Early exercise is worth at least the European value, and a tree with only
  // the final date reproduces Black-Scholes.
  double dominance = 0.0;
  double european = 0.0;
  for (int d : kBermudanDims) {
    const BasketReduction red = reduce_geobasket(GbmModel::uniform(d, 0.02, 0.0, 0.2, 49.0));
    const double berm = binomial_bermudan_put(red, 50.0, {10000, kExerciseDates}).price;
    const double euro = binomial_bermudan_put(red, 50.0, {10000, {0.5}}).price;
    const double bs =
        bs_price_delta(OptionKind::Put, 0.0, red.spot, 50.0, 0.5, red.rate, red.dividend,
                       red.sigma)
            .price;
    dominance = std::max(dominance, euro - berm);
    european = std::max(european, std::abs(euro - bs) / bs);
  }
  add(out, "european minus bermudan (<= 0)", dominance, 0.0);
  add(out, "european tree vs black-scholes (rel)", european, 2e-3);
}

}  // namespace

std::vector<CheckResult> oracle_self_test() {
  std::vector<CheckResult> out;
  geske_table(out);
  mfold_table(out);
  bermudan_table(out);
  identities(out);
  return out;
}

}  // namespace cbsde
