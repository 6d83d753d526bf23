#include "cbsde/compound_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbsde/black_scholes.hpp"
#include "cbsde/brent.hpp"
#include "cbsde/errors.hpp"

namespace cbsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxFold = 10;

void check_market(double x, double rate, double dividend, double sigma) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw Error(ErrorCode::InvalidArgument, "spot must be positive and finite");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(rate) ||
      !std::isfinite(dividend)) {
    throw Error(ErrorCode::InvalidArgument, "volatility must be positive; rates finite");
  }
}

// Standardized log-moneyness (ln(x/K) + drift tau) / (sigma sqrt(tau)) with
// the K = 0 and K = inf limits.
double moneyness(double x, double level, double drift, double tau, double sigma) {
  if (level == 0.0) return kInf;
  if (level == kInf) return -kInf;
  return (std::log(x / level) + drift * tau) / (sigma * std::sqrt(tau));
}

NormalCdfConfig pinned(NormalCdfConfig cfg, int points) {
  if (points > 0) {
    cfg.min_points = points;
    cfg.max_points = points;
  }
  return cfg;
}

}  // namespace

double geske_critical_level(OptionKind inner, double outer_strike, double inner_strike,
                            double outer_maturity, double inner_maturity, double rate,
                            double dividend, double sigma) {
  if (!(outer_strike >= 0.0) || !(inner_strike > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "compound strikes must be K1 >= 0, K2 > 0");
  }
  if (outer_strike == 0.0) return inner == OptionKind::Call ? 0.0 : kInf;
  auto residual = [&](double s) {
    return bs_price_delta(inner, outer_maturity, s, inner_strike, inner_maturity, rate, dividend,
                          sigma)
               .price -
           outer_strike;
  };
  return brent_root_expanding(residual, 1e-8 * inner_strike, 1e3 * inner_strike,
                              1e-13 * inner_strike);
}

CompoundQuote geske_quote_at_level(OptionKind outer, OptionKind inner, double t, double x,
                                   double outer_strike, double inner_strike,
                                   double outer_maturity, double inner_maturity, double rate,
                                   double dividend, double sigma, double critical_level) {
  check_market(x, rate, dividend, sigma);
  if (!(t >= 0.0) || !(outer_maturity > t) || !(inner_maturity > outer_maturity)) {
    throw Error(ErrorCode::InvalidTimes, "compound option needs 0 <= t < T1 < T2");
  }
  const double tau1 = outer_maturity - t;
  const double tau2 = inner_maturity - t;
  const double drift = rate - dividend + 0.5 * sigma * sigma;
  const double a1 = moneyness(x, critical_level, drift, tau1, sigma);
  const double a2 = a1 - sigma * std::sqrt(tau1);
  const double b1 = moneyness(x, inner_strike, drift, tau2, sigma);
  const double b2 = b1 - sigma * std::sqrt(tau2);
  const double rho = std::sqrt(tau1 / tau2);

  const double carry = std::exp(-dividend * tau2);
  const double eq = x * carry;
  const double k2 = inner_strike * std::exp(-rate * tau2);
  const double k1 = outer_strike * std::exp(-rate * tau1);

  CompoundQuote quote;
  const bool outer_call = outer == OptionKind::Call;
  if (inner == OptionKind::Call) {
    if (outer_call) {
      const double m1 = binorm_cdf(a1, b1, rho);
      quote.price = eq * m1 - k2 * binorm_cdf(a2, b2, rho) - k1 * norm_cdf(a2);
      quote.delta = carry * m1;
    } else {
      const double m1 = binorm_cdf(-a1, b1, -rho);
      quote.price = k2 * binorm_cdf(-a2, b2, -rho) - eq * m1 + k1 * norm_cdf(-a2);
      quote.delta = -carry * m1;
    }
  } else {
    if (outer_call) {
      const double m1 = binorm_cdf(-a1, -b1, rho);
      quote.price = k2 * binorm_cdf(-a2, -b2, rho) - eq * m1 - k1 * norm_cdf(-a2);
      quote.delta = -carry * m1;
    } else {
      const double m1 = binorm_cdf(a1, -b1, -rho);
      quote.price = eq * m1 - k2 * binorm_cdf(a2, -b2, -rho) + k1 * norm_cdf(a2);
      quote.delta = carry * m1;
    }
  }
  quote.critical_levels = {critical_level, inner_strike};
  const std::vector<double> times{outer_maturity, inner_maturity};
  const Eigen::MatrixXd corr = mfold_correlation(t, times);
  quote.correlations = {corr.topLeftCorner(1, 1), corr};
  return quote;
}

CompoundQuote geske_quote(OptionKind outer, OptionKind inner, double t, double x,
                          double outer_strike, double inner_strike, double outer_maturity,
                          double inner_maturity, double rate, double dividend, double sigma) {
  check_market(x, rate, dividend, sigma);
  if (!(t >= 0.0) || !(outer_maturity > t) || !(inner_maturity > outer_maturity)) {
    throw Error(ErrorCode::InvalidTimes, "compound option needs 0 <= t < T1 < T2");
  }
  const double level = geske_critical_level(inner, outer_strike, inner_strike, outer_maturity,
                                            inner_maturity, rate, dividend, sigma);
  return geske_quote_at_level(outer, inner, t, x, outer_strike, inner_strike, outer_maturity,
                              inner_maturity, rate, dividend, sigma, level);
}

Eigen::MatrixXd mfold_correlation(double t, std::span<const double> times) {
  const auto m = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd corr(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index l = 0; l < m; ++l) {
      const double lo = std::min(times[i], times[l]) - t;
      const double hi = std::max(times[i], times[l]) - t;
      corr(i, l) = std::sqrt(lo / hi);
    }
  }
  return corr;
}

namespace {

void check_chain(double t, std::span<const double> strikes, std::span<const double> times) {
  if (strikes.empty() || strikes.size() != times.size()) {
    throw Error(ErrorCode::InvalidArgument, "need one strike per exercise time");
  }
  if (strikes.size() > kMaxFold) {
    throw Error(ErrorCode::RecursionDepth, "M-fold compounding supports at most 10 levels");
  }
  if (!(times[0] > t)) throw Error(ErrorCode::InvalidTimes, "valuation time must precede T_1");
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (j > 0 && !(times[j] > times[j - 1])) {
      throw Error(ErrorCode::InvalidTimes, "exercise times must be strictly increasing");
    }
    if (!(strikes[j] >= 0.0) || !std::isfinite(strikes[j])) {
      throw Error(ErrorCode::InvalidArgument, "strikes must be finite and non-negative");
    }
  }
  if (!(strikes.back() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "final strike must be positive");
  }
}

}  // namespace

MfoldValue mfold_price(double t, double x, std::span<const double> strikes,
                       std::span<const double> times, std::span<const double> levels,
                       double rate, double dividend, double sigma, const NormalCdfConfig& cfg) {
  check_market(x, rate, dividend, sigma);
  check_chain(t, strikes, times);
  const auto m = static_cast<Eigen::Index>(times.size());
  if (levels.size() != times.size()) {
    throw Error(ErrorCode::ShapeMismatch, "need one critical level per exercise time");
  }
  Eigen::VectorXd a(m);
  Eigen::VectorXd b(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double tau = times[j] - t;
    b[j] = moneyness(x, levels[j], rate - dividend - 0.5 * sigma * sigma, tau, sigma);
    a[j] = b[j] + sigma * std::sqrt(tau);
  }
  const Eigen::MatrixXd corr = mfold_correlation(t, times);
  const std::vector<MvnEstimate> pb = mvn_cdf_prefixes(b, corr, cfg);
  const MvnEstimate pa = mvn_cdf_estimate(a, corr, cfg);

  MfoldValue out;
  out.price = x * std::exp(-dividend * (times.back() - t)) * pa.value;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (strikes[j] > 0.0) out.price -= strikes[j] * std::exp(-rate * (times[j] - t)) * pb[j].value;
  }
  out.points = std::max(pa.points, pb.back().points);
  return out;
}

std::vector<double> mfold_critical_levels(std::span<const double> strikes,
                                          std::span<const double> times, double rate,
                                          double dividend, double sigma,
                                          const NormalCdfConfig& cfg) {
  check_chain(0.0, strikes, times);
  const std::size_t m = strikes.size();
  std::vector<double> levels(m);
  levels[m - 1] = strikes[m - 1];
  for (std::size_t j = m - 1; j-- > 0;) {
    if (strikes[j] == 0.0) {
      levels[j] = 0.0;
      continue;
    }
    const auto sub_strikes = strikes.subspan(j + 1);
    const auto sub_times = times.subspan(j + 1);
    const std::span<const double> sub_levels(levels.data() + j + 1, m - j - 1);
    // Fix the lattice at the size the adaptive rule picks near the previous
    // level, so the residual is smooth in the spot.
    const int points = mfold_price(times[j], levels[j + 1], sub_strikes, sub_times, sub_levels,
                                   rate, dividend, sigma, cfg)
                           .points;
    const NormalCdfConfig fixed = pinned(cfg, points);
    auto residual = [&](double s) {
      return mfold_price(times[j], s, sub_strikes, sub_times, sub_levels, rate, dividend, sigma,
                         fixed)
                 .price -
             strikes[j];
    };
    // The level exceeds the next one by roughly the strike paid.
    const double guess = levels[j + 1] + strikes[j];
    levels[j] = brent_root_expanding(residual, 0.5 * guess, 2.0 * guess, 1e-13 * guess);
  }
  return levels;
}

CompoundQuote mfold_quote(double t, double x, std::span<const double> strikes,
                          std::span<const double> times, double rate, double dividend,
                          double sigma, const NormalCdfConfig& cfg) {
  check_market(x, rate, dividend, sigma);
  check_chain(t, strikes, times);
  CompoundQuote quote;
  quote.critical_levels = mfold_critical_levels(strikes, times, rate, dividend, sigma, cfg);
  const MfoldValue centre =
      mfold_price(t, x, strikes, times, quote.critical_levels, rate, dividend, sigma, cfg);
  quote.price = centre.price;

  const NormalCdfConfig fixed = pinned(cfg, centre.points);
  const double dx = 1e-4 * x;
  const double up =
      mfold_price(t, x + dx, strikes, times, quote.critical_levels, rate, dividend, sigma, fixed)
          .price;
  const double down =
      mfold_price(t, x - dx, strikes, times, quote.critical_levels, rate, dividend, sigma, fixed)
          .price;
  quote.delta = (up - down) / (2.0 * dx);

  const Eigen::MatrixXd corr = mfold_correlation(t, times);
  for (Eigen::Index j = 1; j <= corr.rows(); ++j) {
    quote.correlations.push_back(corr.topLeftCorner(j, j));
  }
  return quote;
}

}  // namespace cbsde
