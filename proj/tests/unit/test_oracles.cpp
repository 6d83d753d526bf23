#include <doctest.h>

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "cbsde/basket.hpp"
#include "cbsde/black_scholes.hpp"
#include "cbsde/brent.hpp"
#include "cbsde/compound_oracles.hpp"
#include "cbsde/normal.hpp"
#include "cbsde/reference_surface.hpp"
#include "cbsde/rng.hpp"
#include "test_util.hpp"

using namespace cbsde;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Composite Simpson rule with n (even) panels.
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

/// Bisection on a monotone function.
double bisect(const std::function<double(double)>& f, double lo, double hi) {
  const bool rising = f(hi) > f(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((f(mid) > 0.0) == rising) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Compound price by integrating the outer payoff on the inner Black-Scholes
/// value over the log-normal law of X at T1, split at the exercise boundary.
double compound_by_quadrature(OptionKind outer, OptionKind inner, double x, double k1, double k2,
                              double t1, double t2, double r, double q, double s) {
  auto xt = [&](double z) { return x * std::exp((r - q - 0.5 * s * s) * t1 + s * std::sqrt(t1) * z); };
  auto inner_value = [&](double z) { return bs_price_delta(inner, t1, xt(z), k2, t2, r, q, s).price; };
  auto payoff = [&](double z) {
    const double v = inner_value(z);
    return outer == OptionKind::Call ? std::max(v - k1, 0.0) : std::max(k1 - v, 0.0);
  };
  const double zk = bisect([&](double z) { return inner_value(z) - k1; }, -12.0, 12.0);
  auto integrand = [&](double z) { return payoff(z) * phi(z); };
  return std::exp(-r * t1) *
         (simpson(integrand, -12.0, zk, 20000) + simpson(integrand, zk, 12.0, 20000));
}

}  // namespace

TEST_CASE("norm_cdf: special values and symmetry") {
  CHECK(norm_cdf(0.0) == 0.5);
  CHECK(norm_cdf(1.0) == doctest::Approx(0.8413447461).epsilon(1e-10));
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const double x = 8.0 * rng.normal();
    CHECK(std::abs(norm_cdf(-x) - (1.0 - norm_cdf(x))) <= 2e-16);
  }
}

TEST_CASE("norm_cdf: against a 50-digit erfc") {
  using Big = boost::multiprecision::cpp_bin_float_50;
  Rng rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double x = -12.0 + 24.0 * rng.uniform();
    const Big exact = boost::math::erfc(-Big(x) / boost::multiprecision::sqrt(Big(2))) / 2;
    worst = std::max(worst, std::abs(norm_cdf(x) - exact.convert_to<double>()));
  }
  CHECK(worst <= 1e-15);
}

TEST_CASE("norm_quantile inverts norm_cdf") {
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
    CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-13));
  }
}

TEST_CASE("binorm_cdf: closed forms") {
  CHECK(binorm_cdf(0.0, 0.0, 0.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(binorm_cdf(0.0, 0.0, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  for (double rho : {-0.95, -0.3, 0.2, 0.7, 0.99}) {
    CHECK(std::abs(binorm_cdf(0.0, 0.0, rho) - (0.25 + std::asin(rho) / (2 * std::numbers::pi))) <
          1e-13);
    CHECK(std::abs(binorm_cdf(0.7, kInf, rho) - norm_cdf(0.7)) < 1e-15);
    CHECK(std::abs(binorm_cdf(-kInf, 0.3, rho)) < 1e-15);
  }
  CHECK(std::abs(binorm_cdf(0.4, -0.2, 1.0) - norm_cdf(-0.2)) < 1e-15);
  CHECK(std::abs(binorm_cdf(0.4, -0.2, -1.0) - std::max(norm_cdf(0.4) + norm_cdf(-0.2) - 1.0, 0.0)) <
        1e-15);
  CHECK(thrown_code([] { binorm_cdf(0.0, 0.0, 1.2); }) == ErrorCode::InvalidCorrelation);
}

TEST_CASE("binorm_cdf: against quadrature of the conditional law") {
  Rng rng(7);
  double worst = 0.0;
  for (int k = 0; k < 60; ++k) {
    const double a = -3.0 + 6.0 * rng.uniform();
    const double b = -3.0 + 6.0 * rng.uniform();
    const double rho = -0.97 + 1.94 * rng.uniform();
    const double s = std::sqrt(1.0 - rho * rho);
    const double quad = simpson([&](double x) { return phi(x) * norm_cdf((b - rho * x) / s); },
                                -12.0, a, 40000);
    worst = std::max(worst, std::abs(binorm_cdf(a, b, rho) - quad));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("mvn_cdf: independence, infinite limits, sandwich, monotonicity") {
  NormalCdfConfig cfg;
  cfg.tolerance = 1e-6;
  cfg.max_points = 2000000;
  const Eigen::Vector3d u(0.3, -0.4, 1.1);
  CHECK(mvn_cdf(u, Eigen::Matrix3d::Identity(), cfg) ==
        doctest::Approx(norm_cdf(0.3) * norm_cdf(-0.4) * norm_cdf(1.1)).epsilon(1e-6));
  Eigen::Matrix4d corr;
  corr << 1.0, 0.5, 0.3, 0.2, 0.5, 1.0, 0.4, 0.1, 0.3, 0.4, 1.0, 0.6, 0.2, 0.1, 0.6, 1.0;
  CHECK(mvn_cdf(Eigen::Vector4d::Constant(kInf), corr, cfg) == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    Eigen::Vector4d lim;
    for (int i = 0; i < 4; ++i) lim[i] = -1.5 + 3.0 * rng.uniform();
    const double v = mvn_cdf(lim, corr, cfg);
    double cap = 1.0;
    for (int i = 0; i < 4; ++i) cap = std::min(cap, norm_cdf(lim[i]));
    CHECK(v >= 0.0);
    CHECK(v <= cap + 1e-5);
    Eigen::Vector4d up = lim;
    up[k % 4] += 0.3;
    CHECK(mvn_cdf(up, corr, cfg) >= v - 1e-5);
  }
  CHECK(thrown_code([&] {
          Eigen::Matrix3d bad = Eigen::Matrix3d::Ones();
          bad(0, 2) = bad(2, 0) = -1.0;
          mvn_cdf(u, bad);
        }) == ErrorCode::CholeskyFailure);
}

TEST_CASE("mvn_cdf: two-dimensional margins of a lattice estimate") {
  // A third coordinate far in the tail leaves the bivariate probability.
  Rng rng(11);
  NormalCdfConfig cfg;
  cfg.tolerance = 1e-8;
  cfg.max_points = 2000000;
  for (int k = 0; k < 8; ++k) {
    const double a = -2.0 + 4.0 * rng.uniform();
    const double b = -2.0 + 4.0 * rng.uniform();
    const double r = -0.6 + 1.2 * rng.uniform();
    Eigen::Matrix3d c;
    c << 1.0, r, 0.2, r, 1.0, -0.1, 0.2, -0.1, 1.0;
    CHECK(std::abs(mvn_cdf_estimate(Eigen::Vector3d(a, b, 9.0), c, cfg).value - binorm_cdf(a, b, r)) <
          1e-6);
  }
}

TEST_CASE("mvn_cdf: deterministic in the seed") {
  Eigen::Matrix3d c;
  c << 1.0, 0.3, 0.2, 0.3, 1.0, 0.5, 0.2, 0.5, 1.0;
  const Eigen::Vector3d u(0.1, 0.2, -0.3);
  CHECK(mvn_cdf_estimate(u, c).value == mvn_cdf_estimate(u, c).value);
  NormalCdfConfig tight;
  tight.tolerance = 1e-14;
  tight.max_points = 5000;
  CHECK(thrown_code([&] { mvn_cdf(u, c, tight); }) == ErrorCode::ToleranceNotReached);
}

TEST_CASE("brent_root") {
  CHECK(brent_root([](double x) { return x * x - 2.0; }, 1.0, 2.0, 1e-12) ==
        doctest::Approx(1.4142135624).epsilon(1e-10));
  CHECK(brent_root([](double x) { return x - 3.0; }, 0.0, 10.0, 1e-14) ==
        doctest::Approx(3.0).epsilon(1e-14));
  CHECK(brent_root([](double x) { return x - 1.0; }, 1.0, 10.0, 1e-14) == 1.0);
  CHECK(thrown_code([] { brent_root([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-10); }) ==
        ErrorCode::NoSignChange);
  CHECK(thrown_code([] { brent_root([](double x) { return std::exp(x) - 2.0; }, 0.0, 1.0, 0.0, 0.0, 2); }) ==
        ErrorCode::MaxIterations);
  CHECK(brent_root_expanding([](double x) { return std::log(x) - 7.0; }, 1.0, 2.0, 1e-12) ==
        doctest::Approx(std::exp(7.0)).epsilon(1e-12));
  CHECK(thrown_code([] { brent_root_expanding([](double) { return 1.0; }, 1.0, 2.0, 1e-12); }) ==
        ErrorCode::BracketFailure);
}

TEST_CASE("black-scholes: parity, quadrature value, limits") {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const double x = 5.0 + 30.0 * rng.uniform();
    const double strike = 5.0 + 30.0 * rng.uniform();
    const double tau = 0.05 + 2.0 * rng.uniform();
    const double r = 0.1 * rng.uniform();
    const double q = 0.05 * rng.uniform();
    const double s = 0.05 + 0.5 * rng.uniform();
    const double c = bs_price_delta(OptionKind::Call, 0.0, x, strike, tau, r, q, s).price;
    const double p = bs_price_delta(OptionKind::Put, 0.0, x, strike, tau, r, q, s).price;
    CHECK(std::abs(c - p - (x * std::exp(-q * tau) - strike * std::exp(-r * tau))) <= 1e-10);
  }
  const double quad = simpson(
      [](double z) { return std::max(100.0 * std::exp(0.2 * z - 0.02) - 100.0, 0.0) * phi(z); },
      0.1, 12.0, 200000);  // the payoff vanishes below z = 0.1
  const double call = bs_price_delta(OptionKind::Call, 0.0, 100.0, 100.0, 1.0, 0.0, 0.0, 0.2).price;
  const double put = bs_price_delta(OptionKind::Put, 0.0, 100.0, 100.0, 1.0, 0.0, 0.0, 0.2).price;
  CHECK(call == doctest::Approx(quad).epsilon(1e-9));
  CHECK(call == doctest::Approx(7.9656).epsilon(1e-5));
  CHECK(put == doctest::Approx(call).epsilon(1e-13));
  CHECK(bs_price_delta(OptionKind::Call, 0.0, 20.0, 0.0, 1.0, 0.03, 0.02, 0.2).price ==
        doctest::Approx(20.0 * std::exp(-0.02)).epsilon(1e-14));
}

TEST_CASE("black-scholes: delta is the price derivative; expiry gives intrinsic value") {
  for (OptionKind kind : {OptionKind::Call, OptionKind::Put}) {
    const double x = 13.0, dx = 1e-4 * x;
    const PriceDelta v = bs_price_delta(kind, 0.1, x, 14.0, 0.6, 0.03, 0.01, 0.25);
    const double fd = (bs_price_delta(kind, 0.1, x + dx, 14.0, 0.6, 0.03, 0.01, 0.25).price -
                       bs_price_delta(kind, 0.1, x - dx, 14.0, 0.6, 0.03, 0.01, 0.25).price) /
                      (2 * dx);
    CHECK(v.delta == doctest::Approx(fd).epsilon(1e-7));
  }
  const PriceDelta c = bs_price_delta(OptionKind::Call, 0.4, 15.0, 14.0, 0.4, 0.03, 0.0, 0.2);
  CHECK(c.price == 1.0);
  CHECK(c.delta == 1.0);
  const PriceDelta kink = bs_price_delta(OptionKind::Call, 0.4, 14.0, 14.0, 0.4, 0.03, 0.0, 0.2);
  CHECK(kink.price == 0.0);
  CHECK(kink.delta == 0.0);
  const PriceDelta p = bs_price_delta(OptionKind::Put, 0.4, 13.0, 14.0, 0.4, 0.03, 0.0, 0.2);
  CHECK(p.price == 1.0);
  CHECK(p.delta == -1.0);
}

TEST_CASE("geske: published reference column") {
  const double prices[4] = {0.224, 0.120, 0.430, 0.492};
  const double deltas[4] = {0.291, -0.168, -0.272, 0.269};
  const OptionKind kinds[4][2] = {{OptionKind::Call, OptionKind::Call},
                                  {OptionKind::Call, OptionKind::Put},
                                  {OptionKind::Put, OptionKind::Call},
                                  {OptionKind::Put, OptionKind::Put}};
  for (int i = 0; i < 4; ++i) {
    const CompoundQuote q =
        geske_quote(kinds[i][0], kinds[i][1], 0.0, 14.0, 1.0, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2);
    CHECK(std::abs(q.price - prices[i]) <= 1e-3);
    CHECK(std::abs(q.delta - deltas[i]) <= 1e-3);
    CHECK(q.critical_levels.size() == 2);
    CHECK(q.critical_levels[0] > 0.0);
  }
}

TEST_CASE("geske: against quadrature over the first expiry") {
  const OptionKind both[2] = {OptionKind::Call, OptionKind::Put};
  Rng rng(9);
  for (int k = 0; k < 6; ++k) {
    const double x = 10.0 + 8.0 * rng.uniform();
    const double q = 0.02 * rng.uniform();
    for (OptionKind outer : both) {
      for (OptionKind inner : both) {
        const double quote =
            geske_quote(outer, inner, 0.0, x, 1.0, 14.0, 0.2, 0.4, 0.03, q, 0.2).price;
        const double quad = compound_by_quadrature(outer, inner, x, 1.0, 14.0, 0.2, 0.4, 0.03, q, 0.2);
        CHECK(std::abs(quote - quad) <= 1e-9);
      }
    }
  }
}

TEST_CASE("geske: delta against finite differences, time shift") {
  const OptionKind both[2] = {OptionKind::Call, OptionKind::Put};
  for (OptionKind outer : both) {
    for (OptionKind inner : both) {
      for (double t : {0.0, 0.15}) {
        const double x = 14.3, dx = 1e-4 * x;
        const CompoundQuote q = geske_quote(outer, inner, t, x, 1.0, 14.0, 0.2, 0.4, 0.03, 0.01, 0.2);
        const double up = geske_quote(outer, inner, t, x + dx, 1.0, 14.0, 0.2, 0.4, 0.03, 0.01, 0.2).price;
        const double dn = geske_quote(outer, inner, t, x - dx, 1.0, 14.0, 0.2, 0.4, 0.03, 0.01, 0.2).price;
        CHECK(q.delta == doctest::Approx((up - dn) / (2 * dx)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("geske: compound parity and zero outer strike") {
  Rng rng(4);
  for (int k = 0; k < 30; ++k) {
    const double x = 8.0 + 12.0 * rng.uniform();
    const double t = 0.19 * rng.uniform();
    const double k1 = 0.2 + 2.0 * rng.uniform();
    for (OptionKind inner : {OptionKind::Call, OptionKind::Put}) {
      const double co = geske_quote(OptionKind::Call, inner, t, x, k1, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2).price;
      const double po = geske_quote(OptionKind::Put, inner, t, x, k1, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2).price;
      const double v = bs_price_delta(inner, t, x, 14.0, 0.4, 0.03, 0.0, 0.2).price;
      CHECK(std::abs(co + k1 * std::exp(-0.03 * (0.2 - t)) - po - v) <= 1e-8);
    }
  }
  for (OptionKind inner : {OptionKind::Call, OptionKind::Put}) {
    const CompoundQuote q = geske_quote(OptionKind::Call, inner, 0.0, 13.0, 0.0, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2);
    const PriceDelta v = bs_price_delta(inner, 0.0, 13.0, 14.0, 0.4, 0.03, 0.0, 0.2);
    CHECK(std::abs(q.price - v.price) <= 1e-10);
    CHECK(std::abs(q.delta - v.delta) <= 1e-10);
  }
}

TEST_CASE("geske: critical level solves the threshold equation") {
  for (OptionKind inner : {OptionKind::Call, OptionKind::Put}) {
    for (double k1 : {0.1, 1.0, 3.0}) {
      const double level = geske_critical_level(inner, k1, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2);
      const double v = bs_price_delta(inner, 0.2, level, 14.0, 0.4, 0.03, 0.0, 0.2).price;
      CHECK(std::abs(v - k1) <= 1e-8 * k1);
    }
  }
  // An inner put is worth at most K2 e^{-r tau}; a larger outer strike is never reached.
  CHECK(thrown_code([] { geske_critical_level(OptionKind::Put, 20.0, 14.0, 0.2, 0.4, 0.03, 0.0, 0.2); }) ==
        ErrorCode::BracketFailure);
}

TEST_CASE("mfold: published reference column") {
  const double prices[4] = {3.088, 2.174, 1.315, 0.640};
  const double deltas[4] = {1.000, 0.998, 0.942, 0.707};
  for (int m = 2; m <= 5; ++m) {
    std::vector<double> strikes(m, 1.0), times(m);
    for (int j = 0; j < m; ++j) times[j] = j + 1.0;
    const CompoundQuote q = mfold_quote(0.0, 5.0, strikes, times, 0.03, 0.0, 0.2);
    CHECK(std::abs(q.price - prices[m - 2]) <= 2e-3);
    CHECK(std::abs(q.delta - deltas[m - 2]) <= 2e-3);
    CHECK(q.critical_levels.back() == 1.0);
    CHECK(q.correlations.size() == static_cast<std::size_t>(m));
  }
}

TEST_CASE("mfold: two folds equal Geske call-on-call; one fold equals Black-Scholes") {
  for (double x : {10.0, 14.0, 18.0}) {
    const double strikes[] = {1.0, 14.0};
    const double times[] = {0.2, 0.4};
    const CompoundQuote m = mfold_quote(0.0, x, strikes, times, 0.03, 0.01, 0.2);
    const CompoundQuote g =
        geske_quote(OptionKind::Call, OptionKind::Call, 0.0, x, 1.0, 14.0, 0.2, 0.4, 0.03, 0.01, 0.2);
    CHECK(std::abs(m.price - g.price) <= 1e-10);
    CHECK(std::abs(m.delta - g.delta) <= 1e-7);
    const double one_k[] = {12.0};
    const double one_t[] = {0.5};
    const CompoundQuote s = mfold_quote(0.1, x, one_k, one_t, 0.03, 0.01, 0.2);
    const PriceDelta v = bs_price_delta(OptionKind::Call, 0.1, x, 12.0, 0.5, 0.03, 0.01, 0.2);
    CHECK(std::abs(s.price - v.price) <= 1e-8);
    CHECK(std::abs(s.delta - v.delta) <= 1e-6);
  }
}

TEST_CASE("mfold: three folds against quadrature over the first date") {
  const std::vector<double> strikes{1.0, 1.0, 1.0};
  const std::vector<double> times{1.0, 2.0, 3.0};
  const double r = 0.03, s = 0.2, x = 5.0;
  NormalCdfConfig fine;
  fine.tolerance = 1e-9;
  fine.max_points = 4000000;
  const CompoundQuote q = mfold_quote(0.0, x, strikes, times, r, 0.0, s, fine);
  // Value at T1 of the remaining two-fold chain, which is a Geske call-on-call.
  auto two_fold = [&](double z) {
    const double xt = x * std::exp((r - 0.5 * s * s) + s * z);
    return geske_quote(OptionKind::Call, OptionKind::Call, 1.0, xt, 1.0, 1.0, 2.0, 3.0, r, 0.0, s).price;
  };
  const double zk = bisect([&](double z) { return two_fold(z) - 1.0; }, -8.0, 8.0);
  auto integrand = [&](double z) { return std::max(two_fold(z) - 1.0, 0.0) * phi(z); };
  const double quad = std::exp(-r) * (simpson(integrand, zk, 10.0, 8000));
  CHECK(std::abs(q.price - quad) <= 1e-7);
}

TEST_CASE("mfold: monotone in strikes, delta in [0, 1], levels solve their equations") {
  const std::vector<double> times{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> base{1.0, 1.0, 1.0, 1.0};
  const double p0 = mfold_quote(0.0, 5.0, base, times, 0.03, 0.0, 0.2).price;
  for (int j = 0; j < 4; ++j) {
    std::vector<double> bumped = base;
    bumped[j] += 0.2;
    const CompoundQuote q = mfold_quote(0.0, 5.0, bumped, times, 0.03, 0.0, 0.2);
    CHECK(q.price <= p0 + 1e-6);
    CHECK(q.delta >= 0.0);
    CHECK(q.delta <= 1.0);
  }
  for (double x : {2.0, 4.0, 8.0}) {
    const double d = mfold_quote(0.0, x, base, times, 0.03, 0.0, 0.2).delta;
    CHECK(d >= 0.0);
    CHECK(d <= 1.0 + 1e-6);
  }
  // Levels whose sub-chains are closed form (at most two folds remain).
  for (int m = 2; m <= 3; ++m) {
    std::vector<double> strikes(m, 1.0), ts(m);
    for (int j = 0; j < m; ++j) ts[j] = j + 1.0;
    const std::vector<double> levels = mfold_critical_levels(strikes, ts, 0.03, 0.0, 0.2);
    for (int j = 0; j + 1 < m && m - j - 1 <= 2; ++j) {
      const std::span<const double> sk(strikes), st(ts), sl(levels);
      const double v = mfold_price(ts[j], levels[j], sk.subspan(j + 1), st.subspan(j + 1),
                                   sl.subspan(j + 1), 0.03, 0.0, 0.2)
                           .price;
      CHECK(std::abs(v - strikes[j]) <= 1e-8 * strikes[j]);
    }
  }
  const std::vector<double> eleven(11, 1.0);
  std::vector<double> t11(11);
  for (int j = 0; j < 11; ++j) t11[j] = j + 1.0;
  CHECK(thrown_code([&] { mfold_quote(0.0, 5.0, eleven, t11, 0.03, 0.0, 0.2); }) ==
        ErrorCode::RecursionDepth);
  const std::vector<double> bad_t{2.0, 1.0};
  const std::vector<double> two(2, 1.0);
  CHECK(thrown_code([&] { mfold_quote(0.0, 5.0, two, bad_t, 0.03, 0.0, 0.2); }) == ErrorCode::InvalidTimes);
}

TEST_CASE("mfold_correlation") {
  const std::vector<double> t{1.0, 2.0, 4.0};
  const Eigen::MatrixXd p = mfold_correlation(0.0, t);
  CHECK(p(0, 1) == doctest::Approx(std::sqrt(0.5)));
  CHECK(p(1, 2) == doctest::Approx(std::sqrt(0.5)));
  CHECK(p(0, 2) == doctest::Approx(0.5));
  CHECK(p(2, 0) == p(0, 2));
  CHECK(p.diagonal().isOnes(0.0));
}

TEST_CASE("reduce_geobasket") {
  const BasketReduction one = reduce_geobasket(GbmModel::uniform(1, 0.03, 0.01, 0.25, 12.0));
  CHECK(one.spot == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(one.sigma == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(one.dividend == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(one.rate == 0.03);

  const BasketReduction two = reduce_geobasket(GbmModel::uniform(2, 0.03, 0.0, 0.2, 10.0));
  CHECK(two.sigma * two.sigma == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(two.dividend == doctest::Approx(0.01).epsilon(1e-14));

  const BasketReduction twenty = reduce_geobasket(GbmModel::uniform(20, 0.02, 0.0, 0.2, 49.0));
  CHECK(twenty.sigma == doctest::Approx(0.2 / std::sqrt(20.0)).epsilon(1e-14));
  CHECK(twenty.dividend == doctest::Approx(0.019).epsilon(1e-13));
  CHECK(twenty.spot == doctest::Approx(49.0).epsilon(1e-14));

  GbmModel corr = GbmModel::uniform(3, 0.02, 0.0, 0.2, 49.0);
  corr.vol(1, 1) = 0.3;
  corr.correlation(0, 1) = corr.correlation(1, 0) = 0.5;
  const BasketReduction c = reduce_geobasket(corr);
  const double var = (0.04 + 0.09 + 0.04 + 2 * 0.5 * 0.2 * 0.3) / 9.0;
  CHECK(c.sigma * c.sigma == doctest::Approx(var).epsilon(1e-14));

  GbmModel full = GbmModel::uniform(2, 0.02, 0.0, 0.2, 49.0);
  full.vol(0, 1) = 0.05;
  CHECK(thrown_code([&] { reduce_geobasket(full); }) == ErrorCode::NonDiagonalSigma);
}

TEST_CASE("bermudan tree: published references and dominance") {
  const std::vector<double> dates{0.1, 0.2, 0.3, 0.4, 0.5};
  const int dims[3] = {1, 5, 20};
  const double prices[3] = {3.071, 1.745, 1.223};
  const double deltas[3] = {-0.510, -0.121, -0.036};
  for (int i = 0; i < 3; ++i) {
    const GbmModel m = GbmModel::uniform(dims[i], 0.02, 0.0, 0.2, 49.0);
    const BasketReduction red = reduce_geobasket(m);
    const BermudanTreeResult r = binomial_bermudan_put(red, 50.0, {10000, dates});
    CHECK(std::abs(r.price - prices[i]) <= 5e-3);
    const Eigen::VectorXd d = basket_asset_deltas(red, m.spot, r.delta_hat);
    CHECK(d.size() == dims[i]);
    CHECK((d.array() - deltas[i]).abs().maxCoeff() <= 2e-3);
    CHECK(r.exercise_layers == std::vector<int>{2000, 4000, 6000, 8000, 10000});
    const double euro =
        bs_price_delta(OptionKind::Put, 0.0, red.spot, 50.0, 0.5, red.rate, red.dividend, red.sigma).price;
    CHECK(r.price >= euro - 1e-10);
  }
}

TEST_CASE("bermudan tree: european limit and delta") {
  const BasketReduction red = reduce_geobasket(GbmModel::uniform(1, 0.02, 0.01, 0.2, 49.0));
  const BermudanTreeResult r = binomial_bermudan_put(red, 50.0, {10000, {0.5}});
  const PriceDelta v = bs_price_delta(OptionKind::Put, 0.0, 49.0, 50.0, 0.5, 0.02, 0.01, 0.2);
  CHECK(std::abs(r.price - v.price) / v.price <= 2e-3);
  CHECK(r.delta_hat == doctest::Approx(v.delta).epsilon(2e-3));
}

TEST_CASE("map_exercise_layers") {
  CHECK(map_exercise_layers({0.1, 0.2, 0.3}, 30) == std::vector<int>{10, 20, 30});
  CHECK(thrown_code([] { map_exercise_layers({0.1, 0.1001, 0.3}, 30); }) ==
        ErrorCode::DateMappingCollision);
  CHECK(thrown_code([] { map_exercise_layers({0.001, 0.3}, 30); }) == ErrorCode::DateMappingCollision);
}

TEST_CASE("basket_asset_deltas: chain rule through the geometric mean") {
  GbmModel m = GbmModel::uniform(3, 0.02, 0.0, 0.2, 49.0);
  m.spot << 40.0, 50.0, 60.0;
  const BasketReduction red = reduce_geobasket(m);
  const Eigen::VectorXd d = basket_asset_deltas(red, m.spot, -0.5);
  for (int i = 0; i < 3; ++i) CHECK(d[i] == doctest::Approx(-0.5 * red.spot / (3.0 * m.spot[i])));
}

TEST_CASE("plain compound surface") {
  const auto s = make_plain_compound_surface(OptionKind::Call, OptionKind::Call, 1.0, 14.0, 0.2, 0.4,
                                             0.03, 0.0, 0.2);
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const double x = 9.0 + 10.0 * rng.uniform();
    const Eigen::VectorXd xv = Eigen::VectorXd::Constant(1, x);
    // Stage 2 is Black-Scholes with Z = delta sigma x.
    const double t2 = 0.2 + 0.19 * rng.uniform();
    const SurfacePoint p2 = s->evaluate(1, t2, xv);
    const PriceDelta bs = bs_price_delta(OptionKind::Call, t2, x, 14.0, 0.4, 0.03, 0.0, 0.2);
    CHECK(p2.y == doctest::Approx(bs.price).epsilon(1e-13));
    CHECK(p2.z[0] == doctest::Approx(bs.delta * 0.2 * x).epsilon(1e-13));
    // Maturity and compounding identities.
    CHECK(s->evaluate(1, 0.4, xv).y == std::max(x - 14.0, 0.0));
    CHECK(s->evaluate(1, 0.4, xv).z[0] == 0.0);
    const double inner = s->evaluate(1, 0.2, xv).y;
    CHECK(s->evaluate(0, 0.2, xv).y == doctest::Approx(std::max(inner - 1.0, 0.0)).epsilon(1e-15));
    const double t1 = 0.19 * rng.uniform();
    const CompoundQuote g = geske_quote(OptionKind::Call, OptionKind::Call, t1, x, 1.0, 14.0, 0.2, 0.4,
                                        0.03, 0.0, 0.2);
    const SurfacePoint p1 = s->evaluate(0, t1, xv);
    CHECK(p1.y == doctest::Approx(g.price).epsilon(1e-13));
    CHECK(p1.z[0] == doctest::Approx(g.delta * 0.2 * x).epsilon(1e-13));
  }
  CHECK(thrown_code([&] { s->evaluate(0, 0.3, Eigen::VectorXd::Constant(1, 14.0)); }) ==
        ErrorCode::OutOfRange);
  CHECK(thrown_code([&] { s->evaluate(2, 0.3, Eigen::VectorXd::Constant(1, 14.0)); }) ==
        ErrorCode::OutOfRange);
}

TEST_CASE("european and mfold surfaces") {
  const auto e = make_european_surface(OptionKind::Put, 14.0, {0.2, 0.4}, 0.03, 0.0, 0.2);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 13.0);
  const double v = bs_price_delta(OptionKind::Put, 0.1, 13.0, 14.0, 0.4, 0.03, 0.0, 0.2).price;
  CHECK(e->evaluate(0, 0.1, x).y == doctest::Approx(v).epsilon(1e-14));
  CHECK(e->evaluate(0, 0.2, x).y == doctest::Approx(e->evaluate(1, 0.2, x).y).epsilon(1e-15));

  const auto m = make_mfold_surface({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}, 0.03, 0.0, 0.2);
  const std::vector<double> k{1.0, 1.0, 1.0}, t{1.0, 2.0, 3.0};
  const CompoundQuote q = mfold_quote(0.0, 5.0, k, t, 0.03, 0.0, 0.2);
  const SurfacePoint p = m->evaluate(0, 0.0, Eigen::VectorXd::Constant(1, 5.0));
  CHECK(p.y == doctest::Approx(q.price).epsilon(1e-9));
  CHECK(p.z[0] == doctest::Approx(q.delta * 0.2 * 5.0).epsilon(1e-6));
  const CompoundQuote g = geske_quote(OptionKind::Call, OptionKind::Call, 1.5, 4.0, 1.0, 1.0, 2.0, 3.0,
                                      0.03, 0.0, 0.2);
  CHECK(m->evaluate(1, 1.5, Eigen::VectorXd::Constant(1, 4.0)).y == doctest::Approx(g.price).epsilon(1e-9));
}

TEST_CASE("bermudan surface against direct tree evaluation") {
  const int d = 5;
  const GbmModel model = GbmModel::uniform(d, 0.02, 0.0, 0.2, 49.0);
  const std::vector<double> dates{0.1, 0.2, 0.3, 0.4, 0.5};
  const TimeGrid grid = build_grid(0.5, dates, 50);
  const auto s = make_bermudan_surface(model, 50.0, grid, 40000);
  const BasketReduction red = reduce_geobasket(model);

  // t = 0 matches the stand-alone tree.
  const BermudanTreeResult root = binomial_bermudan_put(red, 50.0, {40000, dates});
  const SurfacePoint p0 = s->evaluate(0, 0.0, model.spot);
  CHECK(std::abs(p0.y - root.price) <= 1e-5);

  Rng rng(21);
  double worst = 0.0;
  for (int k = 0; k < 6; ++k) {
    const int i = 1 + static_cast<int>(rng.next() % 49);
    const double t = grid.time(i);
    const int stage = std::min(static_cast<int>((t + 1e-12) / 0.1), 4);
    Eigen::VectorXd x(d);
    for (int c = 0; c < d; ++c) x[c] = 49.0 * std::exp(0.1 * rng.normal());
    // Direct: a fresh tree from (t, geomean(x)) over the remaining dates.
    std::vector<double> remaining;
    for (double date : dates) {
      if (date > t + 1e-12) remaining.push_back(date - t);
    }
    BasketReduction here = red;
    here.spot = std::exp(x.array().log().mean());
    const double direct = binomial_bermudan_put(here, 50.0, {40000, remaining}).price;
    const double cached = s->evaluate(stage, t, x).y;
    worst = std::max(worst, std::abs(cached - direct));
  }
  // Fresh 1e4- and 4e4-step trees already disagree by up to 1.8e-5 here.
  CHECK(worst <= 2e-5);
  CHECK(thrown_code([&] { s->evaluate(0, 0.0123, model.spot); }) == ErrorCode::OutOfDomain);
}
