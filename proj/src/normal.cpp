#include "cbsde/normal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cbsde/errors.hpp"
#include "cbsde/rng.hpp"

namespace cbsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Legendre half-rules (nodes on (0, 1], weights) with 6, 12 and 20 points.
constexpr std::array<double, 3> kW6 = {0.1713244923791705, 0.3607615730481384,
                                       0.4679139345726904};
constexpr std::array<double, 3> kX6 = {0.9324695142031522, 0.6612093864662647,
                                       0.2386191860831970};
constexpr std::array<double, 6> kW12 = {0.04717533638651177, 0.1069393259953183,
                                        0.1600783285433464,  0.2031674267230659,
                                        0.2334925365383547,  0.2491470458134029};
constexpr std::array<double, 6> kX12 = {0.9815606342467191, 0.9041172563704750,
                                        0.7699026741943050, 0.5873179542866171,
                                        0.3678314989981802, 0.1252334085114692};
constexpr std::array<double, 10> kW20 = {
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
    0.1019301198172404,  0.1181945319615184,  0.1316886384491766,  0.1420961093183821,
    0.1491729864726037,  0.1527533871307259};
constexpr std::array<double, 10> kX20 = {
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188,
    0.7463319064601508, 0.6360536807265150, 0.5108670019508271, 0.3737060887154196,
    0.2277858511416451, 0.07652652113349733};

// Upper orthant probability P(X > h, Y > k) (Genz's BVNU, Drezner-Wesolowsky
// single-integral form with Gauss-Legendre quadrature).
double bvn_upper(double h, double k, double r) {
  if (h == kInf || k == kInf) return 0.0;
  if (h == -kInf) return k == -kInf ? 1.0 : norm_cdf(-k);
  if (k == -kInf) return norm_cdf(-h);
  if (r == 0.0) return norm_cdf(-h) * norm_cdf(-k);

  const double* w = nullptr;
  const double* x = nullptr;
  int ng = 0;
  if (std::abs(r) < 0.3) {
    w = kW6.data(), x = kX6.data(), ng = 3;
  } else if (std::abs(r) < 0.75) {
    w = kW12.data(), x = kX12.data(), ng = 6;
  } else {
    w = kW20.data(), x = kX20.data(), ng = 10;
  }

  constexpr double tp = 2.0 * std::numbers::pi;
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r) / 2.0;
    for (int i = 0; i < ng; ++i) {
      for (double node : {1.0 - x[i], 1.0 + x[i]}) {
        const double sn = std::sin(asr * node);
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return std::clamp(bvn * asr / tp + norm_cdf(-h) * norm_cdf(-k), 0.0, 1.0);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = 1.0 - r * r;
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    double asr = -(bs / as + hk) / 2.0;
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 80.0;
    if (asr > -100.0) {
      bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
    }
    if (hk > -100.0) {
      const double b = std::sqrt(bs);
      const double sp = std::sqrt(tp) * norm_cdf(-b / a);
      bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
    }
    a /= 2.0;
    double sum = 0.0;
    for (int i = 0; i < ng; ++i) {
      for (double node : {1.0 - x[i], 1.0 + x[i]}) {
        const double xs = (a * node) * (a * node);
        asr = -(bs / xs + hk) / 2.0;
        if (asr > -100.0) {
          const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
          const double rs = std::sqrt(1.0 - xs);
          const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
          sum += w[i] * std::exp(asr) * (sp - ep);
        }
      }
    }
    bvn = (a * sum - bvn) / tp;
  }
  if (r > 0.0) {
    bvn += norm_cdf(-std::max(h, k));
  } else if (h >= k) {
    bvn = -bvn;
  } else {
    const double l = h < 0.0 ? norm_cdf(k) - norm_cdf(h) : norm_cdf(-h) - norm_cdf(-k);
    bvn = l - bvn;
  }
  return std::clamp(bvn, 0.0, 1.0);
}

// Richtmyer generators: fractional parts of square roots of primes.
constexpr std::array<int, 12> kPrimes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

}  // namespace

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace {

// Acklam's rational approximation, relative error below 1.2e-9.
double quantile_rational(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log1p(-p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw Error(ErrorCode::InvalidArgument, "quantile probability outside [0, 1]");
  }
  // One Halley step brings the rational approximation to full precision.
  const double x = quantile_rational(p);
  const double e = (p < 0.5 ? norm_cdf(x) - p : (1.0 - p) - norm_cdf(-x));
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double binorm_cdf(double a, double b, double rho) {
  if (!(std::abs(rho) <= 1.0)) {
    throw Error(ErrorCode::InvalidCorrelation, "bivariate correlation outside [-1, 1]");
  }
  if (std::isnan(a) || std::isnan(b)) throw Error(ErrorCode::InvalidArgument, "NaN limit");
  return bvn_upper(-a, -b, rho);
}

std::vector<MvnEstimate> mvn_cdf_prefixes(const Eigen::VectorXd& upper,
                                          const Eigen::MatrixXd& corr,
                                          const NormalCdfConfig& cfg) {
  const int m = static_cast<int>(upper.size());
  if (m < 1 || corr.rows() != m || corr.cols() != m) {
    throw Error(ErrorCode::ShapeMismatch, "correlation shape does not match the limits");
  }
  if (m > static_cast<int>(kPrimes.size()) + 1) {
    throw Error(ErrorCode::InvalidArgument, "mvn_cdf supports at most 13 dimensions");
  }
  if (!(cfg.tolerance > 0.0) || cfg.shifts < 2 || cfg.max_points < cfg.shifts) {
    throw Error(ErrorCode::InvalidArgument, "invalid normal CDF configuration");
  }
  for (int i = 0; i < m; ++i) {
    if (std::abs(corr(i, i) - 1.0) > 1e-12) {
      throw Error(ErrorCode::InvalidCorrelation, "correlation diagonal must be 1");
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::CholeskyFailure, "correlation matrix is not positive definite");
  }
  const Eigen::MatrixXd chol = llt.matrixL();

  std::vector<MvnEstimate> out(m);
  out[0] = {norm_cdf(upper[0]), 0.0, 0};
  if (m >= 2) out[1] = {binorm_cdf(upper[0], upper[1], corr(1, 0)), 0.0, 0};
  if (m <= 2) return out;

  std::array<double, kPrimes.size()> alpha{};
  for (std::size_t i = 0; i < kPrimes.size(); ++i) {
    const double s = std::sqrt(static_cast<double>(kPrimes[i]));
    alpha[i] = s - std::floor(s);
  }

  const int shifts = cfg.shifts;
  std::vector<double> shift(static_cast<std::size_t>(shifts) * (m - 1));
  Rng rng(cfg.seed);
  for (double& s : shift) s = rng.uniform();

  constexpr double kPClamp = 1e-17;
  const double e1 = norm_cdf(upper[0] / chol(0, 0));
  std::vector<double> y(m);
  std::vector<double> sums(m);
  Eigen::MatrixXd shift_means(shifts, m);

  int n = std::max(251, (cfg.min_points + shifts - 1) / shifts);
  while (true) {
    for (int s = 0; s < shifts; ++s) {
      std::fill(sums.begin(), sums.end(), 0.0);
      const double* sh = shift.data() + static_cast<std::size_t>(s) * (m - 1);
      for (int point = 1; point <= n; ++point) {
        double e = e1;
        double prod = e1;
        for (int i = 1; i < m; ++i) {
          double frac = point * alpha[i - 1] + sh[i - 1];
          frac -= std::floor(frac);
          const double wv = std::abs(2.0 * frac - 1.0);
          y[i - 1] = quantile_rational(std::clamp(wv * e, kPClamp, 1.0 - kPClamp));
          double shifted = 0.0;
          for (int j = 0; j < i; ++j) shifted += chol(i, j) * y[j];
          e = norm_cdf((upper[i] - shifted) / chol(i, i));
          prod *= e;
          sums[i] += prod;
        }
      }
      for (int i = 2; i < m; ++i) shift_means(s, i) = sums[i] / n;
    }
    bool converged = true;
    for (int i = 2; i < m; ++i) {
      const double mean = shift_means.col(i).mean();
      const double var =
          (shift_means.col(i).array() - mean).square().sum() / (shifts - 1) / shifts;
      out[i] = {mean, std::sqrt(var), n * shifts};
      converged = converged && out[i].std_error <= cfg.tolerance;
    }
    const int next = static_cast<int>(n * 1.6);
    if (converged || static_cast<long long>(next) * shifts > cfg.max_points) break;
    n = next;
  }
  return out;
}

MvnEstimate mvn_cdf_estimate(const Eigen::VectorXd& upper, const Eigen::MatrixXd& corr,
                             const NormalCdfConfig& cfg) {
  return mvn_cdf_prefixes(upper, corr, cfg).back();
}

double mvn_cdf(const Eigen::VectorXd& upper, const Eigen::MatrixXd& corr,
               const NormalCdfConfig& cfg) {
  const MvnEstimate est = mvn_cdf_estimate(upper, corr, cfg);
  if (est.std_error > cfg.tolerance) {
    throw Error(ErrorCode::ToleranceNotReached,
                "standard error " + std::to_string(est.std_error) + " above tolerance");
  }
  return est.value;
}

}  // namespace cbsde
