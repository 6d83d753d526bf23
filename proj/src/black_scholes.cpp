#include "cbsde/black_scholes.hpp"

#include <algorithm>
#include <cmath>

#include "cbsde/errors.hpp"
#include "cbsde/normal.hpp"

namespace cbsde {

PriceDelta bs_price_delta(OptionKind kind, double t, double x, double strike, double maturity,
                          double rate, double dividend, double sigma) {
  const double tau = maturity - t;
  if (!(x > 0.0) || !(strike >= 0.0) || !(sigma >= 0.0) || !(tau >= 0.0) ||
      !std::isfinite(x) || !std::isfinite(strike) || !std::isfinite(tau)) {
    throw Error(ErrorCode::InvalidArgument, "Black-Scholes inputs out of range");
  }
  const bool call = kind == OptionKind::Call;
  if (tau == 0.0) {
    if (call) return {std::max(x - strike, 0.0), x > strike ? 1.0 : 0.0};
    return {std::max(strike - x, 0.0), x < strike ? -1.0 : 0.0};
  }
  const double df_q = std::exp(-dividend * tau);
  const double df_r = std::exp(-rate * tau);
  if (strike == 0.0) {
    if (call) return {x * df_q, df_q};
    return {0.0, 0.0};
  }
  const double forward_log = std::log(x / strike) + (rate - dividend) * tau;
  const double vol = sigma * std::sqrt(tau);
  if (vol == 0.0) {
    // Deterministic terminal value; discounted intrinsic on the forward.
    const double fwd = x * df_q - strike * df_r;
    if (call) return {std::max(fwd, 0.0), forward_log > 0.0 ? df_q : 0.0};
    return {std::max(-fwd, 0.0), forward_log < 0.0 ? -df_q : 0.0};
  }
  const double d1 = forward_log / vol + 0.5 * vol;
  const double d2 = d1 - vol;
  if (call) {
    return {x * df_q * norm_cdf(d1) - strike * df_r * norm_cdf(d2), df_q * norm_cdf(d1)};
  }
  return {strike * df_r * norm_cdf(-d2) - x * df_q * norm_cdf(-d1), -df_q * norm_cdf(-d1)};
}

}  // namespace cbsde
