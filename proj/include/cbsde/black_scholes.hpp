#pragma once

#include "cbsde/payoff.hpp"

namespace cbsde {

struct PriceDelta {
  double price = 0.0;
  double delta = 0.0;
};

/// Black-Scholes value at time t of a European option expiring at T on an
/// asset paying continuous dividend yield q. At t = T returns the intrinsic
/// value with delta 1{x > K} (call) or -1{x < K} (put).
PriceDelta bs_price_delta(OptionKind kind, double t, double x, double strike, double maturity,
                          double rate, double dividend, double sigma);

}  // namespace cbsde
