#include "cbsde/reference_surface.hpp"

#include <cmath>
#include <span>

#include "cbsde/black_scholes.hpp"
#include "cbsde/compound_oracles.hpp"
#include "cbsde/errors.hpp"

namespace cbsde {

ReferenceSurface::ReferenceSurface(std::vector<double> compounding_times,
                                   std::vector<CompoundingCondition> conditions)
    : times_(std::move(compounding_times)), conditions_(std::move(conditions)) {
  if (times_.empty() || times_.size() != conditions_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "need one condition per compounding time");
  }
}

SurfacePoint ReferenceSurface::evaluate(int stage, double t, const Eigen::VectorXd& x) const {
  if (stage < 0 || stage >= stage_count()) {
    throw Error(ErrorCode::OutOfRange, "stage index out of range");
  }
  const double begin = stage == 0 ? 0.0 : times_[stage - 1];
  const double end = times_[stage];
  const double slack = 1e-9 * std::max(1.0, times_.back());
  if (t < begin - slack || t > end + slack) {
    throw Error(ErrorCode::OutOfRange, "time outside the stage interval");
  }
  if (t < end - slack) return stage_value(stage, std::max(t, begin), x);

  const CompoundingCondition& g = conditions_[stage];
  SurfacePoint out;
  if (g.is_terminal()) {
    out.y = g.exercise_value(x)(0);
    out.z = Eigen::VectorXd::Zero(x.size());
    return out;
  }
  const SurfacePoint next = evaluate(stage + 1, end, x);
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = next.y;
  Eigen::MatrixXd gy;
  Eigen::MatrixXd dg;
  g.evaluate(x, y, 1, gy);
  g.derivative_y(x, y, dg);
  out.y = gy(0, 0);
  out.z = dg(0, 0) * next.z;
  return out;
}

namespace {

SurfacePoint scalar_point(double price, double delta, double sigma, double x) {
  SurfacePoint p;
  p.y = price;
  p.z = Eigen::VectorXd::Constant(1, delta * sigma * x);
  return p;
}

void check_scalar_state(const Eigen::VectorXd& x) {
  if (x.size() != 1) throw Error(ErrorCode::DimensionMismatch, "surface expects a 1-d state");
  if (!(x[0] > 0.0)) throw Error(ErrorCode::OutOfDomain, "surface needs a positive state");
}

class PlainCompoundSurface final : public ReferenceSurface {
 public:
  PlainCompoundSurface(OptionKind outer, OptionKind inner, double k1, double k2, double t1,
                       double t2, double r, double q, double sigma)
      : ReferenceSurface({t1, t2},
                         {outer == OptionKind::Call ? cond_call_on_value(k1)
                                                    : cond_put_on_value(k1),
                          inner == OptionKind::Call ? terminal_call(k2) : terminal_put(k2)}),
        outer_(outer),
        inner_(inner),
        k1_(k1),
        k2_(k2),
        t1_(t1),
        t2_(t2),
        r_(r),
        q_(q),
        sigma_(sigma),
        level_(geske_critical_level(inner, k1, k2, t1, t2, r, q, sigma)) {}

 protected:
  SurfacePoint stage_value(int stage, double t, const Eigen::VectorXd& x) const override {
    check_scalar_state(x);
    if (stage == 0) {
      const CompoundQuote q = geske_quote_at_level(outer_, inner_, t, x[0], k1_, k2_, t1_, t2_,
                                                   r_, q_, sigma_, level_);
      return scalar_point(q.price, q.delta, sigma_, x[0]);
    }
    const PriceDelta v = bs_price_delta(inner_, t, x[0], k2_, t2_, r_, q_, sigma_);
    return scalar_point(v.price, v.delta, sigma_, x[0]);
  }

 private:
  OptionKind outer_;
  OptionKind inner_;
  double k1_, k2_, t1_, t2_, r_, q_, sigma_;
  double level_;
};

class EuropeanSurface final : public ReferenceSurface {
 public:
  EuropeanSurface(OptionKind kind, double strike, std::vector<double> times, double r, double q,
                  double sigma)
      : ReferenceSurface(times, passthrough_chain(kind, strike, times.size())),
        kind_(kind),
        strike_(strike),
        maturity_(times.back()),
        r_(r),
        q_(q),
        sigma_(sigma) {}

 protected:
  SurfacePoint stage_value(int, double t, const Eigen::VectorXd& x) const override {
    check_scalar_state(x);
    const PriceDelta v = bs_price_delta(kind_, t, x[0], strike_, maturity_, r_, q_, sigma_);
    return scalar_point(v.price, v.delta, sigma_, x[0]);
  }

 private:
  static std::vector<CompoundingCondition> passthrough_chain(OptionKind kind, double strike,
                                                             std::size_t stages) {
    std::vector<CompoundingCondition> out(stages - 1, cond_passthrough());
    out.push_back(kind == OptionKind::Call ? terminal_call(strike) : terminal_put(strike));
    return out;
  }

  OptionKind kind_;
  double strike_, maturity_, r_, q_, sigma_;
};

class MfoldSurface final : public ReferenceSurface {
 public:
  MfoldSurface(std::vector<double> strikes, std::vector<double> times, double r, double q,
               double sigma, const NormalCdfConfig& cfg)
      : ReferenceSurface(times, chain(strikes)),
        strikes_(std::move(strikes)),
        times_(std::move(times)),
        r_(r),
        q_(q),
        sigma_(sigma),
        cfg_(cfg),
        levels_(mfold_critical_levels(strikes_, times_, r, q, sigma, cfg)) {}

 protected:
  SurfacePoint stage_value(int stage, double t, const Eigen::VectorXd& x) const override {
    check_scalar_state(x);
    const auto s = static_cast<std::size_t>(stage);
    const std::span<const double> k(strikes_.data() + s, strikes_.size() - s);
    const std::span<const double> tt(times_.data() + s, times_.size() - s);
    const std::span<const double> lv(levels_.data() + s, levels_.size() - s);
    const MfoldValue centre = mfold_price(t, x[0], k, tt, lv, r_, q_, sigma_, cfg_);
    NormalCdfConfig fixed = cfg_;
    if (centre.points > 0) fixed.min_points = fixed.max_points = centre.points;
    const double dx = 1e-4 * x[0];
    const double up = mfold_price(t, x[0] + dx, k, tt, lv, r_, q_, sigma_, fixed).price;
    const double down = mfold_price(t, x[0] - dx, k, tt, lv, r_, q_, sigma_, fixed).price;
    return scalar_point(centre.price, (up - down) / (2.0 * dx), sigma_, x[0]);
  }

 private:
  static std::vector<CompoundingCondition> chain(const std::vector<double>& strikes) {
    std::vector<CompoundingCondition> out;
    for (std::size_t j = 0; j + 1 < strikes.size(); ++j) out.push_back(cond_call_on_value(strikes[j]));
    out.push_back(terminal_call(strikes.back()));
    return out;
  }

  std::vector<double> strikes_;
  std::vector<double> times_;
  double r_, q_, sigma_;
  NormalCdfConfig cfg_;
  std::vector<double> levels_;
};

class BermudanSurface final : public ReferenceSurface {
 public:
  BermudanSurface(const GbmModel& model, double strike, const TimeGrid& grid, int tree_steps)
      : ReferenceSurface(
            std::vector<double>(grid.compounding_times().begin(), grid.compounding_times().end()),
            chain(strike, grid.stage_count())),
        reduction_(reduce_geobasket(model)),
        vols_(model.vol.diagonal()),
        h_(grid.step()),
        grid_steps_(grid.total_steps()) {
    if (!(strike > 0.0) || !(reduction_.sigma > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "Bermudan surface needs positive strike and vol");
    }
    const int per_step = std::max(1, (tree_steps + grid_steps_ - 1) / grid_steps_);
    const int layers = per_step * grid_steps_;
    const double dt = h_ / per_step;
    // Start the lattice before t = 0 so the first grid layers already span
    // the spread of the simulated paths.
    const int pad = 2 * static_cast<int>(std::ceil(5.0 * std::sqrt(layers)));
    const int total = pad + layers;
    log_u_ = reduction_.sigma * std::sqrt(dt);
    const double u = std::exp(log_u_);
    const double d = 1.0 / u;
    const double p = (std::exp((reduction_.rate - reduction_.dividend) * dt) - d) / (u - d);
    if (!(p > 0.0 && p < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "tree probability outside (0, 1)");
    }
    const double disc = std::exp(-reduction_.rate * dt);
    const double log_x0 = std::log(reduction_.spot);

    std::vector<char> exercise(total + 1, 0);
    for (int j = 0; j + 1 < grid.stage_count(); ++j) exercise[pad + grid.stage_end(j) * per_step] = 1;

    auto payoff = [&](int layer, int i) {
      return std::max(strike - std::exp(log_x0 + (2 * i - layer) * log_u_), 0.0);
    };
    cache_.resize(grid_steps_ + 1);
    base_log_.resize(grid_steps_ + 1);
    std::vector<double> v(total + 1);
    for (int i = 0; i <= total; ++i) v[i] = payoff(total, i);
    for (int layer = total - 1; layer >= pad; --layer) {
      for (int i = 0; i <= layer; ++i) v[i] = disc * (p * v[i + 1] + (1.0 - p) * v[i]);
      const int offset = layer - pad;
      if (offset % per_step == 0) {
        const int gi = offset / per_step;
        cache_[gi].assign(v.begin(), v.begin() + layer + 1);
        base_log_[gi] = log_x0 - layer * log_u_;
      }
      if (exercise[layer]) {
        for (int i = 0; i <= layer; ++i) v[i] = std::max(v[i], payoff(layer, i));
      }
    }
  }

 protected:
  SurfacePoint stage_value(int, double t, const Eigen::VectorXd& x) const override {
    if (x.size() != vols_.size()) {
      throw Error(ErrorCode::DimensionMismatch, "state dimension does not match the basket");
    }
    const double gi_real = t / h_;
    const int gi = static_cast<int>(std::lround(gi_real));
    if (std::abs(gi_real - gi) > 1e-7 || gi < 0 || gi >= grid_steps_) {
      throw Error(ErrorCode::OutOfDomain, "Bermudan surface is cached at grid times only");
    }
    if ((x.array() <= 0.0).any()) throw Error(ErrorCode::OutOfDomain, "non-positive state");
    const double log_xhat = x.array().log().mean();
    const std::vector<double>& layer = cache_[gi];
    const double s = (log_xhat - base_log_[gi]) / (2.0 * log_u_);
    const int k = static_cast<int>(std::floor(s));
    if (k < 1 || k + 2 >= static_cast<int>(layer.size())) {
      throw Error(ErrorCode::OutOfDomain, "state outside the cached lattice");
    }
    // Four-point Lagrange interpolation on nodes k-1..k+2 in the node coordinate.
    const double f = s - k;
    const double nodes[4] = {-1.0, 0.0, 1.0, 2.0};
    double value = 0.0;
    double slope = 0.0;
    for (int a = 0; a < 4; ++a) {
      double w = 1.0;
      double dw = 0.0;
      for (int b = 0; b < 4; ++b) {
        if (b == a) continue;
        const double denom = nodes[a] - nodes[b];
        dw = dw * (f - nodes[b]) / denom + w / denom;
        w *= (f - nodes[b]) / denom;
      }
      value += w * layer[k - 1 + a];
      slope += dw * layer[k - 1 + a];
    }
    const double du_dlog = slope / (2.0 * log_u_);
    SurfacePoint out;
    out.y = value;
    out.z = du_dlog * vols_ / static_cast<double>(vols_.size());
    return out;
  }

 private:
  static std::vector<CompoundingCondition> chain(double strike, int stages) {
    std::vector<CompoundingCondition> out(stages - 1, cond_bermudan_put_geobasket(strike));
    out.push_back(terminal_geobasket_put(strike));
    return out;
  }

  BasketReduction reduction_;
  Eigen::VectorXd vols_;
  double h_;
  int grid_steps_;
  double log_u_ = 0.0;
  std::vector<std::vector<double>> cache_;
  std::vector<double> base_log_;
};

}  // namespace

std::shared_ptr<const ReferenceSurface> make_plain_compound_surface(
    OptionKind outer, OptionKind inner, double outer_strike, double inner_strike,
    double outer_maturity, double inner_maturity, double rate, double dividend, double sigma) {
  if (!(outer_maturity > 0.0) || !(inner_maturity > outer_maturity)) {
    throw Error(ErrorCode::InvalidTimes, "plain compound needs 0 < T1 < T2");
  }
  return std::make_shared<PlainCompoundSurface>(outer, inner, outer_strike, inner_strike,
                                                outer_maturity, inner_maturity, rate, dividend,
                                                sigma);
}

std::shared_ptr<const ReferenceSurface> make_european_surface(
    OptionKind kind, double strike, std::vector<double> compounding_times, double rate,
    double dividend, double sigma) {
  if (compounding_times.empty()) throw Error(ErrorCode::InvalidArgument, "no stages");
  return std::make_shared<EuropeanSurface>(kind, strike, std::move(compounding_times), rate,
                                           dividend, sigma);
}

std::shared_ptr<const ReferenceSurface> make_mfold_surface(std::vector<double> strikes,
                                                           std::vector<double> times, double rate,
                                                           double dividend, double sigma,
                                                           const NormalCdfConfig& cfg) {
  return std::make_shared<MfoldSurface>(std::move(strikes), std::move(times), rate, dividend,
                                        sigma, cfg);
}

std::shared_ptr<const ReferenceSurface> make_bermudan_surface(const GbmModel& model,
                                                              double strike,
                                                              const TimeGrid& grid,
                                                              int tree_steps) {
  return std::make_shared<BermudanSurface>(model, strike, grid, tree_steps);
}

}  // namespace cbsde
