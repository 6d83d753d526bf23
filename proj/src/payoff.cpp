#include "cbsde/payoff.hpp"

#include <cmath>
#include <sstream>

#include "cbsde/errors.hpp"

namespace cbsde {

std::string to_string(OptionKind kind) { return kind == OptionKind::Call ? "call" : "put"; }

OptionKind parse_option_kind(const std::string& text) {
  if (text == "call") return OptionKind::Call;
  if (text == "put") return OptionKind::Put;
  throw Error(ErrorCode::InvalidArgument, "option kind must be 'call' or 'put', got '" + text + "'");
}

namespace {

class DiscountingDriver final : public Driver {
 public:
  explicit DiscountingDriver(double rate) : rate_(rate) {}

  void evaluate(double, const Eigen::Ref<const Eigen::MatrixXd>&,
                const Eigen::Ref<const Eigen::MatrixXd>& y, const Eigen::Ref<const Eigen::MatrixXd>&,
                Eigen::MatrixXd& out) const override {
    out = -rate_ * y;
  }

  void pullback(double, const Eigen::Ref<const Eigen::MatrixXd>&,
                const Eigen::Ref<const Eigen::MatrixXd>&, const Eigen::Ref<const Eigen::MatrixXd>&,
                const Eigen::Ref<const Eigen::MatrixXd>& upstream, Eigen::Ref<Eigen::MatrixXd> dy,
                Eigen::Ref<Eigen::MatrixXd>) const override {
    dy -= rate_ * upstream;
  }

  double lipschitz_y() const override { return std::abs(rate_); }
  double lipschitz_z() const override { return 0.0; }
  std::string name() const override {
    std::ostringstream os;
    os << "discounting(r=" << rate_ << ")";
    return os.str();
  }

 private:
  double rate_;
};

void check_strike(double strike) {
  if (!(strike >= 0.0) || !std::isfinite(strike)) {
    throw Error(ErrorCode::InvalidArgument, "strike must be finite and non-negative");
  }
}

}  // namespace

std::shared_ptr<const Driver> driver_discounting(double rate) {
  return std::make_shared<DiscountingDriver>(rate);
}

Eigen::RowVectorXd geometric_mean(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if ((x.array() <= 0.0).any()) {
    throw Error(ErrorCode::NonPositiveState, "geometric mean needs positive states");
  }
  return (x.array().log().colwise().sum() / static_cast<double>(x.rows())).exp();
}

Eigen::RowVectorXd CompoundingCondition::exercise_value(
    const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  switch (exercise) {
    case Exercise::None:
      return Eigen::RowVectorXd::Zero(x.cols());
    case Exercise::Call:
    case Exercise::Put: {
      if (x.rows() != 1) {
        throw Error(ErrorCode::DimensionMismatch, "single-asset exercise needs a 1-d state");
      }
      const Eigen::RowVectorXd s = x.row(0);
      if (exercise == Exercise::Call) return (s.array() - strike).max(0.0).matrix();
      return (strike - s.array()).max(0.0).matrix();
    }
    case Exercise::GeoBasketPut:
      return (strike - geometric_mean(x).array()).max(0.0);
  }
  return {};
}

void CompoundingCondition::evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                    const Eigen::Ref<const Eigen::MatrixXd>& y, int value_dim,
                                    Eigen::MatrixXd& out) const {
  if (kind == ConditionKind::Terminal) {
    out = exercise_value(x).replicate(value_dim, 1);
    return;
  }
  if (y.cols() != x.cols() || y.rows() != value_dim) {
    throw Error(ErrorCode::ShapeMismatch, "condition value input has wrong shape");
  }
  switch (kind) {
    case ConditionKind::Passthrough:
      out = y;
      break;
    case ConditionKind::CallOnValue:
      out = (y.array() - strike).max(0.0);
      break;
    case ConditionKind::PutOnValue:
      out = (strike - y.array()).max(0.0);
      break;
    case ConditionKind::BermudanMax: {
      const Eigen::RowVectorXd e = exercise_value(x);
      out = y.array().max(e.replicate(value_dim, 1).array());
      break;
    }
    case ConditionKind::Terminal:
      break;
  }
}

void CompoundingCondition::derivative_y(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                        const Eigen::Ref<const Eigen::MatrixXd>& y,
                                        Eigen::MatrixXd& out) const {
  switch (kind) {
    case ConditionKind::Terminal:
      out = Eigen::MatrixXd::Zero(y.rows(), y.cols());
      break;
    case ConditionKind::Passthrough:
      out = Eigen::MatrixXd::Ones(y.rows(), y.cols());
      break;
    case ConditionKind::CallOnValue:
      out = (y.array() > strike).cast<double>();
      break;
    case ConditionKind::PutOnValue:
      out = -(y.array() < strike).cast<double>();
      break;
    case ConditionKind::BermudanMax: {
      const Eigen::RowVectorXd e = exercise_value(x);
      out = (y.array() > e.replicate(y.rows(), 1).array()).cast<double>();
      break;
    }
  }
}

Eigen::VectorXd CompoundingCondition::apply(const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& y) const {
  Eigen::MatrixXd out;
  const int value_dim = is_terminal() && y.size() == 0 ? 1 : static_cast<int>(y.size());
  evaluate(x, y, value_dim, out);
  return out.col(0);
}

std::string CompoundingCondition::describe() const {
  std::ostringstream os;
  auto ex = [&] {
    switch (exercise) {
      case Exercise::Call: return std::string("(x-K)+");
      case Exercise::Put: return std::string("(K-x)+");
      case Exercise::GeoBasketPut: return std::string("(K-geomean(x))+");
      case Exercise::None: break;
    }
    return std::string("0");
  };
  switch (kind) {
    case ConditionKind::Passthrough: os << "y"; break;
    case ConditionKind::CallOnValue: os << "(y-K)+"; break;
    case ConditionKind::PutOnValue: os << "(K-y)+"; break;
    case ConditionKind::BermudanMax: os << "max(y," << ex() << ")"; break;
    case ConditionKind::Terminal: os << ex(); break;
  }
  if (kind != ConditionKind::Passthrough) os << " K=" << strike;
  return os.str();
}

CompoundingCondition cond_passthrough() { return {ConditionKind::Passthrough, Exercise::None, 0.0}; }

CompoundingCondition cond_call_on_value(double strike) {
  check_strike(strike);
  return {ConditionKind::CallOnValue, Exercise::None, strike};
}

CompoundingCondition cond_put_on_value(double strike) {
  check_strike(strike);
  return {ConditionKind::PutOnValue, Exercise::None, strike};
}

CompoundingCondition cond_bermudan_put_geobasket(double strike) {
  if (!(strike > 0.0)) throw Error(ErrorCode::InvalidArgument, "basket strike must be positive");
  return {ConditionKind::BermudanMax, Exercise::GeoBasketPut, strike};
}

CompoundingCondition cond_bermudan_call(double strike) {
  check_strike(strike);
  return {ConditionKind::BermudanMax, Exercise::Call, strike};
}

CompoundingCondition terminal_call(double strike) {
  check_strike(strike);
  return {ConditionKind::Terminal, Exercise::Call, strike};
}

CompoundingCondition terminal_put(double strike) {
  check_strike(strike);
  return {ConditionKind::Terminal, Exercise::Put, strike};
}

CompoundingCondition terminal_geobasket_put(double strike) {
  if (!(strike > 0.0)) throw Error(ErrorCode::InvalidArgument, "basket strike must be positive");
  return {ConditionKind::Terminal, Exercise::GeoBasketPut, strike};
}

void CompoundSpec::validate() const {
  model.validate();
  const auto m = static_cast<std::size_t>(grid.stage_count());
  if (drivers.size() != m || conditions.size() != m) {
    throw Error(ErrorCode::ShapeMismatch, "need one driver and one condition per stage");
  }
  if (value_dim < 1) throw Error(ErrorCode::InvalidArgument, "value dimension must be positive");
  for (std::size_t j = 0; j < m; ++j) {
    if (!drivers[j]) throw Error(ErrorCode::InvalidArgument, "missing driver");
    const auto& c = conditions[j];
    if (c.is_terminal() != (j + 1 == m)) {
      throw Error(ErrorCode::InvalidArgument, "exactly the last condition must be terminal");
    }
    if ((c.exercise == Exercise::Call || c.exercise == Exercise::Put) && model.dim() != 1) {
      throw Error(ErrorCode::DimensionMismatch, "single-asset payoff on a multi-asset model");
    }
  }
}

namespace {

CompoundSpec assemble(TimeGrid grid, const GbmModel& model,
                      std::vector<CompoundingCondition> conditions) {
  std::vector<std::shared_ptr<const Driver>> drivers(conditions.size(),
                                                     driver_discounting(model.rate));
  CompoundSpec spec{std::move(grid), model, std::move(drivers), std::move(conditions), 1};
  spec.validate();
  return spec;
}

}  // namespace

CompoundSpec build_spec_plain_compound(OptionKind outer, OptionKind inner, double outer_strike,
                                       double inner_strike, double outer_maturity,
                                       double inner_maturity, const GbmModel& model,
                                       int steps) {
  if (!(outer_maturity > 0.0) || !(inner_maturity > outer_maturity)) {
    throw Error(ErrorCode::InvalidTimes, "plain compound needs 0 < T1 < T2");
  }
  const std::vector<double> times{outer_maturity, inner_maturity};
  std::vector<CompoundingCondition> conditions{
      outer == OptionKind::Call ? cond_call_on_value(outer_strike)
                                : cond_put_on_value(outer_strike),
      inner == OptionKind::Call ? terminal_call(inner_strike) : terminal_put(inner_strike)};
  return assemble(build_grid(inner_maturity, times, steps), model, std::move(conditions));
}

CompoundSpec build_spec_mfold(std::span<const double> strikes, std::span<const double> times,
                              const GbmModel& model, int steps) {
  if (strikes.empty() || strikes.size() != times.size()) {
    throw Error(ErrorCode::InvalidArgument, "need one strike per exercise time");
  }
  std::vector<CompoundingCondition> conditions;
  for (std::size_t j = 0; j + 1 < strikes.size(); ++j) {
    conditions.push_back(cond_call_on_value(strikes[j]));
  }
  conditions.push_back(terminal_call(strikes.back()));
  return assemble(build_grid(times.back(), times, steps), model, std::move(conditions));
}

CompoundSpec build_spec_bermudan_geobasket(double strike, std::span<const double> dates,
                                           const GbmModel& model, int steps) {
  if (dates.empty()) throw Error(ErrorCode::InvalidArgument, "no exercise dates");
  std::vector<CompoundingCondition> conditions(dates.size() - 1,
                                               cond_bermudan_put_geobasket(strike));
  conditions.push_back(terminal_geobasket_put(strike));
  return assemble(build_grid(dates.back(), dates, steps), model, std::move(conditions));
}

CompoundSpec build_spec_european(OptionKind kind, double strike, double maturity,
                                 const GbmModel& model, int steps, int stages) {
  if (stages < 1) throw Error(ErrorCode::InvalidArgument, "stage count must be positive");
  std::vector<double> times;
  for (int j = 1; j <= stages; ++j) times.push_back(maturity * j / stages);
  times.back() = maturity;
  std::vector<CompoundingCondition> conditions(stages - 1, cond_passthrough());
  conditions.push_back(kind == OptionKind::Call ? terminal_call(strike) : terminal_put(strike));
  return assemble(build_grid(maturity, times, steps), model, std::move(conditions));
}

}  // namespace cbsde
