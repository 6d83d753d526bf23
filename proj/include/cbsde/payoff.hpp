#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbsde/gbm_model.hpp"
#include "cbsde/time_grid.hpp"

namespace cbsde {

enum class OptionKind { Call, Put };

std::string to_string(OptionKind kind);
OptionKind parse_option_kind(const std::string& text);

/// BSDE generator f(t, x, y, z) evaluated on a batch.
///
/// Shapes: x is (d1 x B), y is (d2 x B), z is (d2*d1 x B) with Z[k][l]
/// stored at row k*d1 + l; results are (d2 x B).
class Driver {
 public:
  virtual ~Driver() = default;

  virtual void evaluate(double t, const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::MatrixXd>& y,
                        const Eigen::Ref<const Eigen::MatrixXd>& z,
                        Eigen::MatrixXd& out) const = 0;

  /// Adds upstream^T (df/dy) into dy and upstream^T (df/dz) into dz, per sample.
  virtual void pullback(double t, const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::MatrixXd>& y,
                        const Eigen::Ref<const Eigen::MatrixXd>& z,
                        const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                        Eigen::Ref<Eigen::MatrixXd> dy, Eigen::Ref<Eigen::MatrixXd> dz) const = 0;

  /// Declared Lipschitz constants, for diagnostics only.
  virtual double lipschitz_y() const = 0;
  virtual double lipschitz_z() const = 0;
  virtual std::string name() const = 0;
};

/// f(t, x, y, z) = -r y.
std::shared_ptr<const Driver> driver_discounting(double rate);

enum class ConditionKind { Passthrough, CallOnValue, PutOnValue, BermudanMax, Terminal };

/// Immediate exercise value used by Bermudan and terminal conditions.
enum class Exercise { None, Call, Put, GeoBasketPut };

/// Compounding condition g_j(x, y) for j < M, or terminal condition g_M(x).
/// All shipped kinds act componentwise on y and are 1-Lipschitz in y.
struct CompoundingCondition {
  ConditionKind kind = ConditionKind::Passthrough;
  Exercise exercise = Exercise::None;
  double strike = 0.0;

  bool is_terminal() const { return kind == ConditionKind::Terminal; }

  /// out = g(x, y); y is ignored (may be empty) for terminal conditions.
  void evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::MatrixXd>& y, int value_dim,
                Eigen::MatrixXd& out) const;

  /// Elementwise dg/dy (same shape as y). On ties the max/positive-part picks
  /// its second argument, so the derivative there is 0.
  void derivative_y(const Eigen::Ref<const Eigen::MatrixXd>& x,
                    const Eigen::Ref<const Eigen::MatrixXd>& y, Eigen::MatrixXd& out) const;

  /// Exercise value of each column of x (1 x B).
  Eigen::RowVectorXd exercise_value(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  /// Single-sample convenience wrapper around evaluate().
  Eigen::VectorXd apply(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x, double y) const {
    return apply(x, Eigen::VectorXd::Constant(1, y));
  }

  std::string describe() const;
};

CompoundingCondition cond_passthrough();
CompoundingCondition cond_call_on_value(double strike);
CompoundingCondition cond_put_on_value(double strike);
/// max(y, (K - geomean(x))^+).
CompoundingCondition cond_bermudan_put_geobasket(double strike);
/// max(y, (x - K)^+); one-dimensional state only.
CompoundingCondition cond_bermudan_call(double strike);
CompoundingCondition terminal_call(double strike);
CompoundingCondition terminal_put(double strike);
CompoundingCondition terminal_geobasket_put(double strike);

/// Geometric mean of each column; NonPositiveState on entries <= 0.
Eigen::RowVectorXd geometric_mean(const Eigen::Ref<const Eigen::MatrixXd>& x);

/// One compound BSDE problem: forward GBM plus M drivers and conditions.
struct CompoundSpec {
  TimeGrid grid;
  GbmModel model;
  std::vector<std::shared_ptr<const Driver>> drivers;
  std::vector<CompoundingCondition> conditions;
  int value_dim = 1;

  int stages() const { return grid.stage_count(); }
  void validate() const;
};

CompoundSpec build_spec_plain_compound(OptionKind outer, OptionKind inner, double outer_strike,
                                       double inner_strike, double outer_maturity,
                                       double inner_maturity, const GbmModel& model,
                                       int steps);

/// M-fold compound call: call-on-value at T_1..T_{M-1}, call on x at T_M.
CompoundSpec build_spec_mfold(std::span<const double> strikes, std::span<const double> times,
                              const GbmModel& model, int steps);

/// Bermudan put on the geometric basket exercisable at every date.
CompoundSpec build_spec_bermudan_geobasket(double strike, std::span<const double> dates,
                                           const GbmModel& model, int steps);

/// European option split into `stages` equal passthrough stages.
CompoundSpec build_spec_european(OptionKind kind, double strike, double maturity,
                                 const GbmModel& model, int steps, int stages);

}  // namespace cbsde
