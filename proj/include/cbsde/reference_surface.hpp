#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "cbsde/basket.hpp"
#include "cbsde/gbm_model.hpp"
#include "cbsde/normal.hpp"
#include "cbsde/payoff.hpp"
#include "cbsde/time_grid.hpp"

namespace cbsde {

struct SurfacePoint {
  double y = 0.0;
  /// Z = (grad_x u)^T Sigma diag(x), one entry per asset.
  Eigen::VectorXd z;
};

/// Exact stage solutions (u_j, Z_j) of a compound problem.
///
/// On [T_{j-1}, T_j) a stage returns its own value function. At T_j the
/// value is the compounding condition applied to the next stage,
/// g_j(x, u_{j+1}(T_j, x)), and the terminal payoff on the last stage; Z at
/// these endpoints is chained through dg/dy and is zero at maturity.
class ReferenceSurface {
 public:
  ReferenceSurface(std::vector<double> compounding_times,
                   std::vector<CompoundingCondition> conditions);
  virtual ~ReferenceSurface() = default;

  int stage_count() const { return static_cast<int>(times_.size()); }
  const std::vector<double>& compounding_times() const { return times_; }

  /// OutOfRange for t outside the stage; OutOfDomain where the surface is
  /// not available.
  SurfacePoint evaluate(int stage, double t, const Eigen::VectorXd& x) const;

 protected:
  /// Stage value for T_{j-1} <= t < T_j.
  virtual SurfacePoint stage_value(int stage, double t, const Eigen::VectorXd& x) const = 0;

 private:
  std::vector<double> times_;
  std::vector<CompoundingCondition> conditions_;
};

/// Geske on stage 1 and Black-Scholes on stage 2.
std::shared_ptr<const ReferenceSurface> make_plain_compound_surface(
    OptionKind outer, OptionKind inner, double outer_strike, double inner_strike,
    double outer_maturity, double inner_maturity, double rate, double dividend, double sigma);

/// Black-Scholes on every stage of a passthrough chain.
std::shared_ptr<const ReferenceSurface> make_european_surface(
    OptionKind kind, double strike, std::vector<double> compounding_times, double rate,
    double dividend, double sigma);

/// Stage j is the (M - j + 1)-fold chain on the remaining dates. Each call
/// runs lattice integrations, so this is slow for large batches.
std::shared_ptr<const ReferenceSurface> make_mfold_surface(std::vector<double> strikes,
                                                           std::vector<double> times, double rate,
                                                           double dividend, double sigma,
                                                           const NormalCdfConfig& cfg = {});

/// Bermudan geometric-basket put from one CRR tree on the reduced asset.
/// Tree layers are aligned with the grid points of `grid` and values are
/// cached at those layers; evaluation is restricted to grid times and uses
/// cubic interpolation in log x. Values late in the horizon sit on few
/// remaining layers, so this needs a finer lattice than a single price does.
std::shared_ptr<const ReferenceSurface> make_bermudan_surface(const GbmModel& model,
                                                              double strike,
                                                              const TimeGrid& grid,
                                                              int tree_steps = 40000);

}  // namespace cbsde
