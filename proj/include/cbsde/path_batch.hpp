#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cbsde/gbm_model.hpp"
#include "cbsde/time_grid.hpp"

namespace cbsde {

/// Floor applied to Euler states that step below zero.
inline constexpr double kStateFloor = 1e-12;

namespace detail {
struct PathBatchAccess;
}

/// Simulated forward states and correlated Brownian increments.
///
/// Storage is [step][path][dim], so the states of all paths at one grid index
/// form a contiguous column-major (dim x batch) block.
class PathBatch {
 public:
  using ConstBlock = Eigen::Map<const Eigen::MatrixXd>;

  PathBatch(int batch, int steps, int dim, std::uint64_t seed);

  int batch() const { return batch_; }
  int steps() const { return steps_; }
  int dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }

  double state(int step, int path, int k) const {
    return states_[(static_cast<std::size_t>(step) * batch_ + path) * dim_ + k];
  }
  double increment(int step, int path, int k) const {
    return increments_[(static_cast<std::size_t>(step) * batch_ + path) * dim_ + k];
  }

  /// (dim x count) view of states at grid index `step` for paths [first, first + count).
  ConstBlock states_at(int step, int first, int count) const {
    return ConstBlock(states_.data() + (static_cast<std::size_t>(step) * batch_ + first) * dim_,
                      dim_, count);
  }
  ConstBlock increments_at(int step, int first, int count) const {
    return ConstBlock(
        increments_.data() + (static_cast<std::size_t>(step) * batch_ + first) * dim_, dim_,
        count);
  }

  const std::vector<double>& states() const { return states_; }
  const std::vector<double>& increments() const { return increments_; }

  /// Number of (path, step, component) states that were floored at kStateFloor.
  std::int64_t clamped_states() const { return clamped_states_; }
  /// Number of paths with at least one floored state.
  std::int64_t clamped_paths() const { return clamped_paths_; }

 private:
  friend struct detail::PathBatchAccess;

  int batch_;
  int steps_;
  int dim_;
  std::uint64_t seed_;
  std::vector<double> states_;
  std::vector<double> increments_;
  std::int64_t clamped_states_ = 0;
  std::int64_t clamped_paths_ = 0;
};

struct SimulationOptions {
  int threads = 1;
  /// Euler on log X instead of X (exact for GBM at grid points).
  bool log_euler = false;
};

/// Draws i.i.d. correlated increments Delta W = L xi sqrt(h) (one independent
/// stream per path derived from `seed`) and runs the Euler scheme.
PathBatch simulate_forward(const GbmModel& model, const TimeGrid& grid, int batch,
                           std::uint64_t seed, const SimulationOptions& options = {});

/// Euler scheme on caller-supplied increments laid out [step][path][dim].
PathBatch euler_paths(const GbmModel& model, const TimeGrid& grid,
                      std::vector<double> increments, int batch, std::uint64_t seed,
                      bool log_euler = false);

/// Exact GBM solution at grid points driven by the batch's own increments.
/// Returned with the same [step][path][dim] layout as PathBatch::states().
std::vector<double> exact_states(const GbmModel& model, const TimeGrid& grid,
                                 const PathBatch& paths);

}  // namespace cbsde
