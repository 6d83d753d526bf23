#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cbsde {

/// Uniform partition of [0, T] split into stages at the compounding times.
///
/// Stage j (0-based) covers [T_{j-1}, T_j] with T_{-1} = 0 and owns
/// steps_per_stage()[j] steps of the common size step(). Grid point i sits
/// at i * step(); every compounding time is a grid point.
class TimeGrid {
 public:
  TimeGrid(std::vector<double> compounding_times, std::vector<int> steps_per_stage);

  double maturity() const { return times_.back(); }
  double step() const { return step_; }
  int total_steps() const { return total_steps_; }
  int stage_count() const { return static_cast<int>(times_.size()); }

  std::span<const double> compounding_times() const { return times_; }
  std::span<const int> steps_per_stage() const { return steps_; }

  /// Time at grid index i.
  double time(int i) const { return i * step_; }

  /// Grid index of the stage's left endpoint T_{j-1}.
  int stage_begin(int stage) const { return offsets_[stage]; }
  /// Grid index of the stage's right endpoint T_j.
  int stage_end(int stage) const { return offsets_[stage + 1]; }

  /// Floor projection onto the grid, t in [t_i, t_{i+1}) -> i; t = T -> N.
  int project(double t) const;

 private:
  std::vector<double> times_;
  std::vector<int> steps_;
  std::vector<int> offsets_;
  double step_ = 0.0;
  int total_steps_ = 0;
};

/// Smallest grid with N >= total_steps_hint (and N <= 4 * hint) whose common
/// step divides every stage exactly.
TimeGrid build_grid(double maturity, std::span<const double> compounding_times,
                    int total_steps_hint);

}  // namespace cbsde
