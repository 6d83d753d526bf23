#include "cbsde/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cbsde/errors.hpp"

namespace cbsde {

namespace {

void check_monotone(std::span<const double> times) {
  if (times.empty()) {
    throw Error(ErrorCode::NonMonotoneTimes, "no compounding times given");
  }
  double prev = 0.0;
  for (double t : times) {
    if (!(t > prev) || !std::isfinite(t)) {
      throw Error(ErrorCode::NonMonotoneTimes,
                  "compounding times must satisfy 0 < T_1 < ... < T_M");
    }
    prev = t;
  }
}

}  // namespace

TimeGrid::TimeGrid(std::vector<double> compounding_times, std::vector<int> steps_per_stage)
    : times_(std::move(compounding_times)), steps_(std::move(steps_per_stage)) {
  check_monotone(times_);
  if (steps_.size() != times_.size()) {
    throw Error(ErrorCode::InvalidArgument, "one step count per stage required");
  }
  offsets_.assign(1, 0);
  for (int n : steps_) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "stage step counts must be positive");
    offsets_.push_back(offsets_.back() + n);
  }
  total_steps_ = offsets_.back();
  step_ = times_.back() / total_steps_;

  double prev = 0.0;
  for (std::size_t j = 0; j < times_.size(); ++j) {
    const double stage_step = (times_[j] - prev) / steps_[j];
    if (std::abs(stage_step - step_) > 1e-12 * step_) {
      throw Error(ErrorCode::NoCommonStep,
                  "stage " + std::to_string(j + 1) + " step differs from the common step");
    }
    prev = times_[j];
  }
}

int TimeGrid::project(double t) const {
  const double T = maturity();
  if (!(t >= 0.0) || t > T * (1.0 + 1e-12)) {
    throw Error(ErrorCode::OutOfRange, "time " + std::to_string(t) + " outside [0, T]");
  }
  if (t >= T * (1.0 - 1e-14)) return total_steps_;
  // Grid points computed as i * h must project to themselves despite roundoff.
  const int i = static_cast<int>(std::floor(t / step_ + 1e-9));
  return std::min(i, total_steps_);
}

TimeGrid build_grid(double maturity, std::span<const double> compounding_times,
                    int total_steps_hint) {
  check_monotone(compounding_times);
  if (total_steps_hint < 1) {
    throw Error(ErrorCode::InvalidArgument, "total_steps_hint must be positive");
  }
  if (std::abs(compounding_times.back() - maturity) > 1e-12 * maturity) {
    throw Error(ErrorCode::InvalidArgument, "last compounding time must equal the maturity");
  }

  for (int n = total_steps_hint; n <= 4 * total_steps_hint; ++n) {
    std::vector<int> steps;
    double prev = 0.0;
    bool ok = true;
    for (double t : compounding_times) {
      const double exact = (t - prev) / maturity * n;
      const double rounded = std::round(exact);
      if (rounded < 1.0 || std::abs(exact - rounded) > 1e-9 * n) {
        ok = false;
        break;
      }
      steps.push_back(static_cast<int>(rounded));
      prev = t;
    }
    if (ok) {
      std::vector<double> times(compounding_times.begin(), compounding_times.end());
      times.back() = maturity;
      return TimeGrid(std::move(times), std::move(steps));
    }
  }
  throw Error(ErrorCode::NoCommonStep,
              "stage lengths are incommensurable at the requested resolution");
}

}  // namespace cbsde
