#include "cbsde/path_batch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cbsde/errors.hpp"
#include "cbsde/parallel.hpp"
#include "cbsde/rng.hpp"

namespace cbsde {

namespace {

constexpr int kPathChunk = 512;

void check_inputs(const GbmModel& model, int batch) {
  model.validate();
  if (batch < 1) throw Error(ErrorCode::InvalidArgument, "batch must be positive");
}

// Runs the state recursion for paths [first, last); returns floored-state count
// and the number of affected paths.
std::pair<std::int64_t, std::int64_t> run_euler(const GbmModel& model, double h, int steps,
                                                int batch, const double* increments,
                                                double* states, int first, int last,
                                                bool log_euler) {
  const int d = model.dim();
  const Eigen::VectorXd drift = (model.rate - model.dividends.array()).matrix() * h;
  const Eigen::VectorXd log_drift =
      drift - 0.5 * h * model.log_variance_rates();
  std::int64_t clamped = 0;
  std::int64_t clamped_paths = 0;
  const Eigen::MatrixXd& vol = model.vol;
  for (int p = first; p < last; ++p) {
    bool path_clamped = false;
    for (int k = 0; k < d; ++k) states[static_cast<std::size_t>(p) * d + k] = model.spot[k];
    for (int i = 0; i < steps; ++i) {
      const std::size_t at = (static_cast<std::size_t>(i) * batch + p) * d;
      const std::size_t next = at + static_cast<std::size_t>(batch) * d;
      const double* dw = increments + at;
      for (int k = 0; k < d; ++k) {
        double shock = 0.0;
        for (int l = 0; l < d; ++l) shock += vol(k, l) * dw[l];
        const double x = states[at + k];
        double y = log_euler ? x * std::exp(log_drift[k] + shock) : x * (1.0 + drift[k] + shock);
        if (!(y > kStateFloor)) {
          y = kStateFloor;
          ++clamped;
          path_clamped = true;
        }
        states[next + k] = y;
      }
    }
    if (path_clamped) ++clamped_paths;
  }
  return {clamped, clamped_paths};
}

}  // namespace

PathBatch::PathBatch(int batch, int steps, int dim, std::uint64_t seed)
    : batch_(batch),
      steps_(steps),
      dim_(dim),
      seed_(seed),
      states_(static_cast<std::size_t>(steps + 1) * batch * dim),
      increments_(static_cast<std::size_t>(steps) * batch * dim) {}

namespace detail {

struct PathBatchAccess {
  static std::vector<double>& states(PathBatch& b) { return b.states_; }
  static std::vector<double>& increments(PathBatch& b) { return b.increments_; }
  static void add_counts(PathBatch& b, std::int64_t states, std::int64_t paths) {
    b.clamped_states_ += states;
    b.clamped_paths_ += paths;
  }
};

}  // namespace detail

using detail::PathBatchAccess;

PathBatch euler_paths(const GbmModel& model, const TimeGrid& grid,
                      std::vector<double> increments, int batch, std::uint64_t seed,
                      bool log_euler) {
  check_inputs(model, batch);
  const int d = model.dim();
  const int n = grid.total_steps();
  if (increments.size() != static_cast<std::size_t>(n) * batch * d) {
    throw Error(ErrorCode::ShapeMismatch, "increments must have steps * batch * dim entries");
  }
  PathBatch out(batch, n, d, seed);
  PathBatchAccess::increments(out) = std::move(increments);
  const auto [clamped, paths] =
      run_euler(model, grid.step(), n, batch, PathBatchAccess::increments(out).data(),
                PathBatchAccess::states(out).data(), 0, batch, log_euler);
  PathBatchAccess::add_counts(out, clamped, paths);
  return out;
}

PathBatch simulate_forward(const GbmModel& model, const TimeGrid& grid, int batch,
                           std::uint64_t seed, const SimulationOptions& options) {
  check_inputs(model, batch);
  const Eigen::MatrixXd chol = model.correlation_factor();
  const int d = model.dim();
  const int n = grid.total_steps();
  const double sqrt_h = std::sqrt(grid.step());

  std::vector<double> increments(static_cast<std::size_t>(n) * batch * d);
  const int chunks = (batch + kPathChunk - 1) / kPathChunk;
  parallel_chunks(chunks, options.threads, [&](int c) {
    const int first = c * kPathChunk;
    const int last = std::min(batch, first + kPathChunk);
    std::vector<double> xi(d);
    for (int p = first; p < last; ++p) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(p)));
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) xi[k] = rng.normal();
        double* out = increments.data() + (static_cast<std::size_t>(i) * batch + p) * d;
        for (int k = 0; k < d; ++k) {
          double acc = 0.0;
          for (int l = 0; l <= k; ++l) acc += chol(k, l) * xi[l];
          out[k] = acc * sqrt_h;
        }
      }
    }
  });

  PathBatch out(batch, n, d, seed);
  PathBatchAccess::increments(out) = std::move(increments);
  std::vector<std::pair<std::int64_t, std::int64_t>> counts(chunks);
  parallel_chunks(chunks, options.threads, [&](int c) {
    const int first = c * kPathChunk;
    const int last = std::min(batch, first + kPathChunk);
    counts[c] = run_euler(model, grid.step(), n, batch, PathBatchAccess::increments(out).data(),
                          PathBatchAccess::states(out).data(), first, last, options.log_euler);
  });
  for (const auto& [states, paths] : counts) PathBatchAccess::add_counts(out, states, paths);
  return out;
}

std::vector<double> exact_states(const GbmModel& model, const TimeGrid& grid,
                                 const PathBatch& paths) {
  model.validate();
  const int d = model.dim();
  const int n = grid.total_steps();
  const int batch = paths.batch();
  if (paths.dim() != d || paths.steps() != n) {
    throw Error(ErrorCode::ShapeMismatch, "path batch does not match model and grid");
  }
  const double h = grid.step();
  const Eigen::VectorXd log_drift =
      ((model.rate - model.dividends.array()).matrix() - 0.5 * model.log_variance_rates()) * h;

  std::vector<double> out(static_cast<std::size_t>(n + 1) * batch * d);
  Eigen::VectorXd log_x(d);
  for (int p = 0; p < batch; ++p) {
    log_x = model.spot.array().log();
    Eigen::Map<Eigen::VectorXd>(out.data() + static_cast<std::size_t>(p) * d, d) = model.spot;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd dw(d);
      for (int k = 0; k < d; ++k) dw[k] = paths.increment(i, p, k);
      log_x += log_drift + model.vol * dw;
      Eigen::Map<Eigen::VectorXd>(
          out.data() + (static_cast<std::size_t>(i + 1) * batch + p) * d, d) =
          log_x.array().exp();
    }
  }
  return out;
}

}  // namespace cbsde
