#pragma once

#include <cstdint>
#include <vector>

#include "cbsde/path_batch.hpp"
#include "cbsde/reference_surface.hpp"
#include "cbsde/solver.hpp"

namespace cbsde {

struct ErrorReport {
  double err_x = 0.0;
  double err_y = 0.0;
  double err_z = 0.0;
  /// err_x + err_y + err_z.
  double total = 0.0;
  /// Training objective on the evaluation batch.
  double loss = 0.0;
  double h = 0.0;
};

/// Pathwise errors against the exact solution on a fresh batch.
///
/// The exact state is the log-normal solution driven by the batch's own
/// increments; the exact (Y, Z) is the reference surface evaluated on it.
///   Err(X) = max_i mean |X_i - X^pi_i|^2
///   Err(Y) = max_{j, i in stage j} mean |Y_j(t_i) - Y^pi_{j,i}|^2
///   Err(Z) = sum_j sum_{i in stage j} mean |Z_j(t_i) - Z^pi_{j,i}|^2 h
/// ReferenceUnavailable if the surface does not cover the problem.
ErrorReport error_metrics(const CompoundSpec& spec, const SolverNets& nets,
                          const ReferenceSurface& reference, int eval_batch, std::uint64_t seed,
                          const EvalOptions& options = {});

/// Same metrics from precomputed pieces. `reference_states` uses the
/// PathBatch layout; the surface is evaluated on those states.
ErrorReport error_metrics_from_trajectories(const CompoundSpec& spec, const PathBatch& paths,
                                            const std::vector<double>& reference_states,
                                            const RolloutResult& result,
                                            const ReferenceSurface& reference);

}  // namespace cbsde
