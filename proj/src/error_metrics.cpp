#include "cbsde/error_metrics.hpp"

#include <algorithm>

#include "cbsde/errors.hpp"

namespace cbsde {

ErrorReport error_metrics_from_trajectories(const CompoundSpec& spec, const PathBatch& paths,
                                            const std::vector<double>& reference_states,
                                            const RolloutResult& result,
                                            const ReferenceSurface& reference) {
  const TimeGrid& grid = spec.grid;
  const int m = spec.stages();
  const int d1 = spec.model.dim();
  const int batch = paths.batch();
  if (reference.stage_count() != m) {
    throw Error(ErrorCode::ReferenceUnavailable, "reference surface has the wrong stage count");
  }
  if (spec.value_dim != 1) {
    throw Error(ErrorCode::ReferenceUnavailable, "reference surfaces are scalar-valued");
  }
  if (reference_states.size() != paths.states().size() || result.batch != batch ||
      static_cast<int>(result.y.size()) != m) {
    throw Error(ErrorCode::ShapeMismatch, "trajectories do not match the path batch");
  }
  auto exact = [&](int i, int p) {
    return Eigen::Map<const Eigen::VectorXd>(
        reference_states.data() + (static_cast<std::size_t>(i) * batch + p) * d1, d1);
  };

  ErrorReport report;
  report.h = grid.step();
  for (int i = 0; i <= grid.total_steps(); ++i) {
    double sum = 0.0;
    for (int p = 0; p < batch; ++p) {
      for (int k = 0; k < d1; ++k) {
        const double e = exact(i, p)[k] - paths.state(i, p, k);
        sum += e * e;
      }
    }
    report.err_x = std::max(report.err_x, sum / batch);
  }

  try {
    for (int j = 0; j < m; ++j) {
      const int begin = grid.stage_begin(j);
      const int steps = grid.stage_end(j) - begin;
      double z_sum = 0.0;
      for (int s = 0; s <= steps; ++s) {
        const double t = grid.time(begin + s);
        const auto y = result.y_at(j, s);
        double y_sum = 0.0;
        for (int p = 0; p < batch; ++p) {
          const SurfacePoint ref = reference.evaluate(j, t, exact(begin + s, p));
          const double e = ref.y - y(0, p);
          y_sum += e * e;
          if (s < steps) z_sum += (ref.z - result.z_at(j, s).col(p).head(d1)).squaredNorm();
        }
        report.err_y = std::max(report.err_y, y_sum / batch);
      }
      report.err_z += z_sum / batch * grid.step();
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::OutOfDomain) {
      throw Error(ErrorCode::ReferenceUnavailable, e.what());
    }
    throw;
  }
  report.loss = loss(result);
  report.total = report.err_x + report.err_y + report.err_z;
  return report;
}

ErrorReport error_metrics(const CompoundSpec& spec, const SolverNets& nets,
                          const ReferenceSurface& reference, int eval_batch, std::uint64_t seed,
                          const EvalOptions& options) {
  const PathBatch paths =
      simulate_forward(spec.model, spec.grid, eval_batch, seed, {options.threads, false});
  const std::vector<double> states = exact_states(spec.model, spec.grid, paths);
  const RolloutResult result = rollout(spec, nets, paths, options);
  return error_metrics_from_trajectories(spec, paths, states, result, reference);
}

}  // namespace cbsde
