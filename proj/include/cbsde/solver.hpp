#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbsde/adam.hpp"
#include "cbsde/mlp.hpp"
#include "cbsde/path_batch.hpp"
#include "cbsde/payoff.hpp"

namespace cbsde {

/// Fixed affine maps around the networks. Inputs are fed as t / T and
/// (x - x0) / (x0 s) with s the per-asset log-volatility over the horizon;
/// network outputs are multiplied by y_scale (initial values) and by
/// z_scale[l] (column l of Z).
struct InputScaling {
  double inv_maturity = 1.0;
  Eigen::VectorXd centre;
  Eigen::VectorXd inv_width;
  Eigen::VectorXd z_scale;
  double y_scale = 1.0;

  static InputScaling for_spec(const CompoundSpec& spec);
};

/// Trainable parameters of the compound solver.
///
/// Stage 0 starts from a bare vector (the initial state is deterministic),
/// stage j >= 1 from a network x -> Y_{j, T_{j-1}}. Each stage has one
/// control network (t, x) -> Z with Z[k][l] at output k * d1 + l.
///
/// Flat layout: [y0 | heads for stages 1..M-1 | control nets for stages 0..M-1].
class SolverNets {
 public:
  /// hidden_widths empty means two layers of 10 + d1.
  SolverNets(const CompoundSpec& spec, std::uint64_t seed, std::vector<int> hidden_widths = {});

  int stages() const { return static_cast<int>(z_nets_.size()); }
  int state_dim() const { return state_dim_; }
  int value_dim() const { return value_dim_; }

  Eigen::VectorXd& y0() { return y0_; }
  const Eigen::VectorXd& y0() const { return y0_; }
  /// Initial-value network of stage j >= 1.
  Mlp& head(int stage) { return heads_[stage - 1]; }
  const Mlp& head(int stage) const { return heads_[stage - 1]; }
  Mlp& z_net(int stage) { return z_nets_[stage]; }
  const Mlp& z_net(int stage) const { return z_nets_[stage]; }
  const InputScaling& scaling() const { return scaling_; }

  std::size_t parameter_count() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::Ref<const Eigen::VectorXd>& flat);

  std::size_t head_offset(int stage) const;
  std::size_t z_offset(int stage) const;

  /// Flat indices [begin, end) of every block owned by stage j.
  std::vector<std::pair<std::size_t, std::size_t>> stage_blocks(int stage) const;

  /// Y_{j, T_{j-1}} for each column of x (d2 x B).
  Eigen::MatrixXd initial_value(int stage, const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  /// Z_{j, t} for each column of x (d2*d1 x B).
  Eigen::MatrixXd control(int stage, double t, const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  /// Network inputs for the head and for the control net.
  Eigen::MatrixXd head_features(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  void control_features(double t, const Eigen::Ref<const Eigen::MatrixXd>& x,
                        Eigen::Ref<Eigen::MatrixXd> out) const;

 private:
  int state_dim_;
  int value_dim_;
  InputScaling scaling_;
  Eigen::VectorXd y0_;
  std::vector<Mlp> heads_;
  std::vector<Mlp> z_nets_;
};

/// Rolled-out backward processes on a path batch.
///
/// y[j] is d2 x (B * (N_j + 1)) and z[j] is d2*d1 x (B * N_j); column
/// s * B + b holds path b at the s-th grid point of stage j.
/// residual[j] is d2 x B.
struct RolloutResult {
  int batch = 0;
  std::vector<Eigen::MatrixXd> y;
  std::vector<Eigen::MatrixXd> z;
  std::vector<Eigen::MatrixXd> residual;

  auto y_at(int stage, int s) const {
    return y[stage].middleCols(static_cast<Eigen::Index>(s) * batch, batch);
  }
  auto z_at(int stage, int s) const {
    return z[stage].middleCols(static_cast<Eigen::Index>(s) * batch, batch);
  }
};

struct EvalOptions {
  int threads = 1;
  /// Paths per work unit; fixes the reduction order.
  int chunk = 128;
};

/// Explicit Euler rollout of all stages on the given paths. NonFiniteValue if
/// any residual is not finite.
RolloutResult rollout(const CompoundSpec& spec, const SolverNets& nets, const PathBatch& paths,
                      const EvalOptions& options = {});

/// Sum over stages of the batch mean of squared residual norms.
double loss(const RolloutResult& result);

/// Loss and its exact gradient with respect to nets.flatten().
double loss_and_gradient(const CompoundSpec& spec, const SolverNets& nets,
                         const PathBatch& paths, Eigen::VectorXd& gradient,
                         const EvalOptions& options = {});

struct TrainConfig {
  int iterations = 4000;
  int batch = 5000;
  int validation_batch = 5000;
  double learning_rate = 0.01;
  double decay_rate = 0.5;
  /// 0 means iterations / 5.
  std::int64_t decay_steps = 0;
  std::vector<int> hidden_widths;
  EvalOptions eval;
};

struct TrainReport {
  std::uint64_t seed = 0;
  TrainConfig config;
  std::vector<double> losses;
  double validation_loss = 0.0;
  double wall_seconds = 0.0;
  double price = 0.0;
  Eigen::VectorXd delta;
  /// Gradient norm per stage at the first iteration.
  std::vector<double> initial_stage_grad_norms;
  std::int64_t clamped_states = 0;
};

struct TrainResult {
  SolverNets nets;
  TrainReport report;
};

/// Adam on fresh paths every iteration; Diverged on a non-finite loss.
TrainResult train(const CompoundSpec& spec, std::uint64_t seed, const TrainConfig& config);

/// Y_{1,0} and delta from Z at (0, x0): delta = Z (diag(x0) Sigma)^{-1}.
/// NonDiagonalSigma when a non-diagonal Sigma makes that map singular.
std::pair<double, Eigen::VectorXd> extract_price_and_delta(const CompoundSpec& spec,
                                                           const SolverNets& nets);

/// Network bundle checkpoint: "CBSDESNT", u32 version, u32 stage count, then
/// one MLP record per head and control net (see checkpoint.hpp) after the y0
/// vector (u64 length, f64 entries).
void write_solver_checkpoint(const std::string& path, const SolverNets& nets,
                             std::uint64_t seed, std::uint64_t step);
void read_solver_checkpoint(const std::string& path, SolverNets& nets);

}  // namespace cbsde
