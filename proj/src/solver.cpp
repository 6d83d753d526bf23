#include "cbsde/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cbsde/checkpoint.hpp"
#include "cbsde/errors.hpp"
#include "cbsde/parallel.hpp"
#include "cbsde/rng.hpp"

namespace cbsde {

InputScaling InputScaling::for_spec(const CompoundSpec& spec) {
  const GbmModel& m = spec.model;
  const double maturity = spec.grid.maturity();
  const Eigen::VectorXd vol = m.log_variance_rates().cwiseSqrt();
  InputScaling s;
  s.inv_maturity = 1.0 / maturity;
  s.centre = m.spot;
  s.inv_width.resize(m.dim());
  s.z_scale.resize(m.dim());
  for (int k = 0; k < m.dim(); ++k) {
    const double width = vol[k] > 0.0 ? vol[k] * std::sqrt(maturity) : 1.0;
    s.inv_width[k] = 1.0 / (m.spot[k] * width);
    s.z_scale[k] = vol[k] > 0.0 ? vol[k] * m.spot[k] : m.spot[k];
  }
  s.y_scale = s.z_scale.mean() * std::sqrt(maturity);
  return s;
}

SolverNets::SolverNets(const CompoundSpec& spec, std::uint64_t seed,
                       std::vector<int> hidden_widths)
    : state_dim_(spec.model.dim()),
      value_dim_(spec.value_dim),
      scaling_(InputScaling::for_spec(spec)),
      y0_(Eigen::VectorXd::Zero(spec.value_dim)) {
  const int d1 = state_dim_;
  const int d2 = value_dim_;
  if (hidden_widths.empty()) hidden_widths = {10 + d1, 10 + d1};
  for (int j = 0; j < spec.stages(); ++j) {
    if (j > 0) {
      heads_.push_back(Mlp::glorot(MlpSpec{d1, d2, hidden_widths}, derive_seed(seed, 2 * j)));
    }
    z_nets_.push_back(
        Mlp::glorot(MlpSpec{1 + d1, d2 * d1, hidden_widths}, derive_seed(seed, 2 * j + 1)));
  }
}

std::size_t SolverNets::parameter_count() const {
  std::size_t total = static_cast<std::size_t>(y0_.size());
  for (const Mlp& h : heads_) total += h.parameter_count();
  for (const Mlp& z : z_nets_) total += z.parameter_count();
  return total;
}

std::size_t SolverNets::head_offset(int stage) const {
  std::size_t offset = static_cast<std::size_t>(y0_.size());
  for (int j = 1; j < stage; ++j) offset += heads_[j - 1].parameter_count();
  return offset;
}

std::size_t SolverNets::z_offset(int stage) const {
  std::size_t offset = head_offset(stages());
  for (int j = 0; j < stage; ++j) offset += z_nets_[j].parameter_count();
  return offset;
}

std::vector<std::pair<std::size_t, std::size_t>> SolverNets::stage_blocks(int stage) const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (stage == 0) {
    out.emplace_back(0, static_cast<std::size_t>(y0_.size()));
  } else {
    out.emplace_back(head_offset(stage), head_offset(stage) + head(stage).parameter_count());
  }
  out.emplace_back(z_offset(stage), z_offset(stage) + z_net(stage).parameter_count());
  return out;
}

Eigen::VectorXd SolverNets::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  auto put = [&](const Eigen::VectorXd& v) {
    flat.segment(at, v.size()) = v;
    at += v.size();
  };
  put(y0_);
  for (const Mlp& h : heads_) put(h.params());
  for (const Mlp& z : z_nets_) put(z.params());
  return flat;
}

void SolverNets::assign(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw Error(ErrorCode::ShapeMismatch, "flat parameter vector has wrong length");
  }
  Eigen::Index at = 0;
  auto take = [&](Eigen::VectorXd& v) {
    v = flat.segment(at, v.size());
    at += v.size();
  };
  take(y0_);
  for (Mlp& h : heads_) take(h.params());
  for (Mlp& z : z_nets_) take(z.params());
}

Eigen::MatrixXd SolverNets::head_features(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  return scaling_.inv_width.asDiagonal() * (x.colwise() - scaling_.centre);
}

void SolverNets::control_features(double t, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                  Eigen::Ref<Eigen::MatrixXd> out) const {
  out.row(0).setConstant(t * scaling_.inv_maturity);
  out.bottomRows(x.rows()) = scaling_.inv_width.asDiagonal() * (x.colwise() - scaling_.centre);
}

Eigen::MatrixXd SolverNets::initial_value(int stage,
                                          const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  if (x.rows() != state_dim_) throw Error(ErrorCode::ShapeMismatch, "state has wrong dimension");
  if (stage == 0) return y0_.replicate(1, x.cols());
  return scaling_.y_scale * head(stage).forward_batch(head_features(x));
}

namespace {

// Multiplies row k * d1 + l by z_scale[l].
void scale_control(Eigen::MatrixXd& z, const Eigen::VectorXd& z_scale, int d2) {
  const int d1 = static_cast<int>(z_scale.size());
  for (int k = 0; k < d2; ++k) {
    for (int l = 0; l < d1; ++l) z.row(k * d1 + l) *= z_scale[l];
  }
}

}  // namespace

Eigen::MatrixXd SolverNets::control(int stage, double t,
                                    const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  if (x.rows() != state_dim_) throw Error(ErrorCode::ShapeMismatch, "state has wrong dimension");
  Eigen::MatrixXd in(1 + state_dim_, x.cols());
  control_features(t, x, in);
  Eigen::MatrixXd z = z_net(stage).forward_batch(in);
  scale_control(z, scaling_.z_scale, value_dim_);
  return z;
}

namespace {

// Forward (and optionally reverse) pass over one contiguous block of paths.
struct ChunkPass {
  int count = 0;
  std::vector<Eigen::MatrixXd> y;
  std::vector<Eigen::MatrixXd> z;
  std::vector<Eigen::MatrixXd> residual;
  // g_j(x, y_{j+1}) is differentiated at the next stage's start value.
  std::vector<Eigen::MatrixXd> condition_slope;
  std::vector<Mlp::Tape> z_tape;
  std::vector<Mlp::Tape> head_tape;
  double loss_sum = 0.0;
  Eigen::VectorXd gradient;
};

// (Z dW)_k = sum_l Z[k][l] dW_l, column by column.
void add_control_times_increment(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                 const Eigen::Ref<const Eigen::MatrixXd>& dw,
                                 Eigen::Ref<Eigen::MatrixXd> y) {
  const auto d1 = dw.rows();
  for (Eigen::Index k = 0; k < y.rows(); ++k) {
    y.row(k) += (z.middleRows(k * d1, d1).array() * dw.array()).colwise().sum().matrix();
  }
}

void forward_chunk(const CompoundSpec& spec, const SolverNets& nets, const PathBatch& paths,
                   int first, ChunkPass& pass) {
  const TimeGrid& grid = spec.grid;
  const int m = spec.stages();
  const int d1 = spec.model.dim();
  const int d2 = spec.value_dim;
  const int c = pass.count;
  const double h = grid.step();
  pass.y.resize(m);
  pass.z.resize(m);
  pass.residual.resize(m);
  pass.condition_slope.resize(m);
  pass.z_tape.resize(m);
  pass.head_tape.resize(m);

  for (int j = 0; j < m; ++j) {
    const int begin = grid.stage_begin(j);
    const int steps = grid.stage_end(j) - begin;
    Eigen::MatrixXd features(1 + d1, static_cast<Eigen::Index>(c) * steps);
    for (int s = 0; s < steps; ++s) {
      nets.control_features(grid.time(begin + s), paths.states_at(begin + s, first, c),
                            features.middleCols(static_cast<Eigen::Index>(s) * c, c));
    }
    Eigen::MatrixXd& z = pass.z[j];
    nets.z_net(j).forward_batch(features, pass.z_tape[j], z);
    scale_control(z, nets.scaling().z_scale, d2);

    Eigen::MatrixXd& y = pass.y[j];
    y.resize(d2, static_cast<Eigen::Index>(c) * (steps + 1));
    if (j == 0) {
      y.leftCols(c) = nets.y0().replicate(1, c);
    } else {
      Eigen::MatrixXd out;
      nets.head(j).forward_batch(nets.head_features(paths.states_at(begin, first, c)),
                                 pass.head_tape[j], out);
      y.leftCols(c) = nets.scaling().y_scale * out;
    }
    Eigen::MatrixXd f;
    for (int s = 0; s < steps; ++s) {
      const int i = begin + s;
      const auto cols = static_cast<Eigen::Index>(s) * c;
      const auto x = paths.states_at(i, first, c);
      spec.drivers[j]->evaluate(grid.time(i), x, y.middleCols(cols, c), z.middleCols(cols, c), f);
      y.middleCols(cols + c, c) = y.middleCols(cols, c) - h * f;
      add_control_times_increment(z.middleCols(cols, c), paths.increments_at(i, first, c),
                                  y.middleCols(cols + c, c));
    }
  }

  for (int j = 0; j < m; ++j) {
    const int end = grid.stage_end(j);
    const auto x = paths.states_at(end, first, c);
    const auto steps = static_cast<Eigen::Index>(end - grid.stage_begin(j));
    const auto y_end = pass.y[j].middleCols(steps * c, c);
    Eigen::MatrixXd target;
    if (j + 1 < m) {
      const auto y_next = pass.y[j + 1].leftCols(c);
      spec.conditions[j].evaluate(x, y_next, d2, target);
      spec.conditions[j].derivative_y(x, y_next, pass.condition_slope[j]);
    } else {
      spec.conditions[j].evaluate(x, Eigen::MatrixXd(), d2, target);
    }
    pass.residual[j] = target - y_end;
    pass.loss_sum += pass.residual[j].squaredNorm();
  }
}

// Reverse pass of the mean loss over `batch` paths, summed into pass.gradient.
void backward_chunk(const CompoundSpec& spec, const SolverNets& nets, const PathBatch& paths,
                    int first, int batch, ChunkPass& pass) {
  const TimeGrid& grid = spec.grid;
  const int m = spec.stages();
  const int d1 = spec.model.dim();
  const int d2 = spec.value_dim;
  const int c = pass.count;
  const double h = grid.step();
  const double w = 2.0 / batch;
  pass.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nets.parameter_count()));

  Eigen::MatrixXd adj;
  Eigen::MatrixXd dy;
  Eigen::MatrixXd dz_step;
  for (int j = m - 1; j >= 0; --j) {
    const int begin = grid.stage_begin(j);
    const int steps = grid.stage_end(j) - begin;
    const Eigen::MatrixXd& y = pass.y[j];
    const Eigen::MatrixXd& z = pass.z[j];
    // d(loss)/d(Y_{j,T_j}) = -2 rho_j / B.
    adj = -w * pass.residual[j];
    Eigen::MatrixXd dz(d2 * d1, static_cast<Eigen::Index>(c) * steps);
    for (int s = steps - 1; s >= 0; --s) {
      const int i = begin + s;
      const auto cols = static_cast<Eigen::Index>(s) * c;
      const auto x = paths.states_at(i, first, c);
      const auto dw = paths.increments_at(i, first, c);
      auto dz_s = dz.middleCols(cols, c);
      for (int k = 0; k < d2; ++k) {
        dz_s.middleRows(k * d1, d1) = dw.array().rowwise() * adj.row(k).array();
      }
      dy = adj;
      const Eigen::MatrixXd upstream = -h * adj;
      spec.drivers[j]->pullback(grid.time(i), x, y.middleCols(cols, c), z.middleCols(cols, c),
                                upstream, dy, dz_s);
      adj.swap(dy);
    }
    scale_control(dz, nets.scaling().z_scale, d2);
    nets.z_net(j).accumulate_gradient(
        pass.z_tape[j], dz,
        pass.gradient.segment(static_cast<Eigen::Index>(nets.z_offset(j)),
                              static_cast<Eigen::Index>(nets.z_net(j).parameter_count())));
    if (j == 0) {
      pass.gradient.head(d2) += adj.rowwise().sum();
    } else {
      // Y_{j,T_{j-1}} also enters residual j-1 through g_{j-1}.
      adj += w * pass.residual[j - 1].cwiseProduct(pass.condition_slope[j - 1]);
      nets.head(j).accumulate_gradient(
          pass.head_tape[j], nets.scaling().y_scale * adj,
          pass.gradient.segment(static_cast<Eigen::Index>(nets.head_offset(j)),
                                static_cast<Eigen::Index>(nets.head(j).parameter_count())));
    }
  }
}

void check_paths(const CompoundSpec& spec, const PathBatch& paths) {
  if (paths.steps() != spec.grid.total_steps() || paths.dim() != spec.model.dim()) {
    throw Error(ErrorCode::ShapeMismatch, "path batch does not match the problem grid");
  }
}

void check_nets(const CompoundSpec& spec, const SolverNets& nets) {
  if (nets.stages() != spec.stages() || nets.state_dim() != spec.model.dim() ||
      nets.value_dim() != spec.value_dim) {
    throw Error(ErrorCode::ShapeMismatch, "networks do not match the problem");
  }
}

}  // namespace

RolloutResult rollout(const CompoundSpec& spec, const SolverNets& nets, const PathBatch& paths,
                      const EvalOptions& options) {
  check_paths(spec, paths);
  check_nets(spec, nets);
  const int batch = paths.batch();
  const int m = spec.stages();
  const int d1 = spec.model.dim();
  const int d2 = spec.value_dim;
  const int chunk = std::max(1, options.chunk);
  const int chunks = (batch + chunk - 1) / chunk;

  RolloutResult out;
  out.batch = batch;
  for (int j = 0; j < m; ++j) {
    const int steps = spec.grid.steps_per_stage()[j];
    out.y.emplace_back(d2, static_cast<Eigen::Index>(batch) * (steps + 1));
    out.z.emplace_back(d2 * d1, static_cast<Eigen::Index>(batch) * steps);
    out.residual.emplace_back(d2, batch);
  }
  parallel_chunks(chunks, options.threads, [&](int ci) {
    ChunkPass pass;
    const int first = ci * chunk;
    pass.count = std::min(chunk, batch - first);
    forward_chunk(spec, nets, paths, first, pass);
    const int c = pass.count;
    for (int j = 0; j < m; ++j) {
      const int steps = spec.grid.steps_per_stage()[j];
      for (int s = 0; s <= steps; ++s) {
        out.y[j].middleCols(static_cast<Eigen::Index>(s) * batch + first, c) =
            pass.y[j].middleCols(static_cast<Eigen::Index>(s) * c, c);
        if (s < steps) {
          out.z[j].middleCols(static_cast<Eigen::Index>(s) * batch + first, c) =
              pass.z[j].middleCols(static_cast<Eigen::Index>(s) * c, c);
        }
      }
      out.residual[j].middleCols(first, c) = pass.residual[j];
    }
  });
  for (const auto& r : out.residual) {
    if (!r.allFinite()) throw Error(ErrorCode::NonFiniteValue, "rollout produced non-finite values");
  }
  return out;
}

double loss(const RolloutResult& result) {
  double total = 0.0;
  for (const auto& r : result.residual) {
    if (r.cols() == 0) continue;
    total += r.colwise().squaredNorm().sum() / static_cast<double>(r.cols());
  }
  return total;
}

double loss_and_gradient(const CompoundSpec& spec, const SolverNets& nets,
                         const PathBatch& paths, Eigen::VectorXd& gradient,
                         const EvalOptions& options) {
  check_paths(spec, paths);
  check_nets(spec, nets);
  const int batch = paths.batch();
  const int chunk = std::max(1, options.chunk);
  const int chunks = (batch + chunk - 1) / chunk;
  std::vector<double> losses(chunks);
  std::vector<Eigen::VectorXd> grads(chunks);
  parallel_chunks(chunks, options.threads, [&](int ci) {
    ChunkPass pass;
    const int first = ci * chunk;
    pass.count = std::min(chunk, batch - first);
    forward_chunk(spec, nets, paths, first, pass);
    backward_chunk(spec, nets, paths, first, batch, pass);
    losses[ci] = pass.loss_sum;
    grads[ci] = std::move(pass.gradient);
  });
  double total = 0.0;
  gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nets.parameter_count()));
  for (int ci = 0; ci < chunks; ++ci) {
    total += losses[ci];
    gradient += grads[ci];
  }
  return total / batch;
}

std::pair<double, Eigen::VectorXd> extract_price_and_delta(const CompoundSpec& spec,
                                                           const SolverNets& nets) {
  check_nets(spec, nets);
  const GbmModel& model = spec.model;
  const int d1 = model.dim();
  const Eigen::MatrixXd z = nets.control(0, 0.0, model.spot);
  // First value component: Z[0][l].
  const Eigen::RowVectorXd z0 = z.col(0).head(d1).transpose();
  Eigen::VectorXd delta(d1);
  if (model.has_diagonal_vol()) {
    for (int l = 0; l < d1; ++l) {
      const double scale = model.vol(l, l) * model.spot[l];
      delta[l] = scale != 0.0 ? z0[l] / scale : 0.0;
    }
  } else {
    const Eigen::MatrixXd sigma = model.spot.asDiagonal() * model.vol;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma.transpose());
    if (!lu.isInvertible()) {
      throw Error(ErrorCode::NonDiagonalSigma, "diffusion matrix is singular; delta undefined");
    }
    delta = lu.solve(z0.transpose());
  }
  return {nets.y0()[0], delta};
}

TrainResult train(const CompoundSpec& spec, std::uint64_t seed, const TrainConfig& config) {
  spec.validate();
  if (config.iterations < 1 || config.batch < 1 || config.validation_batch < 1) {
    throw Error(ErrorCode::InvalidArgument, "iterations and batch sizes must be positive");
  }
  const auto start = std::chrono::steady_clock::now();
  TrainResult result{SolverNets(spec, derive_seed(seed, 0), config.hidden_widths), {}};
  SolverNets& nets = result.nets;
  TrainReport& report = result.report;
  report.seed = seed;
  report.config = config;
  if (report.config.decay_steps == 0) {
    report.config.decay_steps = std::max<std::int64_t>(1, config.iterations / 5);
  }

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.learning_rate;
  adam_cfg.decay_rate = config.decay_rate;
  adam_cfg.decay_steps = report.config.decay_steps;
  AdamState adam(nets.parameter_count(), adam_cfg);

  const SimulationOptions sim{config.eval.threads, false};
  const std::uint64_t train_root = derive_seed(seed, 1);
  Eigen::VectorXd params = nets.flatten();
  Eigen::VectorXd gradient;
  report.losses.reserve(config.iterations);
  for (int it = 0; it < config.iterations; ++it) {
    const PathBatch paths = simulate_forward(spec.model, spec.grid, config.batch,
                                             derive_seed(train_root, it), sim);
    report.clamped_states += paths.clamped_states();
    const double value = loss_and_gradient(spec, nets, paths, gradient, config.eval);
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::Diverged,
                  "training loss became non-finite at iteration " + std::to_string(it));
    }
    report.losses.push_back(value);
    if (it == 0) {
      for (int j = 0; j < spec.stages(); ++j) {
        double sq = 0.0;
        for (const auto& [b, e] : nets.stage_blocks(j)) {
          sq += gradient.segment(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b))
                    .squaredNorm();
        }
        report.initial_stage_grad_norms.push_back(std::sqrt(sq));
      }
    }
    adam.apply(params, gradient);
    nets.assign(params);
  }

  const PathBatch validation = simulate_forward(spec.model, spec.grid, config.validation_batch,
                                                derive_seed(seed, 2), sim);
  report.validation_loss = loss(rollout(spec, nets, validation, config.eval));
  const auto [price, delta] = extract_price_and_delta(spec, nets);
  report.price = price;
  report.delta = delta;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

namespace {
constexpr char kSolverMagic[8] = {'C', 'B', 'S', 'D', 'E', 'S', 'N', 'T'};
}

void write_solver_checkpoint(const std::string& path, const SolverNets& nets,
                             std::uint64_t seed, std::uint64_t step) {
  std::ostringstream out(std::ios::binary);
  out.write(kSolverMagic, sizeof(kSolverMagic));
  detail::write_u32(out, 1);
  detail::write_u32(out, static_cast<std::uint32_t>(nets.stages()));
  detail::write_u64(out, static_cast<std::uint64_t>(nets.y0().size()));
  for (Eigen::Index i = 0; i < nets.y0().size(); ++i) detail::write_f64(out, nets.y0()[i]);
  for (int j = 1; j < nets.stages(); ++j) write_mlp(out, nets.head(j), seed, step);
  for (int j = 0; j < nets.stages(); ++j) write_mlp(out, nets.z_net(j), seed, step);
  write_file_atomic(path, out.str());
}

void read_solver_checkpoint(const std::string& path, SolverNets& nets) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kSolverMagic)) {
    throw Error(ErrorCode::Io, "not a solver checkpoint");
  }
  if (detail::read_u32(in) != 1) throw Error(ErrorCode::Io, "unsupported checkpoint version");
  if (static_cast<int>(detail::read_u32(in)) != nets.stages()) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint stage count differs");
  }
  const std::uint64_t n = detail::read_u64(in);
  if (n != static_cast<std::uint64_t>(nets.y0().size())) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint value dimension differs");
  }
  for (std::uint64_t i = 0; i < n; ++i) nets.y0()[static_cast<Eigen::Index>(i)] = detail::read_f64(in);
  auto load = [&](Mlp& net) {
    MlpCheckpoint ck = read_mlp(in);
    if (!(ck.net.spec() == net.spec())) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint network shape differs");
    }
    net.params() = ck.net.params();
  };
  for (int j = 1; j < nets.stages(); ++j) load(nets.head(j));
  for (int j = 0; j < nets.stages(); ++j) load(nets.z_net(j));
}

}  // namespace cbsde
