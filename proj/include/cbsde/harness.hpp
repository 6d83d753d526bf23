#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbsde/error_metrics.hpp"
#include "cbsde/payoff.hpp"
#include "cbsde/solver.hpp"

namespace cbsde {

enum class ExperimentKind { PlainCompound, Mfold, BermudanBasket, European, ConvergenceSweep };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

struct MarketParams {
  double rate = 0.03;
  double dividend = 0.0;
  double sigma = 0.2;
  double spot = 14.0;
};

struct PlainCompoundParams {
  double outer_strike = 1.0;
  double inner_strike = 14.0;
  double outer_maturity = 0.2;
  double inner_maturity = 0.4;
  /// Pairs (outer, inner).
  std::vector<std::pair<OptionKind, OptionKind>> cases{{OptionKind::Call, OptionKind::Call}};
};

struct MfoldParams {
  std::vector<int> folds{2, 3, 4, 5};
  double strike = 1.0;
  /// T_j = j * date_spacing.
  double date_spacing = 1.0;
};

struct BermudanParams {
  std::vector<int> dims{1};
  double strike = 50.0;
  std::vector<double> exercise_dates{0.1, 0.2, 0.3, 0.4, 0.5};
};

struct EuropeanParams {
  OptionKind kind = OptionKind::Put;
  double strike = 14.0;
  double maturity = 0.4;
  int stages = 2;
};

struct ErrorMetricsParams {
  bool enabled = false;
  int batch = 5000;
  /// 0 derives the evaluation seed from the training seed.
  std::uint64_t seed = 0;
};

/// Full description of one experiment. See README.md for the JSON schema.
struct RunConfig {
  std::string name = "run";
  ExperimentKind kind = ExperimentKind::PlainCompound;
  MarketParams market;
  PlainCompoundParams plain;
  MfoldParams mfold;
  BermudanParams bermudan;
  EuropeanParams european;

  /// Exactly one of steps / step is used; steps_list (if non-empty) overrides both.
  int steps = 50;
  double step = 0.0;
  std::vector<int> steps_list;

  /// iterations = 0 picks 4000 for single-asset problems with at most two
  /// stages and 6000 otherwise.
  TrainConfig training;
  std::vector<std::uint64_t> seeds{1};
  ErrorMetricsParams error_metrics;
  int tree_steps = 10000;
  std::filesystem::path out_dir = "out";
  int threads = 1;
  bool checkpoints = false;
};

/// Parses and validates a JSON config. Config errors carry the offending key.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Throws Config on values the downstream modules would reject.
void validate_run_config(const RunConfig& config);

/// (est - ref)^2 / ref^2 for scalars; mean squared gap over mean squared
/// reference for vectors.
double relative_mse(double estimate, double reference);
double relative_mse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference);

struct ResultRow {
  std::string case_name;
  int dim = 1;
  int steps = 0;
  std::uint64_t seed = 0;
  double price = 0.0;
  double price_ref = 0.0;
  double price_relmse = 0.0;
  Eigen::VectorXd delta;
  Eigen::VectorXd delta_ref;
  double delta_relmse = 0.0;
  double validation_loss = 0.0;
  int iterations = 0;
  double wall_seconds = 0.0;
  std::optional<ErrorReport> errors;
};

/// One aggregated line of the convergence table (means over seeds).
struct ConvergencePoint {
  std::string case_name;
  int steps = 0;
  double h = 0.0;
  ErrorReport mean;
  /// h + loss.
  double bound = 0.0;
};

struct RunOutput {
  std::vector<ResultRow> rows;
  std::vector<ConvergencePoint> convergence;
  std::vector<TrainReport> reports;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains one model per (case, N, seed), quotes the references and writes
/// results.csv, errors.csv (when error metrics are enabled) and report.json
/// into config.out_dir.
RunOutput run_experiment(const RunConfig& config, const ProgressFn& progress = {});

/// run_experiment with error metrics forced on and N over steps_list
/// (default 10..50); additionally writes convergence.csv.
RunOutput run_convergence(const RunConfig& config, const ProgressFn& progress = {});

/// Fixed CSV renderings; numbers use %.17g.
std::string results_csv(const std::vector<ResultRow>& rows);
std::string errors_csv(const std::vector<ResultRow>& rows);
std::string convergence_csv(const std::vector<ConvergencePoint>& points);

struct CheckResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

/// Oracle reproduction and identity checks (no training).
std::vector<CheckResult> oracle_self_test();

}  // namespace cbsde
