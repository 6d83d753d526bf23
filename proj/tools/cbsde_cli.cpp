// Command-line front end: run / convergence / quote / check.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbsde/basket.hpp"
#include "cbsde/black_scholes.hpp"
#include "cbsde/compound_oracles.hpp"
#include "cbsde/errors.hpp"
#include "cbsde/harness.hpp"

using nlohmann::json;
using namespace cbsde;

namespace {

int error_exit(const std::string& code, const std::string& message, int status) {
  json err = {{"error", code}, {"message", message}};
  std::cerr << err.dump() << "\n";
  return status;
}

/// Exit status per error family, so scripts can branch without parsing.
int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return 2;
    case ErrorCode::Io: return 3;
    case ErrorCode::Diverged:
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::NonFiniteValue: return 4;
    case ErrorCode::ReferenceUnavailable: return 5;
    default: return 1;
  }
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 0;
};

void apply_overrides(RunConfig& config, const Overrides& o) {
  if (const char* env = std::getenv("CBSDE_OUT_DIR"); env && *env) config.out_dir = env;
  if (const char* env = std::getenv("CBSDE_THREADS"); env && *env) {
    config.threads = std::atoi(env);
  }
  if (!o.out_dir.empty()) config.out_dir = o.out_dir;
  if (o.threads > 0) config.threads = o.threads;
  if (o.seed) config.seeds = {*o.seed};
  validate_run_config(config);
}

void print_rows(const RunOutput& out) {
  std::printf("%-16s %4s %4s %6s %12s %12s %10s %12s %12s %10s\n", "case", "d1", "N", "seed",
              "price", "ref", "relMSE", "delta_min", "delta_max", "relMSE");
  for (const ResultRow& r : out.rows) {
    std::printf("%-16s %4d %4d %6llu %12.6f %12.6f %10.3e %12.6f %12.6f %10.3e\n",
                r.case_name.c_str(), r.dim, r.steps, static_cast<unsigned long long>(r.seed),
                r.price, r.price_ref, r.price_relmse, r.delta.minCoeff(), r.delta.maxCoeff(),
                r.delta_relmse);
  }
  for (const ConvergencePoint& p : out.convergence) {
    std::printf("%-16s N=%-4d h=%.4f total=%.4e bound=%.4e ratio=%.3f\n", p.case_name.c_str(),
                p.steps, p.h, p.mean.total, p.bound, p.mean.total / p.bound);
  }
}

json quote_json(const CompoundQuote& q) {
  return {{"price", q.price}, {"delta", q.delta}, {"critical_levels", q.critical_levels}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compound BSDE solver and analytic reference pricers"};
  app.require_subcommand(1);

  Overrides overrides;
  std::uint64_t seed_value = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed_value, "Replace the config's seed list with one seed");
    sub->add_option("--out-dir", overrides.out_dir, "Output directory");
    sub->add_option("--threads", overrides.threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "Train and score every case in a config");
  run->add_option("config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);
  add_common(run);

  auto* conv = app.add_subcommand("convergence", "Error metrics over a list of N");
  conv->add_option("config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);
  add_common(conv);

  auto* quote = app.add_subcommand("quote", "Analytic or tree reference quotes");
  quote->require_subcommand(1);
  double rate = 0.03, dividend = 0.0, sigma = 0.2;
  std::optional<double> spot;
  auto add_market = [&](CLI::App* sub) {
    sub->add_option("--rate", rate, "Risk-free rate");
    sub->add_option("--dividend", dividend, "Dividend yield");
    sub->add_option("--sigma", sigma, "Volatility");
    sub->add_option("--spot", spot, "Spot");
  };

  std::string outer = "call", inner = "call";
  double k1 = 1.0, k2 = 14.0, t1 = 0.2, t2 = 0.4;
  auto* geske = quote->add_subcommand("geske", "Option on an option");
  geske->add_option("--outer", outer, "call|put");
  geske->add_option("--inner", inner, "call|put");
  geske->add_option("--K1", k1, "Outer strike");
  geske->add_option("--K2", k2, "Inner strike");
  geske->add_option("--T1", t1, "Outer maturity");
  geske->add_option("--T2", t2, "Inner maturity");
  add_market(geske);

  int folds = 5;
  double mfold_strike = 1.0, spacing = 1.0;
  auto* mfold = quote->add_subcommand("mfold", "M-fold compound call");
  mfold->add_option("--M", folds, "Number of folds")->check(CLI::Range(1, 10));
  mfold->add_option("--strike", mfold_strike, "Strike at every date");
  mfold->add_option("--spacing", spacing, "T_j = j * spacing");
  add_market(mfold);

  int dim = 1, tree_steps = 10000;
  double berm_strike = 50.0;
  std::vector<double> dates{0.1, 0.2, 0.3, 0.4, 0.5};
  std::optional<double> berm_rate;
  auto* berm = quote->add_subcommand("bermudan", "Bermudan geometric basket put");
  berm->add_option("--d", dim, "Number of assets")->check(CLI::PositiveNumber);
  berm->add_option("--strike", berm_strike, "Strike");
  berm->add_option("--dates", dates, "Exercise dates");
  berm->add_option("--tree-steps", tree_steps, "Tree layers")->check(CLI::PositiveNumber);
  berm->add_option("--rate", berm_rate, "Risk-free rate");
  berm->add_option("--dividend", dividend, "Dividend yield");
  berm->add_option("--sigma", sigma, "Volatility");
  berm->add_option("--spot", spot, "Spot of every asset");

  auto* check = app.add_subcommand("check", "Oracle self-test");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed() || conv->parsed()) {
      const CLI::App* sub = run->parsed() ? run : conv;
      if (sub->count("--seed") > 0) overrides.seed = seed_value;
      RunConfig config = load_run_config(config_path);
      apply_overrides(config, overrides);
      auto progress = [](const std::string& msg) { std::cerr << msg << "\n"; };
      const RunOutput out =
          run->parsed() ? run_experiment(config, progress) : run_convergence(config, progress);
      print_rows(out);
      std::printf("wrote %s\n", config.out_dir.string().c_str());
      return 0;
    }
    if (geske->parsed()) {
      const CompoundQuote q =
          geske_quote(parse_option_kind(outer), parse_option_kind(inner), 0.0, spot.value_or(14.0),
                      k1, k2, t1, t2, rate, dividend, sigma);
      std::cout << quote_json(q).dump(2) << "\n";
      return 0;
    }
    if (mfold->parsed()) {
      std::vector<double> strikes(folds, mfold_strike);
      std::vector<double> times(folds);
      for (int j = 0; j < folds; ++j) times[j] = (j + 1) * spacing;
      const CompoundQuote q =
          mfold_quote(0.0, spot.value_or(5.0), strikes, times, rate, dividend, sigma);
      std::cout << quote_json(q).dump(2) << "\n";
      return 0;
    }
    if (berm->parsed()) {
      const GbmModel model =
          GbmModel::uniform(dim, berm_rate.value_or(0.02), dividend, sigma, spot.value_or(49.0));
      const BasketReduction red = reduce_geobasket(model);
      const BermudanTreeResult r = binomial_bermudan_put(red, berm_strike, {tree_steps, dates});
      const Eigen::VectorXd deltas = basket_asset_deltas(red, model.spot, r.delta_hat);
      json j = {{"price", r.price},
                {"delta_hat", r.delta_hat},
                {"asset_delta", deltas[0]},
                {"exercise_layers", r.exercise_layers},
                {"reduced", {{"spot", red.spot},
                             {"rate", red.rate},
                             {"dividend", red.dividend},
                             {"sigma", red.sigma}}}};
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (check->parsed()) {
      bool ok = true;
      for (const CheckResult& c : oracle_self_test()) {
        std::printf("[%s] %-40s %.3e (tol %.1e) %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                    c.value, c.tolerance, c.detail.c_str());
        ok = ok && c.passed;
      }
      return ok ? 0 : 1;
    }
  } catch (const Error& e) {
    return error_exit(std::string(error_code_name(e.code())), e.what(), status_for(e.code()));
  } catch (const std::exception& e) {
    return error_exit("Internal", e.what(), 1);
  }
  return 0;
}
