#include "cbsde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cbsde/basket.hpp"
#include "cbsde/black_scholes.hpp"
#include "cbsde/checkpoint.hpp"
#include "cbsde/compound_oracles.hpp"
#include "cbsde/errors.hpp"
#include "cbsde/reference_surface.hpp"
#include "cbsde/rng.hpp"

namespace cbsde {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::Config, where + ": " + what);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) config_error(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) config_error(where + "." + key, "unknown key");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(where + "." + key, e.what());
  }
}

OptionKind read_kind(const json& value, const std::string& where) {
  if (!value.is_string()) config_error(where, "expected \"call\" or \"put\"");
  try {
    return parse_option_kind(value.get<std::string>());
  } catch (const Error&) {
    config_error(where, "expected \"call\" or \"put\"");
  }
}

std::pair<OptionKind, OptionKind> parse_case(const std::string& text, const std::string& where) {
  const auto pos = text.find("_on_");
  if (pos == std::string::npos) config_error(where, "expected <outer>_on_<inner>, got " + text);
  return {read_kind(text.substr(0, pos), where), read_kind(text.substr(pos + 4), where)};
}

std::string case_label(OptionKind outer, OptionKind inner) {
  return to_string(outer) + "_on_" + to_string(inner);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["name"] = c.name;
  j["experiment"] = to_string(c.kind);
  j["market"] = {{"rate", c.market.rate},
                 {"dividend", c.market.dividend},
                 {"sigma", c.market.sigma},
                 {"spot", c.market.spot}};
  switch (c.kind) {
    case ExperimentKind::PlainCompound:
    case ExperimentKind::ConvergenceSweep: {
      json cases = json::array();
      for (const auto& [o, i] : c.plain.cases) cases.push_back(case_label(o, i));
      j["plain_compound"] = {{"outer_strike", c.plain.outer_strike},
                             {"inner_strike", c.plain.inner_strike},
                             {"outer_maturity", c.plain.outer_maturity},
                             {"inner_maturity", c.plain.inner_maturity},
                             {"cases", cases}};
      break;
    }
    case ExperimentKind::Mfold:
      j["mfold"] = {{"folds", c.mfold.folds},
                    {"strike", c.mfold.strike},
                    {"date_spacing", c.mfold.date_spacing}};
      break;
    case ExperimentKind::BermudanBasket:
      j["bermudan_basket"] = {{"dims", c.bermudan.dims},
                              {"strike", c.bermudan.strike},
                              {"exercise_dates", c.bermudan.exercise_dates}};
      break;
    case ExperimentKind::European:
      j["european"] = {{"kind", to_string(c.european.kind)},
                       {"strike", c.european.strike},
                       {"maturity", c.european.maturity},
                       {"stages", c.european.stages}};
      break;
  }
  json grid;
  if (c.step > 0.0) {
    grid["step"] = c.step;
  } else {
    grid["steps"] = c.steps;
  }
  if (!c.steps_list.empty()) grid["steps_list"] = c.steps_list;
  j["grid"] = grid;
  const TrainConfig& t = c.training;
  j["training"] = {{"iterations", t.iterations},
                   {"batch", t.batch},
                   {"validation_batch", t.validation_batch},
                   {"learning_rate", t.learning_rate},
                   {"decay_rate", t.decay_rate},
                   {"decay_steps", t.decay_steps},
                   {"hidden_widths", t.hidden_widths},
                   {"chunk", t.eval.chunk}};
  j["seeds"] = c.seeds;
  j["error_metrics"] = {{"enabled", c.error_metrics.enabled},
                        {"batch", c.error_metrics.batch},
                        {"seed", c.error_metrics.seed}};
  j["tree_steps"] = c.tree_steps;
  j["out_dir"] = c.out_dir.string();
  j["threads"] = c.threads;
  j["checkpoints"] = c.checkpoints;
  return j;
}

/// Everything needed to train and score one (case, N) pair.
struct CasePlan {
  CasePlan(std::string n, CompoundSpec s) : name(std::move(n)), spec(std::move(s)) {}

  std::string name;
  CompoundSpec spec;
  int dim = 1;
  double price_ref = 0.0;
  Eigen::VectorXd delta_ref;
  std::shared_ptr<const ReferenceSurface> surface;
  std::vector<int> tree_layers;
};

int steps_for(const RunConfig& c, double maturity) {
  if (c.step > 0.0) return static_cast<int>(std::lround(maturity / c.step));
  return c.steps;
}

std::vector<int> steps_values(const RunConfig& c, double maturity) {
  if (!c.steps_list.empty()) return c.steps_list;
  return {steps_for(c, maturity)};
}

std::vector<CasePlan> plan_cases(const RunConfig& c) {
  std::vector<CasePlan> plans;
  const MarketParams& m = c.market;
  const bool want_surface = c.error_metrics.enabled;
  switch (c.kind) {
    case ExperimentKind::PlainCompound:
    case ExperimentKind::ConvergenceSweep: {
      const PlainCompoundParams& p = c.plain;
      const GbmModel model = GbmModel::uniform(1, m.rate, m.dividend, m.sigma, m.spot);
      for (const auto& [outer, inner] : p.cases) {
        const CompoundQuote q =
            geske_quote(outer, inner, 0.0, m.spot, p.outer_strike, p.inner_strike,
                        p.outer_maturity, p.inner_maturity, m.rate, m.dividend, m.sigma);
        for (int n : steps_values(c, p.inner_maturity)) {
          CasePlan plan(case_label(outer, inner),
                        build_spec_plain_compound(outer, inner, p.outer_strike, p.inner_strike,
                                                  p.outer_maturity, p.inner_maturity, model, n));
          plan.price_ref = q.price;
          plan.delta_ref = Eigen::VectorXd::Constant(1, q.delta);
          if (want_surface) {
            plan.surface = make_plain_compound_surface(outer, inner, p.outer_strike,
                                                       p.inner_strike, p.outer_maturity,
                                                       p.inner_maturity, m.rate, m.dividend,
                                                       m.sigma);
          }
          plans.push_back(std::move(plan));
        }
      }
      break;
    }
    case ExperimentKind::Mfold: {
      const MfoldParams& p = c.mfold;
      const GbmModel model = GbmModel::uniform(1, m.rate, m.dividend, m.sigma, m.spot);
      for (int folds : p.folds) {
        std::vector<double> strikes(folds, p.strike);
        std::vector<double> times(folds);
        for (int j = 0; j < folds; ++j) times[j] = (j + 1) * p.date_spacing;
        const CompoundQuote q =
            mfold_quote(0.0, m.spot, strikes, times, m.rate, m.dividend, m.sigma);
        for (int n : steps_values(c, times.back())) {
          CasePlan plan("mfold_M" + std::to_string(folds),
                        build_spec_mfold(strikes, times, model, n));
          plan.price_ref = q.price;
          plan.delta_ref = Eigen::VectorXd::Constant(1, q.delta);
          plans.push_back(std::move(plan));
        }
      }
      break;
    }
    case ExperimentKind::BermudanBasket: {
      const BermudanParams& p = c.bermudan;
      for (int d : p.dims) {
        const GbmModel model = GbmModel::uniform(d, m.rate, m.dividend, m.sigma, m.spot);
        const BasketReduction red = reduce_geobasket(model);
        TreeConfig tree{c.tree_steps, p.exercise_dates};
        const BermudanTreeResult q = binomial_bermudan_put(red, p.strike, tree);
        for (int n : steps_values(c, p.exercise_dates.back())) {
          CasePlan plan("bermudan_d" + std::to_string(d),
                        build_spec_bermudan_geobasket(p.strike, p.exercise_dates, model, n));
          plan.dim = d;
          plan.price_ref = q.price;
          plan.delta_ref = basket_asset_deltas(red, model.spot, q.delta_hat);
          plan.tree_layers = q.exercise_layers;
          if (want_surface) {
            plan.surface = make_bermudan_surface(model, p.strike, plan.spec.grid, 4 * c.tree_steps);
          }
          plans.push_back(std::move(plan));
        }
      }
      break;
    }
    case ExperimentKind::European: {
      const EuropeanParams& p = c.european;
      const GbmModel model = GbmModel::uniform(1, m.rate, m.dividend, m.sigma, m.spot);
      const PriceDelta q =
          bs_price_delta(p.kind, 0.0, m.spot, p.strike, p.maturity, m.rate, m.dividend, m.sigma);
      for (int n : steps_values(c, p.maturity)) {
        CasePlan plan("european_" + to_string(p.kind),
                      build_spec_european(p.kind, p.strike, p.maturity, model, n, p.stages));
        plan.price_ref = q.price;
        plan.delta_ref = Eigen::VectorXd::Constant(1, q.delta);
        if (want_surface) {
          const auto times = plan.spec.grid.compounding_times();
          plan.surface = make_european_surface(p.kind, p.strike, {times.begin(), times.end()},
                                               m.rate, m.dividend, m.sigma);
        }
        plans.push_back(std::move(plan));
      }
      break;
    }
  }
  return plans;
}

std::vector<ConvergencePoint> aggregate(const std::vector<ResultRow>& rows) {
  std::vector<ConvergencePoint> out;
  std::map<std::pair<std::string, int>, std::size_t> index;
  std::vector<int> counts;
  for (const ResultRow& r : rows) {
    if (!r.errors) continue;
    const auto key = std::make_pair(r.case_name, r.steps);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      ConvergencePoint p;
      p.case_name = r.case_name;
      p.steps = r.steps;
      p.h = r.errors->h;
      out.push_back(p);
      counts.push_back(0);
    }
    ErrorReport& acc = out[it->second].mean;
    acc.err_x += r.errors->err_x;
    acc.err_y += r.errors->err_y;
    acc.err_z += r.errors->err_z;
    acc.total += r.errors->total;
    acc.loss += r.errors->loss;
    ++counts[it->second];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    ErrorReport& acc = out[i].mean;
    const double n = counts[i];
    acc.err_x /= n;
    acc.err_y /= n;
    acc.err_z /= n;
    acc.total /= n;
    acc.loss /= n;
    acc.h = out[i].h;
    out[i].bound = out[i].h + acc.loss;
  }
  return out;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::PlainCompound: return "plain_compound";
    case ExperimentKind::Mfold: return "mfold";
    case ExperimentKind::BermudanBasket: return "bermudan_basket";
    case ExperimentKind::European: return "european";
    case ExperimentKind::ConvergenceSweep: return "convergence_sweep";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  for (ExperimentKind k :
       {ExperimentKind::PlainCompound, ExperimentKind::Mfold, ExperimentKind::BermudanBasket,
        ExperimentKind::European, ExperimentKind::ConvergenceSweep}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::Config, "experiment: unknown kind " + text);
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed JSON: ") + e.what());
  }
  check_keys(root,
             {"name", "experiment", "market", "plain_compound", "mfold", "bermudan_basket",
              "european", "grid", "training", "seeds", "error_metrics", "tree_steps", "out_dir",
              "threads", "checkpoints"},
             "config");
  RunConfig c;
  read(root, "name", c.name, "config");
  if (!root.contains("experiment")) config_error("config.experiment", "missing");
  std::string kind;
  read(root, "experiment", kind, "config");
  c.kind = parse_experiment_kind(kind);

  // Defaults follow the experiment family.
  if (c.kind == ExperimentKind::Mfold) {
    c.market.spot = 5.0;
    c.step = 0.05;
  } else if (c.kind == ExperimentKind::BermudanBasket) {
    c.market.rate = 0.02;
    c.market.spot = 49.0;
    c.steps = 100;
  }

  if (root.contains("market")) {
    const json& mk = root["market"];
    check_keys(mk, {"rate", "dividend", "sigma", "spot"}, "market");
    read(mk, "rate", c.market.rate, "market");
    read(mk, "dividend", c.market.dividend, "market");
    read(mk, "sigma", c.market.sigma, "market");
    read(mk, "spot", c.market.spot, "market");
  }
  if (root.contains("plain_compound")) {
    const json& p = root["plain_compound"];
    check_keys(p, {"outer_strike", "inner_strike", "outer_maturity", "inner_maturity", "cases"},
               "plain_compound");
    read(p, "outer_strike", c.plain.outer_strike, "plain_compound");
    read(p, "inner_strike", c.plain.inner_strike, "plain_compound");
    read(p, "outer_maturity", c.plain.outer_maturity, "plain_compound");
    read(p, "inner_maturity", c.plain.inner_maturity, "plain_compound");
    if (p.contains("cases")) {
      std::vector<std::string> names;
      read(p, "cases", names, "plain_compound");
      c.plain.cases.clear();
      for (const auto& n : names) c.plain.cases.push_back(parse_case(n, "plain_compound.cases"));
    }
  }
  if (root.contains("mfold")) {
    const json& p = root["mfold"];
    check_keys(p, {"folds", "strike", "date_spacing"}, "mfold");
    read(p, "folds", c.mfold.folds, "mfold");
    read(p, "strike", c.mfold.strike, "mfold");
    read(p, "date_spacing", c.mfold.date_spacing, "mfold");
  }
  if (root.contains("bermudan_basket")) {
    const json& p = root["bermudan_basket"];
    check_keys(p, {"dims", "strike", "exercise_dates"}, "bermudan_basket");
    read(p, "dims", c.bermudan.dims, "bermudan_basket");
    read(p, "strike", c.bermudan.strike, "bermudan_basket");
    read(p, "exercise_dates", c.bermudan.exercise_dates, "bermudan_basket");
  }
  if (root.contains("european")) {
    const json& p = root["european"];
    check_keys(p, {"kind", "strike", "maturity", "stages"}, "european");
    if (p.contains("kind")) c.european.kind = read_kind(p["kind"], "european.kind");
    read(p, "strike", c.european.strike, "european");
    read(p, "maturity", c.european.maturity, "european");
    read(p, "stages", c.european.stages, "european");
  }
  if (root.contains("grid")) {
    const json& g = root["grid"];
    check_keys(g, {"steps", "step", "steps_list"}, "grid");
    if (g.contains("steps") && g.contains("step")) {
      config_error("grid", "give either steps or step, not both");
    }
    if (g.contains("steps")) c.step = 0.0;
    read(g, "steps", c.steps, "grid");
    read(g, "step", c.step, "grid");
    read(g, "steps_list", c.steps_list, "grid");
  }
  c.training.iterations = 0;
  if (root.contains("training")) {
    const json& t = root["training"];
    check_keys(t,
               {"iterations", "batch", "validation_batch", "learning_rate", "decay_rate",
                "decay_steps", "hidden_widths", "chunk"},
               "training");
    read(t, "iterations", c.training.iterations, "training");
    read(t, "batch", c.training.batch, "training");
    read(t, "validation_batch", c.training.validation_batch, "training");
    read(t, "learning_rate", c.training.learning_rate, "training");
    read(t, "decay_rate", c.training.decay_rate, "training");
    read(t, "decay_steps", c.training.decay_steps, "training");
    read(t, "hidden_widths", c.training.hidden_widths, "training");
    read(t, "chunk", c.training.eval.chunk, "training");
  }
  read(root, "seeds", c.seeds, "config");
  if (root.contains("error_metrics")) {
    const json& e = root["error_metrics"];
    check_keys(e, {"enabled", "batch", "seed"}, "error_metrics");
    read(e, "enabled", c.error_metrics.enabled, "error_metrics");
    read(e, "batch", c.error_metrics.batch, "error_metrics");
    read(e, "seed", c.error_metrics.seed, "error_metrics");
  }
  read(root, "tree_steps", c.tree_steps, "config");
  std::string out_dir = c.out_dir.string();
  read(root, "out_dir", out_dir, "config");
  c.out_dir = out_dir;
  read(root, "threads", c.threads, "config");
  read(root, "checkpoints", c.checkpoints, "config");
  validate_run_config(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

void validate_run_config(const RunConfig& c) {
  const MarketParams& m = c.market;
  if (!(m.spot > 0.0) || !(m.sigma >= 0.0) || !std::isfinite(m.rate) ||
      !std::isfinite(m.dividend)) {
    config_error("market", "spot must be positive, sigma non-negative, rates finite");
  }
  if (c.step < 0.0 || (c.step == 0.0 && c.steps < 1)) config_error("grid", "need steps >= 1");
  for (int n : c.steps_list) {
    if (n < 1) config_error("grid.steps_list", "entries must be >= 1");
  }
  const TrainConfig& t = c.training;
  if (t.iterations < 0 || t.batch < 1 || t.validation_batch < 1 || !(t.learning_rate > 0.0) ||
      !(t.decay_rate > 0.0) || t.decay_steps < 0 || t.eval.chunk < 1) {
    config_error("training", "iterations >= 0, batches >= 1, positive rates and chunk");
  }
  for (int w : t.hidden_widths) {
    if (w < 1) config_error("training.hidden_widths", "widths must be >= 1");
  }
  if (c.seeds.empty()) config_error("seeds", "need at least one seed");
  if (c.error_metrics.batch < 1) config_error("error_metrics.batch", "must be >= 1");
  if (c.tree_steps < 1) config_error("tree_steps", "must be >= 1");
  if (c.threads < 1) config_error("threads", "must be >= 1");
  switch (c.kind) {
    case ExperimentKind::PlainCompound:
    case ExperimentKind::ConvergenceSweep:
      if (c.plain.cases.empty()) config_error("plain_compound.cases", "empty");
      if (!(c.plain.outer_maturity > 0.0 && c.plain.inner_maturity > c.plain.outer_maturity)) {
        config_error("plain_compound", "need 0 < outer_maturity < inner_maturity");
      }
      if (c.plain.outer_strike < 0.0 || c.plain.inner_strike < 0.0) {
        config_error("plain_compound", "strikes must be non-negative");
      }
      break;
    case ExperimentKind::Mfold:
      if (c.mfold.folds.empty()) config_error("mfold.folds", "empty");
      for (int f : c.mfold.folds) {
        if (f < 1 || f > 10) config_error("mfold.folds", "entries must lie in 1..10");
      }
      if (!(c.mfold.date_spacing > 0.0) || c.mfold.strike < 0.0) {
        config_error("mfold", "need date_spacing > 0 and strike >= 0");
      }
      break;
    case ExperimentKind::BermudanBasket:
      if (c.bermudan.dims.empty()) config_error("bermudan_basket.dims", "empty");
      for (int d : c.bermudan.dims) {
        if (d < 1) config_error("bermudan_basket.dims", "entries must be >= 1");
      }
      if (c.bermudan.exercise_dates.empty()) {
        config_error("bermudan_basket.exercise_dates", "empty");
      }
      for (std::size_t i = 0; i < c.bermudan.exercise_dates.size(); ++i) {
        const double prev = i == 0 ? 0.0 : c.bermudan.exercise_dates[i - 1];
        if (!(c.bermudan.exercise_dates[i] > prev)) {
          config_error("bermudan_basket.exercise_dates", "must be positive and increasing");
        }
      }
      break;
    case ExperimentKind::European:
      if (!(c.european.maturity > 0.0) || c.european.stages < 1 || c.european.strike < 0.0) {
        config_error("european", "need maturity > 0, stages >= 1, strike >= 0");
      }
      break;
  }
}

double relative_mse(double estimate, double reference) {
  const double gap = estimate - reference;
  return gap * gap / (reference * reference);
}

double relative_mse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference) {
  if (estimate.size() != reference.size() || reference.size() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "relative_mse needs equal non-empty vectors");
  }
  return (estimate - reference).squaredNorm() / reference.squaredNorm();
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out =
      "case,d1,N,seed,price,price_ref,price_relmse,delta_min,delta_max,delta_ref_min,"
      "delta_ref_max,delta_relmse,validation_loss,iterations\n";
  for (const ResultRow& r : rows) {
    out += r.case_name + "," + std::to_string(r.dim) + "," + std::to_string(r.steps) + "," +
           std::to_string(r.seed) + "," + fmt(r.price) + "," + fmt(r.price_ref) + "," +
           fmt(r.price_relmse) + "," + fmt(r.delta.minCoeff()) + "," + fmt(r.delta.maxCoeff()) +
           "," + fmt(r.delta_ref.minCoeff()) + "," + fmt(r.delta_ref.maxCoeff()) + "," +
           fmt(r.delta_relmse) + "," + fmt(r.validation_loss) + "," +
           std::to_string(r.iterations) + "\n";
  }
  return out;
}

std::string errors_csv(const std::vector<ResultRow>& rows) {
  std::string out = "case,N,h,seed,err_x,err_y,err_z,total,loss,bound\n";
  for (const ResultRow& r : rows) {
    if (!r.errors) continue;
    const ErrorReport& e = *r.errors;
    out += r.case_name + "," + std::to_string(r.steps) + "," + fmt(e.h) + "," +
           std::to_string(r.seed) + "," + fmt(e.err_x) + "," + fmt(e.err_y) + "," +
           fmt(e.err_z) + "," + fmt(e.total) + "," + fmt(e.loss) + "," + fmt(e.h + e.loss) +
           "\n";
  }
  return out;
}

std::string convergence_csv(const std::vector<ConvergencePoint>& points) {
  std::string out = "case,N,h,err_x,err_y,err_z,total,loss,bound\n";
  for (const ConvergencePoint& p : points) {
    out += p.case_name + "," + std::to_string(p.steps) + "," + fmt(p.h) + "," +
           fmt(p.mean.err_x) + "," + fmt(p.mean.err_y) + "," + fmt(p.mean.err_z) + "," +
           fmt(p.mean.total) + "," + fmt(p.mean.loss) + "," + fmt(p.bound) + "\n";
  }
  return out;
}

RunOutput run_experiment(const RunConfig& config, const ProgressFn& progress) {
  if (config.kind == ExperimentKind::ConvergenceSweep) return run_convergence(config, progress);
  validate_run_config(config);
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };

  // Specs, references and surfaces are all built before any training.
  const std::vector<CasePlan> plans = plan_cases(config);

  RunOutput output;
  json rows_json = json::array();
  for (const CasePlan& plan : plans) {
    TrainConfig tc = config.training;
    if (tc.iterations == 0) {
      tc.iterations = (plan.spec.model.dim() == 1 && plan.spec.stages() <= 2) ? 4000 : 6000;
    }
    tc.eval.threads = config.threads;
    const int n = plan.spec.grid.total_steps();
    for (std::uint64_t seed : config.seeds) {
      say(plan.name + " N=" + std::to_string(n) + " seed=" + std::to_string(seed) + ": training " +
          std::to_string(tc.iterations) + " iterations");
      TrainResult trained = train(plan.spec, seed, tc);
      ResultRow row;
      row.case_name = plan.name;
      row.dim = plan.dim;
      row.steps = n;
      row.seed = seed;
      row.price = trained.report.price;
      row.price_ref = plan.price_ref;
      row.price_relmse = relative_mse(row.price, row.price_ref);
      row.delta = trained.report.delta;
      row.delta_ref = plan.delta_ref;
      row.delta_relmse = relative_mse(row.delta, row.delta_ref);
      row.validation_loss = trained.report.validation_loss;
      row.iterations = tc.iterations;
      row.wall_seconds = trained.report.wall_seconds;
      if (config.error_metrics.enabled && plan.surface) {
        const std::uint64_t eval_seed = config.error_metrics.seed != 0
                                            ? derive_seed(config.error_metrics.seed, seed)
                                            : derive_seed(seed, 3);
        row.errors = error_metrics(plan.spec, trained.nets, *plan.surface,
                                   config.error_metrics.batch, eval_seed, tc.eval);
      } else if (config.error_metrics.enabled) {
        say(plan.name + ": no reference surface, error metrics skipped");
      }
      if (config.checkpoints) {
        std::filesystem::create_directories(config.out_dir);
        const auto path = config.out_dir / (plan.name + "_N" + std::to_string(n) + "_seed" +
                                            std::to_string(seed) + ".ckpt");
        write_solver_checkpoint(path.string(), trained.nets, seed,
                                static_cast<std::uint64_t>(tc.iterations));
      }
      say(plan.name + ": price " + fmt(row.price) + " (ref " + fmt(row.price_ref) +
          "), relMSE " + fmt(row.price_relmse));

      json r = {{"case", row.case_name},
                {"d1", row.dim},
                {"N", row.steps},
                {"h", plan.spec.grid.step()},
                {"seed", row.seed},
                {"price", row.price},
                {"price_ref", row.price_ref},
                {"price_relmse", row.price_relmse},
                {"delta", vector_json(row.delta)},
                {"delta_ref", vector_json(row.delta_ref)},
                {"delta_relmse", row.delta_relmse},
                {"validation_loss", row.validation_loss},
                {"iterations", row.iterations},
                {"wall_seconds", row.wall_seconds},
                {"decay_rate", tc.decay_rate},
                {"decay_steps", tc.decay_steps > 0 ? tc.decay_steps : tc.iterations / 5},
                {"clamped_states", trained.report.clamped_states},
                {"initial_stage_grad_norms", trained.report.initial_stage_grad_norms},
                {"losses", trained.report.losses}};
      if (!plan.tree_layers.empty()) r["tree_exercise_layers"] = plan.tree_layers;
      if (row.errors) {
        const ErrorReport& e = *row.errors;
        r["errors"] = {{"err_x", e.err_x}, {"err_y", e.err_y}, {"err_z", e.err_z},
                       {"total", e.total}, {"loss", e.loss},   {"h", e.h},
                       {"bound", e.h + e.loss}};
      }
      rows_json.push_back(std::move(r));
      output.reports.push_back(std::move(trained.report));
      output.rows.push_back(std::move(row));
    }
  }

  std::filesystem::create_directories(config.out_dir);
  write_file_atomic(config.out_dir / "results.csv", results_csv(output.rows));
  const bool any_errors =
      std::any_of(output.rows.begin(), output.rows.end(), [](const ResultRow& r) {
        return r.errors.has_value();
      });
  if (any_errors) write_file_atomic(config.out_dir / "errors.csv", errors_csv(output.rows));
  json report = {{"config", config_to_json(config)}, {"rows", rows_json}};
  write_file_atomic(config.out_dir / "report.json", report.dump(2) + "\n");
  return output;
}

RunOutput run_convergence(const RunConfig& config, const ProgressFn& progress) {
  RunConfig c = config;
  if (c.kind == ExperimentKind::ConvergenceSweep) c.kind = ExperimentKind::PlainCompound;
  if (c.kind == ExperimentKind::Mfold) {
    throw Error(ErrorCode::ReferenceUnavailable,
                "convergence studies need a reference surface; mfold has none at batch scale");
  }
  if (c.steps_list.empty()) c.steps_list = {10, 20, 30, 40, 50};
  c.error_metrics.enabled = true;
  RunOutput output = run_experiment(c, progress);
  output.convergence = aggregate(output.rows);
  write_file_atomic(c.out_dir / "convergence.csv", convergence_csv(output.convergence));
  return output;
}

}  // namespace cbsde
