// crowd: command-line front end for simulation, aggregation, bounds and
// experiments. Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crowd/aggregate.hpp"
#include "crowd/bounds.hpp"
#include "crowd/em.hpp"
#include "crowd/experiment.hpp"
#include "crowd/io.hpp"
#include "crowd/simulate.hpp"
#include "json.hpp"

namespace {

using json = nlohmann::json;
using namespace crowd;

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json branch_json(const BoundBranch& b) {
  return {{"condition_holds", b.condition_holds},
          {"threshold", b.threshold},
          {"value", opt_json(b.value)},
          {"log_term", opt_json(b.log_term)}};
}

json report_json(const BoundReport& r) {
  json details = json::object();
  for (const auto& [k, v] : r.details) details[k] = v;
  return {{"kind", r.kind}, {"upper", branch_json(r.upper)}, {"lower", branch_json(r.lower)}, {"details", details}};
}

json quantities_json(const ScoreQuantities& sq) {
  return {{"A_f", sq.a_f}, {"t_low", sq.t_low}, {"t_high", sq.t_high}, {"c", sq.c},
          {"sigma2", sq.sigma2}, {"tau_min", sq.tau_min}, {"tau_max", sq.tau_max}};
}

// Writes to the file if a path is given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ValidationError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ------------------------------------------------------------------ simulate

struct SimulateArgs {
  int workers = 31;
  int items = 200;
  int classes = 2;
  double q = 1.0;
  std::optional<double> accuracy;
  std::vector<double> accuracies;
  double beta_a = 2.3;
  double beta_b = 2.0;
  double tolerance = 0.01;
  bool misspecified = false;
  bool binary = false;
  std::uint64_t seed = 0;
  std::string out;
  std::string truth_out;
};

void run_simulate(const SimulateArgs& a) {
  std::optional<SimOutput> sim;
  if (a.misspecified) {
    MisspecifiedConfig mc;
    mc.q = a.q;
    mc.seed = a.seed;
    sim = make_misspecified_dataset(mc);
  } else {
    std::vector<double> w = a.accuracies;
    if (w.empty() && a.accuracy) w.assign(static_cast<std::size_t>(a.workers), *a.accuracy);
    if (w.empty()) {
      w = sample_workers_beta(a.workers, a.beta_a, a.beta_b, a.beta_a / (a.beta_a + a.beta_b), a.tolerance, a.seed);
    }
    SimConfig config{static_cast<int>(w.size()), a.items, a.classes, Prior::uniform(a.classes),
                     AssignmentModel::constant(a.q), WorkerModel::homogeneous(a.classes, w), a.seed};
    sim = simulate_dataset(config);
  }
  const LabelSet set(sim->labels.num_classes(), a.binary);
  const auto items = index_ids(sim->labels.num_items());
  Output out(a.out);
  write_labels(out.stream(), sim->labels, index_ids(sim->labels.num_workers()), items, set);
  if (!a.truth_out.empty()) {
    Output truth(a.truth_out);
    write_truth(truth.stream(), sim->truth, items, set);
  }
}

// ----------------------------------------------------------------- aggregate

struct LoadArgs {
  std::string in;
  std::string truth;
  std::string format = "csv-triples";
  int classes = 0;
  bool binary = false;

  LoadOptions options() const { return {parse_label_format(format), classes, binary}; }
};

void add_load_options(CLI::App* cmd, LoadArgs& a) {
  cmd->add_option("--in", a.in, "Label file")->required();
  cmd->add_option("--truth", a.truth, "Truth file (item,label)");
  cmd->add_option("--format", a.format, "csv-triples or dense-csv");
  cmd->add_option("--classes", a.classes, "Number of classes (0 infers)");
  cmd->add_flag("--binary", a.binary, "Labels are +1/-1");
}

struct AggregateArgs {
  LoadArgs load;
  std::string method = "mv";
  std::vector<double> weights;
  std::vector<double> accuracies;
  int max_iters = 0;
  std::optional<std::uint64_t> tie_seed;
  std::string out;
};

void run_aggregate(const AggregateArgs& a) {
  const auto loaded = load_labels(a.load.in, a.load.options());
  const auto& z = loaded.labels;
  const TieBreak tie = a.tie_seed ? TieBreak::random(*a.tie_seed) : TieBreak{};
  Predictions pred;
  std::optional<int> iterations;
  switch (parse_method(a.method)) {
    case Method::Mv:
      pred = majority_vote(z, tie);
      break;
    case Method::Wmv:
      if (a.weights.empty()) throw ValidationError("wmv needs --weights");
      pred = weighted_majority_vote(z, a.weights, {}, tie);
      break;
    case Method::Iwmv:
    case Method::IwmvLog: {
      IwmvOptions o;
      o.mode = a.method == "iwmv" ? WeightMode::Linear : WeightMode::Log;
      if (a.max_iters > 0) o.max_iters = a.max_iters;
      o.tie = tie;
      auto r = iwmv(z, o);
      pred = std::move(r.predictions);
      iterations = r.iterations;
      break;
    }
    case Method::OneStepWmv:
      pred = one_step_wmv(z, tie);
      break;
    case Method::EmGds:
    case Method::EmHds: {
      EmConfig c;
      c.model = a.method == "em-gds" ? EmConfig::Model::General : EmConfig::Model::Homogeneous;
      if (a.max_iters > 0) c.max_iters = a.max_iters;
      c.tie = tie;
      auto r = em_fit(z, c);
      pred = em_map_predict(r, tie);
      iterations = r.iterations;
      break;
    }
    case Method::OracleMap:
      if (a.accuracies.empty()) throw ValidationError("oracle-map needs --accuracies (homogeneous model)");
      pred = oracle_map_predict(z, WorkerModel::homogeneous(z.num_classes(), a.accuracies), Prior::uniform(z.num_classes()),
                                tie);
      break;
  }
  Output out(a.out);
  write_truth(out.stream(), pred, loaded.item_ids, loaded.label_set);
  if (iterations) std::cerr << "iterations " << *iterations << '\n';
  if (!a.load.truth.empty()) {
    const auto truth = load_truth(a.load.truth, loaded);
    std::cerr << "error_rate " << format_double(error_rate(pred, truth)) << '\n';
  }
}

// -------------------------------------------------------------------- bounds

struct BoundsArgs {
  std::string scenario;
  std::vector<double> q{1.0};
  std::vector<double> weights;
  std::vector<double> accuracies;
  std::vector<double> p_plus;
  std::vector<double> p_minus;
  double shift = 0.0;
  double w_bar = 0.0;
  int workers = 0;
  int classes = 2;
  int items = 0;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::string rho = "statement";
  std::string config;
};

WorkerModel model_from_json(const json& j, int classes) {
  const auto type = j.at("type").get<std::string>();
  if (type == "homogeneous") return WorkerModel::homogeneous(classes, j.at("accuracies").get<std::vector<double>>());
  if (type == "class_conditional") {
    return WorkerModel::class_conditional(classes, j.at("accuracies").get<std::vector<std::vector<double>>>());
  }
  if (type == "general") {
    std::vector<ConfusionTable> tables;
    for (const auto& t : j.at("tables")) tables.emplace_back(classes, t.get<std::vector<double>>());
    return WorkerModel::general(std::move(tables));
  }
  throw DomainError("unknown model type '" + type + "'");
}

AssignmentModel assignment_from_json(const json& j) {
  if (j.is_number()) return AssignmentModel::constant(j.get<double>());
  if (j.is_array() && !j.empty() && j.front().is_array()) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (r.size() != rows.front().size()) throw DimensionMismatch("assignment matrix rows differ in length");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return AssignmentModel::per_entry(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()), flat);
  }
  return AssignmentModel::per_worker(j.get<std::vector<double>>());
}

// {"classes", "model", "prior"?, "assignment", "items"?, "rule": {"type": majority|weighted|oracle-map|scores, ...}}
json general_bounds(const std::string& path, const BoundsArgs& a) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bounds config: ") + e.what());
  }
  try {
    const int l = j.at("classes").get<int>();
    const auto model = model_from_json(j.at("model"), l);
    const auto prior = j.contains("prior") ? Prior(j.at("prior").get<std::vector<double>>()) : Prior::uniform(l);
    const auto assignment = assignment_from_json(j.at("assignment"));
    const int items = j.value("items", 1);
    const auto& r = j.at("rule");
    const auto type = r.at("type").get<std::string>();
    std::optional<DecomposableRule> rule;
    if (type == "majority") {
      rule = DecomposableRule::majority(model.num_workers(), l);
    } else if (type == "weighted") {
      rule = DecomposableRule::weighted(r.at("weights").get<std::vector<double>>(), l,
                                        r.value("shifts", std::vector<double>{}));
    } else if (type == "oracle-map") {
      rule = DecomposableRule::oracle_map(model, prior);
    } else if (type == "scores") {
      rule = DecomposableRule(model.num_workers(), l, r.at("scores").get<std::vector<double>>(),
                              r.value("shifts", std::vector<double>(static_cast<std::size_t>(l), 0.0)));
    } else {
      throw DomainError("unknown rule type '" + type + "'");
    }
    const auto sq = score_quantities(*rule, assignment, model, items);
    json out{{"quantities", quantities_json(sq)}, {"mean_error", report_json(mean_error_bounds(sq))}};
    json per_item = json::array();
    for (std::size_t p = 0; p < sq.tau_min.size(); ++p) {
      per_item.push_back(report_json(per_item_bounds(sq.tau_min[p], sq.tau_max[p], sq.c, sq.sigma2, l)));
    }
    out["per_item"] = per_item;
    if (a.epsilon && a.items > 0) out["high_probability"] = report_json(high_prob_bound(sq, a.items, *a.epsilon));
    if (a.epsilon && a.delta && a.items > 0) {
      out["confidence"] = report_json(confidence_thresholds(*a.epsilon, *a.delta, a.items, l, sq.t_low, sq.t_high));
    }
    return out;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bounds config: ") + e.what());
  }
}

void add_probability_bounds(json& out, const ScoreQuantities& sq, const BoundsArgs& a) {
  out["quantities"] = quantities_json(sq);
  out["mean_error"] = report_json(mean_error_bounds(sq));
  if (a.epsilon && a.items > 0) out["high_probability"] = report_json(high_prob_bound(sq, a.items, *a.epsilon));
  if (a.epsilon && a.delta && a.items > 0) {
    out["confidence"] = report_json(confidence_thresholds(*a.epsilon, *a.delta, a.items, sq.num_classes, sq.t_low, sq.t_high));
  }
}

void run_bounds(const BoundsArgs& a) {
  json out;
  if (a.scenario == "wmv-hds") {
    if (a.q.size() != 1) throw ValidationError("wmv-hds takes one --q value");
    const auto weights = a.weights.empty() ? bound_optimal_weights(a.accuracies, a.classes) : a.weights;
    add_probability_bounds(out, quantities_wmv_hds(a.q.front(), weights, a.accuracies, a.classes), a);
  } else if (a.scenario == "hyperplane") {
    std::vector<double> q = a.q;
    if (q.size() == 1) q.assign(a.weights.size(), q.front());
    add_probability_bounds(out, quantities_hyperplane(q, a.weights, a.shift, a.p_plus, a.p_minus), a);
  } else if (a.scenario == "mv-hds") {
    if (a.q.size() != 1) throw ValidationError("mv-hds takes one --q value");
    out["mv"] = report_json(mv_bounds_hds(a.q.front(), a.w_bar, a.workers, a.classes));
  } else if (a.scenario == "oswmv") {
    const auto convention = a.rho == "proof" ? RhoConvention::Proof : RhoConvention::Statement;
    if (a.rho != "proof" && a.rho != "statement") throw ValidationError("--rho must be statement or proof");
    out["one_step_wmv"] = report_json(one_step_wmv_bound(a.accuracies, a.items, a.classes, convention));
  } else if (a.scenario == "general") {
    if (a.config.empty()) throw ValidationError("general bounds need --config");
    out = general_bounds(a.config, a);
  } else {
    throw ValidationError("unknown bounds scenario '" + a.scenario + "'");
  }
  std::cout << out.dump(2) << '\n';
}

// -------------------------------------------------------- summarize / report

void run_summarize(const LoadArgs& a) {
  const auto loaded = load_labels(a.in, a.options());
  std::optional<Predictions> truth;
  if (!a.truth.empty()) truth = load_truth(a.truth, loaded);
  const auto s = summarize_dataset(loaded.labels, truth ? &*truth : nullptr);
  json out{{"classes", s.num_classes},   {"workers", s.num_workers},
           {"items", s.num_items},       {"labels", s.num_labels},
           {"density", s.density},       {"labels_per_worker", s.labels_per_worker}};
  if (s.mean_worker_accuracy) out["mean_worker_accuracy"] = *s.mean_worker_accuracy;
  std::cout << out.dump(2) << '\n';
}

void run_report(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw ValidationError("cannot open '" + in_path + "'");
  const auto report = summarize_results(read_results_csv(in));
  Output out(out_path);
  write_report_csv(out.stream(), report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowdsourced label aggregation, error bounds and experiments"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate a homogeneous or misspecified dataset");
  simulate->add_option("--workers", sim.workers);
  simulate->add_option("--items", sim.items);
  simulate->add_option("--classes", sim.classes);
  simulate->add_option("--q", sim.q, "Assignment probability");
  simulate->add_option("--accuracy", sim.accuracy, "Same accuracy for every worker");
  simulate->add_option("--accuracies", sim.accuracies, "Per-worker accuracies")->delimiter(',');
  simulate->add_option("--beta-a", sim.beta_a);
  simulate->add_option("--beta-b", sim.beta_b);
  simulate->add_option("--tolerance", sim.tolerance, "Window around the Beta mean for the batch mean");
  simulate->add_flag("--misspecified", sim.misspecified, "Two-group, two-item-set block accuracies");
  simulate->add_flag("--binary", sim.binary, "Write labels as +1/-1");
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--out", sim.out, "Label file (stdout when omitted)");
  simulate->add_option("--truth-out", sim.truth_out, "Truth file");

  AggregateArgs agg;
  auto* aggregate = app.add_subcommand("aggregate", "Aggregate labels into predictions");
  add_load_options(aggregate, agg.load);
  aggregate->add_option("--method", agg.method, "mv, wmv, iwmv, iwmv-log, oswmv, em-gds, em-hds, oracle-map");
  aggregate->add_option("--weights", agg.weights, "wmv weights")->delimiter(',');
  aggregate->add_option("--accuracies", agg.accuracies, "True accuracies for oracle-map")->delimiter(',');
  aggregate->add_option("--max-iters", agg.max_iters);
  aggregate->add_option("--tie-seed", agg.tie_seed, "Break ties uniformly at random with this seed");
  aggregate->add_option("--out", agg.out, "Prediction file (stdout when omitted)");

  BoundsArgs bnd;
  auto* bounds = app.add_subcommand("bounds", "Evaluate error-rate bounds");
  bounds->add_option("--scenario", bnd.scenario, "wmv-hds, hyperplane, mv-hds, oswmv or general")->required();
  bounds->add_option("--q", bnd.q, "Assignment probability (per worker for hyperplane)")->delimiter(',');
  bounds->add_option("--weights", bnd.weights)->delimiter(',');
  bounds->add_option("--accuracies", bnd.accuracies)->delimiter(',');
  bounds->add_option("--p-plus", bnd.p_plus)->delimiter(',');
  bounds->add_option("--p-minus", bnd.p_minus)->delimiter(',');
  bounds->add_option("--shift", bnd.shift);
  bounds->add_option("--w-bar", bnd.w_bar);
  bounds->add_option("--workers", bnd.workers);
  bounds->add_option("--classes", bnd.classes);
  bounds->add_option("--items", bnd.items);
  bounds->add_option("--epsilon", bnd.epsilon);
  bounds->add_option("--delta", bnd.delta);
  bounds->add_option("--rho", bnd.rho, "statement or proof");
  bounds->add_option("--config", bnd.config, "JSON description for the general scenario");

  std::string config_path;
  std::string output_override;
  std::optional<int> threads;
  auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo experiment");
  experiment->add_option("--config", config_path)->required();
  experiment->add_option("--output", output_override, "Output prefix (<prefix>.csv, <prefix>.jsonl)");
  experiment->add_option("--threads", threads);

  LoadArgs sum;
  auto* summarize = app.add_subcommand("summarize", "Summarize a label file");
  add_load_options(summarize, sum);

  std::string report_in;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Aggregate experiment rows into means per sweep point");
  report->add_option("--in", report_in)->required();
  report->add_option("--out", report_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) run_simulate(sim);
    if (aggregate->parsed()) run_aggregate(agg);
    if (bounds->parsed()) run_bounds(bnd);
    if (summarize->parsed()) run_summarize(sum);
    if (report->parsed()) run_report(report_in, report_out);
    if (experiment->parsed()) {
      auto config = load_experiment_config(config_path);
      if (!output_override.empty()) config.output = output_override;
      if (threads) config.threads = *threads;
      if (config.output.empty()) throw ValidationError("experiment needs an output prefix");
      const auto rows = run_experiment(config);
      write_results(config.output, rows);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
