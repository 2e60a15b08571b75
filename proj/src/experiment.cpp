#include "crowd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "crowd/aggregate.hpp"
#include "crowd/bounds.hpp"
#include "crowd/em.hpp"
#include "json.hpp"

namespace crowd {

namespace {

using json = nlohmann::json;

constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::Mv, "mv"},           {Method::Wmv, "wmv"},       {Method::Iwmv, "iwmv"},
    {Method::IwmvLog, "iwmv-log"}, {Method::OneStepWmv, "oswmv"}, {Method::EmGds, "em-gds"},
    {Method::EmHds, "em-hds"},     {Method::OracleMap, "oracle-map"},
};

constexpr std::pair<SweepVariable, const char*> kSweepNames[] = {
    {SweepVariable::None, "none"},   {SweepVariable::MeanAccuracy, "mean_accuracy"},
    {SweepVariable::Workers, "workers"}, {SweepVariable::Items, "items"},
    {SweepVariable::Q, "q"},         {SweepVariable::S, "s"},
};

// ------------------------------------------------------------ config parsing

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw DomainError("unknown key '" + key + "' in " + where);
    }
  }
}

std::vector<double> parse_grid(const json& sweep) {
  if (sweep.contains("values")) return sweep.at("values").get<std::vector<double>>();
  const double from = sweep.at("from").get<double>();
  const double to = sweep.at("to").get<double>();
  const double step = sweep.at("step").get<double>();
  if (!(step > 0.0) || to < from) throw DomainError("sweep range needs step > 0 and to >= from");
  const auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Snap to a 1e-12 lattice so 0.38 + 3 * 0.05 prints as 0.53.
    grid[i] = std::round((from + static_cast<double>(i) * step) * 1e12) / 1e12;
  }
  return grid;
}

WorkerSpec parse_worker_spec(const json& j) {
  reject_unknown_keys(j, {"type", "a", "b", "tolerance", "value", "values"}, "accuracy");
  WorkerSpec spec;
  const auto type = j.at("type").get<std::string>();
  if (type == "beta") {
    spec.kind = WorkerSpec::Kind::Beta;
    spec.a = get_or(j, "a", spec.a);
    spec.b = get_or(j, "b", spec.b);
    spec.tolerance = get_or(j, "tolerance", spec.tolerance);
  } else if (type == "constant") {
    spec.kind = WorkerSpec::Kind::Constant;
    spec.accuracy = j.at("value").get<double>();
  } else if (type == "fixed") {
    spec.kind = WorkerSpec::Kind::Fixed;
    spec.accuracies = j.at("values").get<std::vector<double>>();
  } else {
    throw DomainError("unknown accuracy type '" + type + "'");
  }
  return spec;
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).string();
}

// -------------------------------------------------------------- trial setup

struct TrialData {
  SimOutput data;
  // Known only for homogeneous simulations.
  std::optional<WorkerModel> model;
  std::optional<Prior> prior;
  std::vector<double> accuracies;
  double q = 1.0;
  bool uniform_prior = true;
};

std::vector<double> trial_accuracies(const ExperimentConfig& config, int num_workers, double sweep,
                                     std::uint64_t seed) {
  const auto& spec = config.workers;
  const bool sweeping = config.sweep == SweepVariable::MeanAccuracy;
  switch (spec.kind) {
    case WorkerSpec::Kind::Constant:
      return std::vector<double>(static_cast<std::size_t>(num_workers), sweeping ? sweep : spec.accuracy);
    case WorkerSpec::Kind::Fixed:
      return spec.accuracies;
    case WorkerSpec::Kind::Beta:
      break;
  }
  const double a = sweeping ? beta_shape_for_mean(sweep, spec.b) : spec.a;
  if (spec.tolerance > 0.0) {
    return sample_workers_beta(num_workers, a, spec.b, a / (a + spec.b), spec.tolerance, seed);
  }
  auto rng = make_stream(seed, StreamTag::Workers);
  return sample_beta(num_workers, a, spec.b, rng);
}

TrialData make_trial(const ExperimentConfig& config, const std::optional<LoadedLabels>& dataset,
                     const Predictions& dataset_truth, double sweep, std::uint64_t seed) {
  switch (config.kind) {
    case ExperimentConfig::Kind::Dataset: {
      const double s = config.sweep == SweepVariable::S ? sweep : 1.0;
      return {{dataset_truth, subsample_labels(dataset->labels, s, seed)}, {}, {}, {}, 1.0, true};
    }
    case ExperimentConfig::Kind::Misspecified: {
      auto mc = config.misspecified;
      mc.q = config.sweep == SweepVariable::Q ? sweep : config.q;
      mc.seed = seed;
      return {make_misspecified_dataset(mc), {}, {}, {}, mc.q, true};
    }
    case ExperimentConfig::Kind::Hds:
      break;
  }
  const int m = config.sweep == SweepVariable::Workers ? static_cast<int>(sweep) : config.num_workers;
  const int n = config.sweep == SweepVariable::Items ? static_cast<int>(sweep) : config.num_items;
  const double q = config.sweep == SweepVariable::Q ? sweep : config.q;
  const int l = config.num_classes;
  auto accuracies = trial_accuracies(config, m, sweep, seed);
  auto model = WorkerModel::homogeneous(l, accuracies);
  auto prior = config.prior.empty() ? Prior::uniform(l) : Prior(config.prior);
  const bool uniform = config.prior.empty();
  SimConfig sim{m, n, l, prior, AssignmentModel::constant(q), model, seed};
  return {simulate_dataset(sim), std::move(model), std::move(prior), std::move(accuracies), q, uniform};
}

struct MethodOutput {
  Predictions predictions;
  int iterations = 0;
};

MethodOutput run_method(Method method, const ExperimentConfig& config, const TrialData& trial) {
  const auto& labels = trial.data.labels;
  const int l = labels.num_classes();
  switch (method) {
    case Method::Mv:
      return {majority_vote(labels), 0};
    case Method::Wmv:
      if (!trial.model) throw ValidationError("wmv needs known worker accuracies");
      return {weighted_majority_vote(labels, bound_optimal_weights(trial.accuracies, l)), 0};
    case Method::Iwmv:
    case Method::IwmvLog: {
      IwmvOptions options;
      options.mode = method == Method::Iwmv ? WeightMode::Linear : WeightMode::Log;
      options.max_iters = config.fixed_iterations.value_or(config.iwmv_max_iters);
      options.fixed_iterations = config.fixed_iterations.has_value();
      auto r = iwmv(labels, options);
      return {std::move(r.predictions), r.iterations};
    }
    case Method::OneStepWmv:
      return {one_step_wmv(labels), 1};
    case Method::EmGds:
    case Method::EmHds: {
      EmConfig em;
      em.model = method == Method::EmGds ? EmConfig::Model::General : EmConfig::Model::Homogeneous;
      em.max_iters = config.fixed_iterations.value_or(config.em_max_iters);
      em.fixed_iterations = config.fixed_iterations.has_value();
      em.tolerance = config.em_tolerance;
      auto r = em_fit(labels, em);
      return {em_map_predict(r), r.iterations};
    }
    case Method::OracleMap:
      if (!trial.model) throw ValidationError("oracle-map needs the true worker model");
      return {oracle_map_predict(labels, *trial.model, *trial.prior), 0};
  }
  throw DomainError("unknown method");
}

// Theorem-style bound for the rules whose quantities have a closed form under
// the homogeneous model.
std::optional<BoundReport> method_bound(Method method, const TrialData& trial) {
  if (!trial.model) return std::nullopt;
  const int l = trial.model->num_classes();
  try {
    switch (method) {
      case Method::Mv: {
        const std::vector<double> ones(trial.accuracies.size(), 1.0);
        return mean_error_bounds(quantities_wmv_hds(trial.q, ones, trial.accuracies, l));
      }
      case Method::Wmv:
        return mean_error_bounds(
            quantities_wmv_hds(trial.q, bound_optimal_weights(trial.accuracies, l), trial.accuracies, l));
      case Method::OracleMap:
        if (!trial.uniform_prior) return std::nullopt;
        return oracle_map_hds_bound(trial.q, trial.accuracies, l);
      default:
        return std::nullopt;
    }
  } catch (const DomainError&) {
    // e.g. an all-zero weight vector: no bound for this trial.
    return std::nullopt;
  }
}

std::vector<ResultRow> run_trial(const ExperimentConfig& config, const std::optional<LoadedLabels>& dataset,
                                 const Predictions& dataset_truth, std::size_t sweep_index, double sweep, int trial) {
  const std::uint64_t seed =
      derive_seed(config.seed, StreamTag::Trial, (static_cast<std::uint64_t>(sweep_index) << 32) | static_cast<std::uint32_t>(trial));
  std::vector<ResultRow> rows;
  rows.reserve(config.methods.size());
  std::optional<TrialData> data;
  std::string setup_error;
  try {
    data = make_trial(config, dataset, dataset_truth, sweep, seed);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  for (Method method : config.methods) {
    ResultRow row;
    row.scenario = config.scenario;
    row.method = method_name(method);
    row.sweep = sweep;
    row.trial = trial;
    if (!data) {
      row.error = setup_error;
      rows.push_back(std::move(row));
      continue;
    }
    try {
      const auto start = std::chrono::steady_clock::now();
      auto out = run_method(method, config, *data);
      const auto stop = std::chrono::steady_clock::now();
      if (config.timing) row.seconds = std::chrono::duration<double>(stop - start).count();
      row.error_rate = error_rate(out.predictions, data->data.truth);
      row.iterations = out.iterations;
      if (const auto bound = method_bound(method, *data)) {
        row.bound_upper = bound->upper.value;
        row.bound_lower = bound->lower.value;
        row.condition = bound->upper.condition_holds;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ------------------------------------------------------------- result files

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_opt_double(const std::string& cell, std::size_t line) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) throw ParseError(line, "bad number '" + cell + "'");
  return value;
}

json row_json(const ResultRow& r) {
  const auto opt = [](const auto& v) -> json { return v ? json(*v) : json(nullptr); };
  return json{{"scenario", r.scenario},     {"method", r.method},
              {"sweep", r.sweep},           {"trial", r.trial},
              {"error_rate", opt(r.error_rate)}, {"iterations", opt(r.iterations)},
              {"seconds", r.seconds},       {"bound_upper", opt(r.bound_upper)},
              {"bound_lower", opt(r.bound_lower)}, {"condition", opt(r.condition)},
              {"error", opt(r.error)}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string method_name(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  throw DomainError("unknown method");
}

Method parse_method(const std::string& name) {
  for (const auto& [m, n] : kMethodNames) {
    if (name == n) return m;
  }
  throw DomainError("unknown method '" + name + "'");
}

std::string sweep_name(SweepVariable variable) {
  for (const auto& [v, name] : kSweepNames) {
    if (v == variable) return name;
  }
  throw DomainError("unknown sweep variable");
}

SweepVariable parse_sweep(const std::string& name) {
  for (const auto& [v, n] : kSweepNames) {
    if (name == n) return v;
  }
  throw DomainError("unknown sweep variable '" + name + "'");
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& base_dir) {
  ExperimentConfig c;
  try {
    const auto j = json::parse(json_text);
    if (!j.is_object()) throw DomainError("experiment config must be a JSON object");
    reject_unknown_keys(j,
                        {"scenario", "kind", "workers", "items", "classes", "q", "prior", "accuracy", "misspecified",
                         "dataset", "methods", "trials", "sweep", "seed", "threads", "timing", "fixed_iterations",
                         "iwmv_max_iters", "em_max_iters", "em_tolerance", "output"},
                        "experiment config");
    c.scenario = get_or<std::string>(j, "scenario", c.scenario);
    const auto kind = get_or<std::string>(j, "kind", "hds");
    if (kind == "hds") {
      c.kind = ExperimentConfig::Kind::Hds;
    } else if (kind == "misspecified") {
      c.kind = ExperimentConfig::Kind::Misspecified;
    } else if (kind == "dataset") {
      c.kind = ExperimentConfig::Kind::Dataset;
    } else {
      throw DomainError("unknown experiment kind '" + kind + "'");
    }
    c.num_workers = get_or(j, "workers", c.num_workers);
    c.num_items = get_or(j, "items", c.num_items);
    c.num_classes = get_or(j, "classes", c.num_classes);
    c.q = get_or(j, "q", c.q);
    c.prior = get_or(j, "prior", c.prior);
    if (j.contains("accuracy")) c.workers = parse_worker_spec(j.at("accuracy"));
    if (j.contains("misspecified")) {
      const auto& m = j.at("misspecified");
      reject_unknown_keys(m, {"group_sizes", "item_sets", "accuracy"}, "misspecified");
      if (m.contains("group_sizes")) {
        const auto g = m.at("group_sizes").get<std::array<int, 2>>();
        c.misspecified.group_sizes[0] = g[0];
        c.misspecified.group_sizes[1] = g[1];
      }
      if (m.contains("item_sets")) {
        const auto s = m.at("item_sets").get<std::array<int, 2>>();
        c.misspecified.item_set_sizes[0] = s[0];
        c.misspecified.item_set_sizes[1] = s[1];
      }
      if (m.contains("accuracy")) c.misspecified.accuracy = m.at("accuracy").get<std::array<std::array<double, 2>, 2>>();
    }
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      reject_unknown_keys(d, {"labels", "truth", "format", "binary", "classes"}, "dataset");
      c.labels_path = resolve_path(d.at("labels").get<std::string>(), base_dir);
      c.truth_path = resolve_path(get_or<std::string>(d, "truth", ""), base_dir);
      c.load.format = parse_label_format(get_or<std::string>(d, "format", "csv-triples"));
      c.load.binary = get_or(d, "binary", false);
      c.load.num_classes = get_or(d, "classes", 0);
    }
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& name : j.at("methods").get<std::vector<std::string>>()) c.methods.push_back(parse_method(name));
    }
    c.trials = get_or(j, "trials", c.trials);
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      reject_unknown_keys(s, {"variable", "values", "from", "to", "step"}, "sweep");
      c.sweep = parse_sweep(s.at("variable").get<std::string>());
      c.grid = parse_grid(s);
    }
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.threads = get_or(j, "threads", c.threads);
    c.timing = get_or(j, "timing", c.timing);
    if (j.contains("fixed_iterations") && !j.at("fixed_iterations").is_null()) {
      c.fixed_iterations = j.at("fixed_iterations").get<int>();
    }
    c.iwmv_max_iters = get_or(j, "iwmv_max_iters", c.iwmv_max_iters);
    c.em_max_iters = get_or(j, "em_max_iters", c.em_max_iters);
    c.em_tolerance = get_or(j, "em_tolerance", c.em_tolerance);
    c.output = resolve_path(get_or<std::string>(j, "output", ""), base_dir);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str(), std::filesystem::path(path).parent_path().string());
}

void validate_config(const ExperimentConfig& c) {
  using Kind = ExperimentConfig::Kind;
  if (c.trials < 1) throw DomainError("trials must be at least 1");
  if (c.threads < 1) throw DomainError("threads must be at least 1");
  if (c.methods.empty()) throw DomainError("methods must not be empty");
  if (c.fixed_iterations && *c.fixed_iterations < 1) throw DomainError("fixed_iterations must be at least 1");
  if (c.iwmv_max_iters < 1 || c.em_max_iters < 1) throw DomainError("iteration caps must be at least 1");
  if (!(c.em_tolerance > 0.0)) throw DomainError("em_tolerance must be positive");
  if (c.sweep != SweepVariable::None && c.grid.empty()) throw DomainError("sweep grid must not be empty");
  if (c.sweep == SweepVariable::None && !c.grid.empty()) throw DomainError("grid given without a sweep variable");
  if (!(c.q > 0.0 && c.q <= 1.0)) throw DomainError("q must lie in (0, 1]");

  for (Method m : c.methods) {
    if ((m == Method::Wmv || m == Method::OracleMap) && c.kind != Kind::Hds) {
      throw DomainError(method_name(m) + " needs a homogeneous simulation (known worker accuracies)");
    }
  }

  const auto all = [&](auto pred) { return std::all_of(c.grid.begin(), c.grid.end(), pred); };
  switch (c.sweep) {
    case SweepVariable::None:
      break;
    case SweepVariable::MeanAccuracy:
      if (c.kind != Kind::Hds || c.workers.kind == WorkerSpec::Kind::Fixed) {
        throw DomainError("mean_accuracy sweeps need a beta or constant accuracy model");
      }
      if (!all([](double w) { return w > 0.0 && w < 1.0; })) throw DomainError("mean accuracies must lie in (0, 1)");
      break;
    case SweepVariable::Workers:
    case SweepVariable::Items:
      if (c.kind != Kind::Hds) throw DomainError("worker/item sweeps need a homogeneous simulation");
      if (c.sweep == SweepVariable::Workers && c.workers.kind == WorkerSpec::Kind::Fixed) {
        throw DomainError("fixed accuracies cannot be combined with a worker sweep");
      }
      if (!all([](double v) { return v >= 1.0 && v == std::floor(v); })) {
        throw DomainError("worker/item sweep values must be positive integers");
      }
      break;
    case SweepVariable::Q:
      if (c.kind == Kind::Dataset) throw DomainError("q sweeps need a simulated scenario");
      if (!all([](double v) { return v > 0.0 && v <= 1.0; })) throw DomainError("q values must lie in (0, 1]");
      break;
    case SweepVariable::S:
      if (c.kind != Kind::Dataset) throw DomainError("s sweeps need a dataset scenario");
      if (!all([](double v) { return v >= 0.0 && v <= 1.0; })) throw DomainError("s values must lie in [0, 1]");
      break;
  }

  switch (c.kind) {
    case Kind::Hds:
      if (c.num_workers < 1 || c.num_items < 1) throw DomainError("workers and items must be at least 1");
      if (c.num_classes < 2) throw DomainError("classes must be at least 2");
      if (!c.prior.empty() && c.prior.size() != static_cast<std::size_t>(c.num_classes)) {
        throw DimensionMismatch("prior needs one entry per class");
      }
      if (!c.prior.empty()) (void)Prior(c.prior);
      if (c.workers.kind == WorkerSpec::Kind::Fixed &&
          c.workers.accuracies.size() != static_cast<std::size_t>(c.num_workers)) {
        throw DimensionMismatch("fixed accuracies need one entry per worker");
      }
      if (c.workers.kind == WorkerSpec::Kind::Beta && (!(c.workers.a > 0.0) || !(c.workers.b > 0.0))) {
        throw DomainError("beta shapes must be positive");
      }
      break;
    case Kind::Misspecified:
      break;
    case Kind::Dataset:
      if (c.labels_path.empty()) throw DomainError("dataset scenarios need a labels path");
      if (c.truth_path.empty()) throw DomainError("dataset scenarios need a truth path to score error rates");
      break;
  }
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  std::optional<LoadedLabels> dataset;
  Predictions truth;
  if (config.kind == ExperimentConfig::Kind::Dataset) {
    dataset = load_labels(config.labels_path, config.load);
    truth = load_truth(config.truth_path, *dataset);
  }

  const std::vector<double> grid = config.sweep == SweepVariable::None ? std::vector<double>{0.0} : config.grid;
  const std::size_t trials = static_cast<std::size_t>(config.trials);
  const std::size_t tasks = grid.size() * trials;
  std::vector<std::vector<ResultRow>> slots(tasks);

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t s = t / trials;
      slots[t] = run_trial(config, dataset, truth, s, grid[s], static_cast<int>(t % trials));
    }
  };
  const auto pool_size = std::min<std::size_t>(static_cast<std::size_t>(config.threads), tasks);
  if (pool_size <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ResultRow> rows;
  rows.reserve(tasks * config.methods.size());
  for (auto& slot : slots) std::move(slot.begin(), slot.end(), std::back_inserter(rows));
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, const std::string& timestamp) {
  out << "# generated " << timestamp << '\n' << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.method << ',' << format_double(r.sweep) << ',' << r.trial << ','
        << opt_double(r.error_rate) << ',' << (r.iterations ? std::to_string(*r.iterations) : "") << ','
        << format_double(r.seconds) << ',' << opt_double(r.bound_upper) << ',' << opt_double(r.bound_lower) << ','
        << (r.condition ? (*r.condition ? "true" : "false") : "") << '\n';
  }
}

void write_results_jsonl(std::ostream& out, const std::vector<ResultRow>& rows) {
  for (const auto& r : rows) out << row_json(r).dump() << '\n';
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  std::size_t number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != kResultsHeader) throw ParseError(number, "unexpected results header");
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 10) throw ParseError(number, "expected 10 fields");
    ResultRow r;
    r.scenario = cells[0];
    r.method = cells[1];
    r.sweep = parse_opt_double(cells[2], number).value_or(0.0);
    r.trial = static_cast<int>(parse_opt_double(cells[3], number).value_or(0.0));
    r.error_rate = parse_opt_double(cells[4], number);
    if (const auto it = parse_opt_double(cells[5], number)) r.iterations = static_cast<int>(*it);
    r.seconds = parse_opt_double(cells[6], number).value_or(0.0);
    r.bound_upper = parse_opt_double(cells[7], number);
    r.bound_lower = parse_opt_double(cells[8], number);
    if (cells[9] == "true") r.condition = true;
    if (cells[9] == "false") r.condition = false;
    rows.push_back(std::move(r));
  }
  if (!header) throw ParseError(number, "missing results header");
  return rows;
}

void write_results(const std::string& prefix, const std::vector<ResultRow>& rows) {
  std::ofstream csv(prefix + ".csv");
  std::ofstream jsonl(prefix + ".jsonl");
  if (!csv || !jsonl) throw Error("cannot write results under '" + prefix + "'");
  write_results_csv(csv, rows, utc_timestamp());
  write_results_jsonl(jsonl, rows);
}

std::vector<ReportRow> summarize_results(const std::vector<ResultRow>& rows) {
  struct Acc {
    ReportRow row;
    double sum = 0.0;
    double sum_sq = 0.0;
    double iterations = 0.0;
    double seconds = 0.0;
    double upper = 0.0;
    int upper_n = 0;
    double lower = 0.0;
    int lower_n = 0;
  };
  std::vector<Acc> groups;
  std::map<std::tuple<std::string, std::string, double>, std::size_t> index;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.scenario, r.method, r.sweep);
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) {
      groups.emplace_back();
      groups.back().row.scenario = r.scenario;
      groups.back().row.method = r.method;
      groups.back().row.sweep = r.sweep;
    }
    auto& g = groups[it->second];
    if (!r.error_rate) {
      ++g.row.failed;
      continue;
    }
    ++g.row.trials;
    g.sum += *r.error_rate;
    g.sum_sq += *r.error_rate * *r.error_rate;
    g.iterations += r.iterations.value_or(0);
    g.seconds += r.seconds;
    if (r.bound_upper) {
      g.upper += *r.bound_upper;
      ++g.upper_n;
    }
    if (r.bound_lower) {
      g.lower += *r.bound_lower;
      ++g.lower_n;
    }
  }
  std::vector<ReportRow> report;
  report.reserve(groups.size());
  for (auto& g : groups) {
    const double n = g.row.trials;
    if (n > 0) {
      g.row.mean_error = g.sum / n;
      g.row.std_error = n > 1 ? std::sqrt(std::max(0.0, (g.sum_sq - n * g.row.mean_error * g.row.mean_error) / (n - 1))) : 0.0;
      g.row.mean_iterations = g.iterations / n;
      g.row.mean_seconds = g.seconds / n;
    }
    if (g.upper_n > 0) g.row.mean_bound_upper = g.upper / g.upper_n;
    if (g.lower_n > 0) g.row.mean_bound_lower = g.lower / g.lower_n;
    report.push_back(g.row);
  }
  return report;
}

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& report) {
  out << "scenario,method,sweep,trials,failed,mean_error,std_error,mean_iterations,mean_seconds,mean_bound_upper,"
         "mean_bound_lower\n";
  for (const auto& r : report) {
    out << r.scenario << ',' << r.method << ',' << format_double(r.sweep) << ',' << r.trials << ',' << r.failed << ','
        << format_double(r.mean_error) << ',' << format_double(r.std_error) << ',' << format_double(r.mean_iterations)
        << ',' << format_double(r.mean_seconds) << ',' << opt_double(r.mean_bound_upper) << ','
        << opt_double(r.mean_bound_lower) << '\n';
  }
}

}  // namespace crowd
