#pragma once

// Monte Carlo experiments: simulate (or subsample) a dataset per trial, run
// each aggregation method, and record error rates, iterations, timings and
// bound values.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "crowd/io.hpp"
#include "crowd/simulate.hpp"

namespace crowd {

enum class Method { Mv, Wmv, Iwmv, IwmvLog, OneStepWmv, EmGds, EmHds, OracleMap };

/// mv, wmv, iwmv, iwmv-log, oswmv, em-gds, em-hds, oracle-map.
std::string method_name(Method method);
/// Throws DomainError for unknown names.
Method parse_method(const std::string& name);

enum class SweepVariable { None, MeanAccuracy, Workers, Items, Q, S };

std::string sweep_name(SweepVariable variable);
SweepVariable parse_sweep(const std::string& name);

/// Worker accuracies of the homogeneous scenarios.
struct WorkerSpec {
  enum class Kind { Beta, Constant, Fixed };

  Kind kind = Kind::Beta;
  /// Beta(a, b). A mean-accuracy sweep replaces a with b w / (1 - w).
  double a = 2.3;
  double b = 2.0;
  /// Batch-mean conditioning window around the Beta mean; 0 disables it.
  double tolerance = 0.01;
  double accuracy = 0.7;
  std::vector<double> accuracies;
};

struct ExperimentConfig {
  enum class Kind { Hds, Misspecified, Dataset };

  std::string scenario = "experiment";
  Kind kind = Kind::Hds;

  // Homogeneous simulation.
  int num_workers = 31;
  int num_items = 200;
  int num_classes = 2;
  double q = 1.0;
  std::vector<double> prior;  // empty means uniform
  WorkerSpec workers;

  // Misspecified simulation (q above applies).
  MisspecifiedConfig misspecified;

  // Dataset subsampling.
  std::string labels_path;
  std::string truth_path;
  LoadOptions load;

  std::vector<Method> methods = {Method::Mv};
  int trials = 1;
  SweepVariable sweep = SweepVariable::None;
  std::vector<double> grid;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Record wall-clock seconds; off keeps result files reproducible.
  bool timing = false;
  /// Run iterative methods for exactly this many iterations.
  std::optional<int> fixed_iterations;
  int iwmv_max_iters = 100;
  int em_max_iters = 500;
  double em_tolerance = 1e-8;
  /// Output file prefix; run writes <output>.csv and <output>.jsonl.
  std::string output;
};

/// Parses and validates a JSON configuration. Relative dataset paths are
/// resolved against base_dir. Throws ValidationError.
ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& base_dir = "");
ExperimentConfig load_experiment_config(const std::string& path);

/// Throws ValidationError for inconsistent configurations.
void validate_config(const ExperimentConfig& config);

struct ResultRow {
  std::string scenario;
  std::string method;
  double sweep = 0.0;
  int trial = 0;
  std::optional<double> error_rate;
  std::optional<int> iterations;
  double seconds = 0.0;
  std::optional<double> bound_upper;
  std::optional<double> bound_lower;
  std::optional<bool> condition;
  std::optional<std::string> error;
};

/// Rows ordered by (sweep index, trial, method order). Module errors are
/// recorded in the row rather than aborting the run.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

inline constexpr const char* kResultsHeader =
    "scenario,method,sweep,trial,error_rate,iterations,seconds,bound_upper,bound_lower,condition";

/// CSV starting with a `# generated <timestamp>` line; rows with an error
/// leave the error_rate column empty (the message is in the JSON lines).
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, const std::string& timestamp);
void write_results_jsonl(std::ostream& out, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(std::istream& in);

/// Writes <output>.csv and <output>.jsonl.
void write_results(const std::string& prefix, const std::vector<ResultRow>& rows);

struct ReportRow {
  std::string scenario;
  std::string method;
  double sweep = 0.0;
  int trials = 0;
  int failed = 0;
  double mean_error = 0.0;
  double std_error = 0.0;
  double mean_iterations = 0.0;
  double mean_seconds = 0.0;
  std::optional<double> mean_bound_upper;
  std::optional<double> mean_bound_lower;
};

/// Per (scenario, method, sweep) means over trials, in first-appearance order.
std::vector<ReportRow> summarize_results(const std::vector<ResultRow>& rows);
void write_report_csv(std::ostream& out, const std::vector<ReportRow>& report);

/// Shortest round-trip formatting used in result files.
std::string format_double(double value);

}  // namespace crowd
