#pragma once

// Domain types shared by every aggregation rule: the sparse label matrix,
// Dawid-Skene worker models, priors, decomposable scoring rules and the
// label posterior.
//
// Class labels are 1..L everywhere a *label* is stored (LabelMatrix entries,
// Predictions); 0 means "missing". Array accessors that take a class index
// (ConfusionTable::at, Prior::at, posterior rows) are 0-based, i.e. class k
// lives at index k-1.

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "crowd/errors.hpp"

namespace crowd {

/// Predicted or true labels, one per item, each in 1..L.
using Predictions = std::vector<int>;

/// Per-worker real weights for weighted majority voting.
using WeightVector = std::vector<double>;

/// Floor applied to probabilities before taking logarithms.
inline constexpr double kLogFloor = 1e-12;

/// Label alphabet. With two classes the binary convention maps the external
/// labels +1/-1 onto internal classes 1/2.
class LabelSet {
 public:
  explicit LabelSet(int num_classes, bool binary_convention = false);

  int num_classes() const { return num_classes_; }
  bool binary_convention() const { return binary_; }

  /// External label to internal class. Throws UnknownLabel.
  int to_internal(int external) const;
  int to_external(int internal) const;

 private:
  int num_classes_;
  bool binary_;
};

struct LabelEntry {
  int worker;
  int item;
  int label;  // 1..L

  friend bool operator==(const LabelEntry&, const LabelEntry&) = default;
};

/// Sparse M x N matrix of observed labels.
///
/// Entries are stored as coordinate triples sorted by (item, worker), with
/// per-item ranges and per-worker index lists so that both item-wise voting
/// and worker-wise accuracy estimation are linear in the number of labels.
class LabelMatrix {
 public:
  /// Throws EmptyMatrix when M or N is zero, OutOfRangeLabel for labels
  /// outside 1..L or indices outside the matrix, and DuplicateLabel when the
  /// same (worker, item) pair appears twice.
  LabelMatrix(int num_workers, int num_items, int num_classes, std::vector<LabelEntry> entries);

  int num_workers() const { return num_workers_; }
  int num_items() const { return num_items_; }
  int num_classes() const { return num_classes_; }
  std::size_t num_labels() const { return entries_.size(); }
  double density() const;

  std::span<const LabelEntry> entries() const { return entries_; }
  std::span<const LabelEntry> item_labels(int item) const;
  /// Indices into entries() of the labels given by one worker.
  std::span<const std::size_t> worker_label_indices(int worker) const;
  std::size_t worker_label_count(int worker) const;

  /// Label Z_ij, or 0 when missing.
  int label(int worker, int item) const;
  bool observed(int worker, int item) const { return label(worker, item) != 0; }

  /// Dense M x N copy with 0 for missing entries.
  std::vector<std::vector<int>> dense() const;

  friend bool operator==(const LabelMatrix& a, const LabelMatrix& b) {
    return a.num_workers_ == b.num_workers_ && a.num_items_ == b.num_items_ &&
           a.num_classes_ == b.num_classes_ && a.entries_ == b.entries_;
  }

 private:
  int num_workers_;
  int num_items_;
  int num_classes_;
  std::vector<LabelEntry> entries_;
  std::vector<std::size_t> item_offsets_;    // size N + 1
  std::vector<std::size_t> worker_offsets_;  // size M + 1
  std::vector<std::size_t> worker_entries_;
};

/// Builds a LabelMatrix from a rectangular grid (rows = workers) of external
/// labels, 0 meaning missing.
LabelMatrix validate_label_matrix(const std::vector<std::vector<int>>& raw, const LabelSet& labels);

/// Probability q_ij that worker i labels item j.
class AssignmentModel {
 public:
  static AssignmentModel constant(double q);
  static AssignmentModel per_worker(std::vector<double> q);
  /// Row-major M x N matrix.
  static AssignmentModel per_entry(int num_workers, int num_items, std::vector<double> q);

  double q(int worker, int item) const;
  /// True when q_ij does not depend on j (vector or constant assignment).
  bool item_uniform() const;
  double max_q() const;
  /// Throws DimensionMismatch when the model cannot describe an M x N matrix.
  void check_dimensions(int num_workers, int num_items) const;

 private:
  struct Constant {
    double q;
  };
  struct PerWorker {
    std::vector<double> q;
  };
  struct PerEntry {
    int workers;
    int items;
    std::vector<double> q;
  };
  explicit AssignmentModel(std::variant<Constant, PerWorker, PerEntry> v);

  std::variant<Constant, PerWorker, PerEntry> model_;
};

/// L x L conditional table pi_{kl} = P(z = l | y = k, observed), 0-based.
class ConfusionTable {
 public:
  ConfusionTable() = default;
  ConfusionTable(int num_classes, std::vector<double> row_major);

  int num_classes() const { return num_classes_; }
  double at(int true_class, int given_label) const {
    return values_[static_cast<std::size_t>(true_class * num_classes_ + given_label)];
  }
  std::span<const double> row(int true_class) const {
    return std::span<const double>(values_).subspan(static_cast<std::size_t>(true_class * num_classes_),
                                                     static_cast<std::size_t>(num_classes_));
  }
  std::span<const double> values() const { return values_; }

 private:
  int num_classes_ = 0;
  std::vector<double> values_;
};

/// p+ = P(z=+1 | y=+1), p- = P(z=-1 | y=-1) for a binary worker.
struct BinaryReliability {
  double p_plus;
  double p_minus;
};

/// Per-worker reliability under one of the three Dawid-Skene variants.
class WorkerModel {
 public:
  enum class Kind { General, ClassConditional, Homogeneous };

  /// Full confusion tables; every row must sum to 1 within 1e-9.
  static WorkerModel general(std::vector<ConfusionTable> tables);
  /// Per-class accuracies pi_kk; errors spread uniformly off the diagonal.
  static WorkerModel class_conditional(int num_classes, std::vector<std::vector<double>> accuracy);
  /// One accuracy w_i per worker.
  static WorkerModel homogeneous(int num_classes, std::vector<double> accuracy);

  Kind kind() const;
  int num_workers() const;
  int num_classes() const { return num_classes_; }

  /// pi^(i)_{kl}, 0-based classes.
  double prob(int worker, int true_class, int given_label) const;
  ConfusionTable confusion(int worker) const;
  WorkerModel to_general() const;
  /// Homogeneous accuracies; throws DomainError for other kinds.
  std::span<const double> accuracies() const;
  BinaryReliability binary(int worker) const;

 private:
  struct General {
    std::vector<ConfusionTable> tables;
  };
  struct ClassConditional {
    std::vector<std::vector<double>> accuracy;
  };
  struct Homogeneous {
    std::vector<double> accuracy;
  };
  WorkerModel(int num_classes, std::variant<General, ClassConditional, Homogeneous> v);

  int num_classes_;
  std::variant<General, ClassConditional, Homogeneous> model_;
};

/// Class prevalence pi_k.
class Prior {
 public:
  explicit Prior(std::vector<double> probs);
  static Prior uniform(int num_classes);

  int num_classes() const { return static_cast<int>(probs_.size()); }
  double at(int cls) const { return probs_[static_cast<std::size_t>(cls)]; }
  std::span<const double> probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

/// Decomposable prediction rule: y_j = argmax_k sum_i f_i(k, z_ij) + a_k.
///
/// Scores are stored as f_i(k, h) for class index k in 0..L-1 and label
/// h in 0..L (h = 0 is "missing"). f_i(k, 0) must be one rule-wide constant;
/// its value never affects the argmax.
class DecomposableRule {
 public:
  DecomposableRule(int num_workers, int num_classes, std::vector<double> scores,
                   std::vector<double> shifts);

  /// f_i(k, h) = 1{h = k}.
  static DecomposableRule majority(int num_workers, int num_classes);
  /// f_i(k, h) = v_i 1{h = k}, with optional shifts (default 0).
  static DecomposableRule weighted(std::span<const double> weights, int num_classes,
                                   std::span<const double> shifts = {});
  /// f_i(k, h) = log pi^(i)_{kh}, a_k = log pi_k, both floored at kLogFloor.
  static DecomposableRule oracle_map(const WorkerModel& model, const Prior& prior);

  int num_workers() const { return num_workers_; }
  int num_classes() const { return num_classes_; }
  double score(int worker, int cls, int label) const {
    return scores_[static_cast<std::size_t>((worker * num_classes_ + cls) * (num_classes_ + 1) + label)];
  }
  double shift(int cls) const { return shifts_[static_cast<std::size_t>(cls)]; }

  /// New rule with f' = scale * f + offset (shifts scaled too).
  DecomposableRule affine(double scale, double offset) const;

 private:
  int num_workers_;
  int num_classes_;
  std::vector<double> scores_;
  std::vector<double> shifts_;
};

/// rho_jk, row-major N x L; each row sums to 1.
class PosteriorMatrix {
 public:
  PosteriorMatrix() = default;
  PosteriorMatrix(int num_items, int num_classes, std::vector<double> values);

  int num_items() const { return num_items_; }
  int num_classes() const { return num_classes_; }
  std::span<const double> row(int item) const {
    return std::span<const double>(values_).subspan(static_cast<std::size_t>(item * num_classes_),
                                                     static_cast<std::size_t>(num_classes_));
  }
  double at(int item, int cls) const { return values_[static_cast<std::size_t>(item * num_classes_ + cls)]; }
  std::span<const double> values() const { return values_; }

 private:
  int num_items_ = 0;
  int num_classes_ = 0;
  std::vector<double> values_;
};

/// Posterior together with the observed-data log-likelihood of the labels.
struct PosteriorWithLikelihood {
  PosteriorMatrix posterior;
  double log_likelihood;
};

/// Turns unnormalized log scores into probabilities in place (max-subtracted
/// softmax) and returns their log-sum-exp.
double normalize_log_row(std::span<double> row);

/// rho_jk proportional to pi_k prod_i pi^(i)_{k, z_ij}, computed in the log
/// domain with per-item max subtraction. Throws DimensionMismatch.
PosteriorMatrix posterior(const WorkerModel& model, const Prior& prior, const LabelMatrix& labels);
PosteriorWithLikelihood posterior_with_likelihood(const WorkerModel& model, const Prior& prior,
                                                  const LabelMatrix& labels);

/// Fraction of mismatched entries. Throws LengthMismatch for unequal or
/// empty inputs.
double error_rate(std::span<const int> predicted, std::span<const int> truth);

}  // namespace crowd
