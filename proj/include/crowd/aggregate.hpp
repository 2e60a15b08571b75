#pragma once

// Label aggregation rules. Every rule reduces to per-item class scores and a
// shared argmax kernel, so ties resolve identically across rules.

#include <cstdint>
#include <span>
#include <vector>

#include "crowd/core.hpp"

namespace crowd {

/// How exactly-equal top scores are resolved.
struct TieBreak {
  enum class Mode { SmallestClass, Random };

  Mode mode = Mode::SmallestClass;
  std::uint64_t seed = 0;

  static TieBreak smallest_class() { return {}; }
  /// Uniform choice among tied classes, seeded per (seed, item) so results do
  /// not depend on evaluation order.
  static TieBreak random(std::uint64_t seed) { return {Mode::Random, seed}; }
};

/// argmax over 0-based class scores; returns a 1-based class.
int argmax_class(std::span<const double> scores, int item, const TieBreak& tie = {});

Predictions majority_vote(const LabelMatrix& labels, const TieBreak& tie = {});

/// argmax_k sum_i v_i 1{z_ij = k} + a_k. Shifts default to zero.
/// Throws WeightLengthMismatch when |v| != M.
Predictions weighted_majority_vote(const LabelMatrix& labels, std::span<const double> weights,
                                   std::span<const double> shifts = {}, const TieBreak& tie = {});

/// argmax_k sum_i f_i(k, z_ij) + a_k. Throws DimensionMismatch.
Predictions decomposable_predict(const LabelMatrix& labels, const DecomposableRule& rule, const TieBreak& tie = {});

/// sign(sum_i v_i z_ij + a) with z in {+1, -1, 0}; sign(0) = +1.
/// Returns +1/-1 labels. Throws NotBinary unless L = 2.
std::vector<int> hyperplane_predict(const LabelMatrix& labels, std::span<const double> weights, double shift);

/// Bayes rule under the true parameters. Throws DimensionMismatch.
Predictions oracle_map_predict(const LabelMatrix& labels, const WorkerModel& model, const Prior& prior,
                               const TieBreak& tie = {});

/// v_i = ln((L-1) w_i / (1 - w_i)) with w_i clamped to [1e-12, 1 - 1e-12].
WeightVector oracle_map_weights_hds(std::span<const double> accuracy, int num_classes);

/// v_i = L w_i - 1.
WeightVector bound_optimal_weights(std::span<const double> accuracy, int num_classes);

/// Fraction of each worker's labels that agree with the given labels.
/// Workers without labels get 1/L.
std::vector<double> agreement_accuracies(const LabelMatrix& labels, std::span<const int> reference);

enum class WeightMode { Linear, Log };

struct IwmvOptions {
  int max_iters = 100;
  WeightMode mode = WeightMode::Linear;
  /// Log mode clips estimated accuracies to [log_clamp, 1 - log_clamp].
  double log_clamp = 1e-3;
  /// Run exactly max_iters iterations, ignoring convergence (timing parity).
  bool fixed_iterations = false;
  TieBreak tie;
};

struct IwmvResult {
  Predictions predictions;
  std::vector<double> accuracies;
  WeightVector weights;
  int iterations = 0;
  bool converged = false;
};

/// Iterative weighted majority voting: alternate WMV predictions, accuracy
/// estimates against those predictions, and weight updates, until the
/// prediction vector repeats or max_iters is reached.
IwmvResult iwmv(const LabelMatrix& labels, const IwmvOptions& options = {});

/// Majority vote, accuracy estimate against it, one reweighted vote.
Predictions one_step_wmv(const LabelMatrix& labels, const TieBreak& tie = {});

}  // namespace crowd
