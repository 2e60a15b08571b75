#pragma once

// Maximum-likelihood Dawid-Skene fitting by expectation maximization, and
// the EM-MAP rule built on it.

#include <optional>
#include <vector>

#include "crowd/aggregate.hpp"
#include "crowd/core.hpp"

namespace crowd {

struct EmConfig {
  enum class Model { General, Homogeneous };

  Model model = Model::General;
  /// Stop once |ll - ll_prev| <= tolerance * |ll_prev|.
  double tolerance = 1e-8;
  int max_iters = 500;
  /// Starting posteriors; majority-vote one-hot posteriors when absent.
  std::optional<PosteriorMatrix> initial_posterior;
  /// Run exactly max_iters iterations (timing parity with IWMV).
  bool fixed_iterations = false;
  /// Tie policy for the initial majority vote.
  TieBreak tie;
};

struct EmResult {
  WorkerModel model;
  Prior prior;
  PosteriorMatrix posterior;
  /// Observed-data log-likelihood after each E-step.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

/// Alternates M-steps (confusion tables or accuracies, plus class prior)
/// with E-steps. Parameters with no supporting labels stay at 1/L.
EmResult em_fit(const LabelMatrix& labels, const EmConfig& config = {});

/// argmax_k of the fitted posterior.
Predictions em_map_predict(const EmResult& result, const TieBreak& tie = {});

/// One-hot posteriors of hard labels.
PosteriorMatrix one_hot_posterior(std::span<const int> labels, int num_classes);

}  // namespace crowd
