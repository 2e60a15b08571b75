#include "crowd/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "crowd/simulate.hpp"

namespace crowd {

namespace {

constexpr double kWeightClamp = 1e-12;

// Shared scoring loop: scores[k] = base[k] + sum over the item's labels of
// contribution(entry)[k].
template <typename Contribution>
Predictions vote(const LabelMatrix& labels, std::span<const double> base, const TieBreak& tie,
                 Contribution&& contribution) {
  const int l = labels.num_classes();
  Predictions out(static_cast<std::size_t>(labels.num_items()));
  std::vector<double> scores(static_cast<std::size_t>(l));
  for (int j = 0; j < labels.num_items(); ++j) {
    std::copy(base.begin(), base.end(), scores.begin());
    for (const auto& e : labels.item_labels(j)) contribution(e, scores);
    out[static_cast<std::size_t>(j)] = argmax_class(scores, j, tie);
  }
  return out;
}

void check_weights(const LabelMatrix& labels, std::span<const double> weights) {
  if (weights.size() != static_cast<std::size_t>(labels.num_workers())) {
    throw WeightLengthMismatch(weights.size(), static_cast<std::size_t>(labels.num_workers()));
  }
}

WeightVector weights_from_accuracy(std::span<const double> accuracy, int num_classes, const IwmvOptions& options) {
  if (options.mode == WeightMode::Linear) return bound_optimal_weights(accuracy, num_classes);
  std::vector<double> clipped(accuracy.begin(), accuracy.end());
  for (double& w : clipped) w = std::clamp(w, options.log_clamp, 1.0 - options.log_clamp);
  return oracle_map_weights_hds(clipped, num_classes);
}

}  // namespace

int argmax_class(std::span<const double> scores, int item, const TieBreak& tie) {
  const auto best = *std::max_element(scores.begin(), scores.end());
  if (tie.mode == TieBreak::Mode::SmallestClass) {
    return static_cast<int>(std::find(scores.begin(), scores.end(), best) - scores.begin()) + 1;
  }
  std::vector<int> tied;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k] == best) tied.push_back(static_cast<int>(k) + 1);
  }
  if (tied.size() == 1) return tied.front();
  auto rng = make_stream(tie.seed, StreamTag::TieBreak, static_cast<std::uint64_t>(item));
  std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
  return tied[pick(rng)];
}

Predictions majority_vote(const LabelMatrix& labels, const TieBreak& tie) {
  const std::vector<double> zero(static_cast<std::size_t>(labels.num_classes()), 0.0);
  return vote(labels, zero, tie,
              [](const LabelEntry& e, std::vector<double>& s) { s[static_cast<std::size_t>(e.label - 1)] += 1.0; });
}

Predictions weighted_majority_vote(const LabelMatrix& labels, std::span<const double> weights,
                                   std::span<const double> shifts, const TieBreak& tie) {
  check_weights(labels, weights);
  std::vector<double> base(static_cast<std::size_t>(labels.num_classes()), 0.0);
  if (!shifts.empty()) {
    if (shifts.size() != base.size()) throw DimensionMismatch("need one shift per class");
    std::copy(shifts.begin(), shifts.end(), base.begin());
  }
  return vote(labels, base, tie, [weights](const LabelEntry& e, std::vector<double>& s) {
    s[static_cast<std::size_t>(e.label - 1)] += weights[static_cast<std::size_t>(e.worker)];
  });
}

Predictions decomposable_predict(const LabelMatrix& labels, const DecomposableRule& rule, const TieBreak& tie) {
  if (rule.num_workers() != labels.num_workers() || rule.num_classes() != labels.num_classes()) {
    throw DimensionMismatch("rule dimensions do not match the label matrix");
  }
  const int l = labels.num_classes();
  // Missing labels add the same constant f_i(k, 0) to every class. Adding it
  // per (worker, item) pair keeps the scores literally equal to the rule's
  // definition, so floating-point ties match other rules exactly.
  const double missing = rule.score(0, 0, 0);
  std::vector<double> base(static_cast<std::size_t>(l));
  for (int k = 0; k < l; ++k) base[static_cast<std::size_t>(k)] = rule.shift(k);
  Predictions out(static_cast<std::size_t>(labels.num_items()));
  std::vector<double> scores(static_cast<std::size_t>(l));
  for (int j = 0; j < labels.num_items(); ++j) {
    std::copy(base.begin(), base.end(), scores.begin());
    const auto item = labels.item_labels(j);
    const auto unlabeled = static_cast<double>(labels.num_workers() - static_cast<int>(item.size()));
    for (const auto& e : item) {
      for (int k = 0; k < l; ++k) scores[static_cast<std::size_t>(k)] += rule.score(e.worker, k, e.label);
    }
    if (missing != 0.0) {
      for (double& s : scores) s += unlabeled * missing;
    }
    out[static_cast<std::size_t>(j)] = argmax_class(scores, j, tie);
  }
  return out;
}

std::vector<int> hyperplane_predict(const LabelMatrix& labels, std::span<const double> weights, double shift) {
  if (labels.num_classes() != 2) throw NotBinary();
  check_weights(labels, weights);
  std::vector<int> out(static_cast<std::size_t>(labels.num_items()));
  for (int j = 0; j < labels.num_items(); ++j) {
    double score = shift;
    for (const auto& e : labels.item_labels(j)) {
      const double z = e.label == 1 ? 1.0 : -1.0;
      score += weights[static_cast<std::size_t>(e.worker)] * z;
    }
    out[static_cast<std::size_t>(j)] = score >= 0.0 ? 1 : -1;
  }
  return out;
}

Predictions oracle_map_predict(const LabelMatrix& labels, const WorkerModel& model, const Prior& prior,
                               const TieBreak& tie) {
  const auto rho = posterior(model, prior, labels);
  Predictions out(static_cast<std::size_t>(labels.num_items()));
  for (int j = 0; j < labels.num_items(); ++j) out[static_cast<std::size_t>(j)] = argmax_class(rho.row(j), j, tie);
  return out;
}

WeightVector oracle_map_weights_hds(std::span<const double> accuracy, int num_classes) {
  if (num_classes < 2) throw DomainError("need at least two classes");
  WeightVector v(accuracy.size());
  for (std::size_t i = 0; i < accuracy.size(); ++i) {
    const double w = std::clamp(accuracy[i], kWeightClamp, 1.0 - kWeightClamp);
    v[i] = std::log((num_classes - 1) * w / (1.0 - w));
  }
  return v;
}

WeightVector bound_optimal_weights(std::span<const double> accuracy, int num_classes) {
  if (num_classes < 2) throw DomainError("need at least two classes");
  WeightVector v(accuracy.size());
  for (std::size_t i = 0; i < accuracy.size(); ++i) v[i] = num_classes * accuracy[i] - 1.0;
  return v;
}

std::vector<double> agreement_accuracies(const LabelMatrix& labels, std::span<const int> reference) {
  if (reference.size() != static_cast<std::size_t>(labels.num_items())) {
    throw LengthMismatch("reference labels must cover every item");
  }
  const auto entries = labels.entries();
  std::vector<double> acc(static_cast<std::size_t>(labels.num_workers()));
  for (int i = 0; i < labels.num_workers(); ++i) {
    const auto indices = labels.worker_label_indices(i);
    if (indices.empty()) {
      acc[static_cast<std::size_t>(i)] = 1.0 / labels.num_classes();
      continue;
    }
    std::size_t agree = 0;
    for (std::size_t idx : indices) {
      const auto& e = entries[idx];
      if (e.label == reference[static_cast<std::size_t>(e.item)]) ++agree;
    }
    acc[static_cast<std::size_t>(i)] = static_cast<double>(agree) / static_cast<double>(indices.size());
  }
  return acc;
}

IwmvResult iwmv(const LabelMatrix& labels, const IwmvOptions& options) {
  if (options.max_iters < 1) throw DomainError("max_iters must be at least 1");
  if (options.mode == WeightMode::Log && !(options.log_clamp > 0.0 && options.log_clamp < 0.5)) {
    throw DomainError("log clamp must lie in (0, 0.5)");
  }
  IwmvResult result;
  result.weights.assign(static_cast<std::size_t>(labels.num_workers()), 1.0);
  Predictions previous;
  for (int s = 1; s <= options.max_iters; ++s) {
    auto current = weighted_majority_vote(labels, result.weights, {}, options.tie);
    result.accuracies = agreement_accuracies(labels, current);
    result.weights = weights_from_accuracy(result.accuracies, labels.num_classes(), options);
    result.iterations = s;
    if (current == previous) {
      result.converged = true;
      if (!options.fixed_iterations) break;
    }
    previous = std::move(current);
  }
  result.predictions = weighted_majority_vote(labels, result.weights, {}, options.tie);
  return result;
}

Predictions one_step_wmv(const LabelMatrix& labels, const TieBreak& tie) {
  const auto mv = majority_vote(labels, tie);
  const auto accuracy = agreement_accuracies(labels, mv);
  const auto weights = bound_optimal_weights(accuracy, labels.num_classes());
  return weighted_majority_vote(labels, weights, {}, tie);
}

}  // namespace crowd
