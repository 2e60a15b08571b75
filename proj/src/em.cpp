#include "crowd/em.hpp"

#include <algorithm>
#include <cmath>

namespace crowd {

namespace {

Prior fit_prior(const PosteriorMatrix& rho) {
  const int l = rho.num_classes();
  std::vector<double> pi(static_cast<std::size_t>(l), 0.0);
  for (int j = 0; j < rho.num_items(); ++j) {
    for (int k = 0; k < l; ++k) pi[static_cast<std::size_t>(k)] += rho.at(j, k);
  }
  for (double& p : pi) p /= rho.num_items();
  return Prior(std::move(pi));
}

WorkerModel fit_general(const LabelMatrix& labels, const PosteriorMatrix& rho) {
  const int l = labels.num_classes();
  const auto ul = static_cast<std::size_t>(l);
  const auto entries = labels.entries();
  std::vector<ConfusionTable> tables;
  tables.reserve(static_cast<std::size_t>(labels.num_workers()));
  std::vector<double> counts(ul * ul);
  for (int i = 0; i < labels.num_workers(); ++i) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t idx : labels.worker_label_indices(i)) {
      const auto& e = entries[idx];
      for (std::size_t k = 0; k < ul; ++k) counts[k * ul + static_cast<std::size_t>(e.label - 1)] += rho.at(e.item, static_cast<int>(k));
    }
    for (std::size_t k = 0; k < ul; ++k) {
      double total = 0.0;
      for (std::size_t h = 0; h < ul; ++h) total += counts[k * ul + h];
      for (std::size_t h = 0; h < ul; ++h) {
        counts[k * ul + h] = total > 0.0 ? counts[k * ul + h] / total : 1.0 / l;
      }
    }
    tables.emplace_back(l, counts);
  }
  return WorkerModel::general(std::move(tables));
}

WorkerModel fit_homogeneous(const LabelMatrix& labels, const PosteriorMatrix& rho) {
  const auto entries = labels.entries();
  std::vector<double> w(static_cast<std::size_t>(labels.num_workers()));
  for (int i = 0; i < labels.num_workers(); ++i) {
    const auto indices = labels.worker_label_indices(i);
    if (indices.empty()) {
      w[static_cast<std::size_t>(i)] = 1.0 / labels.num_classes();
      continue;
    }
    double agree = 0.0;
    for (std::size_t idx : indices) agree += rho.at(entries[idx].item, entries[idx].label - 1);
    w[static_cast<std::size_t>(i)] = std::min(1.0, agree / static_cast<double>(indices.size()));
  }
  return WorkerModel::homogeneous(labels.num_classes(), std::move(w));
}

}  // namespace

PosteriorMatrix one_hot_posterior(std::span<const int> labels, int num_classes) {
  std::vector<double> values(labels.size() * static_cast<std::size_t>(num_classes), 0.0);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 1 || labels[j] > num_classes) throw DomainError("hard label outside 1..L");
    values[j * static_cast<std::size_t>(num_classes) + static_cast<std::size_t>(labels[j] - 1)] = 1.0;
  }
  return PosteriorMatrix(static_cast<int>(labels.size()), num_classes, std::move(values));
}

EmResult em_fit(const LabelMatrix& labels, const EmConfig& config) {
  if (!(config.tolerance > 0.0)) throw DomainError("EM tolerance must be positive");
  if (config.max_iters < 1) throw DomainError("EM needs at least one iteration");

  PosteriorMatrix rho;
  if (config.initial_posterior) {
    rho = *config.initial_posterior;
    if (rho.num_items() != labels.num_items() || rho.num_classes() != labels.num_classes()) {
      throw DimensionMismatch("initial posterior must be N x L");
    }
  } else {
    rho = one_hot_posterior(majority_vote(labels, config.tie), labels.num_classes());
  }

  const auto fit = [&](const PosteriorMatrix& r) {
    return config.model == EmConfig::Model::General ? fit_general(labels, r) : fit_homogeneous(labels, r);
  };

  EmResult result{fit(rho), fit_prior(rho), rho, {}, 0, false};
  for (int s = 1; s <= config.max_iters; ++s) {
    if (s > 1) {
      result.model = fit(result.posterior);
      result.prior = fit_prior(result.posterior);
    }
    auto step = posterior_with_likelihood(result.model, result.prior, labels);
    result.posterior = std::move(step.posterior);
    result.log_likelihood.push_back(step.log_likelihood);
    result.iterations = s;
    if (s > 1) {
      const double prev = result.log_likelihood[result.log_likelihood.size() - 2];
      if (std::abs(step.log_likelihood - prev) <= config.tolerance * std::abs(prev)) {
        result.converged = true;
        if (!config.fixed_iterations) break;
      }
    }
  }
  return result;
}

Predictions em_map_predict(const EmResult& result, const TieBreak& tie) {
  const auto& rho = result.posterior;
  Predictions out(static_cast<std::size_t>(rho.num_items()));
  for (int j = 0; j < rho.num_items(); ++j) out[static_cast<std::size_t>(j)] = argmax_class(rho.row(j), j, tie);
  return out;
}

}  // namespace crowd
