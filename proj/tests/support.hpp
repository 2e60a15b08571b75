#pragma once

// Random instance generators and brute-force reference computations shared
// by the unit tests, property checks and the acceptance runner.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "crowd/core.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline crowd::LabelMatrix random_labels(Rng& rng, int m, int n, int l, double density) {
  std::vector<crowd::LabelEntry> entries;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      if (uniform(rng) < density) entries.push_back({i, j, uniform_int(rng, 1, l)});
    }
  }
  return crowd::LabelMatrix(m, n, l, std::move(entries));
}

inline std::vector<double> random_simplex(Rng& rng, int l) {
  std::vector<double> p(static_cast<std::size_t>(l));
  double sum = 0.0;
  for (double& x : p) {
    x = uniform(rng, 0.05, 1.0);
    sum += x;
  }
  for (double& x : p) x /= sum;
  return p;
}

inline crowd::WorkerModel random_general_model(Rng& rng, int m, int l) {
  std::vector<crowd::ConfusionTable> tables;
  for (int i = 0; i < m; ++i) {
    std::vector<double> values;
    for (int k = 0; k < l; ++k) {
      auto row = random_simplex(rng, l);
      values.insert(values.end(), row.begin(), row.end());
    }
    tables.emplace_back(l, values);
  }
  return crowd::WorkerModel::general(std::move(tables));
}

inline std::vector<double> random_accuracies(Rng& rng, int m, double lo = 0.05, double hi = 0.95) {
  std::vector<double> w(static_cast<std::size_t>(m));
  for (double& x : w) x = uniform(rng, lo, hi);
  return w;
}

/// Posterior by direct multiplication of probabilities (no logs), for small
/// instances. Returns N x L row-major values and the log-likelihood.
inline std::vector<double> brute_posterior(const crowd::WorkerModel& model, const crowd::Prior& prior,
                                           const crowd::LabelMatrix& labels, double* log_likelihood = nullptr) {
  const int l = labels.num_classes();
  std::vector<double> out;
  double ll = 0.0;
  for (int j = 0; j < labels.num_items(); ++j) {
    std::vector<double> joint(static_cast<std::size_t>(l));
    double total = 0.0;
    for (int k = 0; k < l; ++k) {
      double p = prior.at(k);
      for (int i = 0; i < labels.num_workers(); ++i) {
        const int z = labels.label(i, j);
        if (z != 0) p *= model.prob(i, k, z - 1);
      }
      joint[static_cast<std::size_t>(k)] = p;
      total += p;
    }
    for (double p : joint) out.push_back(p / total);
    ll += std::log(total);
  }
  if (log_likelihood != nullptr) *log_likelihood = ll;
  return out;
}

/// Exact per-item error of binary majority voting (ties to class 1) with
/// q = 1, by enumerating every label vector and both true labels (uniform
/// prior).
inline double exact_binary_mv_error(const std::vector<double>& w) {
  const std::size_t m = w.size();
  double error = 0.0;
  for (int truth = 1; truth <= 2; ++truth) {
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
      // bit set: worker answers correctly
      double p = 0.5;
      int votes_one = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const bool correct = (mask >> i) & 1u;
        p *= correct ? w[i] : 1.0 - w[i];
        const int label = correct ? truth : 3 - truth;
        if (label == 1) ++votes_one;
      }
      const int votes_two = static_cast<int>(m) - votes_one;
      const int predicted = votes_one >= votes_two ? 1 : 2;
      if (predicted != truth) error += p;
    }
  }
  return error;
}

/// Expected gap E[s_k - s_l | y = k] for a decomposable rule by enumerating
/// every joint label vector (0 = missing) of M workers, with constant q.
inline double enumerated_gap(const crowd::DecomposableRule& rule, const crowd::WorkerModel& model, double q, int k,
                             int l2) {
  const int m = rule.num_workers();
  const int l = rule.num_classes();
  std::vector<int> z(static_cast<std::size_t>(m), 0);
  double expectation = 0.0;
  while (true) {
    double p = 1.0;
    double gap = rule.shift(k) - rule.shift(l2);
    for (int i = 0; i < m; ++i) {
      const int h = z[static_cast<std::size_t>(i)];
      p *= h == 0 ? 1.0 - q : q * model.prob(i, k, h - 1);
      gap += rule.score(i, k, h) - rule.score(i, l2, h);
    }
    expectation += p * gap;
    int pos = 0;
    while (pos < m && ++z[static_cast<std::size_t>(pos)] > l) z[static_cast<std::size_t>(pos++)] = 0;
    if (pos == m) break;
  }
  return expectation;
}

}  // namespace testing
