#include "crowd/simulate.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace crowd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double draw_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

// Inverse-CDF draw from a discrete distribution given as a probability row.
int draw_index(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  // Rounding left u above the cumulative sum; take the last class with mass.
  for (std::size_t k = probs.size(); k-- > 0;) {
    if (probs[k] > 0.0) return static_cast<int>(k);
  }
  return 0;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, StreamTag tag, std::uint64_t index) {
  std::uint64_t h = splitmix64(master_seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  return splitmix64(h ^ index);
}

Rng make_stream(std::uint64_t master_seed, StreamTag tag, std::uint64_t index) {
  return Rng(derive_seed(master_seed, tag, index));
}

double beta_shape_for_mean(double mean, double b) {
  if (!(mean > 0.0 && mean < 1.0) || !(b > 0.0)) {
    throw DomainError("Beta mean must lie in (0, 1) and b must be positive");
  }
  return b * mean / (1.0 - mean);
}

std::vector<double> sample_beta(int num_workers, double a, double b, Rng& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("Beta shapes must be positive");
  if (num_workers < 1) throw DomainError("need at least one worker");
  std::vector<double> w(static_cast<std::size_t>(num_workers));
  for (double& x : w) x = draw_beta(a, b, rng);
  return w;
}

std::vector<double> sample_workers_beta(int num_workers, double a, double b, double target_mean, double tolerance,
                                        std::uint64_t seed, std::size_t max_batches) {
  if (!(target_mean > 0.0 && target_mean < 1.0)) throw DomainError("target mean must lie in (0, 1)");
  if (!(tolerance > 0.0)) throw DomainError("tolerance must be positive");
  auto rng = make_stream(seed, StreamTag::Workers);
  for (std::size_t batch = 0; batch < max_batches; ++batch) {
    auto w = sample_beta(num_workers, a, b, rng);
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    if (std::abs(mean - target_mean) <= tolerance) return w;
  }
  throw RejectionBudgetExceeded(max_batches);
}

SimOutput simulate_dataset(const SimConfig& config) {
  const int m = config.num_workers;
  const int n = config.num_items;
  const int l = config.num_classes;
  if (m < 1 || n < 1) throw EmptyMatrix();
  if (config.prior.num_classes() != l || config.workers.num_classes() != l) {
    throw DimensionMismatch("prior and worker model must have L classes");
  }
  if (config.workers.num_workers() != m) {
    throw DimensionMismatch("worker model must describe M workers");
  }
  config.assignment.check_dimensions(m, n);

  std::vector<ConfusionTable> tables;
  tables.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) tables.push_back(config.workers.confusion(i));

  auto truth_rng = make_stream(config.seed, StreamTag::Truth);
  auto label_rng = make_stream(config.seed, StreamTag::Labels);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Predictions truth(static_cast<std::size_t>(n));
  for (int& y : truth) y = draw_index(config.prior.probs(), truth_rng) + 1;

  std::vector<LabelEntry> entries;
  for (int j = 0; j < n; ++j) {
    const int y = truth[static_cast<std::size_t>(j)] - 1;
    for (int i = 0; i < m; ++i) {
      if (unif(label_rng) >= config.assignment.q(i, j)) continue;
      const int z = draw_index(tables[static_cast<std::size_t>(i)].row(y), label_rng) + 1;
      entries.push_back({i, j, z});
    }
  }
  return {std::move(truth), LabelMatrix(m, n, l, std::move(entries))};
}

SimOutput make_misspecified_dataset(const MisspecifiedConfig& config) {
  for (const auto& row : config.accuracy) {
    for (double p : row) {
      if (!(p >= 0.0 && p <= 1.0)) throw DomainError("block accuracy must lie in [0, 1]");
    }
  }
  if (!(config.q > 0.0 && config.q <= 1.0)) throw DomainError("q must lie in (0, 1]");
  const int m = config.group_sizes[0] + config.group_sizes[1];
  const int n = config.item_set_sizes[0] + config.item_set_sizes[1];
  if (config.group_sizes[0] < 0 || config.group_sizes[1] < 0 || config.item_set_sizes[0] < 0 ||
      config.item_set_sizes[1] < 0 || m < 1 || n < 1) {
    throw EmptyMatrix();
  }

  auto truth_rng = make_stream(config.seed, StreamTag::Truth);
  auto label_rng = make_stream(config.seed, StreamTag::Labels);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Predictions truth(static_cast<std::size_t>(n));
  for (int& y : truth) y = coin(truth_rng) ? 1 : 2;

  std::vector<LabelEntry> entries;
  for (int j = 0; j < n; ++j) {
    const int set = j < config.item_set_sizes[0] ? 0 : 1;
    const int y = truth[static_cast<std::size_t>(j)];
    for (int i = 0; i < m; ++i) {
      if (unif(label_rng) >= config.q) continue;
      const int group = i < config.group_sizes[0] ? 0 : 1;
      const bool correct =
          unif(label_rng) < config.accuracy[static_cast<std::size_t>(group)][static_cast<std::size_t>(set)];
      entries.push_back({i, j, correct ? y : 3 - y});
    }
  }
  return {std::move(truth), LabelMatrix(m, n, 2, std::move(entries))};
}

}  // namespace crowd
