#pragma once

// Synthetic crowdsourcing data under the Dawid-Skene model family.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "crowd/core.hpp"

namespace crowd {

using Rng = std::mt19937_64;

/// Purpose tags keep the random streams of one trial independent of each other.
enum class StreamTag : std::uint64_t {
  Workers = 1,
  Truth = 2,
  Labels = 3,
  Subsample = 4,
  Trial = 5,
  TieBreak = 6,
};

/// Counter-based seed derivation: mixes (master seed, tag, index) with
/// splitmix64 so that any (tag, index) stream can be built independently.
std::uint64_t derive_seed(std::uint64_t master_seed, StreamTag tag, std::uint64_t index = 0);
Rng make_stream(std::uint64_t master_seed, StreamTag tag, std::uint64_t index = 0);

/// Beta shape a that gives Beta(a, b) the requested mean.
double beta_shape_for_mean(double mean, double b);

/// Draws M Beta(a, b) accuracies, resampling the whole batch until the batch
/// mean lies within +-tolerance of target_mean. Throws DomainError for bad
/// parameters and RejectionBudgetExceeded after max_batches rejections.
std::vector<double> sample_workers_beta(int num_workers, double a, double b, double target_mean, double tolerance,
                                        std::uint64_t seed, std::size_t max_batches = 100000);

/// Unconditioned Beta(a, b) accuracies.
std::vector<double> sample_beta(int num_workers, double a, double b, Rng& rng);

struct SimConfig {
  int num_workers = 0;
  int num_items = 0;
  int num_classes = 2;
  Prior prior = Prior::uniform(2);
  AssignmentModel assignment = AssignmentModel::constant(1.0);
  WorkerModel workers = WorkerModel::homogeneous(2, {1.0});
  std::uint64_t seed = 0;
};

struct SimOutput {
  Predictions truth;
  LabelMatrix labels;
};

/// Truth ~ prior i.i.d.; entry (i, j) is observed with probability q_ij and,
/// when observed, drawn from row y_j of worker i's confusion table.
SimOutput simulate_dataset(const SimConfig& config);

/// Two worker groups times two item sets, each block with its own accuracy,
/// binary labels. The defaults give 15 + 15 workers and 300 + 300 items.
struct MisspecifiedConfig {
  int group_sizes[2] = {15, 15};
  int item_set_sizes[2] = {300, 300};
  /// accuracy[g][s] = P(z_ij = y_j) for worker group g, item set s.
  std::array<std::array<double, 2>, 2> accuracy = {{{0.9, 0.6}, {0.5, 0.7}}};
  double q = 0.3;
  std::uint64_t seed = 0;
};

SimOutput make_misspecified_dataset(const MisspecifiedConfig& config);

}  // namespace crowd
