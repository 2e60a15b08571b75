#pragma once

// Label and truth files, subsampling, dataset summaries.
//
// csv-triples: header `worker,item,label`, one observed label per line.
// dense-csv:   header `worker,<item id>,<item id>,...`, one row per worker;
//              an empty cell or 0 marks a missing label.
// Worker and item ids are arbitrary strings mapped to contiguous indices in
// order of first appearance.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "crowd/core.hpp"

namespace crowd {

enum class LabelFormat { CsvTriples, DenseCsv };

/// Throws DomainError for unknown names.
LabelFormat parse_label_format(const std::string& name);

struct LoadOptions {
  LabelFormat format = LabelFormat::CsvTriples;
  /// 0 infers L from the largest label seen (at least 2).
  int num_classes = 0;
  /// Labels are +1/-1 instead of 1..L.
  bool binary = false;
};

struct LoadedLabels {
  LabelMatrix labels;
  std::vector<std::string> worker_ids;
  std::vector<std::string> item_ids;
  LabelSet label_set;
};

/// Throws ParseError, DuplicateLabel, UnknownLabel or EmptyMatrix.
LoadedLabels read_labels(std::istream& in, const LoadOptions& options = {});
LoadedLabels load_labels(const std::string& path, const LoadOptions& options = {});

/// Truth file with header `item,label`, aligned to the loaded item ids.
/// Every loaded item needs exactly one truth label; ids not in the label file
/// are rejected. Throws ParseError, DuplicateLabel or UnknownLabel.
Predictions read_truth(std::istream& in, const LoadedLabels& loaded);
Predictions load_truth(const std::string& path, const LoadedLabels& loaded);

/// csv-triples with the loaded ids and external label values.
void write_labels(std::ostream& out, const LabelMatrix& labels, const std::vector<std::string>& worker_ids,
                  const std::vector<std::string>& item_ids, const LabelSet& label_set);
void write_truth(std::ostream& out, const Predictions& truth, const std::vector<std::string>& item_ids,
                 const LabelSet& label_set);

/// Plain 0-based numeric ids ("0", "1", ...).
std::vector<std::string> index_ids(int count);

/// Keeps each observed label independently with probability s.
/// Throws DomainError unless s lies in [0, 1].
LabelMatrix subsample_labels(const LabelMatrix& labels, double s, std::uint64_t seed);

struct DatasetSummary {
  int num_classes = 0;
  int num_workers = 0;
  int num_items = 0;
  std::size_t num_labels = 0;
  double density = 0.0;
  std::vector<std::size_t> labels_per_worker;
  /// Mean accuracy over workers with at least one label, when truth is known.
  std::optional<double> mean_worker_accuracy;
  std::optional<std::vector<double>> worker_accuracy;

  friend bool operator==(const DatasetSummary&, const DatasetSummary&) = default;
};

/// Throws LengthMismatch when truth does not cover every item.
DatasetSummary summarize_dataset(const LabelMatrix& labels, const Predictions* truth = nullptr);

}  // namespace crowd
