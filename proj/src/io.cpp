#include "crowd/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <unordered_map>

#include "crowd/simulate.hpp"

namespace crowd {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

// Integer label with an optional leading '+'. nullopt for non-integers.
std::optional<int> parse_int(const std::string& cell) {
  std::string_view s = cell;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

class IdMap {
 public:
  int intern(const std::string& id) {
    const auto [it, inserted] = index_.try_emplace(id, static_cast<int>(ids_.size()));
    if (inserted) ids_.push_back(id);
    return it->second;
  }
  std::optional<int> find(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::vector<std::string> take() { return std::move(ids_); }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> ids_;
};

struct RawLabel {
  int worker;
  int item;
  int value;
  std::size_t line;
};

// Non-blank lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!trim(line).empty()) lines.emplace_back(number, line);
  }
  return lines;
}

void require_header(const std::vector<std::string>& got, const std::vector<std::string>& expected, std::size_t line) {
  if (got != expected) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw ParseError(line, "expected header '" + want + "'");
  }
}

LabelSet resolve_label_set(const std::vector<RawLabel>& raw, const LoadOptions& options) {
  if (options.binary) {
    if (options.num_classes != 0 && options.num_classes != 2) throw NotBinary();
    return LabelSet(2, true);
  }
  if (options.num_classes != 0) return LabelSet(options.num_classes);
  int largest = 2;
  for (const auto& r : raw) largest = std::max(largest, r.value);
  return LabelSet(largest);
}

int internal_label(const LabelSet& set, int value, std::size_t line) {
  try {
    const int k = set.to_internal(value);
    if (k == 0) throw UnknownLabel("label 0 is not a class");
    return k;
  } catch (const UnknownLabel& e) {
    throw UnknownLabel("line " + std::to_string(line) + ": " + e.what());
  }
}

LoadedLabels finish(std::vector<RawLabel> raw, IdMap workers, IdMap items, const LoadOptions& options) {
  auto worker_ids = workers.take();
  auto item_ids = items.take();
  if (worker_ids.empty() || item_ids.empty()) throw EmptyMatrix();
  const auto set = resolve_label_set(raw, options);

  std::vector<LabelEntry> entries;
  entries.reserve(raw.size());
  for (const auto& r : raw) entries.push_back({r.worker, r.item, internal_label(set, r.value, r.line)});
  try {
    LabelMatrix matrix(static_cast<int>(worker_ids.size()), static_cast<int>(item_ids.size()), set.num_classes(),
                       std::move(entries));
    return {std::move(matrix), std::move(worker_ids), std::move(item_ids), set};
  } catch (const DuplicateLabel& e) {
    // Translate internal indices back to the file's ids.
    const int w = std::stoi(e.worker());
    const int j = std::stoi(e.item());
    throw DuplicateLabel(worker_ids[static_cast<std::size_t>(w)], item_ids[static_cast<std::size_t>(j)]);
  }
}

LoadedLabels read_triples(std::istream& in, const LoadOptions& options) {
  const auto lines = read_lines(in);
  if (lines.empty()) throw EmptyMatrix();
  require_header(split_csv(lines.front().second), {"worker", "item", "label"}, lines.front().first);

  IdMap workers;
  IdMap items;
  std::vector<RawLabel> raw;
  raw.reserve(lines.size());
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto& [number, line] = lines[n];
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw ParseError(number, "expected 3 fields, got " + std::to_string(cells.size()));
    if (cells[0].empty() || cells[1].empty()) throw ParseError(number, "empty worker or item id");
    const auto value = parse_int(cells[2]);
    if (!value) throw ParseError(number, "label '" + cells[2] + "' is not an integer");
    raw.push_back({workers.intern(cells[0]), items.intern(cells[1]), *value, number});
  }
  return finish(std::move(raw), std::move(workers), std::move(items), options);
}

LoadedLabels read_dense(std::istream& in, const LoadOptions& options) {
  const auto lines = read_lines(in);
  if (lines.empty()) throw EmptyMatrix();
  const auto header = split_csv(lines.front().second);
  if (header.empty() || header.front() != "worker") throw ParseError(lines.front().first, "expected header 'worker,<items>'");

  IdMap workers;
  IdMap items;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].empty()) throw ParseError(lines.front().first, "empty item id");
    if (items.find(header[c])) throw ParseError(lines.front().first, "repeated item id '" + header[c] + "'");
    items.intern(header[c]);
  }
  std::vector<RawLabel> raw;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto& [number, line] = lines[n];
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ParseError(number, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    if (cells[0].empty()) throw ParseError(number, "empty worker id");
    if (workers.find(cells[0])) throw ParseError(number, "repeated worker id '" + cells[0] + "'");
    const int w = workers.intern(cells[0]);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (cells[c].empty()) continue;
      const auto value = parse_int(cells[c]);
      if (!value) throw ParseError(number, "label '" + cells[c] + "' is not an integer");
      if (*value == 0) continue;
      raw.push_back({w, static_cast<int>(c - 1), *value, number});
    }
  }
  return finish(std::move(raw), std::move(workers), std::move(items), options);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return in;
}

}  // namespace

LabelFormat parse_label_format(const std::string& name) {
  if (name == "csv-triples") return LabelFormat::CsvTriples;
  if (name == "dense-csv") return LabelFormat::DenseCsv;
  throw DomainError("unknown label format '" + name + "'");
}

LoadedLabels read_labels(std::istream& in, const LoadOptions& options) {
  return options.format == LabelFormat::CsvTriples ? read_triples(in, options) : read_dense(in, options);
}

LoadedLabels load_labels(const std::string& path, const LoadOptions& options) {
  auto in = open_input(path);
  return read_labels(in, options);
}

Predictions read_truth(std::istream& in, const LoadedLabels& loaded) {
  const auto lines = read_lines(in);
  if (lines.empty()) throw ParseError(1, "empty truth file");
  require_header(split_csv(lines.front().second), {"item", "label"}, lines.front().first);
  std::unordered_map<std::string, int> index;
  for (std::size_t j = 0; j < loaded.item_ids.size(); ++j) index.emplace(loaded.item_ids[j], static_cast<int>(j));

  Predictions truth(loaded.item_ids.size(), 0);
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto& [number, line] = lines[n];
    const auto cells = split_csv(line);
    if (cells.size() != 2) throw ParseError(number, "expected 2 fields, got " + std::to_string(cells.size()));
    const auto it = index.find(cells[0]);
    if (it == index.end()) throw ParseError(number, "item '" + cells[0] + "' has no labels");
    const auto value = parse_int(cells[1]);
    if (!value) throw ParseError(number, "label '" + cells[1] + "' is not an integer");
    auto& slot = truth[static_cast<std::size_t>(it->second)];
    if (slot != 0) throw DuplicateLabel("truth", cells[0]);
    slot = internal_label(loaded.label_set, *value, number);
  }
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (truth[j] == 0) throw ParseError(lines.back().first, "no truth label for item '" + loaded.item_ids[j] + "'");
  }
  return truth;
}

Predictions load_truth(const std::string& path, const LoadedLabels& loaded) {
  auto in = open_input(path);
  return read_truth(in, loaded);
}

void write_labels(std::ostream& out, const LabelMatrix& labels, const std::vector<std::string>& worker_ids,
                  const std::vector<std::string>& item_ids, const LabelSet& label_set) {
  out << "worker,item,label\n";
  for (const auto& e : labels.entries()) {
    out << worker_ids[static_cast<std::size_t>(e.worker)] << ',' << item_ids[static_cast<std::size_t>(e.item)] << ','
        << label_set.to_external(e.label) << '\n';
  }
}

void write_truth(std::ostream& out, const Predictions& truth, const std::vector<std::string>& item_ids,
                 const LabelSet& label_set) {
  out << "item,label\n";
  for (std::size_t j = 0; j < truth.size(); ++j) out << item_ids[j] << ',' << label_set.to_external(truth[j]) << '\n';
}

std::vector<std::string> index_ids(int count) {
  std::vector<std::string> ids(static_cast<std::size_t>(std::max(count, 0)));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i);
  return ids;
}

LabelMatrix subsample_labels(const LabelMatrix& labels, double s, std::uint64_t seed) {
  if (!(s >= 0.0 && s <= 1.0)) throw DomainError("subsampling probability must lie in [0, 1]");
  auto rng = make_stream(seed, StreamTag::Subsample);
  std::bernoulli_distribution keep(s);
  std::vector<LabelEntry> kept;
  for (const auto& e : labels.entries()) {
    if (keep(rng)) kept.push_back(e);
  }
  return LabelMatrix(labels.num_workers(), labels.num_items(), labels.num_classes(), std::move(kept));
}

DatasetSummary summarize_dataset(const LabelMatrix& labels, const Predictions* truth) {
  DatasetSummary s;
  s.num_classes = labels.num_classes();
  s.num_workers = labels.num_workers();
  s.num_items = labels.num_items();
  s.num_labels = labels.num_labels();
  s.density = labels.density();
  s.labels_per_worker.resize(static_cast<std::size_t>(labels.num_workers()));
  for (int i = 0; i < labels.num_workers(); ++i) s.labels_per_worker[static_cast<std::size_t>(i)] = labels.worker_label_count(i);
  if (truth == nullptr) return s;

  if (truth->size() != static_cast<std::size_t>(labels.num_items())) {
    throw LengthMismatch("truth must cover every item");
  }
  std::vector<double> accuracy(static_cast<std::size_t>(labels.num_workers()), 0.0);
  double total = 0.0;
  int counted = 0;
  const auto entries = labels.entries();
  for (int i = 0; i < labels.num_workers(); ++i) {
    const auto indices = labels.worker_label_indices(i);
    if (indices.empty()) continue;
    std::size_t correct = 0;
    for (std::size_t idx : indices) {
      if (entries[idx].label == (*truth)[static_cast<std::size_t>(entries[idx].item)]) ++correct;
    }
    const double a = static_cast<double>(correct) / static_cast<double>(indices.size());
    accuracy[static_cast<std::size_t>(i)] = a;
    total += a;
    ++counted;
  }
  s.worker_accuracy = std::move(accuracy);
  if (counted > 0) s.mean_worker_accuracy = total / counted;
  return s;
}

}  // namespace crowd
