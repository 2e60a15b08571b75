#include "crowd/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace crowd {

namespace {

constexpr double kRowSumTolerance = 1e-9;

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError(std::string(what) + " must lie in [0, 1], got " + std::to_string(p));
  }
}

double floored_log(double p) { return std::log(std::max(p, kLogFloor)); }

}  // namespace

// ---------------------------------------------------------------- LabelSet

LabelSet::LabelSet(int num_classes, bool binary_convention)
    : num_classes_(num_classes), binary_(binary_convention) {
  if (num_classes < 2) {
    throw DomainError("label set needs at least two classes");
  }
  if (binary_convention && num_classes != 2) {
    throw NotBinary();
  }
}

int LabelSet::to_internal(int external) const {
  if (binary_) {
    if (external == 1) return 1;
    if (external == -1) return 2;
    if (external == 0) return 0;
    throw UnknownLabel("binary labels must be +1 or -1, got " + std::to_string(external));
  }
  if (external < 0 || external > num_classes_) {
    throw UnknownLabel("label " + std::to_string(external) + " outside 1.." + std::to_string(num_classes_));
  }
  return external;
}

int LabelSet::to_external(int internal) const {
  if (internal < 0 || internal > num_classes_) {
    throw UnknownLabel("class " + std::to_string(internal) + " outside 1.." + std::to_string(num_classes_));
  }
  if (binary_ && internal != 0) {
    return internal == 1 ? 1 : -1;
  }
  return internal;
}

// ------------------------------------------------------------- LabelMatrix

LabelMatrix::LabelMatrix(int num_workers, int num_items, int num_classes, std::vector<LabelEntry> entries)
    : num_workers_(num_workers), num_items_(num_items), num_classes_(num_classes), entries_(std::move(entries)) {
  if (num_workers <= 0 || num_items <= 0) {
    throw EmptyMatrix();
  }
  if (num_classes < 2) {
    throw DomainError("label matrix needs at least two classes");
  }
  for (const auto& e : entries_) {
    if (e.worker < 0 || e.worker >= num_workers || e.item < 0 || e.item >= num_items || e.label < 1 ||
        e.label > num_classes) {
      throw OutOfRangeLabel(e.worker, e.item, e.label);
    }
  }
  std::sort(entries_.begin(), entries_.end(), [](const LabelEntry& a, const LabelEntry& b) {
    return a.item != b.item ? a.item < b.item : a.worker < b.worker;
  });
  for (std::size_t e = 1; e < entries_.size(); ++e) {
    if (entries_[e].item == entries_[e - 1].item && entries_[e].worker == entries_[e - 1].worker) {
      throw DuplicateLabel(std::to_string(entries_[e].worker), std::to_string(entries_[e].item));
    }
  }

  item_offsets_.assign(static_cast<std::size_t>(num_items) + 1, 0);
  worker_offsets_.assign(static_cast<std::size_t>(num_workers) + 1, 0);
  for (const auto& e : entries_) {
    ++item_offsets_[static_cast<std::size_t>(e.item) + 1];
    ++worker_offsets_[static_cast<std::size_t>(e.worker) + 1];
  }
  std::partial_sum(item_offsets_.begin(), item_offsets_.end(), item_offsets_.begin());
  std::partial_sum(worker_offsets_.begin(), worker_offsets_.end(), worker_offsets_.begin());

  worker_entries_.resize(entries_.size());
  std::vector<std::size_t> cursor(worker_offsets_.begin(), worker_offsets_.end() - 1);
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    worker_entries_[cursor[static_cast<std::size_t>(entries_[e].worker)]++] = e;
  }
}

double LabelMatrix::density() const {
  return static_cast<double>(entries_.size()) /
         (static_cast<double>(num_workers_) * static_cast<double>(num_items_));
}

std::span<const LabelEntry> LabelMatrix::item_labels(int item) const {
  const auto begin = item_offsets_[static_cast<std::size_t>(item)];
  const auto end = item_offsets_[static_cast<std::size_t>(item) + 1];
  return std::span<const LabelEntry>(entries_).subspan(begin, end - begin);
}

std::span<const std::size_t> LabelMatrix::worker_label_indices(int worker) const {
  const auto begin = worker_offsets_[static_cast<std::size_t>(worker)];
  const auto end = worker_offsets_[static_cast<std::size_t>(worker) + 1];
  return std::span<const std::size_t>(worker_entries_).subspan(begin, end - begin);
}

std::size_t LabelMatrix::worker_label_count(int worker) const {
  return worker_offsets_[static_cast<std::size_t>(worker) + 1] - worker_offsets_[static_cast<std::size_t>(worker)];
}

int LabelMatrix::label(int worker, int item) const {
  const auto labels = item_labels(item);
  const auto it = std::lower_bound(labels.begin(), labels.end(), worker,
                                   [](const LabelEntry& e, int w) { return e.worker < w; });
  return (it != labels.end() && it->worker == worker) ? it->label : 0;
}

std::vector<std::vector<int>> LabelMatrix::dense() const {
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(num_workers_),
                                     std::vector<int>(static_cast<std::size_t>(num_items_), 0));
  for (const auto& e : entries_) {
    grid[static_cast<std::size_t>(e.worker)][static_cast<std::size_t>(e.item)] = e.label;
  }
  return grid;
}

LabelMatrix validate_label_matrix(const std::vector<std::vector<int>>& raw, const LabelSet& labels) {
  if (raw.empty() || raw.front().empty()) {
    throw EmptyMatrix();
  }
  const auto cols = raw.front().size();
  std::vector<LabelEntry> entries;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].size() != cols) {
      throw DimensionMismatch("label grid is not rectangular");
    }
    for (std::size_t j = 0; j < cols; ++j) {
      const int value = raw[i][j];
      if (value == 0) continue;
      int internal = 0;
      try {
        internal = labels.to_internal(value);
      } catch (const UnknownLabel&) {
        throw OutOfRangeLabel(static_cast<int>(i), static_cast<int>(j), value);
      }
      entries.push_back({static_cast<int>(i), static_cast<int>(j), internal});
    }
  }
  return LabelMatrix(static_cast<int>(raw.size()), static_cast<int>(cols), labels.num_classes(),
                     std::move(entries));
}

// --------------------------------------------------------- AssignmentModel

AssignmentModel::AssignmentModel(std::variant<Constant, PerWorker, PerEntry> v) : model_(std::move(v)) {}

namespace {
void require_assignment_probability(double q) {
  if (!(q > 0.0 && q <= 1.0)) {
    throw DomainError("assignment probability must lie in (0, 1], got " + std::to_string(q));
  }
}
}  // namespace

AssignmentModel AssignmentModel::constant(double q) {
  require_assignment_probability(q);
  return AssignmentModel(Constant{q});
}

AssignmentModel AssignmentModel::per_worker(std::vector<double> q) {
  for (double v : q) require_assignment_probability(v);
  return AssignmentModel(PerWorker{std::move(q)});
}

AssignmentModel AssignmentModel::per_entry(int num_workers, int num_items, std::vector<double> q) {
  if (num_workers <= 0 || num_items <= 0 ||
      q.size() != static_cast<std::size_t>(num_workers) * static_cast<std::size_t>(num_items)) {
    throw DimensionMismatch("assignment matrix size does not match M x N");
  }
  for (double v : q) require_assignment_probability(v);
  return AssignmentModel(PerEntry{num_workers, num_items, std::move(q)});
}

double AssignmentModel::q(int worker, int item) const {
  struct Visitor {
    int worker;
    int item;
    double operator()(const Constant& c) const { return c.q; }
    double operator()(const PerWorker& v) const { return v.q[static_cast<std::size_t>(worker)]; }
    double operator()(const PerEntry& m) const {
      return m.q[static_cast<std::size_t>(worker) * static_cast<std::size_t>(m.items) +
                 static_cast<std::size_t>(item)];
    }
  };
  return std::visit(Visitor{worker, item}, model_);
}

bool AssignmentModel::item_uniform() const { return !std::holds_alternative<PerEntry>(model_); }

double AssignmentModel::max_q() const {
  if (const auto* c = std::get_if<Constant>(&model_)) return c->q;
  const auto& values = std::holds_alternative<PerWorker>(model_) ? std::get<PerWorker>(model_).q
                                                                  : std::get<PerEntry>(model_).q;
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

void AssignmentModel::check_dimensions(int num_workers, int num_items) const {
  if (const auto* v = std::get_if<PerWorker>(&model_)) {
    if (v->q.size() != static_cast<std::size_t>(num_workers)) {
      throw DimensionMismatch("assignment vector length does not match worker count");
    }
  } else if (const auto* m = std::get_if<PerEntry>(&model_)) {
    if (m->workers != num_workers || m->items != num_items) {
      throw DimensionMismatch("assignment matrix shape does not match label matrix");
    }
  }
}

// ---------------------------------------------------------- ConfusionTable

ConfusionTable::ConfusionTable(int num_classes, std::vector<double> row_major)
    : num_classes_(num_classes), values_(std::move(row_major)) {
  if (num_classes < 2) {
    throw DomainError("confusion table needs at least two classes");
  }
  if (values_.size() != static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes)) {
    throw DimensionMismatch("confusion table must have L*L entries");
  }
  for (int k = 0; k < num_classes; ++k) {
    double sum = 0.0;
    for (double p : row(k)) {
      require_probability(p, "confusion entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw DomainError("confusion table row " + std::to_string(k + 1) + " sums to " + std::to_string(sum));
    }
  }
}

// ------------------------------------------------------------ WorkerModel

WorkerModel::WorkerModel(int num_classes, std::variant<General, ClassConditional, Homogeneous> v)
    : num_classes_(num_classes), model_(std::move(v)) {}

WorkerModel WorkerModel::general(std::vector<ConfusionTable> tables) {
  if (tables.empty()) {
    throw DimensionMismatch("worker model needs at least one worker");
  }
  const int classes = tables.front().num_classes();
  for (const auto& t : tables) {
    if (t.num_classes() != classes) {
      throw DimensionMismatch("confusion tables disagree on the number of classes");
    }
  }
  return WorkerModel(classes, General{std::move(tables)});
}

WorkerModel WorkerModel::class_conditional(int num_classes, std::vector<std::vector<double>> accuracy) {
  if (num_classes < 2) throw DomainError("worker model needs at least two classes");
  if (accuracy.empty()) throw DimensionMismatch("worker model needs at least one worker");
  for (const auto& row : accuracy) {
    if (row.size() != static_cast<std::size_t>(num_classes)) {
      throw DimensionMismatch("per-class accuracy vector must have L entries");
    }
    for (double p : row) require_probability(p, "per-class accuracy");
  }
  return WorkerModel(num_classes, ClassConditional{std::move(accuracy)});
}

WorkerModel WorkerModel::homogeneous(int num_classes, std::vector<double> accuracy) {
  if (num_classes < 2) throw DomainError("worker model needs at least two classes");
  if (accuracy.empty()) throw DimensionMismatch("worker model needs at least one worker");
  for (double p : accuracy) require_probability(p, "worker accuracy");
  return WorkerModel(num_classes, Homogeneous{std::move(accuracy)});
}

WorkerModel::Kind WorkerModel::kind() const {
  switch (model_.index()) {
    case 0:
      return Kind::General;
    case 1:
      return Kind::ClassConditional;
    default:
      return Kind::Homogeneous;
  }
}

int WorkerModel::num_workers() const {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, General>) {
          return static_cast<int>(m.tables.size());
        } else {
          return static_cast<int>(m.accuracy.size());
        }
      },
      model_);
}

double WorkerModel::prob(int worker, int true_class, int given_label) const {
  const auto w = static_cast<std::size_t>(worker);
  const double off = 1.0 / static_cast<double>(num_classes_ - 1);
  switch (model_.index()) {
    case 0:
      return std::get<General>(model_).tables[w].at(true_class, given_label);
    case 1: {
      const double acc = std::get<ClassConditional>(model_).accuracy[w][static_cast<std::size_t>(true_class)];
      return true_class == given_label ? acc : (1.0 - acc) * off;
    }
    default: {
      const double acc = std::get<Homogeneous>(model_).accuracy[w];
      return true_class == given_label ? acc : (1.0 - acc) * off;
    }
  }
}

ConfusionTable WorkerModel::confusion(int worker) const {
  if (const auto* g = std::get_if<General>(&model_)) {
    return g->tables[static_cast<std::size_t>(worker)];
  }
  std::vector<double> values(static_cast<std::size_t>(num_classes_ * num_classes_));
  for (int k = 0; k < num_classes_; ++k) {
    for (int l = 0; l < num_classes_; ++l) {
      values[static_cast<std::size_t>(k * num_classes_ + l)] = prob(worker, k, l);
    }
  }
  return ConfusionTable(num_classes_, std::move(values));
}

WorkerModel WorkerModel::to_general() const {
  std::vector<ConfusionTable> tables;
  tables.reserve(static_cast<std::size_t>(num_workers()));
  for (int i = 0; i < num_workers(); ++i) tables.push_back(confusion(i));
  return WorkerModel(num_classes_, General{std::move(tables)});
}

std::span<const double> WorkerModel::accuracies() const {
  if (const auto* h = std::get_if<Homogeneous>(&model_)) return h->accuracy;
  throw DomainError("accuracies() requires a homogeneous worker model");
}

BinaryReliability WorkerModel::binary(int worker) const {
  if (num_classes_ != 2) throw NotBinary();
  // Internal class 1 is +1, class 2 is -1.
  return {prob(worker, 0, 0), prob(worker, 1, 1)};
}

// ------------------------------------------------------------------ Prior

Prior::Prior(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw DomainError("prior needs at least two classes");
  double sum = 0.0;
  for (double p : probs_) {
    require_probability(p, "prior probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowSumTolerance) {
    throw DomainError("prior sums to " + std::to_string(sum));
  }
}

Prior Prior::uniform(int num_classes) {
  if (num_classes < 2) throw DomainError("prior needs at least two classes");
  return Prior(std::vector<double>(static_cast<std::size_t>(num_classes), 1.0 / num_classes));
}

// ------------------------------------------------------- DecomposableRule

DecomposableRule::DecomposableRule(int num_workers, int num_classes, std::vector<double> scores,
                                   std::vector<double> shifts)
    : num_workers_(num_workers), num_classes_(num_classes), scores_(std::move(scores)), shifts_(std::move(shifts)) {
  if (num_workers <= 0 || num_classes < 2) {
    throw DomainError("rule needs at least one worker and two classes");
  }
  const auto expected = static_cast<std::size_t>(num_workers) * static_cast<std::size_t>(num_classes) *
                        static_cast<std::size_t>(num_classes + 1);
  if (scores_.size() != expected) throw DimensionMismatch("score table must have M*L*(L+1) entries");
  if (shifts_.empty()) shifts_.assign(static_cast<std::size_t>(num_classes), 0.0);
  if (shifts_.size() != static_cast<std::size_t>(num_classes)) {
    throw DimensionMismatch("rule needs one shift per class");
  }
  for (double s : scores_) {
    if (!std::isfinite(s)) throw DomainError("rule scores must be finite");
  }
  for (double a : shifts_) {
    if (!std::isfinite(a)) throw DomainError("rule shifts must be finite");
  }
  const double missing = score(0, 0, 0);
  for (int i = 0; i < num_workers_; ++i) {
    for (int k = 0; k < num_classes_; ++k) {
      if (score(i, k, 0) != missing) {
        throw DomainError("score of a missing label must be one rule-wide constant");
      }
    }
  }
}

DecomposableRule DecomposableRule::majority(int num_workers, int num_classes) {
  const std::vector<double> ones(static_cast<std::size_t>(num_workers), 1.0);
  return weighted(ones, num_classes);
}

DecomposableRule DecomposableRule::weighted(std::span<const double> weights, int num_classes,
                                            std::span<const double> shifts) {
  const int m = static_cast<int>(weights.size());
  std::vector<double> scores(static_cast<std::size_t>(m * num_classes * (num_classes + 1)), 0.0);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < num_classes; ++k) {
      scores[static_cast<std::size_t>((i * num_classes + k) * (num_classes + 1) + k + 1)] =
          weights[static_cast<std::size_t>(i)];
    }
  }
  return DecomposableRule(m, num_classes, std::move(scores), std::vector<double>(shifts.begin(), shifts.end()));
}

DecomposableRule DecomposableRule::oracle_map(const WorkerModel& model, const Prior& prior) {
  const int m = model.num_workers();
  const int l = model.num_classes();
  if (prior.num_classes() != l) throw DimensionMismatch("prior and worker model disagree on L");
  std::vector<double> scores(static_cast<std::size_t>(m * l * (l + 1)), 0.0);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < l; ++k) {
      for (int h = 1; h <= l; ++h) {
        scores[static_cast<std::size_t>((i * l + k) * (l + 1) + h)] = floored_log(model.prob(i, k, h - 1));
      }
    }
  }
  std::vector<double> shifts(static_cast<std::size_t>(l));
  for (int k = 0; k < l; ++k) shifts[static_cast<std::size_t>(k)] = floored_log(prior.at(k));
  return DecomposableRule(m, l, std::move(scores), std::move(shifts));
}

DecomposableRule DecomposableRule::affine(double scale, double offset) const {
  auto scores = scores_;
  for (double& s : scores) s = scale * s + offset;
  auto shifts = shifts_;
  for (double& a : shifts) a = scale * a;
  return DecomposableRule(num_workers_, num_classes_, std::move(scores), std::move(shifts));
}

// -------------------------------------------------------- PosteriorMatrix

PosteriorMatrix::PosteriorMatrix(int num_items, int num_classes, std::vector<double> values)
    : num_items_(num_items), num_classes_(num_classes), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(num_items) * static_cast<std::size_t>(num_classes)) {
    throw DimensionMismatch("posterior must have N*L entries");
  }
  for (int j = 0; j < num_items_; ++j) {
    double sum = 0.0;
    for (double p : row(j)) {
      if (!(p >= 0.0)) throw DomainError("posterior entries must be nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw DomainError("posterior row " + std::to_string(j) + " sums to " + std::to_string(sum));
    }
  }
}

double normalize_log_row(std::span<double> row) {
  const double top = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : row) v /= sum;
  return top + std::log(sum);
}

PosteriorWithLikelihood posterior_with_likelihood(const WorkerModel& model, const Prior& prior,
                                                  const LabelMatrix& labels) {
  const int l = labels.num_classes();
  const int m = labels.num_workers();
  if (model.num_classes() != l || prior.num_classes() != l || model.num_workers() != m) {
    throw DimensionMismatch("worker model, prior and label matrix dimensions disagree");
  }

  // log pi^(i)_{k,h} laid out as [worker][label h-1][class k] so that one
  // observed label reads a contiguous run of L values.
  std::vector<double> log_table(static_cast<std::size_t>(m * l * l));
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < l; ++k) {
      for (int h = 0; h < l; ++h) {
        log_table[static_cast<std::size_t>((i * l + h) * l + k)] = floored_log(model.prob(i, k, h));
      }
    }
  }
  std::vector<double> log_prior(static_cast<std::size_t>(l));
  for (int k = 0; k < l; ++k) log_prior[static_cast<std::size_t>(k)] = floored_log(prior.at(k));

  const int n = labels.num_items();
  std::vector<double> rho(static_cast<std::size_t>(n * l));
  double log_likelihood = 0.0;
  for (int j = 0; j < n; ++j) {
    double* row = rho.data() + static_cast<std::ptrdiff_t>(j) * l;
    std::copy(log_prior.begin(), log_prior.end(), row);
    for (const auto& e : labels.item_labels(j)) {
      const double* logs = log_table.data() + static_cast<std::ptrdiff_t>((e.worker * l + e.label - 1) * l);
      for (int k = 0; k < l; ++k) row[k] += logs[k];
    }
    log_likelihood += normalize_log_row(std::span<double>(row, static_cast<std::size_t>(l)));
  }
  return {PosteriorMatrix(n, l, std::move(rho)), log_likelihood};
}

PosteriorMatrix posterior(const WorkerModel& model, const Prior& prior, const LabelMatrix& labels) {
  return posterior_with_likelihood(model, prior, labels).posterior;
}

double error_rate(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw LengthMismatch("prediction and truth lengths differ");
  }
  if (predicted.empty()) {
    throw LengthMismatch("error rate needs at least one item");
  }
  std::size_t wrong = 0;
  for (std::size_t j = 0; j < predicted.size(); ++j) {
    if (predicted[j] != truth[j]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

}  // namespace crowd
