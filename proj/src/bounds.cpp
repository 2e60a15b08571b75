#include "crowd/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "crowd/aggregate.hpp"

namespace crowd {

namespace {

constexpr double kKlClamp = 1e-12;

double clamp_open(double p) { return std::clamp(p, kKlClamp, 1.0 - kKlClamp); }

void require_open_unit(double x, const char* what) {
  if (!(x > 0.0 && x < 1.0)) throw DomainError(std::string(what) + " must lie in (0, 1)");
}

double norm2(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// min{e^(-t^2/2), e^(-t^2/(2(s2 + sign*c*t/3)))} in log form.
double log_min_term(double t, double c, double sigma2, double sign) {
  const double hoeffding = -t * t / 2.0;
  const double denom = sigma2 + sign * c * t / 3.0;
  if (!(denom > 0.0)) return hoeffding;
  return std::min(hoeffding, -t * t / (2.0 * denom));
}

ScoreQuantities single_profile(int num_classes, double a_f, double t_low, double t_high, double c, double sigma2) {
  ScoreQuantities sq;
  sq.num_classes = num_classes;
  sq.a_f = a_f;
  sq.t_low = t_low;
  sq.t_high = t_high;
  sq.c = c;
  sq.sigma2 = sigma2;
  sq.tau_min = {t_low};
  sq.tau_max = {t_high};
  return sq;
}

}  // namespace

double phi(double x) { return std::exp(-x * x / 2.0); }

double bernoulli_kl(double x, double y) {
  require_open_unit(x, "KL argument x");
  require_open_unit(y, "KL argument y");
  return x * std::log(x / y) + (1.0 - x) * std::log((1.0 - x) / (1.0 - y));
}

double binary_entropy(double eps) {
  require_open_unit(eps, "entropy argument");
  return -eps * std::log(eps) - (1.0 - eps) * std::log(1.0 - eps);
}

double ScoreQuantities::gap(int item, int k, int l) const {
  const auto ul = static_cast<std::size_t>(num_classes);
  const std::size_t profile = collapsed() ? 0 : static_cast<std::size_t>(item);
  return delta[(profile * ul + static_cast<std::size_t>(k)) * ul + static_cast<std::size_t>(l)];
}

ScoreQuantities score_quantities(const DecomposableRule& rule, const AssignmentModel& assignment,
                                 const WorkerModel& model, int num_items) {
  const int m = rule.num_workers();
  const int l = rule.num_classes();
  if (model.num_workers() != m || model.num_classes() != l) {
    throw DimensionMismatch("rule and worker model dimensions disagree");
  }
  const bool collapsed = assignment.item_uniform();
  if (!collapsed && num_items < 1) throw DimensionMismatch("per-entry assignment needs the item count");
  assignment.check_dimensions(m, collapsed ? 1 : num_items);

  // Largest class-change of each worker's score, over observed labels h.
  double a_f2 = 0.0;
  double max_change = 0.0;
  for (int i = 0; i < m; ++i) {
    double worker_max = 0.0;
    for (int k = 0; k < l; ++k) {
      for (int k2 = 0; k2 < l; ++k2) {
        if (k == k2) continue;
        for (int h = 1; h <= l; ++h) worker_max = std::max(worker_max, std::abs(rule.score(i, k, h) - rule.score(i, k2, h)));
      }
    }
    a_f2 += worker_max * worker_max;
    max_change = std::max(max_change, worker_max);
  }
  const double a_f = std::sqrt(a_f2);
  if (!(a_f > 0.0)) throw DomainError("rule scores do not depend on the class");

  ScoreQuantities sq;
  sq.num_classes = l;
  sq.a_f = a_f;
  sq.c = max_change / a_f;
  const int profiles = collapsed ? 1 : num_items;
  const auto ul = static_cast<std::size_t>(l);
  sq.delta.assign(static_cast<std::size_t>(profiles) * ul * ul, 0.0);
  sq.tau_min.assign(static_cast<std::size_t>(profiles), std::numeric_limits<double>::infinity());
  sq.tau_max.assign(static_cast<std::size_t>(profiles), -std::numeric_limits<double>::infinity());
  double var_max = 0.0;
  for (int j = 0; j < profiles; ++j) {
    for (int k = 0; k < l; ++k) {
      for (int k2 = 0; k2 < l; ++k2) {
        if (k == k2) continue;
        double gap = rule.shift(k) - rule.shift(k2);
        double var = 0.0;
        for (int i = 0; i < m; ++i) {
          const double q = assignment.q(i, j);
          for (int h = 1; h <= l; ++h) {
            const double diff = rule.score(i, k, h) - rule.score(i, k2, h);
            const double p = model.prob(i, k, h - 1);
            gap += q * diff * p;
            var += q * diff * diff * p;
          }
        }
        const auto ju = static_cast<std::size_t>(j);
        sq.delta[(ju * ul + static_cast<std::size_t>(k)) * ul + static_cast<std::size_t>(k2)] = gap;
        sq.tau_min[ju] = std::min(sq.tau_min[ju], gap / a_f);
        sq.tau_max[ju] = std::max(sq.tau_max[ju], gap / a_f);
        var_max = std::max(var_max, var);
      }
    }
  }
  sq.sigma2 = var_max / a_f2;
  sq.t_low = *std::min_element(sq.tau_min.begin(), sq.tau_min.end());
  sq.t_high = *std::max_element(sq.tau_max.begin(), sq.tau_max.end());
  return sq;
}

ScoreQuantities quantities_wmv_hds(double q, std::span<const double> weights, std::span<const double> accuracy,
                                   int num_classes) {
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("q must lie in (0, 1]");
  if (num_classes < 2) throw DomainError("need at least two classes");
  if (weights.size() != accuracy.size() || weights.empty()) {
    throw DimensionMismatch("weights and accuracies must have one entry per worker");
  }
  const double norm = norm2(weights);
  if (!(norm > 0.0)) throw DomainError("weight vector is zero");
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) sum += weights[i] * (num_classes * accuracy[i] - 1.0);
  const double t = q * sum / ((num_classes - 1) * norm);
  auto sq = single_profile(num_classes, norm, t, t, norm_inf(weights) / norm, q);
  const auto ul = static_cast<std::size_t>(num_classes);
  sq.delta.assign(ul * ul, t * norm);
  for (std::size_t k = 0; k < ul; ++k) sq.delta[k * ul + k] = 0.0;
  return sq;
}

ScoreQuantities quantities_hyperplane(std::span<const double> q, std::span<const double> weights, double shift,
                                      std::span<const double> p_plus, std::span<const double> p_minus) {
  const std::size_t m = weights.size();
  if (m == 0 || q.size() != m || p_plus.size() != m || p_minus.size() != m) {
    throw DimensionMismatch("q, weights, p_plus and p_minus must have one entry per worker");
  }
  const double norm = norm2(weights);
  if (!(norm > 0.0)) throw DomainError("weight vector is zero");
  double plus = shift;
  double minus = -shift;
  double var = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    plus += q[i] * weights[i] * (2.0 * p_plus[i] - 1.0);
    minus += q[i] * weights[i] * (2.0 * p_minus[i] - 1.0);
    var += q[i] * weights[i] * weights[i];
  }
  auto sq = single_profile(2, norm, std::min(plus, minus) / norm, std::max(plus, minus) / norm, norm_inf(weights) / norm,
                           var / (norm * norm));
  sq.delta = {0.0, plus, minus, 0.0};
  return sq;
}

double BoundReport::detail(const std::string& name) const {
  for (const auto& [key, value] : details) {
    if (key == name) return value;
  }
  throw std::out_of_range("no detail named " + name);
}

BoundReport mean_error_bounds(double t_low, double t_high, double c, double sigma2, int num_classes) {
  if (num_classes < 2) throw DomainError("need at least two classes");
  BoundReport r;
  r.kind = "mean-error";
  r.upper.threshold = 0.0;
  r.upper.condition_holds = t_low >= 0.0;
  if (r.upper.condition_holds) {
    const double log_term = log_min_term(t_low, c, sigma2, +1.0);
    r.upper.log_term = log_term;
    r.upper.value = std::min(1.0, (num_classes - 1) * std::exp(log_term));
  }
  r.lower.threshold = 0.0;
  r.lower.condition_holds = t_high <= 0.0;
  if (r.lower.condition_holds) {
    const double log_term = log_min_term(t_high, c, sigma2, -1.0);
    r.lower.log_term = log_term;
    r.lower.value = std::clamp(1.0 - std::exp(log_term), 0.0, 1.0);
  }
  r.details = {{"t_low", t_low}, {"t_high", t_high}, {"c", c}, {"sigma2", sigma2}};
  return r;
}

BoundReport mean_error_bounds(const ScoreQuantities& sq) {
  return mean_error_bounds(sq.t_low, sq.t_high, sq.c, sq.sigma2, sq.num_classes);
}

BoundReport per_item_bounds(double tau_min, double tau_max, double c, double sigma2, int num_classes) {
  auto r = mean_error_bounds(tau_min, tau_max, c, sigma2, num_classes);
  r.kind = "per-item";
  r.details[0].first = "tau_min";
  r.details[1].first = "tau_max";
  return r;
}

BoundReport high_prob_bound(double t_low, double t_high, int num_classes, int num_items, double eps) {
  require_open_unit(eps, "epsilon");
  if (num_items < 1) throw DomainError("need at least one item");
  if (num_classes < 2) throw DomainError("need at least two classes");
  BoundReport r;
  r.kind = "high-probability";
  r.upper.threshold = std::sqrt(2.0 * std::log((num_classes - 1) / eps));
  r.upper.condition_holds = t_low >= r.upper.threshold;
  if (r.upper.condition_holds) {
    const double exponent = -num_items * bernoulli_kl(eps, clamp_open((num_classes - 1) * phi(t_low)));
    r.upper.log_term = exponent;
    r.upper.value = 1.0 - std::exp(exponent);
  }
  r.lower.threshold = -std::sqrt(2.0 * std::log(1.0 / (1.0 - eps)));
  r.lower.condition_holds = t_high <= r.lower.threshold;
  if (r.lower.condition_holds) {
    const double exponent = -num_items * bernoulli_kl(eps, clamp_open(1.0 - phi(t_high)));
    r.lower.log_term = exponent;
    r.lower.value = 1.0 - std::exp(exponent);
  }
  r.details = {{"t_low", t_low}, {"t_high", t_high}, {"epsilon", eps}, {"N", static_cast<double>(num_items)}};
  return r;
}

BoundReport confidence_thresholds(double eps, double delta, int num_items, int num_classes,
                                  std::optional<double> t_low, std::optional<double> t_high) {
  require_open_unit(eps, "epsilon");
  require_open_unit(delta, "delta");
  if (num_items < 1) throw DomainError("need at least one item");
  if (num_classes < 2) throw DomainError("need at least two classes");
  const double a = binary_entropy(eps) + std::log(1.0 / delta) / num_items;
  const double c = 1.0 + std::exp(a / eps);
  const double g = 1.0 + std::exp(a / (1.0 - eps));
  BoundReport r;
  r.kind = "confidence-thresholds";
  r.upper.threshold = std::sqrt(2.0 * std::log((num_classes - 1) * c));
  r.lower.threshold = -std::sqrt(2.0 * std::log(g));
  if (t_low && *t_low >= r.upper.threshold) {
    r.upper.condition_holds = true;
    r.upper.value = 1.0 - delta;
  }
  if (t_high && *t_high <= r.lower.threshold) {
    r.lower.condition_holds = true;
    r.lower.value = 1.0 - delta;
  }
  r.details = {{"A", a}, {"C", c}, {"G", g}, {"epsilon", eps}, {"delta", delta}};
  return r;
}

BoundReport mv_bounds_hds(double q, double w_bar, int num_workers, int num_classes) {
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("q must lie in (0, 1]");
  if (!(w_bar >= 0.0 && w_bar <= 1.0)) throw DomainError("average accuracy must lie in [0, 1]");
  if (num_workers < 1) throw DomainError("need at least one worker");
  if (num_classes < 2) throw DomainError("need at least two classes");
  const double l = num_classes;
  const double gap = w_bar - 1.0 / l;
  const double ratio = l / (l - 1.0);
  const double log15 = -0.5 * ratio * ratio * num_workers * q * q * gap * gap;
  const double log16 = -0.5 * ratio * ratio * num_workers * q * gap * gap / (1.0 + gap * l / (3.0 * (l - 1.0)));
  const double b15 = std::min(1.0, (l - 1.0) * std::exp(log15));
  const double b16 = std::min(1.0, (l - 1.0) * std::exp(log16));

  BoundReport r;
  r.kind = "mv-hds";
  r.upper.threshold = 1.0 / l;
  r.upper.condition_holds = gap > 0.0;
  if (gap >= 0.0) {
    r.upper.value = std::min(b15, b16);
    r.upper.log_term = std::min(log15, log16);
  }
  r.details = {{"bound15", b15}, {"bound16", b16}, {"bound16_tighter", log16 < log15 ? 1.0 : 0.0}};
  return r;
}

BoundReport oracle_map_hds_bound(double q, std::span<const double> accuracy, int num_classes) {
  const auto weights = oracle_map_weights_hds(accuracy, num_classes);
  auto r = mean_error_bounds(quantities_wmv_hds(q, weights, accuracy, num_classes));
  r.kind = "oracle-map-hds";
  return r;
}

BoundReport one_step_wmv_bound(std::span<const double> accuracy, int num_items, int num_classes,
                               RhoConvention convention) {
  if (num_classes != 2) throw NotBinary();
  const auto m = static_cast<double>(accuracy.size());
  if (accuracy.size() < 2) throw DomainError("one-step WMV bound needs at least two workers");
  if (num_items < 1) throw DomainError("need at least one item");
  const double n = num_items;
  double w_bar = 0.0;
  double spread = 0.0;
  for (double w : accuracy) {
    w_bar += w;
    const double d = convention == RhoConvention::Statement ? w - 0.5 : 2.0 * w - 1.0;
    spread += d * d;
  }
  w_bar /= m;
  const double rho = std::sqrt(spread / m);
  const double excess = w_bar - 0.5 - 1.0 / m;
  const double eta = 2.0 * std::exp(-2.0 * m * m * excess * excess / (m - 1.0));

  BoundReport r;
  r.kind = "one-step-wmv";
  r.upper.threshold = 0.5 + 1.0 / m + std::sqrt((m - 1.0) * std::log(2.0) / (2.0 * m * m));
  r.upper.condition_holds = w_bar >= r.upper.threshold;
  if (r.upper.condition_holds) {
    const double rho4 = rho * rho * rho * rho;
    const double log_term =
        -8.0 * m * n * n * rho4 * (1.0 - eta) * (1.0 - eta) / (m * m * n + (m + n) * (m + n));
    r.upper.log_term = log_term;
    r.upper.value = std::min(1.0, std::exp(log_term));
  }
  r.details = {{"w_bar", w_bar}, {"rho", rho}, {"eta", eta}};
  return r;
}

}  // namespace crowd
