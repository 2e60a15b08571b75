#pragma once

// Error-rate bounds for decomposable aggregation rules: the normalized score
// gap quantities, mean and high-probability bounds, and closed forms for
// weighted/majority voting and one-step WMV.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crowd/core.hpp"

namespace crowd {

/// e^(-x^2/2).
double phi(double x);
/// KL divergence between Bernoulli(x) and Bernoulli(y). Throws DomainError
/// unless both lie in (0, 1).
double bernoulli_kl(double x, double y);
/// Natural-log entropy of Bernoulli(eps). Throws DomainError outside (0, 1).
double binary_entropy(double eps);

struct ScoreQuantities {
  int num_classes = 0;
  double a_f = 0.0;
  /// Expected score gaps delta(j, k, l), one L x L block per item profile.
  /// A single profile when the assignment does not depend on the item.
  std::vector<double> delta;
  std::vector<double> tau_min;
  std::vector<double> tau_max;
  double t_low = 0.0;
  double t_high = 0.0;
  double c = 0.0;
  double sigma2 = 0.0;

  bool collapsed() const { return tau_min.size() == 1; }
  /// 0-based classes; item is ignored when collapsed.
  double gap(int item, int k, int l) const;
};

/// Quantities of a decomposable rule under a worker model and assignment.
/// num_items is needed only for per-entry assignments.
/// Throws DimensionMismatch, or DomainError when the rule does not depend on
/// the class at all (A_f = 0).
ScoreQuantities score_quantities(const DecomposableRule& rule, const AssignmentModel& assignment,
                                 const WorkerModel& model, int num_items = 1);

/// Closed form for WMV under the homogeneous model with constant q.
ScoreQuantities quantities_wmv_hds(double q, std::span<const double> weights, std::span<const double> accuracy,
                                   int num_classes);

/// Closed form for the binary hyperplane rule sign(sum v_i z_i + a).
ScoreQuantities quantities_hyperplane(std::span<const double> q, std::span<const double> weights, double shift,
                                      std::span<const double> p_plus, std::span<const double> p_minus);

/// One side of a two-sided bound. The upper side bounds the error from above
/// (a rate bound, or a probability guarantee for high-probability bounds);
/// the lower side bounds it from below.
struct BoundBranch {
  bool condition_holds = false;
  /// The condition compares a t-measure against this threshold.
  double threshold = 0.0;
  /// Set only when the condition holds, capped to [0, 1].
  std::optional<double> value;
  /// Natural log of the governing exponential term, uncapped.
  std::optional<double> log_term;
};

struct BoundReport {
  std::string kind;
  BoundBranch upper;
  BoundBranch lower;
  std::vector<std::pair<std::string, double>> details;

  /// Throws std::out_of_range for unknown names.
  double detail(const std::string& name) const;
};

/// E[err] <= (L-1) min{e^(-t^2/2), e^(-t^2/(2(s2 + c t/3)))} when t_low >= 0;
/// E[err] >= 1 - min{...} with t_high when t_high <= 0.
BoundReport mean_error_bounds(const ScoreQuantities& sq);
BoundReport mean_error_bounds(double t_low, double t_high, double c, double sigma2, int num_classes);

/// The same form applied to one item's tau_min / tau_max.
BoundReport per_item_bounds(double tau_min, double tau_max, double c, double sigma2, int num_classes);

/// Probability guarantees P(err <= eps) (upper) and P(err >= eps) (lower).
BoundReport high_prob_bound(double t_low, double t_high, int num_classes, int num_items, double eps);
inline BoundReport high_prob_bound(const ScoreQuantities& sq, int num_items, double eps) {
  return high_prob_bound(sq.t_low, sq.t_high, sq.num_classes, num_items, eps);
}

/// t thresholds that guarantee err <= eps (or >= eps) with probability
/// 1 - delta. Details carry A, C and G. When t values are given the branch
/// conditions are evaluated and the value is 1 - delta.
BoundReport confidence_thresholds(double eps, double delta, int num_items, int num_classes,
                                  std::optional<double> t_low = {}, std::optional<double> t_high = {});

/// Both majority-voting mean error bounds for identical-q homogeneous workers
/// with average accuracy w_bar. Values are reported whenever w_bar >= 1/L;
/// the condition flag requires w_bar > 1/L.
BoundReport mv_bounds_hds(double q, double w_bar, int num_workers, int num_classes);

/// Mean error bound of the oracle MAP rule under the homogeneous model
/// (WMV with log-odds weights; its t is never negative).
BoundReport oracle_map_hds_bound(double q, std::span<const double> accuracy, int num_classes);

enum class RhoConvention {
  /// rho^2 = (1/M) sum (w_i - 1/2)^2
  Statement,
  /// rho^2 = (1/M) sum (2 w_i - 1)^2
  Proof,
};

/// Mean error bound of one-step WMV for binary labels with q = 1.
/// Throws NotBinary for L != 2 and DomainError for M < 2 or N < 1.
BoundReport one_step_wmv_bound(std::span<const double> accuracy, int num_items, int num_classes = 2,
                               RhoConvention convention = RhoConvention::Statement);

}  // namespace crowd
