#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace fame::stats {

// Population variance (divide by n) via Welford's recurrence.
double population_variance(std::span<const double> xs);

struct VarianceRatio {
  double first_epoch_var = 0.0;
  double last_epoch_var = 0.0;
  double ratio = 0.0;
  bool degenerate = false;  // first-epoch variance was zero
};

// Ratio of last- to first-epoch gradient variance; callers pass the
// epoch-level variances they tracked (per-batch variances averaged over
// each epoch). A zero baseline is flagged instead of dividing.
VarianceRatio grad_variance_ratio(double first_epoch_var, double last_epoch_var);

// Same diagnostic from two raw gradient snapshots.
VarianceRatio grad_variance_ratio(std::span<const double> first_grads,
                                  std::span<const double> last_grads);

struct WilcoxonResult {
  double statistic = 0.0;  // W = min(W+, W-) over nonzero differences
  double p_value = 1.0;    // two-sided
  int n_effective = 0;     // pairs remaining after zero differences drop
  enum class Method { exact, normal_approx } method = Method::exact;
  bool degenerate = false;  // every difference was zero
};

// Paired two-sided signed-rank test. Zero differences are dropped, tied
// magnitudes get midranks, and the null distribution is enumerated exactly
// over all sign assignments whenever n_effective <= 25; larger samples use
// the normal approximation with tie and continuity corrections.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a,
                                    std::span<const double> b);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1); zero and flagged when n == 1
  int n = 0;
  bool single_trial = false;
};

// Per-metric mean and sample standard deviation across trials. Every trial
// must report exactly the same metric keys.
std::map<std::string, MetricSummary> aggregate_trials(
    const std::vector<std::map<std::string, double>>& trials);

}  // namespace fame::stats
