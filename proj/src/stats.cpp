#include "fame/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace fame::stats {

double population_variance(std::span<const double> xs) {
  if (xs.empty()) {
    throw std::invalid_argument("stats: variance of empty sample");
  }
  double mean = 0.0;
  double m2 = 0.0;
  double count = 0.0;
  for (double x : xs) {
    count += 1.0;
    double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }
  return m2 / count;
}

VarianceRatio grad_variance_ratio(double first_epoch_var, double last_epoch_var) {
  if (!(first_epoch_var >= 0.0) || !(last_epoch_var >= 0.0)) {
    throw std::invalid_argument("stats: variances must be non-negative");
  }
  VarianceRatio out;
  out.first_epoch_var = first_epoch_var;
  out.last_epoch_var = last_epoch_var;
  if (first_epoch_var == 0.0) {
    out.degenerate = true;
    out.ratio = 0.0;
    return out;
  }
  out.ratio = last_epoch_var / first_epoch_var;
  return out;
}

VarianceRatio grad_variance_ratio(std::span<const double> first_grads,
                                  std::span<const double> last_grads) {
  return grad_variance_ratio(population_variance(first_grads),
                             population_variance(last_grads));
}

namespace {

// Midranks over |d|, doubled so ties stay exact integers: a group spanning
// 1-based sorted positions [first, last] gets doubled rank first + last.
struct RankedDiffs {
  std::vector<std::int64_t> doubled_ranks;
  std::vector<bool> positive;
  std::vector<std::int64_t> tie_group_sizes;
};

RankedDiffs rank_differences(const std::vector<double>& diffs) {
  std::vector<std::size_t> idx(diffs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(diffs[a]) < std::fabs(diffs[b]);
  });
  RankedDiffs out;
  out.doubled_ranks.assign(diffs.size(), 0);
  out.positive.assign(diffs.size(), false);
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() &&
           std::fabs(diffs[idx[j + 1]]) == std::fabs(diffs[idx[i]])) {
      ++j;
    }
    std::int64_t doubled = static_cast<std::int64_t>(i + 1) +
                           static_cast<std::int64_t>(j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      out.doubled_ranks[idx[k]] = doubled;
      out.positive[idx[k]] = diffs[idx[k]] > 0.0;
    }
    out.tie_group_sizes.push_back(static_cast<std::int64_t>(j - i + 1));
    i = j + 1;
  }
  return out;
}

// Exact two-sided tail of min(W+, W-) by dynamic programming over the
// 2^n equally likely sign assignments, in doubled-rank units.
double exact_min_tail(const std::vector<std::int64_t>& doubled_ranks,
                      std::int64_t w2_observed) {
  std::int64_t total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(),
                                       std::int64_t{0});
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  std::int64_t reach = 0;
  for (std::int64_t r : doubled_ranks) {
    reach += r;
    for (std::int64_t s = reach; s >= r; --s) {
      count[static_cast<std::size_t>(s)] +=
          count[static_cast<std::size_t>(s - r)];
    }
  }
  double favorable = 0.0;
  for (std::int64_t s = 0; s <= total; ++s) {
    if (s <= w2_observed || total - s <= w2_observed) {
      favorable += count[static_cast<std::size_t>(s)];
    }
  }
  return favorable / std::ldexp(1.0, static_cast<int>(doubled_ranks.size()));
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a,
                                    std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("stats: wilcoxon needs paired samples");
  }
  if (a.empty()) {
    throw std::invalid_argument("stats: wilcoxon of empty samples");
  }
  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    if (!std::isfinite(d)) {
      throw std::invalid_argument("stats: non-finite difference in wilcoxon");
    }
    if (d != 0.0) diffs.push_back(d);
  }

  WilcoxonResult out;
  out.n_effective = static_cast<int>(diffs.size());
  if (diffs.empty()) {
    out.degenerate = true;
    out.statistic = 0.0;
    out.p_value = 1.0;
    out.method = WilcoxonResult::Method::exact;
    return out;
  }

  RankedDiffs ranked = rank_differences(diffs);
  std::int64_t w2_pos = 0, w2_total = 0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    w2_total += ranked.doubled_ranks[i];
    if (ranked.positive[i]) w2_pos += ranked.doubled_ranks[i];
  }
  std::int64_t w2_min = std::min(w2_pos, w2_total - w2_pos);
  out.statistic = static_cast<double>(w2_min) / 2.0;

  const int n = out.n_effective;
  if (n <= 25) {
    out.method = WilcoxonResult::Method::exact;
    out.p_value = exact_min_tail(ranked.doubled_ranks, w2_min);
    return out;
  }

  out.method = WilcoxonResult::Method::normal_approx;
  double nd = static_cast<double>(n);
  double mean = nd * (nd + 1.0) / 4.0;
  double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
  for (std::int64_t t : ranked.tie_group_sizes) {
    double td = static_cast<double>(t);
    var -= (td * td * td - td) / 48.0;
  }
  double sigma = std::sqrt(var);
  double z = (out.statistic - mean + 0.5) / sigma;
  double p = std::erfc(-z / std::sqrt(2.0));  // 2 * Phi(z)
  out.p_value = std::min(1.0, std::max(0.0, p));
  return out;
}

std::map<std::string, MetricSummary> aggregate_trials(
    const std::vector<std::map<std::string, double>>& trials) {
  if (trials.empty()) {
    throw std::invalid_argument("stats: no trials to aggregate");
  }
  const auto& keys = trials.front();
  for (const auto& trial : trials) {
    if (trial.size() != keys.size()) {
      throw std::invalid_argument("stats: trials report different metric sets");
    }
    for (const auto& [name, _] : trial) {
      if (keys.find(name) == keys.end()) {
        throw std::invalid_argument("stats: metric '" + name +
                                    "' missing from some trials");
      }
    }
  }
  std::map<std::string, MetricSummary> out;
  for (const auto& [name, _] : keys) {
    MetricSummary s;
    s.n = static_cast<int>(trials.size());
    double sum = 0.0;
    for (const auto& trial : trials) sum += trial.at(name);
    s.mean = sum / static_cast<double>(s.n);
    if (s.n == 1) {
      s.stddev = 0.0;
      s.single_trial = true;
    } else {
      double ss = 0.0;
      for (const auto& trial : trials) {
        double d = trial.at(name) - s.mean;
        ss += d * d;
      }
      s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    out[name] = s;
  }
  return out;
}

}  // namespace fame::stats
