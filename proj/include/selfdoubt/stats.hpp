#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "selfdoubt/errors.hpp"

namespace selfdoubt {

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Inverse standard normal CDF (Wichura's algorithm AS 241, PPND16).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw validation_error("normal_quantile: p must be in (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

/// Wilson score interval for a binomial proportion, clamped to [0,1].
inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials,
                                                 double confidence) {
  if (trials == 0) throw validation_error("wilson_interval: zero trials");
  if (successes > trials) throw validation_error("wilson_interval: successes exceed trials");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw validation_error("wilson_interval: confidence must be in (0,1)");
  const double n = static_cast<double>(trials);
  const double p_hat = static_cast<double>(successes) / n;
  const double z = normal_quantile(0.5 * (1.0 + confidence));
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p_hat + z2 / (2.0 * n)) / denom;
  const double half =
      (z / denom) * std::sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n));
  // degenerate proportions pin the matching bound exactly
  const double low = successes == 0 ? 0.0 : std::max(0.0, center - half);
  const double high = successes == trials ? 1.0 : std::min(1.0, center + half);
  return {low, high};
}

/// AUROC as the Mann-Whitney probability: the fraction of (positive,
/// negative) pairs the score orders correctly, ties counting half. Computed
/// via average ranks; equals the all-pairs enumeration exactly.
inline double auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw validation_error("auroc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (bool l : labels) pos += l ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw validation_error("auroc: needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j share the average rank; halves are exact in binary
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u =
      rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

/// Area under the risk-coverage curve: records are ranked by score
/// descending (ties keep the original record order) and the mean accuracy of
/// all N top-k prefixes is returned.
inline double aurac(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw validation_error("aurac: length mismatch");
  if (scores.empty()) throw validation_error("aurac: empty input");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[order[k]]) ++correct;
    sum += static_cast<double>(correct) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(n);
}

struct WilcoxonResult {
  double w = 0.0;       // sum of ranks of positive deltas
  double p = 1.0;       // one-sided, alternative "median > 0"
  int wins = 0;         // sign counts over ALL input deltas, zeros included
  int draws = 0;
  int losses = 0;
  std::size_t m = 0;    // nonzero deltas used by the test
  bool exact = false;   // exact enumeration vs normal approximation
};

/// Paired one-sided Wilcoxon signed-rank test. Zero deltas are dropped before
/// ranking; absolute values get average ranks on ties. Exact distribution for
/// m <= 25 (so a 21-run grid stays exact), tie-corrected normal approximation
/// with continuity correction otherwise.
inline WilcoxonResult wilcoxon_one_sided(const std::vector<double>& deltas,
                                         std::size_t exact_limit = 25) {
  WilcoxonResult res;
  std::vector<double> nonzero;
  for (double d : deltas) {
    if (d > 0.0)
      ++res.wins;
    else if (d < 0.0)
      ++res.losses;
    else
      ++res.draws;
    if (d != 0.0) nonzero.push_back(d);
  }
  if (nonzero.empty()) throw validation_error("wilcoxon: all deltas are zero");
  const std::size_t m = nonzero.size();
  res.m = m;

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(nonzero[a]) < std::abs(nonzero[b]);
  });
  std::vector<double> rank(m, 0.0);
  std::vector<std::size_t> tie_sizes;
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j < m && std::abs(nonzero[order[j]]) == std::abs(nonzero[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
    tie_sizes.push_back(j - i);
    i = j;
  }
  double w = 0.0;
  for (std::size_t k = 0; k < m; ++k)
    if (nonzero[k] > 0.0) w += rank[k];
  res.w = w;

  if (m <= exact_limit) {
    // Exact null distribution by dynamic programming over doubled ranks
    // (doubling makes the half-integer tie ranks integral).
    std::vector<long> doubled(m);
    long total = 0;
    for (std::size_t k = 0; k < m; ++k) {
      doubled[k] = static_cast<long>(std::llround(2.0 * rank[k]));
      total += doubled[k];
    }
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(total) + 1, 0);
    counts[0] = 1;
    for (std::size_t k = 0; k < m; ++k)
      for (long s = total; s >= doubled[k]; --s)
        counts[static_cast<std::size_t>(s)] +=
            counts[static_cast<std::size_t>(s - doubled[k])];
    const long w2 = static_cast<long>(std::llround(2.0 * w));
    std::uint64_t at_least = 0;
    for (long s = w2; s <= total; ++s) at_least += counts[static_cast<std::size_t>(s)];
    res.p = static_cast<double>(at_least) / std::pow(2.0, static_cast<double>(m));
    res.exact = true;
  } else {
    const double md = static_cast<double>(m);
    const double mean = md * (md + 1.0) / 4.0;
    double var = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0;
    for (std::size_t t : tie_sizes) {
      const double td = static_cast<double>(t);
      var -= (td * td * td - td) / 48.0;
    }
    if (var <= 0.0) throw validation_error("wilcoxon: degenerate variance");
    const double z = (w - mean - 0.5) / std::sqrt(var);
    res.p = 1.0 - normal_cdf(z);
    res.exact = false;
  }
  return res;
}

}  // namespace selfdoubt
