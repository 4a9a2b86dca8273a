#include "nettomo/summary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nettomo/errors.hpp"

namespace nettomo {

nlohmann::json CoordinateSummary::to_json() const {
  return {{"mean", mean}, {"sd", sd}, {"q05", q05}, {"q50", q50}, {"q95", q95}, {"ess", ess}};
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (const double v : chain) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = chain[i] - mean;

  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += d[i] * d[i + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);

  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    double pair = (autocov(lag) + autocov(lag + 1)) / c0;
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev_pair);
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

CoordinateSummary summarize_chains(const std::vector<std::vector<double>>& chains) {
  std::vector<double> pooled;
  CoordinateSummary s;
  for (const auto& c : chains) {
    pooled.insert(pooled.end(), c.begin(), c.end());
    s.ess += effective_sample_size(c);
  }
  if (pooled.empty()) throw DomainError("no draws to summarize");
  const auto n = static_cast<double>(pooled.size());
  for (const double v : pooled) s.mean += v;
  s.mean /= n;
  double ss = 0.0;
  for (const double v : pooled) ss += (v - s.mean) * (v - s.mean);
  s.sd = pooled.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(pooled.begin(), pooled.end());
  s.q05 = quantile_sorted(pooled, 0.05);
  s.q50 = quantile_sorted(pooled, 0.50);
  s.q95 = quantile_sorted(pooled, 0.95);
  return s;
}

}  // namespace nettomo
