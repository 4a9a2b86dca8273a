#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace nettomo {

struct CoordinateSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
  double ess = 0.0;

  nlohmann::json to_json() const;
};

// Linear interpolation between order statistics (Hyndman-Fan type 7).
// `sorted` must be ascending and nonempty; p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

/// Effective sample size of one chain by Geyer's initial monotone sequence:
/// autocorrelations are summed in adjacent pairs until a pair turns
/// nonpositive, with each pair clipped to the previous one.
/// A constant chain has ESS equal to its length.
double effective_sample_size(std::span<const double> chain);

// Pools the chains for moments and quantiles; ESS is the sum over chains.
CoordinateSummary summarize_chains(const std::vector<std::vector<double>>& chains);

}  // namespace nettomo
