#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

namespace nettomo {

// w monitored addresses out of an address space of N; spoofed source
// addresses are uniform over all N.
struct MonitorConfig {
  std::uint64_t w = 1;
  std::uint64_t address_space = std::uint64_t{1} << 32;

  // N = 2^bits, bits in [1, 63].
  static MonitorConfig with_address_bits(std::uint64_t w, int bits);
  // Throws DomainError unless 1 <= w <= N.
  void validate() const;
  double fraction() const;  // w / N
};

// 1 - (1 - w/N)^d.
double detection_probability(const MonitorConfig& m, std::uint64_t d);

// w d / N.
double expected_observed(const MonitorConfig& m, std::uint64_t d);

/// Binomial(d, w/N) mass at j, by the saddle-point expansion with
/// deviance terms so that the relative error stays near machine precision
/// for large d. Throws DomainError when j > d.
double observed_count_pmf(const MonitorConfig& m, std::uint64_t d, std::uint64_t j);
double observed_count_logpmf(const MonitorConfig& m, std::uint64_t d, std::uint64_t j);

// floor(j N / w) in 128-bit integer arithmetic. Throws DomainError when the
// result does not fit in 64 bits.
std::uint64_t attack_size_mle(const MonitorConfig& m, std::uint64_t j);

struct GapReport {
  double gap_truncated_as_printed = 0.0;  // sum_{s=1}^{w} s (1-p)^{s-1} p with p = w/N
  double gap_geometric = 0.0;             // N / w, the untruncated mean

  nlohmann::json to_json() const;
};

GapReport expected_gap(const MonitorConfig& m);

// All five quantities for one (w, N, d, j) query.
nlohmann::json detection_report(const MonitorConfig& m, std::uint64_t d, std::uint64_t j);

}  // namespace nettomo
