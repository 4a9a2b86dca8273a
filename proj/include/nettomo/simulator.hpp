#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "nettomo/topology.hpp"
#include "nettomo/types.hpp"

namespace nettomo {

// Poisson intensities per SD pair, packets per measurement period. Strictly
// positive.
class RateVector {
 public:
  explicit RateVector(Vector rates);
  static RateVector constant(Eigen::Index c, double rate);

  const Vector& values() const noexcept { return rates_; }
  Eigen::Index size() const noexcept { return rates_.size(); }
  double operator[](Eigen::Index j) const { return rates_(j); }

 private:
  Vector rates_;
};

struct TrafficSample {
  CountMatrix x;  // K x c hidden route counts (may be empty when only links were observed)
  CountMatrix y;  // K x r link counts
  std::uint64_t seed = 0;

  Eigen::Index periods() const noexcept { return std::max(x.rows(), y.rows()); }
};

// K independent Poisson(lambda_j) draws per route. `y` is left empty.
TrafficSample sample_sd_traffic(const RateVector& lambda, Eigen::Index k_periods, std::uint64_t seed);

// Row-wise y(k) = A x(k).
CountMatrix link_counts(const RoutingMatrix& a, const CountMatrix& x);

struct EnumerationStats {
  std::uint64_t nodes_visited = 0;
};

/// Every X >= 0 integral with A X = Y, one per row, in lexicographic order.
///
/// Depth-first search over the free coordinates in ascending column order.
/// Each free coordinate is capped by the smallest remaining link count on its
/// route; X1 is solved at the leaves and accepted when nonnegative and
/// integral. Throws BudgetExceeded past cap^(c - r) search nodes.
CountMatrix enumerate_feasible(const Partition& p, const CountVector& y, std::int64_t cap,
                               EnumerationStats* stats = nullptr);

// Node budget implied by `cap`, saturating at UINT64_MAX.
std::uint64_t enumeration_budget(std::int64_t cap, Eigen::Index free_count);

// True when v is within the integrality tolerance of a nonnegative integer.
bool is_nonneg_integral(double v);

// CSV with header `period,kind,index,count`; kind is "x" or "y".
void write_sample_csv(std::ostream& out, const TrafficSample& s);
TrafficSample read_sample_csv(std::istream& in);

}  // namespace nettomo
