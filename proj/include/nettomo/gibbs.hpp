#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <nlohmann/json.hpp>

#include "nettomo/rng.hpp"
#include "nettomo/simulator.hpp"
#include "nettomo/summary.hpp"
#include "nettomo/topology.hpp"
#include "nettomo/types.hpp"

namespace nettomo {

// Independent Gamma(shape_j, rate_j) priors on the route rates. A length-1
// vector broadcasts to every route.
struct GammaPrior {
  Vector shape = Vector::Constant(1, 1.0);
  Vector rate = Vector::Constant(1, 0.01);

  GammaPrior() = default;
  GammaPrior(double shape_all, double rate_all);
  GammaPrior(Vector shape_per_route, Vector rate_per_route);

  double shape_at(Eigen::Index j) const { return shape.size() == 1 ? shape(0) : shape(j); }
  double rate_at(Eigen::Index j) const { return rate.size() == 1 ? rate(0) : rate(j); }
  // Throws on nonpositive entries or a length that is neither 1 nor c.
  void validate(Eigen::Index c) const;
};

struct ChainState {
  CountMatrix x;  // one row per period, A x(k) = Y(k)
  Vector lambda;
};

enum class ScanOrder { ascending, random };

struct ChainConfig {
  int n_samples = 1000;
  int burn_in = 500;
  int thin = 1;
  std::uint64_t seed = 0;
  GammaPrior prior;
  ScanOrder scan = ScanOrder::ascending;
  bool mh_fallback = false;  // random-walk Metropolis-Hastings instead of exact enumeration
  int mh_width = 3;
  int chains = 1;

  void validate(Eigen::Index c) const;
};

struct SupportInterval {
  Count lo = 0;
  Count hi = -1;

  bool empty() const noexcept { return lo > hi; }
};

// lambda_j ~ Gamma(shape_j + sum_k x(k, j), rate_j + K), independently.
RateVector sample_lambda(const CountMatrix& x, const GammaPrior& prior, Rng& rng);
RateVector sample_lambda(const CountVector& x, const GammaPrior& prior, Rng& rng);

/// Largest integer interval for free coordinate i (position in
/// Partition::free_cols) on which X1 = A1^{-1}(Y - A2 X2) stays nonnegative,
/// with the other free coordinates held at their values in `x2`. The entry
/// x2(i) is ignored. Integrality of X1 is not part of the interval.
SupportInterval support_bounds(Eigen::Index i, const CountVector& x2, const CountVector& y, const Partition& p);

/// Exact draw of free coordinate i from its full conditional: every candidate
/// in the support is weighted by its own Poisson term times those of the
/// induced X1, candidates with non-integral X1 are skipped.
/// Throws InfeasibleState when no candidate survives.
Count sample_x2_coordinate(Eigen::Index i, const CountVector& x2, const CountVector& y, const Partition& p,
                           const RateVector& lambda, Rng& rng);

struct MhStep {
  Count value = 0;
  bool accepted = false;
};

// Metropolis-Hastings update with a uniform proposal on x2(i) +- width.
MhStep sample_x2_coordinate_mh(Eigen::Index i, const CountVector& x2, const CountVector& y, const Partition& p,
                               const RateVector& lambda, int width, Rng& rng);

/// A feasible starting point for every period, found by depth-first search
/// over the free coordinates with each level's candidates visited in random
/// order. Rates start at the prior mean.
/// Throws InconsistentObservation when a period has no feasible X.
ChainState initialize_state(const Partition& p, const CountMatrix& y, const GammaPrior& prior, Rng& rng,
                            std::uint64_t max_nodes = 10'000'000);

struct PosteriorSummary {
  std::vector<CoordinateSummary> lambda;
  std::vector<CoordinateSummary> x;  // period-major: index k * c + j
  double acceptance_rate = 1.0;      // share of accepted X2 moves
  int draws = 0;
  int chains = 0;

  nlohmann::json to_json() const;
};

struct ChainResult {
  PosteriorSummary summary;
  Matrix lambda_draws;       // one retained draw per row, chains concatenated
  CountMatrix x_draws;       // one retained draw per row, period-major columns
  std::vector<int> chain_of; // chain index of each row
};

/// Gibbs sampler over (X, lambda) given the link counts of every period:
/// each iteration draws lambda given X, then sweeps the free coordinates of
/// every period given lambda. Chains use independent streams split from
/// `seed`. Every retained X satisfies A X = Y exactly.
ChainResult run_chain(const RoutingMatrix& a, const CountMatrix& y, const ChainConfig& cfg);

// `draw,coord_kind,index,value` with coord_kind lambda or x.
void write_draws_csv(std::ostream& out, const ChainResult& result);

}  // namespace nettomo
