#pragma once

// Internal: exact summation over {X >= 0 integral : AX = Y} by eliminating
// routes one at a time. The state after each route is the traffic already
// placed on the links that are still open, so the cost grows with the number
// of simultaneously open links instead of with the size of the feasible set.

#include <cstdint>
#include <vector>

#include "nettomo/topology.hpp"
#include "nettomo/types.hpp"

namespace nettomo::detail {

struct EliminationResult {
  Vector mean;
  double log_likelihood = 0.0;
  bool feasible = false;
};

class RouteElimination {
 public:
  explicit RouteElimination(const RoutingMatrix& a);

  // Number of table updates a run on `y` performs, saturating.
  std::uint64_t work(const CountVector& y) const;

  // `theta` holds log(lambda); `lf` must cover log(n!) up to max(y).
  EliminationResult run(const CountVector& y, const Vector& lambda, const Vector& theta,
                        const std::vector<double>& lf) const;

  const std::vector<Eigen::Index>& order() const noexcept { return order_; }

 private:
  struct Step {
    Eigen::Index route = 0;
    std::vector<Eigen::Index> route_links;
    std::vector<Eigen::Index> before;  // open links before this route, ascending
    std::vector<Eigen::Index> after;   // open links after it, ascending
    std::vector<Eigen::Index> closing; // links whose last route this is
  };

  Eigen::Index links_ = 0;
  std::vector<Eigen::Index> unused_;  // links no route crosses
  std::vector<Eigen::Index> order_;
  std::vector<Step> steps_;
};

}  // namespace nettomo::detail
