#pragma once

// Internal: bounded depth-first walk over the free coordinates of a
// partitioned routing matrix. Shared by feasible-set enumeration and the
// exact E-step, which differ only in what they do with each innermost line.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nettomo/errors.hpp"
#include "nettomo/topology.hpp"
#include "nettomo/types.hpp"

namespace nettomo::detail {

class FeasibleWalk {
 public:
  FeasibleWalk(const Partition& p, const CountVector& y, std::uint64_t budget)
      : p_(p),
        budget_(budget),
        residual_(y),
        base_(p.a1_inv() * y.cast<double>()),
        x2_(CountVector::Zero(p.free_count())),
        bounds_(Vector::Zero(p.free_count())) {
    if (y.size() != p.rows()) throw DimensionMismatch("link vector has wrong length");
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y(i) < 0) throw DomainError("link counts must be nonnegative");
    }
    const auto& a = p.routing().entries();
    for (const Eigen::Index col : p.free_cols()) {
      std::vector<Eigen::Index> on;
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (a(i, col) != 0) on.push_back(i);
      }
      if (on.empty()) throw InvalidTopology("route " + std::to_string(col) + " uses no link");
      route_links_.push_back(std::move(on));
    }
  }

  // visit(base, x2, lo, hi) is called once per innermost line. All free
  // coordinates except the last are fixed in x2; along the line the last one
  // runs over [lo, hi] and X1(t) = base - t * a1_inv_a2.col(last). With no
  // free coordinates, visit is called once with lo = hi = 0.
  template <class Visitor>
  void run(Visitor&& visit) {
    if (p_.free_count() == 0) {
      charge(1);
      visit(base_, x2_, Count{0}, Count{0});
      return;
    }
    descend(0, visit);
  }

  std::uint64_t nodes() const noexcept { return nodes_; }
  std::size_t solutions() const noexcept { return solutions_; }
  void add_solutions(std::size_t n) noexcept { solutions_ += n; }

 private:
  void charge(std::uint64_t n) {
    nodes_ += n;
    if (nodes_ > budget_) {
      throw BudgetExceeded("feasible-set search budget of " + std::to_string(budget_) + " nodes exhausted after " +
                               std::to_string(solutions_) + " solutions",
                           nodes_, solutions_);
    }
  }

  Count link_bound(Eigen::Index k) const {
    Count hi = std::numeric_limits<Count>::max();
    for (const Eigen::Index l : route_links_[static_cast<std::size_t>(k)]) hi = std::min(hi, residual_(l));
    return hi;
  }

  // Range of coordinate `depth` that can still reach X1 >= 0, given the
  // coordinates already fixed and the link bounds of the ones after it.
  bool interval(Eigen::Index depth, Count& lo, Count& hi) {
    const Matrix& g = p_.a1_inv_a2();
    const Eigen::Index f = p_.free_count();
    for (Eigen::Index k = depth + 1; k < f; ++k) bounds_(k) = static_cast<double>(link_bound(k));
    lo = 0;
    hi = link_bound(depth);
    for (Eigen::Index a = 0; a < g.rows(); ++a) {
      double slack = base_(a);
      for (Eigen::Index k = depth + 1; k < f; ++k) {
        if (g(a, k) < 0.0) slack -= g(a, k) * bounds_(k);
      }
      const double coef = g(a, depth);
      if (coef > kIntegralityTol) {
        hi = std::min(hi, static_cast<Count>(std::floor(slack / coef + kIntegralityTol)));
      } else if (coef < -kIntegralityTol) {
        lo = std::max(lo, static_cast<Count>(std::ceil(slack / coef - kIntegralityTol)));
      } else if (slack < -kIntegralityTol) {
        return false;
      }
    }
    return lo <= hi;
  }

  template <class Visitor>
  void descend(Eigen::Index depth, Visitor& visit) {
    Count lo = 0;
    Count hi = 0;
    if (!interval(depth, lo, hi)) return;
    if (depth + 1 == p_.free_count()) {
      charge(static_cast<std::uint64_t>(hi - lo + 1));
      x2_(depth) = 0;
      visit(base_, x2_, lo, hi);
      return;
    }
    const auto& on = route_links_[static_cast<std::size_t>(depth)];
    const auto gcol = p_.a1_inv_a2().col(depth);
    for (const Eigen::Index l : on) residual_(l) -= lo;
    base_ -= static_cast<double>(lo) * gcol;
    for (Count v = lo; v <= hi; ++v) {
      charge(1);
      x2_(depth) = v;
      descend(depth + 1, visit);
      for (const Eigen::Index l : on) residual_(l) -= 1;
      base_ -= gcol;
    }
    for (const Eigen::Index l : on) residual_(l) += hi + 1;
    x2_(depth) = 0;
    // Recomputed rather than added back so rounding cannot drift.
    base_ = p_.a1_inv() * residual_.cast<double>();
  }

  const Partition& p_;
  std::uint64_t budget_;
  std::uint64_t nodes_ = 0;
  std::size_t solutions_ = 0;
  CountVector residual_;
  Vector base_;
  CountVector x2_;
  Vector bounds_;
  std::vector<std::vector<Eigen::Index>> route_links_;
};

}  // namespace nettomo::detail
