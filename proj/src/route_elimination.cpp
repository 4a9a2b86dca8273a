#include "route_elimination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nettomo/errors.hpp"

namespace nettomo::detail {

namespace {

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return b > std::numeric_limits<std::uint64_t>::max() - a ? std::numeric_limits<std::uint64_t>::max() : a + b;
}

// Per-state view of one route step over a concrete Y.
struct Transition {
  std::vector<Count> radix;         // y + 1 for each link open before the step
  std::vector<std::size_t> carry;   // output stride of that link, 0 if it closes
  std::vector<char> on_route;
  std::vector<char> closes;
  std::size_t in_size = 1;
  std::size_t out_size = 1;
  std::size_t delta = 0;            // output index change per unit of the route count
  Count fresh_cap = 0;              // bound from route links that were not open before
  Count fresh_fixed = -1;           // forced route count from such links that also close
  bool fresh_conflict = false;

  // visit(in_index, out_base, lo, hi): the route count ranges over [lo, hi]
  // and lands at out_base + x * delta.
  template <class Visit>
  void for_each(Visit&& visit) const {
    if (fresh_conflict) return;
    std::vector<Count> u(radix.size(), 0);
    for (std::size_t i = 0; i < in_size; ++i) {
      std::size_t base = 0;
      Count hi = fresh_cap;
      Count fixed = fresh_fixed;
      bool ok = true;
      for (std::size_t k = 0; k < radix.size(); ++k) {
        base += static_cast<std::size_t>(u[k]) * carry[k];
        if (!on_route[k]) continue;
        const Count room = radix[k] - 1 - u[k];
        hi = std::min(hi, room);
        if (closes[k]) {
          if (fixed >= 0 && fixed != room) ok = false;
          fixed = room;
        }
      }
      if (ok) {
        if (fixed >= 0) {
          if (fixed <= hi) visit(i, base, fixed, fixed);
        } else {
          visit(i, base, Count{0}, hi);
        }
      }
      for (std::size_t k = 0; k < radix.size(); ++k) {
        if (++u[k] < radix[k]) break;
        u[k] = 0;
      }
    }
  }
};

}  // namespace

RouteElimination::RouteElimination(const RoutingMatrix& a) : links_(a.rows()) {
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  std::vector<std::vector<Eigen::Index>> on(static_cast<std::size_t>(c));
  std::vector<int> remaining(static_cast<std::size_t>(r), 0);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) {
      if (a(i, j) != 0) {
        on[static_cast<std::size_t>(j)].push_back(i);
        ++remaining[static_cast<std::size_t>(i)];
      }
    }
    if (on[static_cast<std::size_t>(j)].empty()) throw InvalidTopology("route " + std::to_string(j) + " uses no link");
  }

  for (Eigen::Index i = 0; i < r; ++i) {
    if (remaining[static_cast<std::size_t>(i)] == 0) unused_.push_back(i);
  }
  std::vector<char> open(static_cast<std::size_t>(r), 0);
  std::vector<char> done(static_cast<std::size_t>(c), 0);
  for (Eigen::Index step = 0; step < c; ++step) {
    Eigen::Index best = -1;
    std::size_t best_open = 0;
    for (Eigen::Index j = 0; j < c; ++j) {
      if (done[static_cast<std::size_t>(j)]) continue;
      std::vector<char> next = open;
      for (const Eigen::Index l : on[static_cast<std::size_t>(j)]) {
        next[static_cast<std::size_t>(l)] = remaining[static_cast<std::size_t>(l)] > 1;
      }
      const auto count = static_cast<std::size_t>(std::count(next.begin(), next.end(), char{1}));
      if (best < 0 || count < best_open) {
        best = j;
        best_open = count;
      }
    }
    Step s;
    s.route = best;
    s.route_links = on[static_cast<std::size_t>(best)];
    for (Eigen::Index l = 0; l < r; ++l) {
      if (open[static_cast<std::size_t>(l)]) s.before.push_back(l);
    }
    for (const Eigen::Index l : s.route_links) {
      const auto lu = static_cast<std::size_t>(l);
      if (--remaining[lu] == 0) {
        open[lu] = 0;
        s.closing.push_back(l);
      } else {
        open[lu] = 1;
      }
    }
    for (Eigen::Index l = 0; l < r; ++l) {
      if (open[static_cast<std::size_t>(l)]) s.after.push_back(l);
    }
    done[static_cast<std::size_t>(best)] = 1;
    order_.push_back(best);
    steps_.push_back(std::move(s));
  }
}

namespace {

Transition make_transition(const std::vector<Eigen::Index>& before, const std::vector<Eigen::Index>& after,
                           const std::vector<Eigen::Index>& route_links, const std::vector<Eigen::Index>& closing,
                           const CountVector& y) {
  auto contains = [](const std::vector<Eigen::Index>& v, Eigen::Index x) {
    return std::binary_search(v.begin(), v.end(), x);
  };
  std::vector<Eigen::Index> sorted_route = route_links;
  std::sort(sorted_route.begin(), sorted_route.end());
  std::vector<Eigen::Index> sorted_closing = closing;
  std::sort(sorted_closing.begin(), sorted_closing.end());

  Transition t;
  std::vector<std::size_t> out_stride(after.size());
  for (std::size_t k = 0; k < after.size(); ++k) {
    out_stride[k] = t.out_size;
    t.out_size *= static_cast<std::size_t>(y(after[k]) + 1);
  }
  auto stride_of = [&](Eigen::Index l) -> std::size_t {
    const auto it = std::lower_bound(after.begin(), after.end(), l);
    return it != after.end() && *it == l ? out_stride[static_cast<std::size_t>(it - after.begin())] : 0;
  };
  for (const Eigen::Index l : before) {
    t.radix.push_back(y(l) + 1);
    t.carry.push_back(stride_of(l));
    t.on_route.push_back(contains(sorted_route, l));
    t.closes.push_back(contains(sorted_closing, l));
    t.in_size *= static_cast<std::size_t>(y(l) + 1);
  }
  t.fresh_cap = std::numeric_limits<Count>::max();
  for (const Eigen::Index l : sorted_route) {
    t.delta += stride_of(l);
    if (contains(before, l)) continue;
    t.fresh_cap = std::min(t.fresh_cap, y(l));
    if (contains(sorted_closing, l)) {
      if (t.fresh_fixed >= 0 && t.fresh_fixed != y(l)) t.fresh_conflict = true;
      t.fresh_fixed = y(l);
    }
  }
  return t;
}

double normalize(std::vector<double>& v) {
  const double top = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  if (!(top > 0.0)) return 0.0;
  for (double& x : v) x /= top;
  return top;
}

}  // namespace

std::uint64_t RouteElimination::work(const CountVector& y) const {
  std::uint64_t total = 0;
  for (const Step& s : steps_) {
    std::uint64_t states = 1;
    for (const Eigen::Index l : s.before) states = saturating_mul(states, static_cast<std::uint64_t>(y(l) + 1));
    Count cap = std::numeric_limits<Count>::max();
    for (const Eigen::Index l : s.route_links) cap = std::min(cap, y(l));
    total = saturating_add(total, saturating_mul(states, static_cast<std::uint64_t>(cap + 1)));
  }
  return saturating_mul(total, 2);
}

EliminationResult RouteElimination::run(const CountVector& y, const Vector& lambda, const Vector& theta,
                                        const std::vector<double>& lf) const {
  EliminationResult out;
  out.mean = Vector::Zero(static_cast<Eigen::Index>(steps_.size()));
  for (Eigen::Index l = 0; l < links_; ++l) {
    if (y(l) < 0) return out;
  }
  for (const Eigen::Index l : unused_) {
    if (y(l) != 0) return out;
  }
  const std::size_t n = steps_.size();

  std::vector<Transition> trans;
  std::vector<std::vector<double>> weights(n);
  double log_weight_scale = 0.0;
  trans.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const Step& st = steps_[s];
    trans.push_back(make_transition(st.before, st.after, st.route_links, st.closing, y));
    Count cap = std::numeric_limits<Count>::max();
    for (const Eigen::Index l : st.route_links) cap = std::min(cap, y(l));
    auto& w = weights[s];
    w.resize(static_cast<std::size_t>(cap) + 1);
    double top = -std::numeric_limits<double>::infinity();
    for (Count x = 0; x <= cap; ++x) {
      const double lw = static_cast<double>(x) * theta(st.route) - lf[static_cast<std::size_t>(x)];
      w[static_cast<std::size_t>(x)] = lw;
      top = std::max(top, lw);
    }
    for (double& v : w) v = std::exp(v - top);
    log_weight_scale += top;
  }

  std::vector<std::vector<double>> fwd(n + 1);
  fwd[0].assign(1, 1.0);
  double log_scale = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const Transition& t = trans[s];
    const auto& w = weights[s];
    const auto& in = fwd[s];
    auto& next = fwd[s + 1];
    next.assign(t.out_size, 0.0);
    t.for_each([&](std::size_t i, std::size_t base, Count lo, Count hi) {
      const double f = in[i];
      if (f == 0.0) return;
      std::size_t idx = base + static_cast<std::size_t>(lo) * t.delta;
      for (Count x = lo; x <= hi; ++x, idx += t.delta) next[idx] += f * w[static_cast<std::size_t>(x)];
    });
    const double top = normalize(next);
    if (!(top > 0.0)) return out;
    log_scale += std::log(top);
  }

  std::vector<double> back(1, 1.0);
  std::vector<double> prev;
  for (std::size_t s = n; s-- > 0;) {
    const Transition& t = trans[s];
    const auto& w = weights[s];
    const auto& f = fwd[s];
    prev.assign(t.in_size, 0.0);
    double num = 0.0;
    double den = 0.0;
    t.for_each([&](std::size_t i, std::size_t base, Count lo, Count hi) {
      double s0 = 0.0;
      double s1 = 0.0;
      std::size_t idx = base + static_cast<std::size_t>(lo) * t.delta;
      for (Count x = lo; x <= hi; ++x, idx += t.delta) {
        const double v = w[static_cast<std::size_t>(x)] * back[idx];
        s0 += v;
        s1 += v * static_cast<double>(x);
      }
      prev[i] = s0;
      num += f[i] * s1;
      den += f[i] * s0;
    });
    if (!(den > 0.0)) return out;
    out.mean(steps_[s].route) = num / den;
    normalize(prev);
    back.swap(prev);
  }

  out.feasible = true;
  out.log_likelihood = log_scale + std::log(fwd[n][0]) + log_weight_scale - lambda.sum();
  return out;
}

}  // namespace nettomo::detail
