#include "nettomo/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "nettomo/errors.hpp"

namespace nettomo {

GammaPrior::GammaPrior(double shape_all, double rate_all)
    : shape(Vector::Constant(1, shape_all)), rate(Vector::Constant(1, rate_all)) {}

GammaPrior::GammaPrior(Vector shape_per_route, Vector rate_per_route)
    : shape(std::move(shape_per_route)), rate(std::move(rate_per_route)) {}

void GammaPrior::validate(Eigen::Index c) const {
  for (const Vector* v : {&shape, &rate}) {
    if (v->size() != 1 && v->size() != c) throw DimensionMismatch("prior must have length 1 or one entry per route");
    for (Eigen::Index j = 0; j < v->size(); ++j) {
      if (!((*v)(j) > 0.0) || !std::isfinite((*v)(j))) throw DomainError("prior shape and rate must be positive");
    }
  }
}

void ChainConfig::validate(Eigen::Index c) const {
  if (n_samples < 1) throw DomainError("ChainConfig: n_samples must be at least 1");
  if (burn_in < 0) throw DomainError("ChainConfig: burn_in must be nonnegative");
  if (thin < 1) throw DomainError("ChainConfig: thin must be at least 1");
  if (chains < 1) throw DomainError("ChainConfig: chains must be at least 1");
  if (mh_width < 1) throw DomainError("ChainConfig: mh_width must be at least 1");
  prior.validate(c);
}

RateVector sample_lambda(const CountMatrix& x, const GammaPrior& prior, Rng& rng) {
  const Eigen::Index c = x.cols();
  prior.validate(c);
  const auto k = static_cast<double>(x.rows());
  Vector out(c);
  for (Eigen::Index j = 0; j < c; ++j) {
    Count total = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (x(r, j) < 0) throw DomainError("route counts must be nonnegative");
      total += x(r, j);
    }
    double v = rng.gamma(prior.shape_at(j) + static_cast<double>(total), prior.rate_at(j) + k);
    // A gamma draw can underflow to zero for tiny shapes; rates must stay positive.
    if (!(v > 0.0)) v = std::numeric_limits<double>::min();
    out(j) = v;
  }
  return RateVector(std::move(out));
}

RateVector sample_lambda(const CountVector& x, const GammaPrior& prior, Rng& rng) {
  return sample_lambda(CountMatrix(x.transpose()), prior, rng);
}

namespace {

Count route_link_bound(const Partition& p, Eigen::Index col, const CountVector& y) {
  const auto& a = p.routing().entries();
  Count hi = std::numeric_limits<Count>::max();
  for (Eigen::Index l = 0; l < a.rows(); ++l) {
    if (a(l, col) != 0) hi = std::min(hi, y(l));
  }
  return hi;
}

// X1 with free coordinate i set to zero.
Vector base_without(Eigen::Index i, const CountVector& x2, const CountVector& y, const Partition& p) {
  CountVector rest = x2;
  rest(i) = 0;
  return solve_x1(p, y, rest);
}

double log_poisson_kernel(Count x, double theta) {
  return static_cast<double>(x) * theta - std::lgamma(static_cast<double>(x) + 1.0);
}

// Log full-conditional weight of x2(i) = t up to a constant, or -inf when
// the induced X1 is negative or non-integral.
double conditional_log_weight(Eigen::Index i, Count t, const Vector& base, const Partition& p, const Vector& theta) {
  const auto g = p.a1_inv_a2().col(i);
  double lw = log_poisson_kernel(t, theta(p.free_cols()[static_cast<std::size_t>(i)]));
  for (Eigen::Index a = 0; a < base.size(); ++a) {
    const double v = base(a) - static_cast<double>(t) * g(a);
    if (!is_nonneg_integral(v)) return -std::numeric_limits<double>::infinity();
    lw += log_poisson_kernel(static_cast<Count>(std::llround(v)), theta(p.pivot_cols()[static_cast<std::size_t>(a)]));
  }
  return lw;
}

void check_free_index(Eigen::Index i, const CountVector& x2, const CountVector& y, const Partition& p) {
  if (i < 0 || i >= p.free_count()) throw DomainError("free coordinate index out of range");
  if (x2.size() != p.free_count()) throw DimensionMismatch("free coordinate vector has wrong length");
  if (y.size() != p.rows()) throw DimensionMismatch("link vector has wrong length");
}

}  // namespace

SupportInterval support_bounds(Eigen::Index i, const CountVector& x2, const CountVector& y, const Partition& p) {
  check_free_index(i, x2, y, p);
  const Vector base = base_without(i, x2, y, p);
  const auto g = p.a1_inv_a2().col(i);
  SupportInterval s{0, route_link_bound(p, p.free_cols()[static_cast<std::size_t>(i)], y)};
  for (Eigen::Index a = 0; a < base.size(); ++a) {
    const double coef = g(a);
    if (coef > kIntegralityTol) {
      s.hi = std::min(s.hi, static_cast<Count>(std::floor(base(a) / coef + kIntegralityTol)));
    } else if (coef < -kIntegralityTol) {
      s.lo = std::max(s.lo, static_cast<Count>(std::ceil(base(a) / coef - kIntegralityTol)));
    } else if (base(a) < -kIntegralityTol) {
      return SupportInterval{};
    }
  }
  return s;
}

Count sample_x2_coordinate(Eigen::Index i, const CountVector& x2, const CountVector& y, const Partition& p,
                           const RateVector& lambda, Rng& rng) {
  const SupportInterval s = support_bounds(i, x2, y, p);
  if (s.empty()) throw InfeasibleState("free coordinate " + std::to_string(i) + " has an empty support");
  if (s.lo == s.hi) return s.lo;
  const Vector base = base_without(i, x2, y, p);
  const Vector theta = lambda.values().array().log();
  std::vector<double> lw(static_cast<std::size_t>(s.hi - s.lo + 1));
  bool any = false;
  for (Count t = s.lo; t <= s.hi; ++t) {
    const double v = conditional_log_weight(i, t, base, p, theta);
    lw[static_cast<std::size_t>(t - s.lo)] = v;
    any = any || std::isfinite(v);
  }
  if (!any) throw InfeasibleState("free coordinate " + std::to_string(i) + " has no integral candidate");
  return s.lo + static_cast<Count>(sample_log_weights(lw, rng));
}

MhStep sample_x2_coordinate_mh(Eigen::Index i, const CountVector& x2, const CountVector& y, const Partition& p,
                               const RateVector& lambda, int width, Rng& rng) {
  check_free_index(i, x2, y, p);
  if (width < 1) throw DomainError("proposal width must be at least 1");
  const Vector base = base_without(i, x2, y, p);
  const Vector theta = lambda.values().array().log();
  const Count current = x2(i);
  const double lw_current = conditional_log_weight(i, current, base, p, theta);
  if (!std::isfinite(lw_current)) throw InfeasibleState("current chain state is infeasible");
  const Count proposal = current + rng.uniform_int(-width, width);
  if (proposal < 0) return {current, false};
  const double lw = conditional_log_weight(i, proposal, base, p, theta);
  if (!std::isfinite(lw)) return {current, false};
  if (lw >= lw_current || std::log(rng.uniform()) < lw - lw_current) return {proposal, true};
  return {current, false};
}

namespace {

class RandomDescent {
 public:
  RandomDescent(const Partition& p, const CountVector& y, Rng& rng, std::uint64_t max_nodes)
      : p_(p), y_(y), rng_(rng), max_nodes_(max_nodes), x2_(CountVector::Zero(p.free_count())) {
    for (const Eigen::Index col : p.free_cols()) caps_.push_back(route_link_bound(p, col, y));
  }

  bool search() { return descend(0); }
  const CountVector& x2() const noexcept { return x2_; }
  std::uint64_t nodes() const noexcept { return nodes_; }

 private:
  bool descend(Eigen::Index depth) {
    if (++nodes_ > max_nodes_) {
      throw BudgetExceeded("no feasible starting point found within " + std::to_string(max_nodes_) + " search nodes",
                           nodes_, 0);
    }
    const Eigen::Index f = p_.free_count();
    if (depth == f) {
      const Vector x1 = solve_x1(p_, y_, x2_);
      return std::all_of(x1.begin(), x1.end(), [](double v) { return is_nonneg_integral(v); });
    }
    for (Eigen::Index k = depth; k < f; ++k) x2_(k) = 0;
    const Vector base = solve_x1(p_, y_, x2_);
    const Matrix& g = p_.a1_inv_a2();
    Count lo = 0;
    Count hi = caps_[static_cast<std::size_t>(depth)];
    for (Eigen::Index a = 0; a < base.size(); ++a) {
      double slack = base(a);
      for (Eigen::Index k = depth + 1; k < f; ++k) {
        if (g(a, k) < 0.0) slack -= g(a, k) * static_cast<double>(caps_[static_cast<std::size_t>(k)]);
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
    if (lo > hi) return false;
    std::vector<Count> values(static_cast<std::size_t>(hi - lo + 1));
    std::iota(values.begin(), values.end(), lo);
    for (std::size_t n = values.size(); n > 1; --n) {
      const auto j = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(n - 1)));
      std::swap(values[n - 1], values[j]);
    }
    for (const Count v : values) {
      x2_(depth) = v;
      if (descend(depth + 1)) return true;
    }
    x2_(depth) = 0;
    return false;
  }

  const Partition& p_;
  const CountVector& y_;
  Rng& rng_;
  std::uint64_t max_nodes_;
  std::uint64_t nodes_ = 0;
  CountVector x2_;
  std::vector<Count> caps_;
};

CountVector complete(const Partition& p, const CountVector& y, const CountVector& x2) {
  const Vector x1 = solve_x1(p, y, x2);
  CountVector x1c(x1.size());
  for (Eigen::Index a = 0; a < x1.size(); ++a) {
    if (!is_nonneg_integral(x1(a))) throw InfeasibleState("free coordinates do not yield a feasible route vector");
    x1c(a) = static_cast<Count>(std::llround(x1(a)));
  }
  return p.assemble(x1c, x2);
}

}  // namespace

ChainState initialize_state(const Partition& p, const CountMatrix& y, const GammaPrior& prior, Rng& rng,
                            std::uint64_t max_nodes) {
  if (y.cols() != p.rows()) throw DimensionMismatch("initialize_state: link counts have wrong column count");
  prior.validate(p.cols());
  ChainState st;
  st.x.resize(y.rows(), p.cols());
  for (Eigen::Index k = 0; k < y.rows(); ++k) {
    const CountVector yk = y.row(k).transpose();
    for (Eigen::Index l = 0; l < yk.size(); ++l) {
      if (yk(l) < 0) throw DomainError("link counts must be nonnegative");
    }
    RandomDescent search(p, yk, rng, max_nodes);
    if (!search.search()) {
      throw InconsistentObservation("period " + std::to_string(k) +
                                    ": no nonnegative integer route vector reproduces the observed link counts");
    }
    st.x.row(k) = complete(p, yk, search.x2()).transpose();
  }
  st.lambda.resize(p.cols());
  for (Eigen::Index j = 0; j < p.cols(); ++j) st.lambda(j) = prior.shape_at(j) / prior.rate_at(j);
  return st;
}

nlohmann::json PosteriorSummary::to_json() const {
  nlohmann::json j;
  j["draws"] = draws;
  j["chains"] = chains;
  j["acceptance_rate"] = acceptance_rate;
  j["lambda"] = nlohmann::json::array();
  for (const auto& s : lambda) j["lambda"].push_back(s.to_json());
  j["x"] = nlohmann::json::array();
  for (const auto& s : x) j["x"].push_back(s.to_json());
  return j;
}

ChainResult run_chain(const RoutingMatrix& a, const CountMatrix& y, const ChainConfig& cfg) {
  a.validate_structure();
  cfg.validate(a.cols());
  if (y.rows() < 1) throw DomainError("run_chain: need at least one period");
  if (y.cols() != a.rows()) throw DimensionMismatch("run_chain: link counts have wrong column count");
  const Partition p = partition(a);
  const Eigen::Index c = a.cols();
  const Eigen::Index periods = y.rows();
  const Eigen::Index f = p.free_count();
  const auto total = static_cast<std::size_t>(cfg.n_samples) * static_cast<std::size_t>(cfg.chains);

  ChainResult out;
  out.lambda_draws.resize(static_cast<Eigen::Index>(total), c);
  out.x_draws.resize(static_cast<Eigen::Index>(total), periods * c);
  out.chain_of.reserve(total);

  Rng master(cfg.seed);
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  Eigen::Index row = 0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(f));

  for (int chain = 0; chain < cfg.chains; ++chain) {
    Rng rng = master.split();
    ChainState st = initialize_state(p, y, cfg.prior, rng);
    std::vector<CountVector> x2(static_cast<std::size_t>(periods));
    for (Eigen::Index k = 0; k < periods; ++k) x2[static_cast<std::size_t>(k)] = p.free_part(st.x.row(k).transpose());

    const long iterations = static_cast<long>(cfg.burn_in) + static_cast<long>(cfg.n_samples) * cfg.thin;
    for (long it = 0; it < iterations; ++it) {
      const RateVector lambda = sample_lambda(st.x, cfg.prior, rng);
      st.lambda = lambda.values();
      for (Eigen::Index k = 0; k < periods; ++k) {
        const CountVector yk = y.row(k).transpose();
        CountVector& z = x2[static_cast<std::size_t>(k)];
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        if (cfg.scan == ScanOrder::random) {
          for (std::size_t n = order.size(); n > 1; --n) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n - 1)));
            std::swap(order[n - 1], order[j]);
          }
        }
        for (const Eigen::Index i : order) {
          ++proposals;
          if (cfg.mh_fallback) {
            const MhStep step = sample_x2_coordinate_mh(i, z, yk, p, lambda, cfg.mh_width, rng);
            z(i) = step.value;
            accepted += step.accepted ? 1 : 0;
          } else {
            z(i) = sample_x2_coordinate(i, z, yk, p, lambda, rng);
            ++accepted;
          }
        }
        const CountVector xk = complete(p, yk, z);
        if (a.apply(xk) != yk) throw InfeasibleState("chain state violates A X = Y");
        st.x.row(k) = xk.transpose();
      }
      if (it < cfg.burn_in || (it - cfg.burn_in) % cfg.thin != cfg.thin - 1) continue;
      out.lambda_draws.row(row) = st.lambda.transpose();
      for (Eigen::Index k = 0; k < periods; ++k) out.x_draws.block(row, k * c, 1, c) = st.x.row(k);
      out.chain_of.push_back(chain);
      ++row;
    }
  }

  auto column_chains = [&](auto column) {
    std::vector<std::vector<double>> chains(static_cast<std::size_t>(cfg.chains));
    for (Eigen::Index r = 0; r < row; ++r) chains[static_cast<std::size_t>(out.chain_of[static_cast<std::size_t>(r)])].push_back(column(r));
    return chains;
  };
  PosteriorSummary& s = out.summary;
  s.draws = static_cast<int>(row);
  s.chains = cfg.chains;
  s.acceptance_rate = proposals > 0 ? static_cast<double>(accepted) / static_cast<double>(proposals) : 1.0;
  for (Eigen::Index j = 0; j < c; ++j) {
    s.lambda.push_back(summarize_chains(column_chains([&](Eigen::Index r) { return out.lambda_draws(r, j); })));
  }
  for (Eigen::Index j = 0; j < periods * c; ++j) {
    s.x.push_back(summarize_chains(
        column_chains([&](Eigen::Index r) { return static_cast<double>(out.x_draws(r, j)); })));
  }
  return out;
}

void write_draws_csv(std::ostream& out, const ChainResult& result) {
  const auto old_precision = out.precision(17);
  out << "draw,coord_kind,index,value\n";
  for (Eigen::Index r = 0; r < result.lambda_draws.rows(); ++r) {
    for (Eigen::Index j = 0; j < result.lambda_draws.cols(); ++j) {
      out << r << ",lambda," << j << ',' << result.lambda_draws(r, j) << '\n';
    }
    for (Eigen::Index j = 0; j < result.x_draws.cols(); ++j) {
      out << r << ",x," << j << ',' << result.x_draws(r, j) << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace nettomo
