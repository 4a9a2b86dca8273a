#include "nettomo/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "feasible_walk.hpp"
#include "route_elimination.hpp"
#include "nettomo/errors.hpp"
#include "nettomo/linalg.hpp"

namespace nettomo {

void EmConfig::validate() const {
  if (max_iters < 1) throw DomainError("EmConfig: max_iters must be at least 1");
  if (!(tol > 0.0)) throw DomainError("EmConfig: tol must be positive");
  if (!(floor > 0.0)) throw DomainError("EmConfig: floor must be positive");
  if (cap < 1) throw DomainError("EmConfig: cap must be at least 1");
}

void GaussianConfig::validate() const {
  if (max_iters < 1) throw DomainError("GaussianConfig: max_iters must be at least 1");
  if (!(tol > 0.0)) throw DomainError("GaussianConfig: tol must be positive");
  if (!(floor > 0.0)) throw DomainError("GaussianConfig: floor must be positive");
  if (!(armijo > 0.0 && armijo < 1.0)) throw DomainError("GaussianConfig: armijo factor must lie in (0, 1)");
}

nlohmann::json EstimateReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["lambda_hat"] = std::vector<double>(lambda_hat.data(), lambda_hat.data() + lambda_hat.size());
  j["iterations"] = iterations;
  j["converged"] = converged;
  if (objective) j["objective"] = *objective;
  if (residual) j["residual"] = *residual;
  return j;
}

Vector column_means(const CountMatrix& samples) {
  if (samples.rows() == 0) throw DomainError("need at least one period");
  return samples.cast<double>().colwise().mean().transpose();
}

namespace {

// log(n!) for n = 0..size-1.
std::vector<double> log_factorials(Count max_n) {
  std::vector<double> out(static_cast<std::size_t>(max_n) + 2);
  out[0] = 0.0;
  for (std::size_t n = 1; n < out.size(); ++n) out[n] = out[n - 1] + std::log(static_cast<double>(n));
  return out;
}

// Running sums of weight and weight * X kept relative to the largest log
// weight seen so far.
struct ScaledMoments {
  explicit ScaledMoments(Eigen::Index c) : first(Vector::Zero(c)) {}

  // Adds e^log_scale * (s0 * x + s1 * slope) to `first` and e^log_scale * s0
  // to `mass`.
  void add(double log_scale, double s0, double s1, const Vector& x, const Vector& slope) {
    if (!(s0 > 0.0)) return;
    const double magnitude = log_scale + std::log(s0);
    if (magnitude > top) {
      if (std::isfinite(top)) {
        const double shrink = std::exp(top - magnitude);
        mass *= shrink;
        first *= shrink;
      }
      top = magnitude;
    }
    const double w = std::exp(log_scale - top);
    mass += w * s0;
    first += w * (s0 * x + s1 * slope);
  }

  void add_point(double log_weight, const Vector& x) {
    if (!(log_weight > -std::numeric_limits<double>::infinity())) return;
    if (log_weight > top) {
      if (std::isfinite(top)) {
        const double shrink = std::exp(top - log_weight);
        mass *= shrink;
        first *= shrink;
      }
      top = log_weight;
    }
    const double w = std::exp(log_weight - top);
    mass += w;
    first += w * x;
  }

  double top = -std::numeric_limits<double>::infinity();
  double mass = 0.0;
  Vector first;
};

class ExactSummer {
 public:
  ExactSummer(const Partition& p, const Vector& lambda, const std::vector<double>& lf,
              const detail::RouteElimination* elim = nullptr)
      : p_(p), lambda_(lambda), theta_(lambda.array().log().matrix()), lf_(lf), elim_(elim) {
    const Eigen::Index f = p.free_count();
    const Eigen::Index c = p.cols();
    slope_ = Vector::Zero(c);
    x1_ = CountVector::Zero(p.rows());
    x_ = Vector::Zero(c);
    unit_steps_ = f > 0;
    if (f > 0) {
      const auto g = p.a1_inv_a2().col(f - 1);
      slope_(p.free_cols().back()) = 1.0;
      for (Eigen::Index a = 0; a < g.size(); ++a) {
        const double step = g(a);
        slope_(p.pivot_cols()[static_cast<std::size_t>(a)]) = -step;
        if (std::abs(step) <= kIntegralityTol) continue;
        if (std::abs(step - 1.0) <= kIntegralityTol) down_.push_back(a);
        else if (std::abs(step + 1.0) <= kIntegralityTol) up_.push_back(a);
        else unit_steps_ = false;
      }
    }
  }

  ExactEStep run(const CountVector& y, std::uint64_t budget) {
    if (elim_ != nullptr && p_.free_count() > 0) {
      const std::uint64_t work = elim_->work(y);
      if (work <= budget && work <= walk_estimate(y)) {
        const auto e = elim_->run(y, lambda_, theta_, lf_);
        if (!e.feasible) {
          throw InconsistentObservation("no nonnegative integer route vector reproduces the observed link counts");
        }
        return ExactEStep{e.mean, e.log_likelihood};
      }
    }
    ScaledMoments acc(p_.cols());
    detail::FeasibleWalk walk(p_, y, budget);
    walk.run([&](const Vector& base, const CountVector& x2, Count lo, Count hi) {
      if (p_.free_count() > 0 && unit_steps_) fast_line(acc, base, x2, lo, hi);
      else slow_line(acc, base, x2, lo, hi);
    });
    if (!(acc.mass > 0.0)) {
      throw InconsistentObservation("no nonnegative integer route vector reproduces the observed link counts");
    }
    ExactEStep out;
    out.mean = acc.first / acc.mass;
    out.log_likelihood = acc.top + std::log(acc.mass) - lambda_.sum();
    return out;
  }

 private:
  // Product over free coordinates of their link-count bounds, times the
  // number of rows touched per point.
  std::uint64_t walk_estimate(const CountVector& y) const {
    const auto& a = p_.routing().entries();
    double est = static_cast<double>(p_.rows());
    for (const Eigen::Index col : p_.free_cols()) {
      Count hi = std::numeric_limits<Count>::max();
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (a(i, col) != 0) hi = std::min(hi, y(i));
      }
      est *= static_cast<double>(hi + 1);
    }
    return est >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(est);
  }

  double log_term(Eigen::Index col, Count x) const {
    return static_cast<double>(x) * theta_(col) - lf_[static_cast<std::size_t>(x)];
  }

  double prefix_weight(const CountVector& x2, Eigen::Index upto) const {
    double s = 0.0;
    for (Eigen::Index k = 0; k < upto; ++k) s += log_term(p_.free_cols()[static_cast<std::size_t>(k)], x2(k));
    return s;
  }

  // Along a line with unit steps in X1 the weight ratio between neighbours is
  // a short product, so no exp/log is needed per point.
  void fast_line(ScaledMoments& acc, const Vector& base, const CountVector& x2, Count lo, Count hi) {
    const Eigen::Index f = p_.free_count();
    const Eigen::Index last = p_.free_cols().back();
    const auto g = p_.a1_inv_a2().col(f - 1);
    CountVector& x1 = x1_;
    for (Eigen::Index a = 0; a < base.size(); ++a) {
      const double v = base(a) - static_cast<double>(lo) * g(a);
      if (!is_nonneg_integral(v)) return;
      x1(a) = static_cast<Count>(std::llround(v));
    }
    double log_w0 = prefix_weight(x2, f - 1) + log_term(last, lo);
    for (Eigen::Index a = 0; a < x1.size(); ++a) log_w0 += log_term(p_.pivot_cols()[static_cast<std::size_t>(a)], x1(a));

    Vector& x_lo = x_;
    for (Eigen::Index k = 0; k + 1 < f; ++k) x_lo(p_.free_cols()[static_cast<std::size_t>(k)]) = static_cast<double>(x2(k));
    x_lo(last) = static_cast<double>(lo);
    for (Eigen::Index a = 0; a < x1.size(); ++a) x_lo(p_.pivot_cols()[static_cast<std::size_t>(a)]) = static_cast<double>(x1(a));

    constexpr double kRescale = 1e150;
    const double log_rescale = std::log(kRescale);
    const double lambda_last = lambda_(last);
    double r = 1.0;
    double s0 = 0.0;
    double s1 = 0.0;
    double extra = 0.0;
    for (Count t = lo;; ++t) {
      s0 += r;
      s1 += r * static_cast<double>(t - lo);
      if (t == hi) break;
      r *= lambda_last / static_cast<double>(t + 1);
      for (const Eigen::Index a : down_) {
        r *= static_cast<double>(x1(a)) / lambda_(p_.pivot_cols()[static_cast<std::size_t>(a)]);
        x1(a) -= 1;
      }
      for (const Eigen::Index a : up_) {
        x1(a) += 1;
        r *= lambda_(p_.pivot_cols()[static_cast<std::size_t>(a)]) / static_cast<double>(x1(a));
      }
      if (r > kRescale) {
        r /= kRescale;
        s0 /= kRescale;
        s1 /= kRescale;
        extra += log_rescale;
      }
    }
    acc.add(log_w0 + extra, s0, s1, x_lo, slope_);
  }

  void slow_line(ScaledMoments& acc, const Vector& base, const CountVector& x2, Count lo, Count hi) {
    const Eigen::Index f = p_.free_count();
    Vector& x = x_;
    for (Eigen::Index k = 0; k + 1 < f; ++k) x(p_.free_cols()[static_cast<std::size_t>(k)]) = static_cast<double>(x2(k));
    const double prefix = prefix_weight(x2, f > 0 ? f - 1 : 0);
    for (Count t = lo; t <= hi; ++t) {
      double log_w = prefix;
      bool ok = true;
      for (Eigen::Index a = 0; a < base.size() && ok; ++a) {
        const double v = f > 0 ? base(a) - static_cast<double>(t) * p_.a1_inv_a2()(a, f - 1) : base(a);
        ok = is_nonneg_integral(v);
        if (!ok) break;
        const auto xi = static_cast<Count>(std::llround(v));
        const Eigen::Index col = p_.pivot_cols()[static_cast<std::size_t>(a)];
        x(col) = static_cast<double>(xi);
        log_w += log_term(col, xi);
      }
      if (!ok) continue;
      if (f > 0) {
        x(p_.free_cols().back()) = static_cast<double>(t);
        log_w += log_term(p_.free_cols().back(), t);
      }
      acc.add_point(log_w, x);
    }
  }

  const Partition& p_;
  Vector lambda_;
  Vector theta_;
  const std::vector<double>& lf_;
  const detail::RouteElimination* elim_;
  Vector slope_;
  CountVector x1_;
  Vector x_;
  bool unit_steps_ = false;
  std::vector<Eigen::Index> down_;  // X1 rows that drop by one per step
  std::vector<Eigen::Index> up_;    // X1 rows that grow by one per step
};

void check_rates(const Partition& p, const RateVector& lambda) {
  if (lambda.size() != p.cols()) throw DimensionMismatch("rate vector length does not match routing matrix");
}

// Distinct rows of `samples` with multiplicities, in lexicographic order.
std::map<std::vector<Count>, Eigen::Index> group_periods(const CountMatrix& samples) {
  std::map<std::vector<Count>, Eigen::Index> groups;
  for (Eigen::Index k = 0; k < samples.rows(); ++k) {
    std::vector<Count> row(static_cast<std::size_t>(samples.cols()));
    for (Eigen::Index i = 0; i < samples.cols(); ++i) row[static_cast<std::size_t>(i)] = samples(k, i);
    ++groups[row];
  }
  return groups;
}

CountVector to_count_vector(const std::vector<Count>& v) {
  CountVector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

}  // namespace

ExactEStep estep_exact_full(const Partition& p, const CountVector& y, const RateVector& lambda, std::int64_t cap) {
  check_rates(p, lambda);
  if (y.size() != p.rows()) throw DimensionMismatch("estep_exact: link vector has wrong length");
  const auto lf = log_factorials(y.size() > 0 ? std::max<Count>(y.maxCoeff(), 0) : 0);
  const detail::RouteElimination elim(p.routing());
  ExactSummer summer(p, lambda.values(), lf, &elim);
  return summer.run(y, enumeration_budget(cap, p.free_count()));
}

Vector estep_exact(const Partition& p, const CountVector& y, const RateVector& lambda, std::int64_t cap) {
  return estep_exact_full(p, y, lambda, cap).mean;
}

Vector estep_normal(const RoutingMatrix& a, const Vector& y, const RateVector& lambda) {
  if (lambda.size() != a.cols()) throw DimensionMismatch("estep_normal: rate vector has wrong length");
  if (y.size() != a.rows()) throw DimensionMismatch("estep_normal: link vector has wrong length");
  const Matrix& am = a.real();
  const Vector& lam = lambda.values();
  const Matrix lam_at = lam.asDiagonal() * am.transpose();
  const Matrix s = am * lam_at;
  const Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw NumericError("estep_normal: A Lambda A^t is singular");
  const Vector resid = y - am * lam;
  return lam + lam_at * llt.solve(resid);
}

double observed_loglik(const Partition& p, const CountMatrix& samples, const RateVector& lambda, std::int64_t cap) {
  check_rates(p, lambda);
  if (samples.cols() != p.rows()) throw DimensionMismatch("observed_loglik: samples have wrong column count");
  const auto lf = log_factorials(samples.size() > 0 ? samples.maxCoeff() : 0);
  const detail::RouteElimination elim(p.routing());
  ExactSummer summer(p, lambda.values(), lf, &elim);
  const auto budget = enumeration_budget(cap, p.free_count());
  double total = 0.0;
  for (const auto& [row, count] : group_periods(samples)) {
    total += static_cast<double>(count) * summer.run(to_count_vector(row), budget).log_likelihood;
  }
  return total;
}

RateVector default_init(const RoutingMatrix& a, const CountMatrix& samples, double floor) {
  if (samples.cols() != a.rows()) throw DimensionMismatch("default_init: samples have wrong column count");
  const double total = column_means(samples).sum();
  return RateVector::constant(a.cols(), std::max(total / static_cast<double>(a.cols()), floor));
}

EstimateReport em_fit(const RoutingMatrix& a, const CountMatrix& samples, const RateVector& init, const EmConfig& cfg) {
  cfg.validate();
  if (samples.rows() < 1) throw DomainError("em_fit: need at least one period");
  if (samples.cols() != a.rows()) throw DimensionMismatch("em_fit: samples have wrong column count");
  if (init.size() != a.cols()) throw DimensionMismatch("em_fit: initial rates have wrong length");

  const bool exact = cfg.estep_mode == EStepMode::exact;
  const Partition part = partition(a);
  const auto groups = group_periods(samples);
  const detail::RouteElimination elim(a);
  const auto lf = log_factorials(samples.maxCoeff());
  const auto budget = enumeration_budget(cfg.cap, part.free_count());
  const double k_periods = static_cast<double>(samples.rows());
  const Vector ybar = column_means(samples);
  // With no free coordinates the E-step ignores lambda, so one step is final.
  const bool constant_map = part.free_count() == 0;

  EstimateReport rep;
  rep.method = exact ? "em-exact" : "em-normal";
  Vector current = init.values().cwiseMax(cfg.floor);

  for (int it = 1; it <= cfg.max_iters; ++it) {
    Vector next = Vector::Zero(a.cols());
    if (exact) {
      ExactSummer summer(part, current, lf, &elim);
      double loglik = 0.0;
      for (const auto& [row, count] : groups) {
        const ExactEStep e = summer.run(to_count_vector(row), budget);
        next += static_cast<double>(count) * e.mean;
        loglik += static_cast<double>(count) * e.log_likelihood;
      }
      next /= k_periods;
      if (cfg.track_loglik) rep.objective_trajectory.push_back(loglik);
    } else {
      // The normal-approximation E-step is affine in Y, so its period average
      // is the E-step at the mean link vector.
      next = estep_normal(a, ybar, RateVector(current));
    }
    next = next.cwiseMax(cfg.floor);
    const double delta = (next - current).cwiseAbs().maxCoeff();
    rep.trajectory.push_back(delta);
    current = next;
    rep.iterations = it;
    if (delta < cfg.tol || constant_map) {
      rep.converged = true;
      break;
    }
  }
  rep.lambda_hat = current;
  if (exact && cfg.track_loglik) {
    rep.objective = observed_loglik(part, samples, RateVector(current), cfg.cap);
  }
  return rep;
}

namespace {

struct GaussianPieces {
  Eigen::LLT<Matrix> llt;
  Vector resid;
};

GaussianPieces gaussian_pieces(const RateVector& lambda, const Vector& ybar, const RoutingMatrix& a) {
  if (lambda.size() != a.cols()) throw DimensionMismatch("gaussian_loglik: rate vector has wrong length");
  if (ybar.size() != a.rows()) throw DimensionMismatch("gaussian_loglik: mean link vector has wrong length");
  const Matrix& am = a.real();
  const Matrix s = am * lambda.values().asDiagonal() * am.transpose();
  GaussianPieces out{Eigen::LLT<Matrix>(s), ybar - am * lambda.values()};
  if (out.llt.info() != Eigen::Success) throw NumericError("gaussian_loglik: A Lambda A^t is not positive definite");
  return out;
}

}  // namespace

double gaussian_loglik(const RateVector& lambda, const Vector& ybar, Eigen::Index k_periods, const RoutingMatrix& a) {
  const auto pieces = gaussian_pieces(lambda, ybar, a);
  const Matrix& l = pieces.llt.matrixLLT();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const double quad = pieces.resid.dot(pieces.llt.solve(pieces.resid));
  return -logdet - static_cast<double>(k_periods) * quad;
}

Vector gaussian_loglik_gradient(const RateVector& lambda, const Vector& ybar, Eigen::Index k_periods,
                                const RoutingMatrix& a) {
  // d/d lambda_j of -log|S| is -a_j^t S^{-1} a_j; of -K r^t S^{-1} r it is
  // K (2 a_j^t u + (a_j^t u)^2) with u = S^{-1} r.
  const auto pieces = gaussian_pieces(lambda, ybar, a);
  const Matrix& am = a.real();
  const Matrix sinv_a = pieces.llt.solve(am);
  const Vector u = pieces.llt.solve(pieces.resid);
  const Vector au = am.transpose() * u;
  const double k = static_cast<double>(k_periods);
  Vector grad(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    grad(j) = -am.col(j).dot(sinv_a.col(j)) + k * (2.0 * au(j) + au(j) * au(j));
  }
  return grad;
}

EstimateReport gaussian_fit(const RoutingMatrix& a, const CountMatrix& samples, const RateVector& init,
                            const GaussianConfig& cfg) {
  cfg.validate();
  if (samples.rows() < 2) throw DomainError("gaussian_fit: need at least two periods");
  if (samples.cols() != a.rows()) throw DimensionMismatch("gaussian_fit: samples have wrong column count");
  if (init.size() != a.cols()) throw DimensionMismatch("gaussian_fit: initial rates have wrong length");

  const Eigen::Index k = samples.rows();
  const Vector ybar = column_means(samples);
  Vector lam = init.values().cwiseMax(cfg.floor);
  double value = gaussian_loglik(RateVector(lam), ybar, k, a);

  EstimateReport rep;
  rep.method = "gaussian";
  rep.objective_trajectory.push_back(value);
  double step = 1.0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Vector grad = gaussian_loglik_gradient(RateVector(lam), ybar, k, a);
    bool accepted = false;
    Vector cand;
    double cand_value = value;
    for (int h = 0; h <= cfg.max_halvings; ++h, step *= 0.5) {
      cand = (lam + step * grad).cwiseMax(cfg.floor);
      const Vector d = cand - lam;
      if (d.cwiseAbs().maxCoeff() == 0.0) break;
      cand_value = gaussian_loglik(RateVector(cand), ybar, k, a);
      if (cand_value >= value + cfg.armijo * grad.dot(d)) {
        accepted = true;
        break;
      }
    }
    rep.iterations = it;
    if (!accepted) {
      // No ascent direction survives the projection: a stationary point of
      // the constrained problem, up to the line-search resolution.
      rep.converged = true;
      break;
    }
    const double delta = (cand - lam).cwiseAbs().maxCoeff();
    lam = cand;
    value = cand_value;
    rep.trajectory.push_back(delta);
    rep.objective_trajectory.push_back(value);
    step *= 2.0;
    if (delta < cfg.tol) {
      rep.converged = true;
      break;
    }
  }
  rep.lambda_hat = lam;
  rep.objective = value;
  return rep;
}

MomentSystem moment_system(const RoutingMatrix& a, const CountMatrix& samples, double second_moment_weight) {
  if (samples.rows() < 2) throw DomainError("moment_system: need at least two periods");
  if (samples.cols() != a.rows()) throw DimensionMismatch("moment_system: samples have wrong column count");
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  const Matrix ys = samples.cast<double>();
  const Vector ybar = column_means(samples);
  const double k = static_cast<double>(samples.rows());
  // 1/K normalisation, not 1/(K-1).
  const Matrix second = (ys.transpose() * ys) / k - ybar * ybar.transpose();

  MomentSystem sys;
  sys.design = Matrix::Zero(r + r * (r + 1) / 2, c);
  sys.rhs = Vector::Zero(sys.design.rows());
  sys.design.topRows(r) = a.real();
  sys.rhs.head(r) = ybar;
  Eigen::Index row = r;
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index h = i; h < r; ++h, ++row) {
      for (Eigen::Index l = 0; l < c; ++l) sys.design(row, l) = second_moment_weight * a(i, l) * a(h, l);
      sys.rhs(row) = second_moment_weight * second(i, h);
    }
  }
  return sys;
}

EstimateReport moment_fit(const RoutingMatrix& a, const CountMatrix& samples, double floor,
                          double second_moment_weight) {
  if (!(floor > 0.0)) throw DomainError("moment_fit: floor must be positive");
  const MomentSystem sys = moment_system(a, samples, second_moment_weight);
  const NnlsResult sol = nnls(sys.design, sys.rhs);
  EstimateReport rep;
  rep.method = "moments";
  rep.lambda_hat = sol.x.cwiseMax(floor);
  rep.iterations = sol.iterations;
  rep.converged = sol.converged;
  rep.residual = sol.residual_norm;
  return rep;
}

}  // namespace nettomo
