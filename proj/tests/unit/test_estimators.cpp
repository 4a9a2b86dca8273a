#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "nettomo/errors.hpp"
#include "nettomo/estimators.hpp"
#include "nettomo/linalg.hpp"
#include "nettomo/rng.hpp"
#include "route_elimination.hpp"

using namespace nettomo;

namespace {

std::vector<double> log_factorials(Count n) {
  std::vector<double> lf(static_cast<std::size_t>(n) + 1, 0.0);
  for (Count k = 1; k <= n; ++k) lf[static_cast<std::size_t>(k)] = lf[static_cast<std::size_t>(k - 1)] + std::log(static_cast<double>(k));
  return lf;
}

double rel(double got, const oracle::Big& want) {
  const double w = static_cast<double>(want);
  return std::abs(got - w) / std::max(std::abs(w), 1e-300);
}

struct Case {
  CountVector y;
  Vector lambda;
};

std::vector<Case> four_node_cases(int n, Count hi, std::uint64_t seed) {
  const RoutingMatrix a = testing::four_node_matrix();
  Rng rng(seed);
  std::vector<Case> out;
  for (int t = 0; t < n; ++t) {
    CountVector x(12);
    Vector lambda(12);
    for (int j = 0; j < 12; ++j) {
      x(j) = rng.uniform_int(0, hi);
      lambda(j) = 0.2 + 6.0 * rng.uniform();
    }
    out.push_back({a.apply(x), lambda});
  }
  return out;
}

}  // namespace

TEST_CASE("exact E-step matches the multiprecision oracle by both summation routes") {
  const RoutingMatrix a = testing::four_node_matrix();
  const Partition p = partition(a);
  const detail::RouteElimination elim(a);
  const auto rows = testing::to_rows(a);
  for (const Count hi : {1, 3, 5}) {
    for (const auto& c : four_node_cases(6, hi, 100 + static_cast<std::uint64_t>(hi))) {
      const auto ref = oracle::poisson_posterior(rows, testing::to_counts(c.y), {c.lambda.data(), c.lambda.data() + 12});
      const double ref_ll = static_cast<double>(boost::multiprecision::log(ref.likelihood));

      const ExactEStep dispatched = estep_exact_full(p, c.y, RateVector(c.lambda), 64);
      const auto direct = elim.run(c.y, c.lambda, c.lambda.array().log().matrix(), log_factorials(c.y.maxCoeff()));
      REQUIRE(direct.feasible);
      for (int j = 0; j < 12; ++j) {
        CHECK(rel(dispatched.mean(j), ref.mean[static_cast<std::size_t>(j)]) < 1e-10);
        CHECK(rel(direct.mean(j), ref.mean[static_cast<std::size_t>(j)]) < 1e-10);
      }
      CHECK(std::abs(dispatched.log_likelihood - ref_ll) < 1e-10 * std::max(1.0, std::abs(ref_ll)));
      CHECK(std::abs(direct.log_likelihood - ref_ll) < 1e-10 * std::max(1.0, std::abs(ref_ll)));
    }
  }
}

TEST_CASE("route elimination agrees with the feasible-set walk on heavier traffic") {
  const RoutingMatrix a = testing::four_node_matrix();
  const Partition p = partition(a);
  const detail::RouteElimination elim(a);
  for (const auto& c : four_node_cases(3, 12, 7)) {
    const CountMatrix set = enumerate_feasible(p, c.y, 1 << 12);
    // Plain weighted average over the enumerated set, in scaled log space.
    std::vector<double> logw;
    double top = -INFINITY;
    for (Eigen::Index s = 0; s < set.rows(); ++s) {
      double lw = 0.0;
      for (int j = 0; j < 12; ++j) {
        const auto x = static_cast<double>(set(s, j));
        lw += x * std::log(c.lambda(j)) - std::lgamma(x + 1.0);
      }
      logw.push_back(lw);
      top = std::max(top, lw);
    }
    Vector mean = Vector::Zero(12);
    double mass = 0.0;
    for (Eigen::Index s = 0; s < set.rows(); ++s) {
      const double w = std::exp(logw[static_cast<std::size_t>(s)] - top);
      mass += w;
      mean += w * set.row(s).transpose().cast<double>();
    }
    mean /= mass;
    const double ll = top + std::log(mass) - c.lambda.sum();
    const auto e = elim.run(c.y, c.lambda, c.lambda.array().log().matrix(), log_factorials(c.y.maxCoeff()));
    CHECK(((e.mean - mean).array().abs() / mean.array()).maxCoeff() < 1e-9);
    CHECK(std::abs(e.log_likelihood - ll) < 1e-9 * std::abs(ll));
  }
}

TEST_CASE("elimination order closes every link and keeps all routes") {
  const detail::RouteElimination elim(testing::four_node_matrix());
  auto order = elim.order();
  std::sort(order.begin(), order.end());
  for (Eigen::Index j = 0; j < 12; ++j) CHECK(order[static_cast<std::size_t>(j)] == j);
}

TEST_CASE("inconsistent observations are reported") {
  Eigen::MatrixXi m(2, 3);
  m << 1, 1, 1, 1, 1, 0;
  const RoutingMatrix a(m);
  const Partition p = partition(a);
  CountVector y(2);
  y << 0, 1;
  CHECK_THROWS_AS(estep_exact(p, y, RateVector::constant(3, 1.0), 64), InconsistentObservation);
  const detail::RouteElimination elim(a);
  CHECK_FALSE(elim.run(y, Vector::Ones(3), Vector::Zero(3), log_factorials(1)).feasible);
}

TEST_CASE("observed log-likelihood sums the per-period terms") {
  const RoutingMatrix a = testing::four_node_matrix();
  const Partition p = partition(a);
  const auto lambda = RateVector::constant(12, 1.5);
  const TrafficSample s = sample_sd_traffic(lambda, 5, 3);
  const CountMatrix y = link_counts(a, s.x);
  double total = 0.0;
  for (Eigen::Index k = 0; k < 5; ++k) total += estep_exact_full(p, y.row(k).transpose(), lambda, 64).log_likelihood;
  CHECK(observed_loglik(p, y, lambda, 64) == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("normal E-step reproduces the link counts") {
  const RoutingMatrix a = testing::four_node_matrix();
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    Vector lambda(12);
    Vector y(7);
    for (int j = 0; j < 12; ++j) lambda(j) = 0.5 + 5.0 * rng.uniform();
    for (int i = 0; i < 7; ++i) y(i) = static_cast<double>(rng.uniform_int(0, 30));
    const Vector m = estep_normal(a, y, RateVector(lambda));
    CHECK((a.real() * m - y).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("property: EM never decreases the observed-data log-likelihood") {
  const RoutingMatrix a = testing::four_node_matrix();
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    const TrafficSample s = sample_sd_traffic(RateVector::constant(12, 2.0), 40, seed);
    EmConfig cfg;
    cfg.max_iters = 40;
    cfg.tol = 1e-300;
    cfg.track_loglik = true;
    const CountMatrix y = link_counts(a, s.x);
    const EstimateReport r = em_fit(a, y, default_init(a, y), cfg);
    REQUIRE(r.objective_trajectory.size() >= 2);
    for (std::size_t i = 1; i < r.objective_trajectory.size(); ++i) {
      CHECK(r.objective_trajectory[i] >= r.objective_trajectory[i - 1] - 1e-9);
    }
    CHECK(r.lambda_hat.minCoeff() >= cfg.floor);
  }
}

TEST_CASE("EM on an identity network returns the sample means") {
  const RoutingMatrix a(Eigen::MatrixXi::Identity(3, 3));
  const TrafficSample s = sample_sd_traffic(RateVector::constant(3, 4.0), 50, 9);
  const CountMatrix y = link_counts(a, s.x);
  EmConfig cfg;
  for (const auto mode : {EStepMode::exact, EStepMode::normal}) {
    cfg.estep_mode = mode;
    const EstimateReport r = em_fit(a, y, RateVector::constant(3, 1.0), cfg);
    CHECK(r.converged);
    CHECK((r.lambda_hat - column_means(y)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("EM configuration validation") {
  EmConfig cfg;
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = EmConfig{};
  cfg.floor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("gaussian gradient matches central differences") {
  const RoutingMatrix a = testing::four_node_matrix();
  const TrafficSample s = sample_sd_traffic(RateVector::constant(12, 10.0), 30, 4);
  const Vector ybar = column_means(link_counts(a, s.x));
  Rng rng(6);
  Vector lambda(12);
  for (int j = 0; j < 12; ++j) lambda(j) = 5.0 + 10.0 * rng.uniform();
  const Vector g = gaussian_loglik_gradient(RateVector(lambda), ybar, 30, a);
  for (int j = 0; j < 12; ++j) {
    const double h = 1e-5 * lambda(j);
    Vector up = lambda;
    Vector dn = lambda;
    up(j) += h;
    dn(j) -= h;
    const double fd =
        (gaussian_loglik(RateVector(up), ybar, 30, a) - gaussian_loglik(RateVector(dn), ybar, 30, a)) / (2.0 * h);
    CHECK(g(j) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("gaussian fit improves on its start and respects the floor") {
  const RoutingMatrix a = testing::four_node_matrix();
  const CountMatrix y = link_counts(a, sample_sd_traffic(RateVector::constant(12, 20.0), 100, 2).x);
  const RateVector init = default_init(a, y);
  GaussianConfig cfg;
  cfg.max_iters = 200;
  const EstimateReport r = gaussian_fit(a, y, init, cfg);
  REQUIRE(r.objective.has_value());
  CHECK(*r.objective >= gaussian_loglik(init, column_means(y), y.rows(), a));
  CHECK(r.lambda_hat.minCoeff() >= cfg.floor);
}

TEST_CASE("moment system layout") {
  const RoutingMatrix a = testing::four_node_matrix();
  const CountMatrix y = link_counts(a, sample_sd_traffic(RateVector::constant(12, 2.0), 10, 2).x);
  const MomentSystem m = moment_system(a, y);
  REQUIRE(m.design.rows() == 7 + 28);
  CHECK(m.design.topRows(7) == a.real());
  // Row for the pair (i, h) counts routes crossing both links.
  int row = 7;
  for (int i = 0; i < 7; ++i) {
    for (int h = i; h < 7; ++h, ++row) {
      for (int j = 0; j < 12; ++j) CHECK(m.design(row, j) == static_cast<double>(a(i, j) * a(h, j)));
    }
  }
  CHECK(m.rhs.head(7).isApprox(column_means(y)));
}

TEST_CASE("moment fit recovers rates from a long sample") {
  const RoutingMatrix a = testing::four_node_matrix();
  Vector truth(12);
  truth << 2, 3, 4, 5, 6, 7, 8, 2, 3, 4, 5, 6;
  const CountMatrix y = link_counts(a, sample_sd_traffic(RateVector(truth), 40000, 12).x);
  const EstimateReport r = moment_fit(a, y);
  CHECK(((r.lambda_hat - truth).array().abs() / truth.array()).maxCoeff() < 0.1);
  CHECK(r.lambda_hat.minCoeff() >= 1e-6);
}

TEST_CASE("exact E-step on degenerate inputs") {
  const RoutingMatrix id(Eigen::MatrixXi::Identity(3, 3));
  CountVector y(3);
  y << 3, 0, 8;
  const Vector m = estep_exact(partition(id), y, RateVector::constant(3, 2.5), 64);
  for (int j = 0; j < 3; ++j) CHECK(m(j) == doctest::Approx(static_cast<double>(y(j))).epsilon(1e-14));

  const Partition p = partition(testing::four_node_matrix());
  const Vector zero = estep_exact(p, CountVector::Zero(7), RateVector::constant(12, 3.0), 64);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("property: the exact conditional mean reproduces the link counts") {
  const RoutingMatrix a = testing::four_node_matrix();
  const Partition p = partition(a);
  for (const auto& c : four_node_cases(8, 6, 77)) {
    const Vector m = estep_exact(p, c.y, RateVector(c.lambda), 64);
    CHECK((a.real() * m - c.y.cast<double>()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(m.minCoeff() >= 0.0);
  }
}

TEST_CASE("normal E-step fixed points") {
  const RoutingMatrix a = testing::four_node_matrix();
  Vector lambda(12);
  for (int j = 0; j < 12; ++j) lambda(j) = 1.0 + 0.5 * j;
  const Vector y = a.real() * lambda;
  CHECK((estep_normal(a, y, RateVector(lambda)) - lambda).cwiseAbs().maxCoeff() < 1e-9);

  const RoutingMatrix id(Eigen::MatrixXi::Identity(4, 4));
  Vector y4(4);
  y4 << 2.0, 0.0, 7.0, 11.0;
  CHECK((estep_normal(id, y4, RateVector::constant(4, 3.0)) - y4).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normal and exact E-steps on one moderate period") {
  const RoutingMatrix a = testing::four_node_matrix();
  const TrafficSample s = sample_sd_traffic(RateVector::constant(12, 5.0), 1, 42);
  const CountVector y = a.apply(CountVector(s.x.row(0).transpose()));
  const RateVector lambda = RateVector::constant(12, 5.0);
  const Vector exact = estep_exact(partition(a), y, lambda, 64);
  const Vector normal = estep_normal(a, y.cast<double>(), lambda);
  const double dev = ((normal - exact).array() / exact.array().max(1e-12)).abs().maxCoeff();
  INFO("largest relative deviation ", dev);
  CHECK(std::isfinite(dev));
  CHECK((a.real() * normal - y.cast<double>()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("exact and normal EM agree at high rates") {
  const RoutingMatrix a = testing::four_node_matrix();
  const TrafficSample s = sample_sd_traffic(RateVector::constant(12, 50.0), 10, 42);
  const CountMatrix y = link_counts(a, s.x);
  EmConfig cfg;
  cfg.cap = 1 << 12;
  const EstimateReport exact = em_fit(a, y, default_init(a, y), cfg);
  cfg.estep_mode = EStepMode::normal;
  const EstimateReport normal = em_fit(a, y, default_init(a, y), cfg);
  const double gap = ((normal.lambda_hat - exact.lambda_hat).array() / exact.lambda_hat.array()).abs().maxCoeff();
  INFO("relative sup-norm gap ", gap, " after ", exact.iterations, " exact and ", normal.iterations, " normal iterations");
  CHECK(gap < 0.10);
}

TEST_CASE("normal-step EM lands on A lambda = mean link counts and stops") {
  const RoutingMatrix a = testing::four_node_matrix();
  const CountMatrix y = link_counts(a, sample_sd_traffic(RateVector::constant(12, 50.0), 10, 42).x);
  EmConfig cfg;
  cfg.estep_mode = EStepMode::normal;
  const EstimateReport r = em_fit(a, y, default_init(a, y), cfg);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK((a.real() * r.lambda_hat - column_means(y)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("gaussian objective in closed-form cases") {
  const RoutingMatrix a = testing::four_node_matrix();
  Vector lambda(12);
  for (int j = 0; j < 12; ++j) lambda(j) = 2.0 + 0.25 * j;
  const Matrix s = a.real() * lambda.asDiagonal() * a.real().transpose();
  const double logdet = s.ldlt().vectorD().array().log().sum();
  CHECK(gaussian_loglik(RateVector(lambda), a.real() * lambda, 100, a) == doctest::Approx(-logdet).epsilon(1e-12));

  const RoutingMatrix one(Eigen::MatrixXi::Identity(1, 1));
  CHECK(gaussian_loglik(RateVector::constant(1, 1.0), Vector::Ones(1), 1, one) == doctest::Approx(0.0));
}

TEST_CASE("planted exact moments are recovered by the nonnegative solve") {
  const RoutingMatrix a = testing::four_node_matrix();
  const TrafficSample s = sample_sd_traffic(RateVector::constant(12, 3.0), 20, 3);
  const MomentSystem sys = moment_system(a, link_counts(a, s.x));
  Vector lambda(12);
  for (int j = 0; j < 12; ++j) lambda(j) = 1.0 + 0.75 * j;
  const NnlsResult fit = nnls(sys.design, sys.design * lambda);
  CHECK((fit.x - lambda).cwiseAbs().maxCoeff() < 1e-8);

  const EstimateReport zero = moment_fit(a, CountMatrix::Zero(10, 7));
  CHECK(zero.lambda_hat.minCoeff() >= 1e-6);
  CHECK(zero.lambda_hat.maxCoeff() == doctest::Approx(1e-6));
}
