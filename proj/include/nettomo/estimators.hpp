#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nettomo/simulator.hpp"
#include "nettomo/topology.hpp"
#include "nettomo/types.hpp"

namespace nettomo {

enum class EStepMode { exact, normal };

struct EmConfig {
  int max_iters = 500;
  double tol = 1e-6;  // sup-norm change between successive iterates
  EStepMode estep_mode = EStepMode::exact;
  double floor = 1e-6;
  std::int64_t cap = 64;       // exact mode: feasible-set search budget is cap^(c - r)
  bool track_loglik = false;   // exact mode: record the observed-data log-likelihood per iteration

  void validate() const;
};

struct EstimateReport {
  std::string method;
  Vector lambda_hat;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trajectory;  // sup-norm change per iteration
  std::vector<double> objective_trajectory;
  std::optional<double> objective;
  std::optional<double> residual;

  nlohmann::json to_json() const;
};

struct ExactEStep {
  Vector mean;              // E[X | Y, lambda]
  double log_likelihood;    // log P(Y | lambda)
};

/// Conditional mean of the route counts over {X >= 0 integral : AX = Y}
/// under independent Poisson(lambda) weights, plus the observed-data
/// log-likelihood of Y. Weights are carried in scaled log space.
ExactEStep estep_exact_full(const Partition& p, const CountVector& y, const RateVector& lambda, std::int64_t cap);

Vector estep_exact(const Partition& p, const CountVector& y, const RateVector& lambda, std::int64_t cap);

// lambda + Lambda A^t (A Lambda A^t)^{-1} (Y - A lambda); entries may be negative.
Vector estep_normal(const RoutingMatrix& a, const Vector& y, const RateVector& lambda);

// Sum over periods of log P(Y(k) | lambda), by exhaustive feasible-set summation.
double observed_loglik(const Partition& p, const CountMatrix& samples, const RateVector& lambda, std::int64_t cap);

// Uniform start: mean total observed link traffic divided by c, at least `floor`.
RateVector default_init(const RoutingMatrix& a, const CountMatrix& samples, double floor = 1e-6);

/// Fixed-point EM: lambda <- mean over periods of E[X(k) | Y(k), lambda],
/// floored elementwise, until the sup-norm change drops below tol.
EstimateReport em_fit(const RoutingMatrix& a, const CountMatrix& samples, const RateVector& init, const EmConfig& cfg);

/// -log|A Lambda A^t| - K (ybar - A lambda)^t (A Lambda A^t)^{-1} (ybar - A lambda).
/// Constant terms of the Gaussian density are omitted.
double gaussian_loglik(const RateVector& lambda, const Vector& ybar, Eigen::Index k_periods, const RoutingMatrix& a);
Vector gaussian_loglik_gradient(const RateVector& lambda, const Vector& ybar, Eigen::Index k_periods,
                                const RoutingMatrix& a);

struct GaussianConfig {
  int max_iters = 500;
  double tol = 1e-6;
  double floor = 1e-6;
  double armijo = 1e-4;
  int max_halvings = 60;

  void validate() const;
};

// Projected gradient ascent with backtracking on gaussian_loglik over lambda >= floor.
EstimateReport gaussian_fit(const RoutingMatrix& a, const CountMatrix& samples, const RateVector& init,
                            const GaussianConfig& cfg);

struct MomentSystem {
  Matrix design;  // (r + r(r+1)/2) x c
  Vector rhs;
};

// First-moment rows ybar = A lambda followed by second-moment rows for
// i <= h: sum_l a_il a_hl lambda_l = Cov(Y_i, Y_h) with the 1/K covariance.
MomentSystem moment_system(const RoutingMatrix& a, const CountMatrix& samples, double second_moment_weight = 1.0);

// Nonnegative least squares on the stacked moment equations.
EstimateReport moment_fit(const RoutingMatrix& a, const CountMatrix& samples, double floor = 1e-6,
                          double second_moment_weight = 1.0);

Vector column_means(const CountMatrix& samples);

}  // namespace nettomo
