#include <doctest.h>

#include <cmath>
#include <vector>

#include "nettomo/errors.hpp"
#include "nettomo/rng.hpp"
#include "nettomo/summary.hpp"

using namespace nettomo;

TEST_CASE("type 7 quantiles") {
  const std::vector<double> v = {1, 2, 3, 4, 10};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 10.0);
  CHECK(quantile_sorted(v, 0.5) == 3.0);
  CHECK(quantile_sorted(v, 0.05) == doctest::Approx(1.2));
  CHECK(quantile_sorted(v, 0.95) == doctest::Approx(8.8));
  CHECK_THROWS_AS(quantile_sorted(std::vector<double>{}, 0.5), DomainError);
  CHECK_THROWS_AS(quantile_sorted(v, 1.5), DomainError);
}

TEST_CASE("effective sample size") {
  Rng rng(4);
  const int n = 20000;
  std::vector<double> iid(n);
  for (auto& v : iid) v = rng.normal();
  CHECK(effective_sample_size(iid) == doctest::Approx(n).epsilon(0.1));

  // AR(1) with rho = 0.8 has integrated autocorrelation time 9.
  std::vector<double> ar(n);
  double s = 0.0;
  for (auto& v : ar) {
    s = 0.8 * s + std::sqrt(1 - 0.64) * rng.normal();
    v = s;
  }
  CHECK(effective_sample_size(ar) == doctest::Approx(n / 9.0).epsilon(0.2));

  const std::vector<double> flat(100, 2.0);
  CHECK(effective_sample_size(flat) == 100.0);
}

TEST_CASE("pooled summary") {
  const std::vector<std::vector<double>> chains = {{1, 2, 3}, {4, 5}};
  const CoordinateSummary s = summarize_chains(chains);
  CHECK(s.mean == doctest::Approx(3.0));
  CHECK(s.sd == doctest::Approx(std::sqrt(2.5)));
  CHECK(s.q50 == 3.0);
  CHECK(s.to_json().contains("ess"));
}
