#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "nettomo/errors.hpp"
#include "nettomo/rng.hpp"
#include "nettomo/simulator.hpp"

using namespace nettomo;

TEST_CASE("rate vectors reject nonpositive entries") {
  CHECK_THROWS_AS(RateVector(Vector::Constant(3, 0.0)), DomainError);
  CHECK_THROWS_AS(RateVector::constant(2, -1.0), DomainError);
  CHECK(RateVector::constant(4, 2.5).size() == 4);
}

TEST_CASE("simulation is reproducible and has Poisson moments") {
  const auto lambda = RateVector::constant(12, 5.0);
  const TrafficSample a = sample_sd_traffic(lambda, 5000, 42);
  const TrafficSample b = sample_sd_traffic(lambda, 5000, 42);
  CHECK(a.x == b.x);
  CHECK(a.x != sample_sd_traffic(lambda, 5000, 43).x);
  const Vector mean = a.x.cast<double>().colwise().mean().transpose();
  CHECK((mean.array() - 5.0).abs().maxCoeff() < 0.2);
}

TEST_CASE("link counts are A x per period") {
  const RoutingMatrix a = testing::four_node_matrix();
  const TrafficSample s = sample_sd_traffic(RateVector::constant(12, 3.0), 20, 1);
  const CountMatrix y = link_counts(a, s.x);
  for (Eigen::Index k = 0; k < 20; ++k) CHECK(y.row(k).transpose() == a.apply(s.x.row(k).transpose()));
}

TEST_CASE("sample csv round trip") {
  const RoutingMatrix a = testing::four_node_matrix();
  TrafficSample s = sample_sd_traffic(RateVector::constant(12, 3.0), 7, 5);
  s.y = link_counts(a, s.x);
  std::stringstream buf;
  write_sample_csv(buf, s);
  const TrafficSample back = read_sample_csv(buf);
  CHECK(back.x == s.x);
  CHECK(back.y == s.y);

  std::stringstream bad("period,kind,index,count\n0,z,0,1\n");
  CHECK_THROWS_AS(read_sample_csv(bad), DomainError);
  std::stringstream header("a,b,c\n");
  CHECK_THROWS_AS(read_sample_csv(header), DomainError);
}

TEST_CASE("integrality classification") {
  CHECK(is_nonneg_integral(3.0));
  CHECK(is_nonneg_integral(3.0 + 1e-12));
  CHECK(is_nonneg_integral(-1e-12));
  CHECK_FALSE(is_nonneg_integral(2.5));
  CHECK_FALSE(is_nonneg_integral(-1.0));
}

TEST_CASE("property: enumerate_feasible equals the route-by-route oracle") {
  const RoutingMatrix a = testing::four_node_matrix();
  const Partition p = partition(a);
  const auto rows = testing::to_rows(a);
  Rng rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    CountVector x(12);
    for (int j = 0; j < 12; ++j) x(j) = rng.uniform_int(0, 3);
    const CountVector y = a.apply(x);
    const CountMatrix got = enumerate_feasible(p, y, 64);
    std::set<oracle::Counts> mine;
    for (Eigen::Index s = 0; s < got.rows(); ++s) {
      const CountVector v = got.row(s).transpose();
      REQUIRE(a.apply(v) == y);
      REQUIRE(v.minCoeff() >= 0);
      mine.insert(testing::to_counts(v));
    }
    CHECK(mine.size() == static_cast<std::size_t>(got.rows()));
    const auto ref = oracle::feasible_set(rows, testing::to_counts(y));
    CHECK(mine == std::set<oracle::Counts>(ref.begin(), ref.end()));
    CHECK(mine.count(testing::to_counts(x)) == 1);
  }
}

TEST_CASE("enumeration budget") {
  CHECK(enumeration_budget(64, 5) == 1073741824ULL);
  CHECK(enumeration_budget(1 << 20, 10) == std::numeric_limits<std::uint64_t>::max());
  const RoutingMatrix a = testing::four_node_matrix();
  const CountVector y = a.apply(CountVector::Constant(12, 40));
  CHECK_THROWS_AS(enumerate_feasible(partition(a), y, 2), BudgetExceeded);
}

TEST_CASE("tiny rates give almost no traffic") {
  for (const std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const TrafficSample s = sample_sd_traffic(RateVector::constant(12, 1e-4), 10, seed);
    CHECK(s.x.cast<double>().mean() < 0.01);
  }
}

TEST_CASE("property: per-route mean and variance within six sigma of the rate") {
  const TrafficSample s = sample_sd_traffic(RateVector::constant(12, 5.0), 10000, 42);
  const Eigen::MatrixXd x = s.x.cast<double>();
  for (Eigen::Index j = 0; j < 12; ++j) {
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().sum() / 9999.0;
    CHECK(mean >= 4.8);
    CHECK(mean <= 5.2);
    CHECK(var >= 4.5);
    CHECK(var <= 5.5);
  }
}

TEST_CASE("one packet on the sixth route loads links two, three and six") {
  const RoutingMatrix a = testing::four_node_matrix();
  CountMatrix x = CountMatrix::Zero(1, 12);
  x(0, 5) = 1;
  CountMatrix expected = CountMatrix::Zero(1, 7);
  expected(0, 1) = 1;
  expected(0, 2) = 1;
  expected(0, 5) = 1;
  CHECK(link_counts(a, x) == expected);
  CHECK(link_counts(a, CountMatrix::Zero(3, 12)) == CountMatrix::Zero(3, 7));
}

TEST_CASE("property: link counts are additive") {
  const RoutingMatrix a = testing::four_node_matrix();
  const TrafficSample s1 = sample_sd_traffic(RateVector::constant(12, 4.0), 30, 8);
  const TrafficSample s2 = sample_sd_traffic(RateVector::constant(12, 2.0), 30, 9);
  CHECK(link_counts(a, s1.x + s2.x) == link_counts(a, s1.x) + link_counts(a, s2.x));
}

TEST_CASE("feasible set of a single-route observation") {
  const RoutingMatrix a = testing::four_node_matrix();
  const Partition p = partition(a);
  CountVector e1 = CountVector::Zero(12);
  e1(0) = 1;
  const CountMatrix all = enumerate_feasible(p, a.apply(e1), 64);
  CHECK(all.rows() == 1);
  CHECK(all.row(0).transpose() == e1);

  CountVector e6 = CountVector::Zero(12);
  e6(5) = 1;
  const CountMatrix six = enumerate_feasible(p, a.apply(e6), 64);
  bool found = false;
  for (Eigen::Index s = 0; s < six.rows(); ++s) found = found || CountVector(six.row(s).transpose()) == e6;
  CHECK(found);
  CHECK(static_cast<std::size_t>(six.rows()) == oracle::feasible_set(testing::to_rows(a), testing::to_counts(a.apply(e6))).size());
}

TEST_CASE("property: enumerated vectors are distinct and in lexicographic order") {
  const RoutingMatrix a = testing::four_node_matrix();
  const Partition p = partition(a);
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    CountVector x(12);
    for (int j = 0; j < 12; ++j) x(j) = rng.uniform_int(0, 3);
    const CountMatrix all = enumerate_feasible(p, a.apply(x), 64);
    for (Eigen::Index s = 1; s < all.rows(); ++s) {
      const auto prev = all.row(s - 1);
      const auto cur = all.row(s);
      CHECK(std::lexicographical_compare(prev.data(), prev.data() + 12, cur.data(), cur.data() + 12));
    }
  }
}
