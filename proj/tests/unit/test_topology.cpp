#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "nettomo/errors.hpp"
#include "nettomo/rng.hpp"
#include "nettomo/topology.hpp"

using namespace nettomo;

TEST_CASE("four-node network routing table") {
  const int expected[7][12] = {
      {1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, {0, 1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0},
      {0, 0, 0, 1, 0, 1, 1, 0, 0, 1, 0, 0}, {0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0},
      {0, 0, 0, 0, 0, 0, 1, 1, 0, 1, 1, 0}, {0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 0},
      {0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1}};
  const RoutingMatrix a = testing::four_node_matrix();
  REQUIRE(a.rows() == 7);
  REQUIRE(a.cols() == 12);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 12; ++j) CHECK(a(i, j) == expected[i][j]);
  }
  CHECK(check_identifiability(a));
  CHECK_FALSE(check_capacity_bound(a));
  CHECK(four_node_network().routes_all_pairs());
  CHECK(four_node_network().path_label(5) == "b->a->c->d");
}

TEST_CASE("sd pair count") {
  CHECK(sd_pair_count(2) == 2);
  CHECK(sd_pair_count(4) == 12);
  CHECK(sd_pair_count(100) == 9900);
  CHECK_THROWS_AS(sd_pair_count(1), InvalidTopology);
}

TEST_CASE("json round trip preserves the routing matrix") {
  const Network net = four_node_network();
  const Network back = Network::from_json(net.to_json());
  CHECK(build_routing_matrix(back).entries() == build_routing_matrix(net).entries());
}

TEST_CASE("topology validation") {
  using nlohmann::json;
  const json base = four_node_network().to_json();

  json broken = base;
  broken["paths"][5]["links"] = json::array({2, 5});
  CHECK_THROWS_AS(Network::from_json(broken), InvalidTopology);

  broken = base;
  broken["links"][0] = json::array({"a", "a"});
  CHECK_THROWS_AS(Network::from_json(broken), InvalidTopology);

  broken = base;
  broken["paths"].push_back(base["paths"][0]);
  CHECK_THROWS_AS(Network::from_json(broken), InvalidTopology);

  broken = base;
  broken["links"][0] = json::array({"a", "z"});
  CHECK_THROWS_AS(Network::from_json(broken), InvalidTopology);

  // A one-way pair of nodes is not strongly connected.
  const json oneway = {{"nodes", {"a", "b"}}, {"links", {{"a", "b"}}}, {"paths", {{{"src", "a"}, {"dst", "b"}, {"links", {0}}}}}};
  CHECK_THROWS_AS(Network::from_json(oneway), InvalidTopology);
}

TEST_CASE("identifiability and capacity checks on small matrices") {
  Eigen::MatrixXi m(2, 3);
  m << 1, 0, 1, 0, 1, 1;
  CHECK(check_identifiability(RoutingMatrix(m)));
  CHECK_FALSE(check_capacity_bound(RoutingMatrix(m)));

  m << 1, 0, 1, 0, 1, 0;  // repeated column
  CHECK_FALSE(check_identifiability(RoutingMatrix(m)));

  m << 1, 0, 0, 0, 1, 0;  // zero column
  CHECK_FALSE(check_identifiability(RoutingMatrix(m)));
  CHECK_THROWS_AS(RoutingMatrix(m).validate_structure(), InvalidTopology);

  Eigen::MatrixXi wide(2, 4);
  wide << 1, 0, 1, 1, 0, 1, 1, 0;
  CHECK(check_capacity_bound(RoutingMatrix(wide)));

  Eigen::MatrixXi bad(1, 2);
  bad << 1, 2;
  CHECK_THROWS_AS(RoutingMatrix{bad}, InvalidTopology);
}

TEST_CASE("partition of the four-node matrix") {
  const Partition p = partition(testing::four_node_matrix());
  CHECK(p.pivot_cols() == std::vector<Eigen::Index>{0, 1, 2, 4, 5, 6, 9});
  CHECK(p.free_cols() == std::vector<Eigen::Index>{3, 7, 8, 10, 11});
  CHECK((p.a1() * p.a1_inv() - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rank-deficient matrices are rejected with the redundant rows") {
  Eigen::MatrixXi m(3, 3);
  m << 1, 1, 0, 0, 0, 1, 1, 1, 0;
  try {
    (void)partition(RoutingMatrix(m));
    FAIL("expected RankDeficient");
  } catch (const RankDeficient& e) {
    CHECK(e.redundant_rows().size() == 1);
  }
}

TEST_CASE("property: solve_x1 inverts A for random route vectors") {
  const RoutingMatrix a = testing::four_node_matrix();
  const Partition p = partition(a);
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    CountVector x(12);
    for (int j = 0; j < 12; ++j) x(j) = rng.uniform_int(0, 200);
    const CountVector y = a.apply(x);
    const Vector x1 = solve_x1(p, y, p.free_part(x));
    const CountVector expect = p.pivot_part(x);
    for (Eigen::Index i = 0; i < x1.size(); ++i) REQUIRE(x1(i) == static_cast<double>(expect(i)));
    CHECK(p.assemble(p.pivot_part(x), p.free_part(x)) == x);
  }
}

TEST_CASE("three-node line network") {
  const Network net = Network::load(NETTOMO_DATA_DIR "/line3.json");
  const RoutingMatrix a = build_routing_matrix(net);
  Eigen::MatrixXi expected(4, 6);
  expected << 1, 1, 0, 0, 0, 0,
              0, 0, 1, 0, 1, 0,
              0, 1, 0, 1, 0, 0,
              0, 0, 0, 0, 1, 1;
  CHECK(a.entries() == expected);
  CHECK(check_identifiability(a));
  CHECK(net.routes_all_pairs());
}

TEST_CASE("a duplicated link row is rank deficient") {
  Eigen::MatrixXi m(8, 12);
  m.topRows(7) = testing::four_node_matrix().entries();
  m.row(7) = m.row(2);
  CHECK_THROWS_AS((void)partition(RoutingMatrix(m)), RankDeficient);
}

TEST_CASE("property: identifiability does not depend on column order") {
  Rng rng(19);
  const RoutingMatrix base = testing::four_node_matrix();
  Eigen::MatrixXi dup = base.entries();
  dup.col(4) = dup.col(9);
  for (const auto& m : {base.entries(), dup}) {
    const bool verdict = check_identifiability(RoutingMatrix(m));
    for (int t = 0; t < 50; ++t) {
      Eigen::PermutationMatrix<Eigen::Dynamic> perm(12);
      perm.setIdentity();
      for (Eigen::Index j = 11; j > 0; --j) std::swap(perm.indices()(j), perm.indices()(rng.uniform_int(0, j)));
      const Eigen::MatrixXi shuffled = m * perm;
      CHECK(check_identifiability(RoutingMatrix(shuffled)) == verdict);
    }
  }
  CHECK_FALSE(check_identifiability(RoutingMatrix(dup)));
}

TEST_CASE("property: the partition keeps every column exactly once") {
  const RoutingMatrix a = testing::four_node_matrix();
  const Partition p = partition(a);
  std::vector<std::vector<int>> original;
  std::vector<std::vector<int>> split;
  for (Eigen::Index j = 0; j < 12; ++j) {
    std::vector<int> col(7);
    for (Eigen::Index i = 0; i < 7; ++i) col[static_cast<std::size_t>(i)] = a(i, j);
    original.push_back(col);
  }
  const Matrix joined = (Matrix(7, 12) << p.a1(), p.a2()).finished();
  for (Eigen::Index j = 0; j < 12; ++j) {
    std::vector<int> col(7);
    for (Eigen::Index i = 0; i < 7; ++i) col[static_cast<std::size_t>(i)] = static_cast<int>(joined(i, j));
    split.push_back(col);
  }
  std::sort(original.begin(), original.end());
  std::sort(split.begin(), split.end());
  CHECK(original == split);
  CHECK(std::abs(p.a1().determinant()) > 0.5);
}
