#pragma once

#include <vector>

#include "nettomo/topology.hpp"
#include "oracles.hpp"

namespace testing {

inline oracle::IntMatrix to_rows(const nettomo::RoutingMatrix& a) {
  oracle::IntMatrix rows(static_cast<std::size_t>(a.rows()), std::vector<int>(static_cast<std::size_t>(a.cols())));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = a(i, j);
  }
  return rows;
}

inline oracle::Counts to_counts(const nettomo::CountVector& v) { return {v.data(), v.data() + v.size()}; }

inline nettomo::RoutingMatrix four_node_matrix() { return nettomo::build_routing_matrix(nettomo::four_node_network()); }

}  // namespace testing
