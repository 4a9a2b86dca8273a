#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nettomo/types.hpp"

namespace nettomo {

struct Link {
  std::size_t from = 0;
  std::size_t to = 0;
};

// Fixed route for one source-destination pair, as an ordered walk over links.
struct SdPath {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::vector<std::size_t> links;
};

/// Directed network with fixed, known routes.
///
/// The constructor validates the description: every link joins two known
/// nodes and appears once, every path is a contiguous walk from its source
/// to its destination, no SD pair is routed twice, and the link graph is
/// strongly connected. Path order is the column order of the routing matrix.
class Network {
 public:
  Network(std::vector<std::string> nodes, std::vector<Link> links, std::vector<SdPath> paths);

  // `{ "nodes": [...], "links": [["a","b"], ...], "paths": [{"src","dst","links":[...]}] }`
  static Network from_json(const nlohmann::json& doc);
  static Network load(const std::filesystem::path& file);
  nlohmann::json to_json() const;

  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  const std::vector<SdPath>& paths() const noexcept { return paths_; }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t link_count() const noexcept { return links_.size(); }
  std::size_t pair_count() const noexcept { return paths_.size(); }
  // True when every ordered node pair has a route, i.e. c = (n-1)n.
  bool routes_all_pairs() const;

  std::string link_label(std::size_t link) const;
  std::string path_label(std::size_t path) const;

 private:
  std::vector<std::string> nodes_;
  std::vector<Link> links_;
  std::vector<SdPath> paths_;
};

// The four-node, seven-link example network with its twelve fixed routes.
Network four_node_network();

// (n - 1) n directed SD pairs on n nodes.
std::int64_t sd_pair_count(std::int64_t n);

/// r x c (0,1) matrix; entry (i, j) = 1 iff link i lies on the route of SD pair j.
///
/// Construction only enforces binary entries. Zero rows and zero columns are
/// representable so that the identifiability checks can be run on arbitrary
/// candidate matrices; `validate_structure` rejects them.
class RoutingMatrix {
 public:
  RoutingMatrix() = default;
  explicit RoutingMatrix(Eigen::MatrixXi entries);

  Eigen::Index rows() const noexcept { return entries_.rows(); }
  Eigen::Index cols() const noexcept { return entries_.cols(); }
  const Eigen::MatrixXi& entries() const noexcept { return entries_; }
  const Matrix& real() const noexcept { return real_; }
  int operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

  std::vector<std::size_t> zero_rows() const;
  std::vector<std::size_t> zero_cols() const;
  // Throws InvalidTopology on any zero row or zero column.
  void validate_structure() const;

  CountVector apply(const CountVector& x) const;

 private:
  Eigen::MatrixXi entries_;
  Matrix real_;
};

RoutingMatrix build_routing_matrix(const Network& net);

// All columns pairwise distinct and nonzero.
bool check_identifiability(const RoutingMatrix& a);

// True when c > 2^r - 1, i.e. some rates cannot be separated.
bool check_capacity_bound(const RoutingMatrix& a);

/// Column split A P = [A1 | A2] with A1 square and nonsingular.
///
/// A1 holds the r columns chosen by pivoted QR (stored in ascending original
/// index), A2 the remaining c - r "free" columns (also ascending). The inverse
/// of A1 is computed once here; `solve_x1` is then a matrix-vector product.
class Partition {
 public:
  const std::vector<Eigen::Index>& perm() const noexcept { return perm_; }
  const std::vector<Eigen::Index>& pivot_cols() const noexcept { return pivot_cols_; }
  const std::vector<Eigen::Index>& free_cols() const noexcept { return free_cols_; }
  const Matrix& a1() const noexcept { return a1_; }
  const Matrix& a2() const noexcept { return a2_; }
  const Matrix& a1_inv() const noexcept { return a1_inv_; }
  // A1^{-1} A2, the sensitivity of X1 to each free coordinate.
  const Matrix& a1_inv_a2() const noexcept { return a1_inv_a2_; }
  const RoutingMatrix& routing() const noexcept { return routing_; }

  Eigen::Index rows() const noexcept { return routing_.rows(); }
  Eigen::Index cols() const noexcept { return routing_.cols(); }
  Eigen::Index free_count() const noexcept { return static_cast<Eigen::Index>(free_cols_.size()); }

  // Reassemble a full route vector (original column order) from X1 and X2.
  CountVector assemble(const CountVector& x1, const CountVector& x2) const;
  CountVector free_part(const CountVector& x) const;
  CountVector pivot_part(const CountVector& x) const;

 private:
  friend Partition partition(const RoutingMatrix& a);

  RoutingMatrix routing_;
  std::vector<Eigen::Index> perm_;
  std::vector<Eigen::Index> pivot_cols_;
  std::vector<Eigen::Index> free_cols_;
  Matrix a1_;
  Matrix a2_;
  Matrix a1_inv_;
  Matrix a1_inv_a2_;
};

// Throws RankDeficient, listing redundant rows, when rank(A) < r.
Partition partition(const RoutingMatrix& a);

// X1 = A1^{-1} (Y - A2 X2). Feasibility of the result is the caller's concern.
Vector solve_x1(const Partition& p, const CountVector& y, const CountVector& x2);

}  // namespace nettomo
