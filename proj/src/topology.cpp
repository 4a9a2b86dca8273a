#include "nettomo/topology.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "nettomo/errors.hpp"
#include "nettomo/linalg.hpp"

namespace nettomo {

namespace {

std::vector<bool> reachable_from(std::size_t start, std::size_t n, const std::vector<Link>& links, bool reverse) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& l : links) {
    if (reverse) adj[l.to].push_back(l.from);
    else adj[l.from].push_back(l.to);
  }
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (const std::size_t v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

}  // namespace

Network::Network(std::vector<std::string> nodes, std::vector<Link> links, std::vector<SdPath> paths)
    : nodes_(std::move(nodes)), links_(std::move(links)), paths_(std::move(paths)) {
  const std::size_t n = nodes_.size();
  if (n < 2) throw InvalidTopology("network needs at least two nodes");
  {
    std::set<std::string> names(nodes_.begin(), nodes_.end());
    if (names.size() != n) throw InvalidTopology("duplicate node name");
  }

  std::set<std::pair<std::size_t, std::size_t>> seen_links;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const auto& l = links_[i];
    if (l.from >= n || l.to >= n) throw InvalidTopology("link " + std::to_string(i) + " references an unknown node");
    if (l.from == l.to) throw InvalidTopology("link " + std::to_string(i) + " is a self-loop");
    if (!seen_links.insert({l.from, l.to}).second) {
      throw InvalidTopology("link " + std::to_string(i) + " duplicates an earlier link");
    }
  }

  std::set<std::pair<std::size_t, std::size_t>> seen_pairs;
  for (std::size_t j = 0; j < paths_.size(); ++j) {
    const auto& p = paths_[j];
    const std::string where = "path " + std::to_string(j);
    if (p.src >= n || p.dst >= n) throw InvalidTopology(where + " references an unknown node");
    if (p.src == p.dst) throw InvalidTopology(where + " has identical source and destination");
    if (!seen_pairs.insert({p.src, p.dst}).second) throw InvalidTopology(where + " routes an SD pair twice");
    if (p.links.empty()) throw InvalidTopology(where + " has no links");
    std::size_t at = p.src;
    std::set<std::size_t> used;
    for (const std::size_t li : p.links) {
      if (li >= links_.size()) throw InvalidTopology(where + " references unknown link " + std::to_string(li));
      if (links_[li].from != at) throw InvalidTopology(where + " is not a contiguous walk");
      if (!used.insert(li).second) throw InvalidTopology(where + " repeats link " + std::to_string(li));
      at = links_[li].to;
    }
    if (at != p.dst) throw InvalidTopology(where + " does not end at its destination");
  }

  const auto fwd = reachable_from(0, n, links_, false);
  const auto bwd = reachable_from(0, n, links_, true);
  for (std::size_t v = 0; v < n; ++v) {
    if (!fwd[v] || !bwd[v]) throw InvalidTopology("network is not strongly connected (node '" + nodes_[v] + "')");
  }
}

bool Network::routes_all_pairs() const {
  return static_cast<std::int64_t>(paths_.size()) == sd_pair_count(static_cast<std::int64_t>(nodes_.size()));
}

std::string Network::link_label(std::size_t link) const {
  return nodes_.at(links_.at(link).from) + "->" + nodes_.at(links_.at(link).to);
}

std::string Network::path_label(std::size_t path) const {
  const auto& p = paths_.at(path);
  std::string out = nodes_.at(p.src);
  for (const std::size_t li : p.links) out += "->" + nodes_.at(links_.at(li).to);
  return out;
}

Network Network::from_json(const nlohmann::json& doc) {
  try {
    std::vector<std::string> nodes = doc.at("nodes").get<std::vector<std::string>>();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i], i);
    auto lookup = [&](const std::string& name) {
      const auto it = index.find(name);
      if (it == index.end()) throw InvalidTopology("unknown node '" + name + "'");
      return it->second;
    };

    std::vector<Link> links;
    for (const auto& l : doc.at("links")) {
      if (!l.is_array() || l.size() != 2) throw InvalidTopology("each link must be a [from, to] pair");
      links.push_back({lookup(l[0].get<std::string>()), lookup(l[1].get<std::string>())});
    }

    std::vector<SdPath> paths;
    for (const auto& p : doc.at("paths")) {
      SdPath sp;
      sp.src = lookup(p.at("src").get<std::string>());
      sp.dst = lookup(p.at("dst").get<std::string>());
      for (const auto& li : p.at("links")) {
        if (!li.is_number_integer() || li.get<std::int64_t>() < 0) {
          throw InvalidTopology("link indices must be nonnegative integers");
        }
        sp.links.push_back(li.get<std::size_t>());
      }
      paths.push_back(std::move(sp));
    }
    return Network(std::move(nodes), std::move(links), std::move(paths));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidTopology(std::string("malformed topology document: ") + e.what());
  }
}

Network Network::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidTopology("cannot open topology file '" + file.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidTopology("cannot parse topology file '" + file.string() + "': " + e.what());
  }
  return from_json(doc);
}

nlohmann::json Network::to_json() const {
  nlohmann::json doc;
  doc["nodes"] = nodes_;
  doc["links"] = nlohmann::json::array();
  for (const auto& l : links_) doc["links"].push_back({nodes_[l.from], nodes_[l.to]});
  doc["paths"] = nlohmann::json::array();
  for (const auto& p : paths_) {
    doc["paths"].push_back({{"src", nodes_[p.src]}, {"dst", nodes_[p.dst]}, {"links", p.links}});
  }
  return doc;
}

Network four_node_network() {
  // Links Y1..Y7 and routes X1..X12.
  enum : std::size_t { a, b, c, d };
  std::vector<Link> links = {{a, b}, {a, c}, {b, a}, {b, c}, {c, b}, {c, d}, {d, c}};
  std::vector<SdPath> paths = {
      {a, b, {0}},        // X1  a->b
      {a, c, {1}},        // X2  a->c
      {a, d, {1, 5}},     // X3  a->c->d
      {b, a, {2}},        // X4  b->a
      {b, c, {3}},        // X5  b->c
      {b, d, {2, 1, 5}},  // X6  b->a->c->d
      {c, a, {4, 2}},     // X7  c->b->a
      {c, b, {4}},        // X8  c->b
      {c, d, {5}},        // X9  c->d
      {d, a, {6, 4, 2}},  // X10 d->c->b->a
      {d, b, {6, 4}},     // X11 d->c->b
      {d, c, {6}},        // X12 d->c
  };
  return Network({"a", "b", "c", "d"}, std::move(links), std::move(paths));
}

std::int64_t sd_pair_count(std::int64_t n) {
  if (n < 2) throw InvalidTopology("sd_pair_count: need at least two nodes");
  return (n - 1) * n;
}

RoutingMatrix::RoutingMatrix(Eigen::MatrixXi entries) : entries_(std::move(entries)) {
  for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
    for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
      const int v = entries_(i, j);
      if (v != 0 && v != 1) throw InvalidTopology("routing matrix entries must be 0 or 1");
    }
  }
  real_ = entries_.cast<double>();
}

std::vector<std::size_t> RoutingMatrix::zero_rows() const {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < rows(); ++i) {
    if (entries_.row(i).sum() == 0) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

std::vector<std::size_t> RoutingMatrix::zero_cols() const {
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < cols(); ++j) {
    if (entries_.col(j).sum() == 0) out.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

void RoutingMatrix::validate_structure() const {
  if (const auto zr = zero_rows(); !zr.empty()) {
    throw InvalidTopology("link " + std::to_string(zr.front()) + " carries no route");
  }
  if (const auto zc = zero_cols(); !zc.empty()) {
    throw InvalidTopology("SD pair " + std::to_string(zc.front()) + " is not connected by a path");
  }
}

CountVector RoutingMatrix::apply(const CountVector& x) const {
  if (x.size() != cols()) throw DimensionMismatch("route vector length does not match routing matrix");
  return entries_.cast<Count>() * x;
}

RoutingMatrix build_routing_matrix(const Network& net) {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(net.link_count()),
                                            static_cast<Eigen::Index>(net.pair_count()));
  for (std::size_t j = 0; j < net.pair_count(); ++j) {
    for (const std::size_t li : net.paths()[j].links) {
      if (li >= net.link_count()) throw InvalidTopology("path references unknown link");
      a(static_cast<Eigen::Index>(li), static_cast<Eigen::Index>(j)) = 1;
    }
  }
  RoutingMatrix out(std::move(a));
  out.validate_structure();
  return out;
}

bool check_identifiability(const RoutingMatrix& a) {
  if (!a.zero_cols().empty()) return false;
  std::set<std::vector<int>> distinct;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    std::vector<int> col(a.entries().col(j).data(), a.entries().col(j).data() + a.rows());
    if (!distinct.insert(std::move(col)).second) return false;
  }
  return true;
}

bool check_capacity_bound(const RoutingMatrix& a) {
  const auto r = a.rows();
  if (r >= 62) return false;
  const std::int64_t limit = (std::int64_t{1} << r) - 1;
  return static_cast<std::int64_t>(a.cols()) > limit;
}

Partition partition(const RoutingMatrix& a) {
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  if (r == 0) throw InvalidTopology("partition: routing matrix has no rows");

  const PivotedQr qr = pivoted_qr(a.real());
  if (qr.rank < r) {
    // Pivoting on the rows instead names a maximal independent row set;
    // whatever it leaves out is redundant.
    const PivotedQr rows_qr = pivoted_qr(a.real().transpose());
    std::vector<std::size_t> redundant;
    for (std::size_t k = static_cast<std::size_t>(rows_qr.rank); k < rows_qr.pivots.size(); ++k) {
      redundant.push_back(static_cast<std::size_t>(rows_qr.pivots[k]));
    }
    std::sort(redundant.begin(), redundant.end());
    throw RankDeficient("routing matrix has rank " + std::to_string(qr.rank) + " < " + std::to_string(r) +
                            " rows; one or more rows can be deleted",
                        std::move(redundant));
  }

  Partition p;
  p.routing_ = a;
  p.pivot_cols_.assign(qr.pivots.begin(), qr.pivots.begin() + r);
  p.free_cols_.assign(qr.pivots.begin() + r, qr.pivots.end());
  std::sort(p.pivot_cols_.begin(), p.pivot_cols_.end());
  std::sort(p.free_cols_.begin(), p.free_cols_.end());
  p.perm_ = p.pivot_cols_;
  p.perm_.insert(p.perm_.end(), p.free_cols_.begin(), p.free_cols_.end());

  p.a1_.resize(r, r);
  p.a2_.resize(r, c - r);
  for (Eigen::Index k = 0; k < r; ++k) p.a1_.col(k) = a.real().col(p.pivot_cols_[static_cast<std::size_t>(k)]);
  for (Eigen::Index k = 0; k < c - r; ++k) p.a2_.col(k) = a.real().col(p.free_cols_[static_cast<std::size_t>(k)]);

  const Eigen::FullPivLU<Matrix> lu(p.a1_);
  if (!lu.isInvertible()) throw NumericError("partition: pivot block is singular");
  p.a1_inv_ = lu.inverse();
  const double err = (p.a1_ * p.a1_inv_ - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
  if (err > 1e-10) throw NumericError("partition: pivot block inverse is inaccurate");
  p.a1_inv_a2_ = p.a1_inv_ * p.a2_;
  return p;
}

CountVector Partition::assemble(const CountVector& x1, const CountVector& x2) const {
  if (x1.size() != static_cast<Eigen::Index>(pivot_cols_.size()) ||
      x2.size() != static_cast<Eigen::Index>(free_cols_.size())) {
    throw DimensionMismatch("assemble: partition block sizes do not match");
  }
  CountVector x(cols());
  for (std::size_t k = 0; k < pivot_cols_.size(); ++k) x(pivot_cols_[k]) = x1(static_cast<Eigen::Index>(k));
  for (std::size_t k = 0; k < free_cols_.size(); ++k) x(free_cols_[k]) = x2(static_cast<Eigen::Index>(k));
  return x;
}

CountVector Partition::free_part(const CountVector& x) const {
  if (x.size() != cols()) throw DimensionMismatch("free_part: route vector has wrong length");
  CountVector out(free_count());
  for (std::size_t k = 0; k < free_cols_.size(); ++k) out(static_cast<Eigen::Index>(k)) = x(free_cols_[k]);
  return out;
}

CountVector Partition::pivot_part(const CountVector& x) const {
  if (x.size() != cols()) throw DimensionMismatch("pivot_part: route vector has wrong length");
  CountVector out(rows());
  for (std::size_t k = 0; k < pivot_cols_.size(); ++k) out(static_cast<Eigen::Index>(k)) = x(pivot_cols_[k]);
  return out;
}

Vector solve_x1(const Partition& p, const CountVector& y, const CountVector& x2) {
  if (y.size() != p.rows()) throw DimensionMismatch("solve_x1: link vector has wrong length");
  if (x2.size() != p.free_count()) throw DimensionMismatch("solve_x1: free vector has wrong length");
  const Vector rhs = y.cast<double>() - p.a2() * x2.cast<double>();
  return p.a1_inv() * rhs;
}

}  // namespace nettomo
