#include "nettomo/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "nettomo/errors.hpp"
#include "nettomo/rng.hpp"
#include "feasible_walk.hpp"

namespace nettomo {

RateVector::RateVector(Vector rates) : rates_(std::move(rates)) {
  for (Eigen::Index j = 0; j < rates_.size(); ++j) {
    if (!(rates_(j) > 0.0) || !std::isfinite(rates_(j))) {
      throw DomainError("rates must be positive and finite (entry " + std::to_string(j) + ")");
    }
  }
}

RateVector RateVector::constant(Eigen::Index c, double rate) { return RateVector(Vector::Constant(c, rate)); }

TrafficSample sample_sd_traffic(const RateVector& lambda, Eigen::Index k_periods, std::uint64_t seed) {
  if (k_periods < 1) throw DomainError("sample_sd_traffic: need at least one period");
  Rng rng(seed);
  TrafficSample s;
  s.seed = seed;
  s.x.resize(k_periods, lambda.size());
  for (Eigen::Index k = 0; k < k_periods; ++k) {
    for (Eigen::Index j = 0; j < lambda.size(); ++j) s.x(k, j) = rng.poisson(lambda[j]);
  }
  return s;
}

CountMatrix link_counts(const RoutingMatrix& a, const CountMatrix& x) {
  if (x.cols() != a.cols()) throw DimensionMismatch("link_counts: route matrix has wrong column count");
  return x * a.entries().cast<Count>().transpose();
}

bool is_nonneg_integral(double v) {
  const double r = std::round(v);
  return r >= 0.0 && std::abs(r - v) <= kIntegralityTol;
}

std::uint64_t enumeration_budget(std::int64_t cap, Eigen::Index free_count) {
  if (cap < 1) return 1;
  std::uint64_t budget = 1;
  const auto base = static_cast<std::uint64_t>(cap);
  for (Eigen::Index i = 0; i < free_count; ++i) {
    if (budget > std::numeric_limits<std::uint64_t>::max() / base) return std::numeric_limits<std::uint64_t>::max();
    budget *= base;
  }
  return budget;
}

CountMatrix enumerate_feasible(const Partition& p, const CountVector& y, std::int64_t cap, EnumerationStats* stats) {
  detail::FeasibleWalk walk(p, y, enumeration_budget(cap, p.free_count()));
  const Eigen::Index f = p.free_count();
  std::vector<CountVector> found;
  walk.run([&](const Vector& base, const CountVector& x2, Count lo, Count hi) {
    CountVector x2t = x2;
    CountVector x1(base.size());
    for (Count t = lo; t <= hi; ++t) {
      bool ok = true;
      for (Eigen::Index i = 0; i < base.size() && ok; ++i) {
        const double v = f > 0 ? base(i) - static_cast<double>(t) * p.a1_inv_a2()(i, f - 1) : base(i);
        ok = is_nonneg_integral(v);
        if (ok) x1(i) = static_cast<Count>(std::llround(v));
      }
      if (!ok) continue;
      if (f > 0) x2t(f - 1) = t;
      found.push_back(p.assemble(x1, x2t));
      walk.add_solutions(1);
    }
  });
  if (stats) stats->nodes_visited = walk.nodes();
  std::sort(found.begin(), found.end(), [](const CountVector& lhs, const CountVector& rhs) {
    return std::lexicographical_compare(lhs.begin(), lhs.end(), rhs.begin(), rhs.end());
  });
  CountMatrix out(static_cast<Eigen::Index>(found.size()), p.cols());
  for (std::size_t i = 0; i < found.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = found[i].transpose();
  return out;
}

void write_sample_csv(std::ostream& out, const TrafficSample& s) {
  out << "period,kind,index,count\n";
  for (Eigen::Index k = 0; k < s.periods(); ++k) {
    if (k < s.x.rows()) {
      for (Eigen::Index j = 0; j < s.x.cols(); ++j) out << k << ",x," << j << ',' << s.x(k, j) << '\n';
    }
    if (k < s.y.rows()) {
      for (Eigen::Index i = 0; i < s.y.cols(); ++i) out << k << ",y," << i << ',' << s.y(k, i) << '\n';
    }
  }
}

TrafficSample read_sample_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("sample CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "period,kind,index,count") throw DomainError("sample CSV has unexpected header '" + line + "'");

  std::map<std::pair<Eigen::Index, Eigen::Index>, Count> xs;
  std::map<std::pair<Eigen::Index, Eigen::Index>, Count> ys;
  Eigen::Index periods = 0;
  Eigen::Index xcols = 0;
  Eigen::Index ycols = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string period;
    std::string kind;
    std::string index;
    std::string count;
    if (!std::getline(fields, period, ',') || !std::getline(fields, kind, ',') || !std::getline(fields, index, ',') ||
        !std::getline(fields, count)) {
      throw DomainError("sample CSV line " + std::to_string(lineno) + " has too few fields");
    }
    Eigen::Index k;
    Eigen::Index i;
    Count v;
    try {
      k = static_cast<Eigen::Index>(std::stoll(period));
      i = static_cast<Eigen::Index>(std::stoll(index));
      v = std::stoll(count);
    } catch (const std::exception&) {
      throw DomainError("sample CSV line " + std::to_string(lineno) + " has a non-integer field");
    }
    if (k < 0 || i < 0 || v < 0) throw DomainError("sample CSV line " + std::to_string(lineno) + " is negative");
    periods = std::max(periods, k + 1);
    if (kind == "x") {
      xs[{k, i}] = v;
      xcols = std::max(xcols, i + 1);
    } else if (kind == "y") {
      ys[{k, i}] = v;
      ycols = std::max(ycols, i + 1);
    } else {
      throw DomainError("sample CSV line " + std::to_string(lineno) + " has unknown kind '" + kind + "'");
    }
  }

  auto fill = [periods](const auto& cells, Eigen::Index cols, const char* what) {
    CountMatrix m(cells.empty() ? 0 : periods, cols);
    if (cells.empty()) return m;
    if (static_cast<Eigen::Index>(cells.size()) != periods * cols) {
      throw DomainError(std::string("sample CSV is missing ") + what + " entries");
    }
    for (const auto& [key, v] : cells) m(key.first, key.second) = v;
    return m;
  };
  TrafficSample s;
  s.x = fill(xs, xcols, "x");
  s.y = fill(ys, ycols, "y");
  return s;
}

}  // namespace nettomo
