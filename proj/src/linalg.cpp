#include "nettomo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nettomo {

PivotedQr pivoted_qr(const Matrix& a, double rel_tol) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  const Eigen::Index steps = std::min(m, n);

  Matrix r = a;
  PivotedQr out;
  out.pivots.resize(static_cast<std::size_t>(n));
  std::iota(out.pivots.begin(), out.pivots.end(), Eigen::Index{0});
  out.diag = Vector::Zero(steps);

  for (Eigen::Index k = 0; k < steps; ++k) {
    // Residual norms are recomputed rather than downdated; the matrices here
    // are small and this keeps the pivot order exact.
    Eigen::Index best = k;
    double best_norm = -1.0;
    for (Eigen::Index j = k; j < n; ++j) {
      const double nrm = r.col(j).tail(m - k).norm();
      const double slack = 1e-12 * std::max(best_norm, 0.0);
      const bool larger = nrm > best_norm + slack;
      const bool tie = std::abs(nrm - best_norm) <= slack &&
                       out.pivots[static_cast<std::size_t>(j)] < out.pivots[static_cast<std::size_t>(best)];
      if (larger || tie) {
        best = j;
        best_norm = nrm;
      }
    }
    if (best != k) {
      r.col(k).swap(r.col(best));
      std::swap(out.pivots[static_cast<std::size_t>(k)], out.pivots[static_cast<std::size_t>(best)]);
    }

    auto x = r.col(k).tail(m - k);
    const double alpha = x.norm();
    if (alpha == 0.0) {
      out.diag(k) = 0.0;
      continue;
    }
    Vector v = x;
    v(0) += (v(0) >= 0.0 ? alpha : -alpha);
    const double vnorm2 = v.squaredNorm();
    auto block = r.bottomRightCorner(m - k, n - k);
    block.noalias() -= v * ((2.0 / vnorm2) * (v.transpose() * block));
    out.diag(k) = std::abs(r(k, k));
  }

  const double top = steps > 0 ? out.diag(0) : 0.0;
  out.rank = 0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    if (top > 0.0 && out.diag(k) > rel_tol * top) ++out.rank;
    else break;
  }
  return out;
}

NnlsResult nnls(const Matrix& a, const Vector& b, int max_iterations) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 30);

  NnlsResult out;
  out.x = Vector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(m, n));

  auto solve_passive = [&](Vector& s) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    Matrix sub(m, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t t = 0; t < idx.size(); ++t) sub.col(static_cast<Eigen::Index>(t)) = a.col(idx[t]);
    const Vector z = sub.colPivHouseholderQr().solve(b);
    s = Vector::Zero(n);
    for (std::size_t t = 0; t < idx.size(); ++t) s(idx[t]) = z(static_cast<Eigen::Index>(t));
  };

  Vector w = a.transpose() * (b - a * out.x);
  int outer = 0;
  for (;;) {
    Eigen::Index t = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > wmax) {
        wmax = w(j);
        t = j;
      }
    }
    if (t < 0) break;
    if (++outer > max_iterations) {
      out.converged = false;
      break;
    }
    passive[static_cast<std::size_t>(t)] = true;

    Vector s;
    for (;;) {
      solve_passive(s);
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
          const double gap = out.x(j) - s(j);
          alpha = std::min(alpha, gap > 0.0 ? out.x(j) / gap : 0.0);
        }
      }
      if (!std::isfinite(alpha)) break;
      out.x += alpha * (s - out.x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && out.x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          out.x(j) = 0.0;
        }
      }
    }
    out.x = s;
    w = a.transpose() * (b - a * out.x);
  }
  out.iterations = outer;
  out.residual_norm = (a * out.x - b).norm();
  return out;
}

}  // namespace nettomo
