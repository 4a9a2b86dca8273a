#pragma once

#include <vector>

#include "nettomo/types.hpp"

namespace nettomo {

// Householder QR with greedy column pivoting: at every step the remaining
// column with the largest residual norm moves to the front, ties going to the
// lowest original column index.
struct PivotedQr {
  std::vector<Eigen::Index> pivots;  // pivots[k] = original index of column k of R
  Vector diag;                       // |R(k,k)|, non-increasing
  Eigen::Index rank = 0;
};

// Entries of diag below rel_tol * diag[0] are treated as zero.
PivotedQr pivoted_qr(const Matrix& a, double rel_tol = 1e-10);

struct NnlsResult {
  Vector x;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = true;
};

// Lawson-Hanson active-set solver for min ||Ax - b|| subject to x >= 0.
NnlsResult nnls(const Matrix& a, const Vector& b, int max_iterations = 0);

}  // namespace nettomo
