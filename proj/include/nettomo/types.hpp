#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace nettomo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Route and link counts are packet counts per measurement period.
using Count = std::int64_t;
using CountVector = Eigen::Matrix<Count, Eigen::Dynamic, 1>;
// One period per row.
using CountMatrix = Eigen::Matrix<Count, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// |round(v) - v| below this classifies a solved route count as integral.
inline constexpr double kIntegralityTol = 1e-9;

}  // namespace nettomo
