#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace dcfair {

// Row-major so that a batch of dataset rows is a contiguous block.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Labels = std::vector<std::uint8_t>;
using RowId = std::int64_t;

}  // namespace dcfair
