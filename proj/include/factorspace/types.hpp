#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace factorspace {

using Index = std::uint32_t;
using ExternalId = std::int64_t;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Row-major storage keeps one item (or one point) contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Non-fatal diagnostics collected by operations that degrade gracefully.
using Warnings = std::vector<std::string>;

}  // namespace factorspace
