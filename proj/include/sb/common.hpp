#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string_view>

namespace sb {

inline constexpr std::string_view kVersion = "0.3.0";

// Non-terminal state index. The terminal state is never stored.
using StateId = std::uint32_t;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace sb
