#pragma once

#include <Eigen/LU>
#include <cstddef>
#include <optional>

#include "sb/common.hpp"

namespace sb::linalg {

inline constexpr std::size_t kDenseLimit = 4096;
inline constexpr std::size_t kDefaultPowerCap = std::size_t{1} << 16;

struct AbsorptionCertificate {
  bool absorbing = false;
  std::size_t k0 = 0;  // smallest doubling power with ||P^k0||_inf <= 1/2
  double norm = 0.0;   // ||P^k0||_inf, or the last norm seen when not absorbing
};

// ||P^k||_inf for a non-negative P equals the largest entry of P^k 1.
AbsorptionCertificate absorption_certificate(const Matrix& p, std::size_t power_cap = kDefaultPowerCap);

// Solves (I - P) x = b or (I - P)^T x = b. Dense LU up to kDenseLimit
// states, truncated Neumann summation above.
class ResolventSolver {
 public:
  explicit ResolventSolver(const Matrix& p, double neumann_tol = 1e-12);

  Vector solve(const Vector& b) const;
  Vector solve_transpose(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  Matrix solve_transpose(const Matrix& b) const;
  Matrix inverse() const;

  bool dense() const { return lu_.has_value(); }
  std::size_t size() const { return n_; }

 private:
  Vector neumann(const Vector& b, bool transpose) const;

  std::size_t n_ = 0;
  Matrix p_;  // kept only for the Neumann path
  double tol_;
  std::optional<Eigen::PartialPivLU<Matrix>> lu_;
  std::size_t neumann_cap_ = 0;
};

double min_eigenvalue(const Matrix& symmetric);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace sb::linalg
