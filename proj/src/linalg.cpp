#include "sb/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <span>

#include "sb/error.hpp"
#include "sb/kernels.hpp"

namespace sb::linalg {

namespace {

std::span<const double> flat(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

std::span<double> span_of(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

AbsorptionCertificate absorption_certificate(const Matrix& p, std::size_t power_cap) {
  const auto n = static_cast<std::size_t>(p.rows());
  AbsorptionCertificate cert;
  if (n == 0) {
    cert.absorbing = true;
    cert.k0 = 1;
    return cert;
  }
  Vector survival = Vector::Ones(static_cast<Eigen::Index>(n));
  Vector next(survival.size());
  std::size_t k = 0;
  std::size_t checkpoint = 1;
  while (checkpoint <= power_cap) {
    for (; k < checkpoint; ++k) {
      kernels::gemv(flat(p), n, n, span_of(survival), span_of(next));
      survival.swap(next);
    }
    cert.norm = kernels::max_abs(span_of(survival));
    if (cert.norm <= 0.5) {
      cert.absorbing = true;
      cert.k0 = checkpoint;
      return cert;
    }
    checkpoint *= 2;
  }
  cert.k0 = power_cap;
  return cert;
}

ResolventSolver::ResolventSolver(const Matrix& p, double neumann_tol)
    : n_(static_cast<std::size_t>(p.rows())), tol_(neumann_tol) {
  const std::size_t n = n_;
  if (p.rows() != p.cols()) throw Error(ErrorCode::InvalidArgument, "transition matrix must be square");
  if (n <= kDenseLimit) {
    Matrix a = Matrix::Identity(p.rows(), p.cols()) - p;
    lu_.emplace(a);
    const double rc = lu_->rcond();
    if (!(rc > 1e-14)) throw Error(ErrorCode::SingularSystem, "I - P is numerically singular");
  } else {
    const auto cert = absorption_certificate(p);
    if (!cert.absorbing) throw Error(ErrorCode::SingularSystem, "Neumann series does not decay");
    p_ = p;
    neumann_cap_ = static_cast<std::size_t>(10.0 * static_cast<double>(cert.k0) * std::log(1.0 / tol_)) + 1;
  }
}

Vector ResolventSolver::neumann(const Vector& b, bool transpose) const {
  const auto n = static_cast<std::size_t>(p_.rows());
  Vector term = b;
  Vector sum = b;
  Vector next(b.size());
  for (std::size_t k = 0; k < neumann_cap_; ++k) {
    if (transpose) {
      kernels::vecmat(span_of(term), flat(p_), n, n, span_of(next));
    } else {
      kernels::gemv(flat(p_), n, n, span_of(term), span_of(next));
    }
    term.swap(next);
    sum += term;
    if (kernels::max_abs(span_of(term)) <= tol_ * std::max(1.0, kernels::max_abs(span_of(sum)))) return sum;
  }
  throw Error(ErrorCode::SingularSystem, "Neumann summation did not reach tolerance within its cap");
}

Vector ResolventSolver::solve(const Vector& b) const {
  if (lu_) return lu_->solve(b);
  return neumann(b, false);
}

Vector ResolventSolver::solve_transpose(const Vector& b) const {
  if (lu_) return lu_->transpose().solve(b);
  return neumann(b, true);
}

Matrix ResolventSolver::solve(const Matrix& b) const {
  if (lu_) return lu_->solve(b);
  Matrix out(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) out.col(c) = neumann(b.col(c), false);
  return out;
}

Matrix ResolventSolver::solve_transpose(const Matrix& b) const {
  if (lu_) return lu_->transpose().solve(b);
  Matrix out(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) out.col(c) = neumann(b.col(c), true);
  return out;
}

Matrix ResolventSolver::inverse() const {
  const auto n = static_cast<Eigen::Index>(n_);
  return solve(Matrix(Matrix::Identity(n, n)));
}

double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::MatrixXd s = 0.5 * (symmetric + symmetric.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace sb::linalg
