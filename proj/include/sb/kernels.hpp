#pragma once

// Dense inner loops with a scalar reference and an AVX2+FMA variant.
// The variant is chosen once at first use from CPU detection; setting
// SB_KERNELS=scalar in the environment pins the scalar path.

#include <cstddef>
#include <span>
#include <string_view>

namespace sb::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);
bool isa_available(Isa isa);
Isa active_isa();
// Switches the process-wide kernel table. Throws if the ISA is unavailable.
void force_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// y = A x, A row-major rows x cols
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y);
// y = x^T A, A row-major rows x cols
void vecmat(std::span<const double> x, std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<double> y);
// A += alpha * x y^T
void rank1_update(double alpha, std::span<const double> x, std::span<const double> y, std::span<double> a);
double max_abs(std::span<const double> x);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void vecmat(const double* x, const double* a, std::size_t rows, std::size_t cols, double* y);
void rank1_update(double alpha, const double* x, std::size_t rows, const double* y, std::size_t cols, double* a);
double max_abs(const double* x, std::size_t n);
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void vecmat(const double* x, const double* a, std::size_t rows, std::size_t cols, double* y);
void rank1_update(double alpha, const double* x, std::size_t rows, const double* y, std::size_t cols, double* a);
double max_abs(const double* x, std::size_t n);
}  // namespace avx2

}  // namespace sb::kernels
