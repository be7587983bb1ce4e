#include <atomic>
#include <cstdlib>
#include <cstring>

#include "sb/error.hpp"
#include "sb/kernels.hpp"

namespace sb::kernels {

namespace {

struct Table {
  Isa isa;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*gemv)(const double*, std::size_t, std::size_t, const double*, double*);
  void (*vecmat)(const double*, const double*, std::size_t, std::size_t, double*);
  void (*rank1)(double, const double*, std::size_t, const double*, std::size_t, double*);
  double (*max_abs)(const double*, std::size_t);
};

constexpr Table kScalar{Isa::Scalar,   scalar::dot,          scalar::axpy,   scalar::gemv,
                        scalar::vecmat, scalar::rank1_update, scalar::max_abs};
#if defined(SB_HAVE_AVX2_TU)
constexpr Table kAvx2{Isa::Avx2, avx2::dot, avx2::axpy, avx2::gemv, avx2::vecmat, avx2::rank1_update, avx2::max_abs};
#endif

bool cpu_has_avx2() {
#if defined(SB_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* detect() {
  const char* env = std::getenv("SB_KERNELS");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return &kScalar;
#if defined(SB_HAVE_AVX2_TU)
  if (cpu_has_avx2()) return &kAvx2;
#endif
  return &kScalar;
}

std::atomic<const Table*>& table_slot() {
  static std::atomic<const Table*> slot{detect()};
  return slot;
}

const Table& table() { return *table_slot().load(std::memory_order_acquire); }

void check_len(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::InvalidArgument, "kernel operand length mismatch");
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

Isa active_isa() { return table().isa; }

void force_isa(Isa isa) {
  if (!isa_available(isa)) throw Error(ErrorCode::InvalidArgument, "kernel ISA not available on this CPU");
#if defined(SB_HAVE_AVX2_TU)
  table_slot().store(isa == Isa::Avx2 ? &kAvx2 : &kScalar, std::memory_order_release);
#else
  table_slot().store(&kScalar, std::memory_order_release);
#endif
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_len(a.size(), b.size());
  return table().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_len(x.size(), y.size());
  table().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
  check_len(a.size(), rows * cols);
  check_len(x.size(), cols);
  check_len(y.size(), rows);
  table().gemv(a.data(), rows, cols, x.data(), y.data());
}

void vecmat(std::span<const double> x, std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<double> y) {
  check_len(a.size(), rows * cols);
  check_len(x.size(), rows);
  check_len(y.size(), cols);
  table().vecmat(x.data(), a.data(), rows, cols, y.data());
}

void rank1_update(double alpha, std::span<const double> x, std::span<const double> y, std::span<double> a) {
  check_len(a.size(), x.size() * y.size());
  table().rank1(alpha, x.data(), x.size(), y.data(), y.size(), a.data());
}

double max_abs(std::span<const double> x) { return table().max_abs(x.data(), x.size()); }

}  // namespace sb::kernels
