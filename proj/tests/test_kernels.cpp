#include <cmath>
#include <vector>

#include "doctest.h"
#include "sb/kernels.hpp"
#include "sb/rng.hpp"

using namespace sb;
namespace k = sb::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = 2.0 * rng.uniform() - 1.0;
  return v;
}

struct IsaGuard {
  k::Isa saved = k::active_isa();
  ~IsaGuard() { k::force_isa(saved); }
};

bool close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol * (1.0 + std::abs(a[i]))) return false;
  return true;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar path matches naive loops") {
    IsaGuard guard;
    k::force_isa(k::Isa::Scalar);
    CHECK(k::active_isa() == k::Isa::Scalar);
    const std::vector<double> a{1, 2, 3}, b{4, -5, 6};
    CHECK(k::dot(a, b) == doctest::Approx(12.0));
    std::vector<double> y{1, 1, 1};
    k::axpy(2.0, a, y);
    CHECK(y == std::vector<double>{3, 5, 7});
    const std::vector<double> m{1, 2, 3, 4, 5, 6};  // 2 x 3
    std::vector<double> out(2);
    k::gemv(m, 2, 3, a, out);
    CHECK(out == std::vector<double>{14, 32});
    std::vector<double> out3(3);
    k::vecmat(std::vector<double>{1, -1}, m, 2, 3, out3);
    CHECK(out3 == std::vector<double>{-3, -3, -3});
    std::vector<double> r1(6, 0.0);
    k::rank1_update(1.0, std::vector<double>{1, 2}, a, r1);
    CHECK(r1 == std::vector<double>{1, 2, 3, 2, 4, 6});
    CHECK(k::max_abs(b) == 6.0);
    CHECK(k::max_abs(std::vector<double>{}) == 0.0);
  }

  TEST_CASE("vector variant agrees with the scalar reference") {
    if (!k::isa_available(k::Isa::Avx2)) {
      MESSAGE("AVX2 not available on this host; equivalence check skipped");
      return;
    }
    IsaGuard guard;
    Rng rng(11);
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 17u, 64u, 129u}) {
      const auto a = random_vec(rng, n), b = random_vec(rng, n);
      const std::size_t rows = n % 5 + 1;
      const auto m = random_vec(rng, rows * n), xr = random_vec(rng, rows);

      k::force_isa(k::Isa::Scalar);
      const double d0 = k::dot(a, b);
      auto y0 = b;
      k::axpy(0.7, a, y0);
      std::vector<double> g0(rows), v0(n), r0 = m;
      k::gemv(m, rows, n, a, g0);
      k::vecmat(xr, m, rows, n, v0);
      k::rank1_update(-1.3, xr, a, r0);
      const double mx0 = k::max_abs(a);

      k::force_isa(k::Isa::Avx2);
      const double d1 = k::dot(a, b);
      auto y1 = b;
      k::axpy(0.7, a, y1);
      std::vector<double> g1(rows), v1(n), r1 = m;
      k::gemv(m, rows, n, a, g1);
      k::vecmat(xr, m, rows, n, v1);
      k::rank1_update(-1.3, xr, a, r1);
      const double mx1 = k::max_abs(a);

      CAPTURE(n);
      CHECK(d1 == doctest::Approx(d0).epsilon(1e-12));
      CHECK(close(y0, y1, 1e-14));
      CHECK(close(g0, g1, 1e-12));
      CHECK(close(v0, v1, 1e-12));
      CHECK(close(r0, r1, 1e-14));
      CHECK(mx0 == mx1);
    }
  }

  TEST_CASE("names") {
    CHECK(k::to_string(k::Isa::Scalar) == "scalar");
    CHECK(k::to_string(k::Isa::Avx2) == "avx2");
    CHECK(k::isa_available(k::Isa::Scalar));
  }
}
