#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "tgnseal/errors.hpp"
#include "tgnseal/kernels.hpp"

using namespace tgnseal::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 3.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("avx2 kernels match the scalar reference bit for bit") {
  const KernelTable* simd = avx2_table();
  if (simd == nullptr) {
    MESSAGE("AVX2 unavailable, only the scalar table is exercised");
    return;
  }
  const KernelTable& ref = scalar_table();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(0, 37);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = dim(rng), k = dim(rng), m = dim(rng);
    const auto a = random_vec(n * k, rng), b = random_vec(k * m, rng);
    std::vector<double> c1(n * m, 7.0), c2(n * m, -7.0);
    ref.matmul(a.data(), b.data(), c1.data(), n, k, m);
    simd->matmul(a.data(), b.data(), c2.data(), n, k, m);
    REQUIRE(bit_equal(c1, c2));

    const std::size_t len = dim(rng) * 3;
    const auto x = random_vec(len, rng), y = random_vec(len, rng);
    const double alpha = x.empty() ? 0.5 : x[0];
    std::vector<double> r1 = y, r2 = y;
    ref.accumulate(x.data(), r1.data(), len);
    simd->accumulate(x.data(), r2.data(), len);
    REQUIRE(bit_equal(r1, r2));
    ref.axpy(alpha, x.data(), r1.data(), len);
    simd->axpy(alpha, x.data(), r2.data(), len);
    REQUIRE(bit_equal(r1, r2));
    ref.add(x.data(), y.data(), r1.data(), len);
    simd->add(x.data(), y.data(), r2.data(), len);
    REQUIRE(bit_equal(r1, r2));
    ref.mul(x.data(), y.data(), r1.data(), len);
    simd->mul(x.data(), y.data(), r2.data(), len);
    REQUIRE(bit_equal(r1, r2));
    ref.scale(alpha, r1.data(), len);
    simd->scale(alpha, r2.data(), len);
    REQUIRE(bit_equal(r1, r2));
  }
}

TEST_CASE("matmul reference values") {
  const std::vector<double> a{1, 2, 3, 4, 5, 6};  // 2x3
  const std::vector<double> b{7, 8, 9, 10, 11, 12};  // 3x2
  std::vector<double> c(4);
  scalar_table().matmul(a.data(), b.data(), c.data(), 2, 3, 2);
  CHECK(c == std::vector<double>{58, 64, 139, 154});
}

TEST_CASE("isa selection") {
  const Isa before = active_isa();
  set_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  CHECK(isa_name(Isa::scalar) == "scalar");
  if (avx2_table() == nullptr) CHECK_THROWS_AS(set_isa(Isa::avx2), tgnseal::ConfigError);
  set_isa(before);
  CHECK(active_isa() == before);
}
