#include "lord/regularizer.hpp"

#include <cmath>

#include "doctest.h"
#include "lord/rng.hpp"

using namespace lord;

namespace {

// direct summation of the penalty definition, with its own neighbor scan
double penalty_oracle(const ControlGrid& g, double lambda) {
  double acc = 0.0;
  for (int z = 0; z < g.size.nz; ++z)
    for (int y = 0; y < g.size.ny; ++y)
      for (int x = 0; x < g.size.nx; ++x) {
        Vec3 mean{0, 0, 0};
        int count = 0;
        const int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (auto& o : d) {
          const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
          if (g.valid(nx, ny, nz)) {
            mean += g.coeff(nx, ny, nz);
            ++count;
          }
        }
        mean *= 1.0 / count;
        acc += norm2(g.coeff(x, y, z) - mean);
      }
  return -0.5 * lambda * acc;
}

ControlGrid random_grid(std::uint64_t seed) {
  ControlGrid g(1, {5, 4, 3}, 2.0);
  Rng rng(seed);
  for (auto& c : g.coeffs) c = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return g;
}

}  // namespace

TEST_CASE("penalty") {
  SUBCASE("zero and constant grids have zero penalty") {
    ControlGrid g(1, {4, 4, 4}, 1.0);
    CHECK(penalty(g, 1e-4) == 0.0);
    for (auto& c : g.coeffs) c = {2.0, -1.0, 0.25};
    CHECK(penalty(g, 1e-4) == doctest::Approx(0.0).epsilon(1e-16));
  }
  SUBCASE("interior spike matches the direct summation oracle") {
    ControlGrid g(1, {7, 7, 7}, 1.0);
    g.coeff(3, 3, 3) = {1.0, 0.0, 0.0};
    const double lambda = 1e-4;
    const double got = penalty(g, lambda);
    CHECK(got == doctest::Approx(penalty_oracle(g, lambda)).epsilon(1e-14));
    // spike term lambda/2 * 1 plus six neighbor terms lambda/2 * (1/6)^2
    const double expected = -0.5 * lambda * (1.0 + 6.0 * (1.0 / 36.0));
    CHECK(got == doctest::Approx(expected).epsilon(1e-13));
    CHECK(got < 0.0);
  }
  SUBCASE("random grids match the oracle and scale quadratically") {
    const ControlGrid g = random_grid(51);
    const double p1 = penalty(g, 2e-3);
    CHECK(p1 == doctest::Approx(penalty_oracle(g, 2e-3)).epsilon(1e-13));
    ControlGrid g2 = g;
    for (auto& c : g2.coeffs) c *= 3.0;
    CHECK(penalty(g2, 2e-3) == doctest::Approx(9.0 * p1).epsilon(1e-12));
    CHECK(p1 < 0.0);
  }
  SUBCASE("translation invariance") {
    const ControlGrid g = random_grid(52);
    ControlGrid shifted = g;
    for (auto& c : shifted.coeffs) c += Vec3{0.7, -0.3, 1.1};
    CHECK(penalty(shifted, 1e-4) == doctest::Approx(penalty(g, 1e-4)).epsilon(1e-12));
  }
}

TEST_CASE("penalty_gradient") {
  SUBCASE("constant grid has zero gradient") {
    ControlGrid g(1, {4, 5, 4}, 1.0);
    for (auto& c : g.coeffs) c = {1.0, 1.0, -2.0};
    const auto grad = penalty_gradient(g, 1e-4);
    for (const auto& v : grad) CHECK(norm(v) <= 1e-18);
  }
  SUBCASE("matches finite differences") {
    ControlGrid g = random_grid(53);
    const double lambda = 1e-4;
    const auto grad = penalty_gradient(g, lambda);
    const double h = 1e-6;
    Rng rng(54);
    for (int trial = 0; trial < 30; ++trial) {
      const size_t i = static_cast<size_t>(rng.uniform() * g.num_points());
      const int axis = static_cast<int>(rng.uniform() * 3);
      const double saved = g.coeffs[i][axis];
      g.coeffs[i][axis] = saved + h;
      const double up = penalty(g, lambda);
      g.coeffs[i][axis] = saved - h;
      const double dn = penalty(g, lambda);
      g.coeffs[i][axis] = saved;
      CHECK(std::fabs(grad[i][axis] - (up - dn) / (2 * h)) <= 1e-8);
    }
  }
  SUBCASE("linearity of the gradient") {
    const ControlGrid g = random_grid(55);
    ControlGrid g3 = g;
    for (auto& c : g3.coeffs) c *= -2.5;
    const auto grad1 = penalty_gradient(g, 1e-4);
    const auto grad3 = penalty_gradient(g3, 1e-4);
    for (size_t i = 0; i < grad1.size(); ++i)
      CHECK(norm(grad3[i] - grad1[i] * (-2.5)) <= 1e-15);
  }
  SUBCASE("translation invariance of the gradient") {
    const ControlGrid g = random_grid(56);
    ControlGrid shifted = g;
    for (auto& c : shifted.coeffs) c += Vec3{-1.0, 0.5, 2.0};
    const auto ga = penalty_gradient(g, 1e-4);
    const auto gb = penalty_gradient(shifted, 1e-4);
    for (size_t i = 0; i < ga.size(); ++i) CHECK(norm(ga[i] - gb[i]) <= 1e-13);
  }
}

TEST_CASE("adjoint identity of the neighbor-difference maps") {
  // T_i c = |N(i)| c_i - sum_{j in N(i)} c_j ; adjoint applies the transpose
  const ControlGrid g = random_grid(57);
  Rng rng(58);
  std::vector<Vec3> c(g.num_points()), d(g.num_points());
  for (auto& v : c) v = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  for (auto& v : d) v = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};

  auto neighbor_list = [&](int x, int y, int z) {
    std::vector<size_t> out;
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (auto& o : off) {
      const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
      if (g.valid(nx, ny, nz)) out.push_back(g.index(nx, ny, nz));
    }
    return out;
  };

  for (int z = 0; z < g.size.nz; ++z)
    for (int y = 0; y < g.size.ny; ++y)
      for (int x = 0; x < g.size.nx; ++x) {
        const size_t i = g.index(x, y, z);
        const auto nbrs = neighbor_list(x, y, z);
        // T_i c is a single vector; T_i* d distributes a vector back
        Vec3 ti_c = c[i] * static_cast<double>(nbrs.size());
        for (size_t j : nbrs) ti_c -= c[j];
        const Vec3 dv = d[i];
        const double lhs = dot(ti_c, dv);
        // <c, T_i* d> with (T_i* d)_i = |N(i)| d, (T_i* d)_j = -d for j in N(i)
        double rhs = dot(c[i], dv) * static_cast<double>(nbrs.size());
        for (size_t j : nbrs) rhs -= dot(c[j], dv);
        CHECK(std::fabs(lhs - rhs) <= 1e-12);
      }
}
