#include "lord/regularizer.hpp"

#include <stdexcept>

namespace lord {

namespace {

// axis neighbors of (x,y,z); returns count, fills idx
int neighbors(const ControlGrid& g, int x, int y, int z, size_t idx[6]) {
  int count = 0;
  const int d[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  for (const auto& o : d) {
    const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
    if (g.valid(nx, ny, nz)) idx[count++] = g.index(nx, ny, nz);
  }
  return count;
}

// residual r_i = c_i - mean of neighbors, per control point
std::vector<Vec3> residuals(const ControlGrid& g) {
  std::vector<Vec3> r(g.num_points());
  size_t idx[6];
  for (int z = 0; z < g.size.nz; ++z)
    for (int y = 0; y < g.size.ny; ++y)
      for (int x = 0; x < g.size.nx; ++x) {
        const int n = neighbors(g, x, y, z, idx);
        Vec3 mean{0, 0, 0};
        for (int k = 0; k < n; ++k) mean += g.coeffs[idx[k]];
        mean *= 1.0 / n;
        r[g.index(x, y, z)] = g.coeffs[g.index(x, y, z)] - mean;
      }
  return r;
}

}  // namespace

double penalty(const ControlGrid& grid, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("penalty: lambda must be >= 0");
  if (lambda == 0.0) return 0.0;
  const auto r = residuals(grid);
  double acc = 0.0;
  for (const auto& v : r) acc += norm2(v);
  return -0.5 * lambda * acc;
}

std::vector<Vec3> penalty_gradient(const ControlGrid& grid, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("penalty_gradient: lambda must be >= 0");
  std::vector<Vec3> grad(grid.num_points(), Vec3{0, 0, 0});
  if (lambda == 0.0) return grad;
  const auto r = residuals(grid);
  size_t idx[6];
  // dS/dc_k = -lambda (r_k - sum_{j in N(k)} r_j / |N(j)|)
  for (int z = 0; z < grid.size.nz; ++z)
    for (int y = 0; y < grid.size.ny; ++y)
      for (int x = 0; x < grid.size.nx; ++x) {
        const size_t k = grid.index(x, y, z);
        Vec3 g = r[k];
        const int n = neighbors(grid, x, y, z, idx);
        for (int i = 0; i < n; ++i) {
          // |N(j)| of the neighbor j
          const size_t j = idx[i];
          const int jz = static_cast<int>(j / (static_cast<size_t>(grid.size.nx) * grid.size.ny));
          const size_t rem = j % (static_cast<size_t>(grid.size.nx) * grid.size.ny);
          const int jy = static_cast<int>(rem / grid.size.nx);
          const int jx = static_cast<int>(rem % grid.size.nx);
          size_t tmp[6];
          const int nj = neighbors(grid, jx, jy, jz, tmp);
          g -= r[j] * (1.0 / nj);
        }
        grad[k] = g * (-lambda);
      }
  return grad;
}

}  // namespace lord
