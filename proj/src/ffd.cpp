#include "lord/ffd.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "lord/errors.hpp"

namespace lord {

ControlGrid::ControlGrid(int level_, GridDims size_, double delta_)
    : level(level_), size(size_), delta(delta_) {
  if (size.nx < 1 || size.ny < 1 || size.nz < 1)
    throw std::invalid_argument("ControlGrid: size must be positive");
  if (!(delta > 0.0)) throw std::invalid_argument("ControlGrid: delta must be > 0");
  coeffs.assign(num_points(), Vec3{0, 0, 0});
}

ControlGrid ControlGrid::cover(GridDims image_dims, double delta, int level) {
  auto points = [delta](int n) {
    const double extent = n - 1;
    return static_cast<int>(std::ceil(extent / delta)) + 4;
  };
  GridDims size{points(image_dims.nx), points(image_dims.ny), points(image_dims.nz)};
  return ControlGrid(level, size, delta);
}

SplineSupport spline_support(const ControlGrid& grid, const Vec3& x) {
  SplineSupport s;
  const double inv_delta = 1.0 / grid.delta;
  for (int a = 0; a < 3; ++a) {
    const double t = x[a] * inv_delta + 1.0;
    const double fl = std::floor(t);
    s.base[a] = static_cast<int>(fl) - 1;
    const double u = t - fl;
    double* w = a == 0 ? s.wx : a == 1 ? s.wy : s.wz;
    double* d = a == 0 ? s.dwx : a == 1 ? s.dwy : s.dwz;
    CubicBasis::weights(u, w);
    CubicBasis::derivatives(u, d);
    for (int k = 0; k < 4; ++k) d[k] *= inv_delta;
  }
  return s;
}

Vec3 displacement(const ControlGrid& grid, const Vec3& x) {
  const SplineSupport s = spline_support(grid, x);
  Vec3 out{0, 0, 0};
  for (int k = 0; k < 64; ++k) {
    const auto idx = s.control(grid, k);
    if (idx < 0) continue;
    out += grid.coeffs[idx] * s.weight(k);
  }
  return out;
}

Mat3 displacement_jacobian(const ControlGrid& grid, const Vec3& x) {
  const SplineSupport s = spline_support(grid, x);
  Mat3 out = Mat3::zero();
  for (int k = 0; k < 64; ++k) {
    const auto idx = s.control(grid, k);
    if (idx < 0) continue;
    const Vec3 g = s.grad(k);
    const Vec3& c = grid.coeffs[idx];
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) out(r, col) += c[r] * g[col];
  }
  return out;
}

HierarchicalFFD::HierarchicalFFD(std::vector<ControlGrid> levels) : levels_(std::move(levels)) {
  for (size_t i = 1; i < levels_.size(); ++i)
    if (!(levels_[i].delta < levels_[i - 1].delta))
      throw std::invalid_argument("HierarchicalFFD: spacings must strictly decrease");
}

void HierarchicalFFD::add_level(ControlGrid grid) {
  if (!levels_.empty() && !(grid.delta < levels_.back().delta))
    throw std::invalid_argument("HierarchicalFFD: spacings must strictly decrease");
  levels_.push_back(std::move(grid));
}

Vec3 deform(const HierarchicalFFD& ffd, const Vec3& x) {
  Vec3 out = x;
  for (int r = 0; r < ffd.num_levels(); ++r) out += displacement(ffd.level(r), x);
  return out;
}

Mat3 spatial_jacobian(const HierarchicalFFD& ffd, const Vec3& x) {
  Mat3 out = Mat3::identity();
  for (int r = 0; r < ffd.num_levels(); ++r) out += displacement_jacobian(ffd.level(r), x);
  return out;
}

Vec3 reorient(const HierarchicalFFD& ffd, const Vec3& x, const Vec3& v) {
  const Vec3 V = spatial_jacobian(ffd, x) * v;
  const double n = norm(V);
  if (n < 1e-12) throw numerical_error("reorient: singular Jacobian action on direction");
  return V * (1.0 / n);
}

PsiJacobian jac_psi(const HierarchicalFFD& ffd, int active_level, const Vec3& x, const Vec3& v) {
  PsiJacobian out;
  const Vec3 V = spatial_jacobian(ffd, x) * v;
  out.vnorm = norm(V);
  if (out.vnorm < 1e-12) throw numerical_error("jac_psi: singular Jacobian action on direction");
  out.psi = V * (1.0 / out.vnorm);
  out.proj = Mat3::identity();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.proj(r, c) = ((r == c ? 1.0 : 0.0) - out.psi[r] * out.psi[c]) / out.vnorm;
  out.supp = spline_support(ffd.level(active_level), x);
  for (int k = 0; k < 64; ++k) out.s[k] = dot(out.supp.grad(k), v);
  return out;
}

GuardReport check_diffeomorphism(const HierarchicalFFD& ffd, std::span<const Vec3> probes,
                                 double det_floor) {
  if (probes.empty()) throw std::invalid_argument("check_diffeomorphism: no probes");
  GuardReport report;
  report.worst_det = std::numeric_limits<double>::infinity();
  for (const auto& p : probes) {
    const double d = det(spatial_jacobian(ffd, p));
    if (d < report.worst_det) {
      report.worst_det = d;
      report.worst_location = p;
    }
  }
  report.pass = report.worst_det > det_floor;
  return report;
}

std::vector<Vec3> guard_probes(GridDims image_dims, const ControlGrid& finest) {
  std::vector<Vec3> probes;
  probes.reserve(image_dims.voxels() + finest.num_points());
  for (int z = 0; z < image_dims.nz; ++z)
    for (int y = 0; y < image_dims.ny; ++y)
      for (int x = 0; x < image_dims.nx; ++x)
        probes.push_back({static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)});
  const double extent[3] = {static_cast<double>(image_dims.nx - 1),
                            static_cast<double>(image_dims.ny - 1),
                            static_cast<double>(image_dims.nz - 1)};
  for (int gz = 0; gz < finest.size.nz - 1; ++gz)
    for (int gy = 0; gy < finest.size.ny - 1; ++gy)
      for (int gx = 0; gx < finest.size.nx - 1; ++gx) {
        Vec3 c = finest.position(gx, gy, gz) + Vec3{0.5, 0.5, 0.5} * finest.delta;
        bool inside = true;
        for (int a = 0; a < 3; ++a) inside = inside && c[a] >= 0.0 && c[a] <= extent[a];
        if (inside) probes.push_back(c);
      }
  return probes;
}

void HierarchicalFFD::save(std::ostream& out) const {
  out << "FFD1 " << num_levels() << "\n";
  char buf[128];
  for (const auto& g : levels_) {
    std::snprintf(buf, sizeof buf, "LEVEL %d %d %d %d %.17g\n", g.level, g.size.nx, g.size.ny,
                  g.size.nz, g.delta);
    out << buf;
    for (const auto& c : g.coeffs) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", c.x, c.y, c.z);
      out << buf;
    }
  }
}

HierarchicalFFD HierarchicalFFD::load(std::istream& in) {
  std::string magic;
  int nlevels = 0;
  if (!(in >> magic >> nlevels) || magic != "FFD1" || nlevels < 0)
    throw io_error("FFD: bad header");
  std::vector<ControlGrid> levels;
  levels.reserve(nlevels);
  for (int r = 0; r < nlevels; ++r) {
    std::string tag;
    int level = 0;
    GridDims size;
    double delta = 0.0;
    if (!(in >> tag >> level >> size.nx >> size.ny >> size.nz >> delta) || tag != "LEVEL")
      throw io_error("FFD: bad level header at level " + std::to_string(r + 1));
    ControlGrid grid(level, size, delta);
    for (auto& c : grid.coeffs)
      if (!(in >> c.x >> c.y >> c.z)) throw io_error("FFD: truncated coefficients");
    levels.push_back(std::move(grid));
  }
  return HierarchicalFFD(std::move(levels));
}

void HierarchicalFFD::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  save(out);
}

HierarchicalFFD HierarchicalFFD::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open: " + path);
  return load(in);
}

}  // namespace lord
