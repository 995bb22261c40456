#ifndef LORD_FFD_HPP
#define LORD_FFD_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lord/vec3.hpp"
#include "lord/volume.hpp"

namespace lord {

/// Uniform cubic B-spline basis on [0,1).
struct CubicBasis {
  static void weights(double u, double w[4]) {
    const double u2 = u * u, u3 = u2 * u;
    w[0] = (1.0 - 3.0 * u + 3.0 * u2 - u3) / 6.0;
    w[1] = (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0;
    w[2] = (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0;
    w[3] = u3 / 6.0;
  }
  static void derivatives(double u, double d[4]) {
    const double u2 = u * u;
    d[0] = -(1.0 - u) * (1.0 - u) / 2.0;
    d[1] = (3.0 * u2 - 4.0 * u) / 2.0;
    d[2] = (-3.0 * u2 + 2.0 * u + 1.0) / 2.0;
    d[3] = u2 / 2.0;
  }
};

/// One resolution level: a regular grid of displacement coefficients with
/// spacing delta, control point (gx,gy,gz) at ((gx-1) delta, ...). Reads
/// outside the grid see zero coefficients so the displacement decays to
/// identity away from the grid.
struct ControlGrid {
  int level = 1;
  GridDims size;
  double delta = 1.0;
  std::vector<Vec3> coeffs;

  ControlGrid() = default;
  ControlGrid(int level_, GridDims size_, double delta_);

  /// Grid sized so every point of an image domain [0, nx-1] x ... has a full
  /// 4x4x4 support: coverage [-delta, extent + 2 delta] per axis.
  static ControlGrid cover(GridDims image_dims, double delta, int level = 1);

  size_t num_points() const { return size.voxels(); }
  size_t index(int gx, int gy, int gz) const {
    return (static_cast<size_t>(gz) * size.ny + gy) * size.nx + gx;
  }
  bool valid(int gx, int gy, int gz) const {
    return gx >= 0 && gx < size.nx && gy >= 0 && gy < size.ny && gz >= 0 && gz < size.nz;
  }
  Vec3 position(int gx, int gy, int gz) const {
    return {(gx - 1) * delta, (gy - 1) * delta, (gz - 1) * delta};
  }
  const Vec3& coeff(int gx, int gy, int gz) const { return coeffs[index(gx, gy, gz)]; }
  Vec3& coeff(int gx, int gy, int gz) { return coeffs[index(gx, gy, gz)]; }
};

/// 64-point tensor-product support of one grid at a point: the sparse
/// realization of the basis matrix B(x) and its spatial derivative.
struct SplineSupport {
  int base[3];  // lowest control index per axis (may fall outside the grid)
  double wx[4], wy[4], wz[4];
  double dwx[4], dwy[4], dwz[4];  // spatial derivative, includes 1/delta

  double weight(int k) const { return wx[k & 3] * wy[(k >> 2) & 3] * wz[k >> 4]; }
  Vec3 grad(int k) const {
    const int i = k & 3, j = (k >> 2) & 3, l = k >> 4;
    return {dwx[i] * wy[j] * wz[l], wx[i] * dwy[j] * wz[l], wx[i] * wy[j] * dwz[l]};
  }
  /// Linear coefficient index of support entry k, or -1 outside the grid.
  std::ptrdiff_t control(const ControlGrid& g, int k) const {
    const int gx = base[0] + (k & 3), gy = base[1] + ((k >> 2) & 3), gz = base[2] + (k >> 4);
    if (!g.valid(gx, gy, gz)) return -1;
    return static_cast<std::ptrdiff_t>(g.index(gx, gy, gz));
  }
};

SplineSupport spline_support(const ControlGrid& grid, const Vec3& x);

Vec3 displacement(const ControlGrid& grid, const Vec3& x);

/// Spatial Jacobian of the displacement alone (no identity term).
Mat3 displacement_jacobian(const ControlGrid& grid, const Vec3& x);

/// Stack of control grids, coarse to fine, strictly decreasing spacing.
/// An empty stack is the identity transform.
class HierarchicalFFD {
 public:
  HierarchicalFFD() = default;
  explicit HierarchicalFFD(std::vector<ControlGrid> levels);

  int num_levels() const { return static_cast<int>(levels_.size()); }
  const ControlGrid& level(int i) const { return levels_[i]; }
  ControlGrid& level(int i) { return levels_[i]; }
  void add_level(ControlGrid grid);

  /// ASCII: "FFD1 R", then per level "LEVEL r nx ny nz delta" followed by
  /// one "dx dy dz" line per control point.
  void save(std::ostream& out) const;
  static HierarchicalFFD load(std::istream& in);
  void save_file(const std::string& path) const;
  static HierarchicalFFD load_file(const std::string& path);

 private:
  std::vector<ControlGrid> levels_;
};

Vec3 deform(const HierarchicalFFD& ffd, const Vec3& x);
Mat3 spatial_jacobian(const HierarchicalFFD& ffd, const Vec3& x);

/// Normalized action of the spatial Jacobian on a direction.
Vec3 reorient(const HierarchicalFFD& ffd, const Vec3& x, const Vec3& v);

/// Factored Jacobian of the reorientation map with respect to the active
/// level's coefficients: the block of control point k is s[k] * proj, with
/// proj = (I - psi psi^T)/|V| and s[k] the spatial-gradient weight along v.
struct PsiJacobian {
  Vec3 psi;
  double vnorm = 1.0;
  Mat3 proj;  // (I - psi psi^T) / |V|
  SplineSupport supp;
  double s[64];

  Mat3 block(int k) const { return proj * s[k]; }
};

PsiJacobian jac_psi(const HierarchicalFFD& ffd, int active_level, const Vec3& x, const Vec3& v);

struct GuardReport {
  bool pass = true;
  double worst_det = 1.0;
  Vec3 worst_location{0, 0, 0};
};

inline constexpr double kDetFloor = 1e-3;

/// Orientation preservation check: det of the spatial Jacobian above the
/// floor at every probe.
GuardReport check_diffeomorphism(const HierarchicalFFD& ffd, std::span<const Vec3> probes,
                                 double det_floor = kDetFloor);

/// Voxel centers of a domain plus the cell centers of a grid — the dense
/// probe set used by the registration guard.
std::vector<Vec3> guard_probes(GridDims image_dims, const ControlGrid& finest);

}  // namespace lord

#endif
