#ifndef LORD_METRICS_HPP
#define LORD_METRICS_HPP

#include <functional>
#include <span>
#include <vector>

#include "lord/vec3.hpp"
#include "lord/volume.hpp"

namespace lord {

/// Displacement field on a voxel grid.
struct VectorField {
  GridDims dims;
  std::vector<Vec3> u;

  VectorField() = default;
  explicit VectorField(GridDims d) : dims(d), u(d.voxels(), Vec3{0, 0, 0}) {}
  Vec3& at(int x, int y, int z) { return u[(static_cast<size_t>(z) * dims.ny + y) * dims.nx + x]; }
  const Vec3& at(int x, int y, int z) const {
    return u[(static_cast<size_t>(z) * dims.ny + y) * dims.nx + x];
  }
};

struct DeformationReport {
  double mse = 0.0;
  ScalarVolume curl_mag;
  ScalarVolume divergence;  // signed
  double mean_curl = 0.0;     // interior voxels only
  double mean_abs_div = 0.0;  // interior voxels only
};

using PointMap = std::function<Vec3(const Vec3&)>;

/// Mean over probes of || phi(x) - phi_ref(x) ||^2.
double coordinate_mse(const PointMap& phi, const PointMap& phi_ref,
                      std::span<const Vec3> probes);

/// Curl magnitude and signed divergence by central differences on interior
/// voxels, one-sided at the boundary. Requires at least 3 voxels per axis.
std::pair<ScalarVolume, ScalarVolume> curl_divergence(const VectorField& field);

/// Full report of a displacement field: fields plus interior means.
DeformationReport deformation_report(const VectorField& field);

/// Across multiresolution steps: voxelwise sums of curl magnitude and |div|;
/// the MSE is taken from the final step.
DeformationReport accumulate(std::span<const DeformationReport> reports);

}  // namespace lord

#endif
