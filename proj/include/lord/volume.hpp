#ifndef LORD_VOLUME_HPP
#define LORD_VOLUME_HPP

#include <iosfwd>
#include <memory>
#include <vector>

#include "lord/sphere.hpp"
#include "lord/vec3.hpp"

namespace lord {

struct GridDims {
  int nx = 0, ny = 0, nz = 0;
  bool operator==(const GridDims&) const = default;
  size_t voxels() const { return static_cast<size_t>(nx) * ny * nz; }
};

class ScalarVolume {
 public:
  ScalarVolume() = default;
  ScalarVolume(GridDims dims, double fill = 0.0) : dims_(dims), data_(dims.voxels(), fill) {}

  const GridDims& dims() const { return dims_; }
  double& at(int x, int y, int z) { return data_[index(x, y, z)]; }
  double at(int x, int y, int z) const { return data_[index(x, y, z)]; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  size_t index(int x, int y, int z) const {
    return (static_cast<size_t>(z) * dims_.ny + y) * dims_.nx + x;
  }

 private:
  GridDims dims_;
  std::vector<double> data_;
};

/// Voxel grid of directional signals. Data layout is voxel-major with the
/// direction index innermost: ((z*ny + y)*nx + x)*N + n. Values outside the
/// grid read as 0. Voxel centers sit at integer coordinates.
class SpatioDirectionalImage {
 public:
  SpatioDirectionalImage() = default;
  SpatioDirectionalImage(GridDims dims, std::shared_ptr<const DirectionSet> dirs,
                         double fill = 0.0);

  const GridDims& dims() const { return dims_; }
  const DirectionSet& directions() const { return *dirs_; }
  std::shared_ptr<const DirectionSet> directions_ptr() const { return dirs_; }
  int ndirs() const { return dirs_->size(); }
  Vec3 spacing() const { return spacing_; }

  bool in_domain(int x, int y, int z) const {
    return x >= 0 && x < dims_.nx && y >= 0 && y < dims_.ny && z >= 0 && z < dims_.nz;
  }

  double value(int x, int y, int z, int n) const {
    if (!in_domain(x, y, z)) return 0.0;
    return data_[voxel_index(x, y, z) * ndirs() + n];
  }
  double& at(int x, int y, int z, int n) { return data_[voxel_index(x, y, z) * ndirs() + n]; }

  /// Contiguous N-vector of one voxel; null outside the domain.
  const double* voxel(int x, int y, int z) const {
    if (!in_domain(x, y, z)) return nullptr;
    return data_.data() + voxel_index(x, y, z) * ndirs();
  }
  double* voxel(int x, int y, int z) {
    return data_.data() + voxel_index(x, y, z) * ndirs();
  }

  size_t voxel_index(int x, int y, int z) const {
    return (static_cast<size_t>(z) * dims_.ny + y) * dims_.nx + x;
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// LSDV: ASCII header "LSDV1 nx ny nz N", the direction table, "DATA",
  /// then nx*ny*nz*N little-endian 64-bit floats.
  void save(std::ostream& out) const;
  static SpatioDirectionalImage load(std::istream& in);
  void save_file(const std::string& path) const;
  static SpatioDirectionalImage load_file(const std::string& path);

 private:
  GridDims dims_;
  Vec3 spacing_{1, 1, 1};
  std::shared_ptr<const DirectionSet> dirs_;
  std::vector<double> data_;
};

/// Separable spatial smoothing applied per direction channel with zero
/// extension. sigma <= 0.8 uses the 3-pass cubic-B-spline kernel
/// (near-Gaussian, variance 1/3); larger sigma a truncated discrete
/// Gaussian of radius ceil(3 sigma). sigma = 0 returns the input.
SpatioDirectionalImage spatial_smooth(const SpatioDirectionalImage& img, double sigma);

/// Trilinear interpolation of the Watson-smoothed directional value at a
/// continuous position. kappa = infinity selects nearest-direction lookup.
/// Out-of-domain positions contribute 0.
double sample(const SpatioDirectionalImage& img, const Vec3& pos, const Vec3& dir, double kappa);

/// Resample onto a fresh quasi-uniform direction set of size m; each new
/// channel is the Watson-weighted combination of the old channels.
SpatioDirectionalImage subsample_directions(const SpatioDirectionalImage& img, int m,
                                            double kappa);

/// Apparent diffusion coefficient from an attenuation signal and back.
double adc_from_signal(double S, double S0, double b);
double signal_from_adc(double adc, double S0, double b);

/// Scalar fields exported as single-direction LSDV volumes.
void save_scalar_lsdv(const ScalarVolume& vol, const std::string& path);

}  // namespace lord

#endif
