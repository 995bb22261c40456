#ifndef LORD_PHANTOM_HPP
#define LORD_PHANTOM_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "lord/ffd.hpp"
#include "lord/sphere.hpp"
#include "lord/volume.hpp"

namespace lord {

struct Fiber {
  Vec3 tangent{1, 0, 0};
  double weight = 1.0;
};

/// Cell grid of fiber constellations; empty cells are isotropic.
struct Blueprint {
  int cols = 20, rows = 20;
  std::vector<std::vector<Fiber>> cells;

  Blueprint(int cols_ = 20, int rows_ = 20)
      : cols(cols_), rows(rows_), cells(static_cast<size_t>(cols_) * rows_) {}

  std::vector<Fiber>& cell(int i, int j) { return cells[static_cast<size_t>(j) * cols + i]; }
  const std::vector<Fiber>& cell(int i, int j) const {
    return cells[static_cast<size_t>(j) * cols + i];
  }
  bool has_fiber(int i, int j) const { return !cell(i, j).empty(); }
  void add_fiber(int i, int j, const Vec3& tangent, double weight = 1.0);

  /// Text format: one line per fiber "i j tx ty tz weight"; '#' comments;
  /// cells may repeat for crossings; unlisted cells are isotropic.
  void save(std::ostream& out) const;
  static Blueprint load(std::istream& in, int cols = 20, int rows = 20);
};

inline constexpr double kDefaultSharpness = 4.0;
inline constexpr double kDefaultIsoLevel = 0.3;

/// Disc-shaped raw signal of a single fiber: exp(-sharpness (nu . t)^2),
/// maximal on the great circle orthogonal to the tangent.
std::vector<double> single_fiber_signal(const Vec3& tangent, const DirectionSet& dirs,
                                        double sharpness = kDefaultSharpness);

struct SynthesisOptions {
  double noise_amplitude = 0.0;
  double iso_level = kDefaultIsoLevel;
  double sharpness = kDefaultSharpness;
  int cell_voxels = 3;  // in-plane voxels per blueprint cell
  int thickness = 3;    // z slices, blueprint replicated
  std::uint64_t seed = 0;
};

SpatioDirectionalImage synthesize(const Blueprint& bp,
                                  std::shared_ptr<const DirectionSet> dirs,
                                  const SynthesisOptions& opts);

struct ExperimentPair {
  Blueprint moving_bp{20, 20}, target_bp{20, 20};
  SpatioDirectionalImage moving, target;
};

const std::vector<std::string>& experiment_names();

/// The six built-in registration pairs on the 20 x 20 blueprint grid.
ExperimentPair builtin_experiment(const std::string& name, int ndirs = 60,
                                  std::uint64_t seed = 1);

/// One-level random deformation with i.i.d. uniform control displacements in
/// [-m delta, m delta]^3, resampled until the diffeomorphism guard passes.
HierarchicalFFD synthetic_warp(GridDims dims, double delta, double magnitude_fraction,
                               std::uint64_t seed);

/// 3-D evaluation phantom: a C-shaped tract crossed by a straight one over an
/// isotropic background, for the synthetic-warp parameter sweeps.
SpatioDirectionalImage sweep_phantom(GridDims dims, int ndirs, std::uint64_t seed);

}  // namespace lord

#endif
