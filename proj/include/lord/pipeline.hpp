#ifndef LORD_PIPELINE_HPP
#define LORD_PIPELINE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lord/optimizer.hpp"
#include "lord/phantom.hpp"

namespace lord {

/// Registration run settings as stored in config files: scales, schedule and
/// provenance. Flags may override individual fields after parsing.
struct RunConfig {
  double sigma = 0.6;
  double lambda = kDefaultLambda;
  double beta = 1.0;
  int directions = 0;  // enumerated orientations; 0 = all image directions
  std::uint64_t seed = 0;
  Schedule schedule;

  void validate() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load_file(const std::string& path);
};

/// Pull-back warp with reorientation: out(x, nu) = I(phi(x), psi_x(nu)),
/// trilinear by default, cubic B-spline (prefiltered) when requested.
/// Output intensities are clamped at zero.
SpatioDirectionalImage warp_image(const SpatioDirectionalImage& img, const HierarchicalFFD& ffd,
                                  double kappa, bool cubic = false);

/// Interpolating cubic B-spline resampler: recursive prefilter per channel,
/// then tensor B-spline evaluation; exact at voxel centers.
class CubicInterpolator {
 public:
  explicit CubicInterpolator(const SpatioDirectionalImage& img);
  /// Watson-weighted directional value at a continuous position.
  double sample(const Vec3& pos, const Vec3& dir, double kappa) const;
  double channel(const Vec3& pos, int n) const;

 private:
  SpatioDirectionalImage coeffs_;
};

// --- synthetic-warp parameter sweeps -------------------------------------

struct SweepRow {
  std::string sweep;
  std::string variant;
  std::uint64_t seed = 0;
  int step = 0;
  double mse = 0.0;
  double mean_curl = 0.0;
  double mean_abs_div = 0.0;
  double wall_ms = 0.0;
};

struct SweepSetup {
  GridDims dims{16, 48, 24};
  int ndirs = 48;
  int enum_dirs = 16;
  double warp_delta = 10.0;
  double warp_magnitude = 0.4;
  double warp_kappa = 30.0;  // directional interpolation when building the target
  int max_iters = 50;
};

/// One registration of the seeded synthetic-warp problem; returns one row per
/// multiresolution step with metrics against the known warp.
std::vector<SweepRow> run_sweep_variant(const std::string& sweep, const std::string& variant,
                                        const Schedule& schedule, double kappa_override,
                                        std::uint64_t seed, const SweepSetup& setup = {});

/// The three named sweeps with the standard variants.
std::vector<SweepRow> run_sweep(const std::string& name, std::uint64_t seed,
                                const SweepSetup& setup = {});

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Schedules used by the sweeps.
Schedule sweep_schedule(const std::vector<int>& bins, double kappa,
                        const std::vector<int>& strides, int max_iters);

/// Finite-difference self-check of the analytic gradient on a seeded small
/// problem; returns the maximum relative error over the probed coordinates.
double gradient_selfcheck(std::uint64_t seed, double kappa, int ncoords = 30);

/// SVG + CSV glyph export of one slice: one ODF polyline per voxel, colored
/// by GFA.
void export_frt_glyphs(const SpatioDirectionalImage& img, int slice, std::ostream& svg,
                       std::ostream& csv, double band_halfwidth = kFrtBandHalfwidth);

}  // namespace lord

#endif
