#ifndef LORD_SPHERE_HPP
#define LORD_SPHERE_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "lord/vec3.hpp"

namespace lord {

/// Set of N distinct directions on the projective plane, stored as unit
/// vectors on the sphere. Immutable after construction; safe to share
/// across threads.
class DirectionSet {
 public:
  /// Normalizes the inputs and rejects duplicate lines.
  explicit DirectionSet(std::vector<Vec3> dirs);

  /// Quasi-uniform hemisphere sampling: Fibonacci points followed by one
  /// repulsion pass on the projective metric. Deterministic; the seed is
  /// accepted for interface stability but the placement depends on n only,
  /// so images built with equal n always share a compatible set.
  static DirectionSet generate(int n, std::uint64_t seed = 0);

  int size() const { return static_cast<int>(dirs_.size()); }
  const Vec3& operator[](int i) const { return dirs_[i]; }
  const std::vector<Vec3>& dirs() const { return dirs_; }

  double min_projective_angle() const;
  bool same_as(const DirectionSet& other, double tol = 1e-12) const;

  /// Text format: first line N, then N lines "x y z" (17 significant digits).
  void save(std::ostream& out) const;
  static DirectionSet load(std::istream& in);

 private:
  std::vector<Vec3> dirs_;
};

/// Canonical projective representative: nonnegative z, ties broken toward
/// nonnegative y, then nonnegative x.
Vec3 canonical_representative(const Vec3& v);

/// Row-stochastic N x N table; entry (m, n) is the discrete Watson weight of
/// source direction n for query direction m.
struct WatsonTable {
  double kappa = 0.0;
  int n = 0;
  std::vector<double> weights;  // row-major

  static WatsonTable build(const DirectionSet& dirs, double kappa);
  double operator()(int m, int i) const { return weights[static_cast<size_t>(m) * n + i]; }
};

/// Discrete Watson weights exp(kappa (nu_n . q)^2) normalized over the set.
std::vector<double> watson_weights(const DirectionSet& dirs, double kappa, const Vec3& query);

/// out(m) = sum_n signal(n) * table(m, n).
std::vector<double> directional_smooth(std::span<const double> signal, const WatsonTable& table);

inline constexpr double kFrtBandHalfwidth = 0.12;  // radians

/// Discrete Funk-Radon transform: mean of the signal over the equatorial
/// band of each direction, max-normalized to [0, 1].
std::vector<double> funk_radon(std::span<const double> signal, const DirectionSet& dirs,
                               double band_halfwidth = kFrtBandHalfwidth);

/// Generalized fractional anisotropy: population std / rms of the signal.
double gfa(std::span<const double> signal);

int argmax_index(std::span<const double> values);

/// Dominant axis of an ODF: principal eigenvector of the peak-sharpened
/// orientation tensor. More angularly accurate than the argmax direction.
Vec3 principal_axis(std::span<const double> odf, const DirectionSet& dirs);

}  // namespace lord

#endif
