#ifndef LORD_GRADIENT_HPP
#define LORD_GRADIENT_HPP

#include <memory>
#include <span>
#include <vector>

#include "lord/density.hpp"
#include "lord/ffd.hpp"
#include "lord/regularizer.hpp"
#include "lord/sphere.hpp"
#include "lord/volume.hpp"

namespace lord {

/// Settings of one similarity evaluation: spatial, directional and intensity
/// scales plus the sample enumeration.
struct SimilarityConfig {
  double sigma = 0.6;   // spatial kernel, voxels; must be > 0
  double kappa = 15.0;  // directional concentration
  int bins = 32;
  double beta = 1.0;  // Parzen scale in bin widths
  int stride = 1;     // voxel sampling stride; smoothing widens to sigma*stride
  int enum_dirs = 0;  // 0: evaluate over the image's direction set
  double lambda = kDefaultLambda;
  /// kappa == 0 carries no directional information, so the evaluation
  /// collapses to the direction-averaged scalar problem unless disabled
  /// (the full path is kept for equivalence tests).
  bool collapse_kappa0 = true;
};

/// Gaussian-window interpolation of the directionally smoothed signal:
/// sum_n Gamma_kappa(nu_n, dir/|dir|) sum_y K_sigma(pos - y) I(y, n) over the
/// voxel window round(pos) +- ceil(3 sigma). This is the intensity the
/// registration objective evaluates and differentiates.
double smoothed_value(const SpatioDirectionalImage& img, const Vec3& pos, const Vec3& dir,
                      double sigma, double kappa);

/// Derivative row of the spatial kernel K_sigma(phi - y) in the active
/// coefficients: block of control g is weight(g) * coeff^T with
/// coeff = -K/sigma^2 (phi - y). Dense layout matches ControlGrid::coeffs.
Vec3 spatial_kernel_coeff(const Vec3& phi, const Vec3& y, double sigma);
std::vector<Vec3> jac_spatial_kernel(const Vec3& phi, const Vec3& y, double sigma,
                                     const SplineSupport& supp, const ControlGrid& grid);

/// Derivative row of the normalized Watson weight of source direction
/// n_index in the active coefficients, factored through jac_psi: block of
/// control g is s_g * d^T with d = proj * 2 kappa Gamma_n ((nu_n.psi) nu_n -
/// wbar), wbar = sum_i Gamma_i (nu_i.psi) nu_i. f holds the unnormalized
/// exponentials (any common scale).
Vec3 watson_row_coeff(const DirectionSet& dirs, int n_index, std::span<const double> f,
                      double kappa, const PsiJacobian& jp);
std::vector<Vec3> jac_watson_row(const DirectionSet& dirs, int n_index,
                                 std::span<const double> f, double kappa, const PsiJacobian& jp,
                                 const ControlGrid& grid);

/// Full derivative row of smoothed_value(I, phi_c(x), J_x phi_c v) in the
/// active level's coefficients: spatial term plus directional term.
std::vector<Vec3> jac_smoothed_intensity(const Vec3& x, const Vec3& v, const HierarchicalFFD& ffd,
                                         int active_level, const SpatioDirectionalImage& img,
                                         double sigma, double kappa);

/// One multiresolution step's objective: regularized NMI of the moving image
/// warped through (frozen earlier levels + active grid) against the target.
/// Immutable inputs; evaluate() is safe to call repeatedly and fans out over
/// a deterministic static thread partition.
class RegistrationObjective {
 public:
  RegistrationObjective(const SpatioDirectionalImage& moving,
                        const SpatioDirectionalImage& target, const HierarchicalFFD& prev,
                        ControlGrid active, const SimilarityConfig& cfg);
  ~RegistrationObjective();
  RegistrationObjective(const RegistrationObjective&) = delete;
  RegistrationObjective& operator=(const RegistrationObjective&) = delete;

  int dof() const;

  /// Regularized NMI and its gradient at the given active coefficients
  /// (flattened x,y,z per control point). grad may be null.
  double evaluate(std::span<const double> coeffs, std::vector<double>* grad);

  /// Similarity gradient alone (no regularizer), for the spec'd surface.
  std::vector<double> similarity_gradient(std::span<const double> coeffs);

  GuardReport guard(std::span<const double> coeffs) const;

  const IntensityMap& intensity_map() const;
  double last_nmi() const;
  double last_penalty() const;
  long clamped_samples() const;
  const ControlGrid& active_grid() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Gradient of the NMI similarity with respect to the last level's
/// coefficients, evaluated at the FFD's current state.
std::vector<Vec3> grad_similarity(const HierarchicalFFD& ffd, int active_level,
                                  const SpatioDirectionalImage& moving,
                                  const SpatioDirectionalImage& target,
                                  const SimilarityConfig& cfg);

}  // namespace lord

#endif
