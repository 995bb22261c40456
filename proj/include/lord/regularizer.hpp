#ifndef LORD_REGULARIZER_HPP
#define LORD_REGULARIZER_HPP

#include <vector>

#include "lord/ffd.hpp"

namespace lord {

inline constexpr double kDefaultLambda = 1e-4;

/// Grid-uniformity penalty: -(lambda/2) sum_i || c_i - mean of 6-connected
/// neighbors ||^2. Zero on constant and affine coefficient fields, strictly
/// negative otherwise.
double penalty(const ControlGrid& grid, double lambda);

/// Analytic gradient of the penalty with respect to the coefficients,
/// laid out like ControlGrid::coeffs.
std::vector<Vec3> penalty_gradient(const ControlGrid& grid, double lambda);

}  // namespace lord

#endif
