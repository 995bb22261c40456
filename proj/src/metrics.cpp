#include "lord/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace lord {

double coordinate_mse(const PointMap& phi, const PointMap& phi_ref,
                      std::span<const Vec3> probes) {
  if (probes.empty()) throw std::invalid_argument("coordinate_mse: no probes");
  double acc = 0.0;
  for (const auto& p : probes) acc += norm2(phi(p) - phi_ref(p));
  return acc / static_cast<double>(probes.size());
}

namespace {

// derivative of component comp of u along axis at (x,y,z); central in the
// interior, one-sided at the boundary
double derive(const VectorField& f, int x, int y, int z, int comp, int axis) {
  const int extent[3] = {f.dims.nx, f.dims.ny, f.dims.nz};
  int c[3] = {x, y, z};
  const int pos = c[axis];
  if (pos > 0 && pos < extent[axis] - 1) {
    int hi[3] = {x, y, z}, lo[3] = {x, y, z};
    ++hi[axis];
    --lo[axis];
    return 0.5 * (f.at(hi[0], hi[1], hi[2])[comp] - f.at(lo[0], lo[1], lo[2])[comp]);
  }
  int a[3] = {x, y, z}, b[3] = {x, y, z};
  if (pos == 0)
    ++b[axis];
  else
    --a[axis];
  return f.at(b[0], b[1], b[2])[comp] - f.at(a[0], a[1], a[2])[comp];
}

}  // namespace

std::pair<ScalarVolume, ScalarVolume> curl_divergence(const VectorField& field) {
  const auto& dims = field.dims;
  if (dims.nx < 3 || dims.ny < 3 || dims.nz < 3)
    throw std::invalid_argument("curl_divergence: need at least 3 voxels per axis");
  ScalarVolume curl(dims), div(dims);
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const double dzy = derive(field, x, y, z, 2, 1);  // du_z/dy
        const double dyz = derive(field, x, y, z, 1, 2);
        const double dxz = derive(field, x, y, z, 0, 2);
        const double dzx = derive(field, x, y, z, 2, 0);
        const double dyx = derive(field, x, y, z, 1, 0);
        const double dxy = derive(field, x, y, z, 0, 1);
        const Vec3 c{dzy - dyz, dxz - dzx, dyx - dxy};
        curl.at(x, y, z) = norm(c);
        div.at(x, y, z) =
            derive(field, x, y, z, 0, 0) + derive(field, x, y, z, 1, 1) + derive(field, x, y, z, 2, 2);
      }
  return {std::move(curl), std::move(div)};
}

namespace {

// interior mean, optionally of absolute values
double interior_mean(const ScalarVolume& v, bool absolute) {
  const auto& dims = v.dims();
  double acc = 0.0;
  long count = 0;
  for (int z = 1; z < dims.nz - 1; ++z)
    for (int y = 1; y < dims.ny - 1; ++y)
      for (int x = 1; x < dims.nx - 1; ++x) {
        acc += absolute ? std::fabs(v.at(x, y, z)) : v.at(x, y, z);
        ++count;
      }
  return count > 0 ? acc / count : 0.0;
}

}  // namespace

DeformationReport deformation_report(const VectorField& field) {
  DeformationReport rep;
  auto [curl, div] = curl_divergence(field);
  rep.curl_mag = std::move(curl);
  rep.divergence = std::move(div);
  rep.mean_curl = interior_mean(rep.curl_mag, false);
  rep.mean_abs_div = interior_mean(rep.divergence, true);
  return rep;
}

DeformationReport accumulate(std::span<const DeformationReport> reports) {
  if (reports.empty()) throw std::invalid_argument("accumulate: no reports");
  const auto dims = reports.front().curl_mag.dims();
  for (const auto& r : reports)
    if (!(r.curl_mag.dims() == dims)) throw std::invalid_argument("accumulate: dims mismatch");
  DeformationReport out;
  out.curl_mag = ScalarVolume(dims);
  out.divergence = ScalarVolume(dims);
  for (const auto& r : reports) {
    for (size_t i = 0; i < out.curl_mag.data().size(); ++i) {
      out.curl_mag.data()[i] += r.curl_mag.data()[i];
      out.divergence.data()[i] += std::fabs(r.divergence.data()[i]);
    }
  }
  out.mse = reports.back().mse;
  out.mean_curl = interior_mean(out.curl_mag, false);
  out.mean_abs_div = interior_mean(out.divergence, false);  // already absolute
  return out;
}

}  // namespace lord
