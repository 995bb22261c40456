#include "lord/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lord/errors.hpp"

namespace lord {

SpatioDirectionalImage::SpatioDirectionalImage(GridDims dims,
                                               std::shared_ptr<const DirectionSet> dirs,
                                               double fill)
    : dims_(dims), dirs_(std::move(dirs)) {
  if (dims_.nx < 1 || dims_.ny < 1 || dims_.nz < 1)
    throw std::invalid_argument("SpatioDirectionalImage: dims must be positive");
  if (!dirs_) throw std::invalid_argument("SpatioDirectionalImage: null direction set");
  data_.assign(dims_.voxels() * dirs_->size(), fill);
}

namespace {

void write_doubles_le(std::ostream& out, const std::vector<double>& data) {
  static_assert(sizeof(double) == 8);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * 8));
  } else {
    for (double v : data) {
      auto u = std::bit_cast<std::array<unsigned char, 8>>(v);
      std::reverse(u.begin(), u.end());
      out.write(reinterpret_cast<const char*>(u.data()), 8);
    }
  }
}

void read_doubles_le(std::istream& in, std::vector<double>& data) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * 8));
  } else {
    for (auto& v : data) {
      std::array<unsigned char, 8> u;
      in.read(reinterpret_cast<char*>(u.data()), 8);
      std::reverse(u.begin(), u.end());
      v = std::bit_cast<double>(u);
    }
  }
  if (!in) throw io_error("LSDV: truncated data section");
}

}  // namespace

void SpatioDirectionalImage::save(std::ostream& out) const {
  out << "LSDV1 " << dims_.nx << " " << dims_.ny << " " << dims_.nz << " " << ndirs() << "\n";
  char buf[96];
  for (const auto& d : dirs_->dirs()) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", d.x, d.y, d.z);
    out << buf;
  }
  out << "DATA\n";
  write_doubles_le(out, data_);
}

SpatioDirectionalImage SpatioDirectionalImage::load(std::istream& in) {
  std::string magic;
  GridDims dims;
  int ndir = 0;
  if (!(in >> magic >> dims.nx >> dims.ny >> dims.nz >> ndir) || magic != "LSDV1")
    throw io_error("LSDV: bad header");
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1 || ndir < 1)
    throw io_error("LSDV: non-positive dimensions");
  std::vector<Vec3> dirs(ndir);
  for (int i = 0; i < ndir; ++i)
    if (!(in >> dirs[i].x >> dirs[i].y >> dirs[i].z)) throw io_error("LSDV: truncated directions");
  std::string line;
  std::getline(in, line);  // rest of last direction line
  std::getline(in, line);
  if (line != "DATA") throw io_error("LSDV: missing DATA marker");
  SpatioDirectionalImage img(dims, std::make_shared<DirectionSet>(std::move(dirs)));
  read_doubles_le(in, img.data_);
  for (double v : img.data_)
    if (!std::isfinite(v) || v < 0.0) throw io_error("LSDV: negative or non-finite value");
  return img;
}

void SpatioDirectionalImage::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  save(out);
}

SpatioDirectionalImage SpatioDirectionalImage::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  return load(in);
}

namespace {

// One separable pass along a single axis with zero extension.
void convolve_axis(SpatioDirectionalImage& img, int axis, const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  const auto dims = img.dims();
  const int n = img.ndirs();
  const int extent[3] = {dims.nx, dims.ny, dims.nz};
  SpatioDirectionalImage src = img;
  const size_t stride_vox[3] = {1, static_cast<size_t>(dims.nx),
                                static_cast<size_t>(dims.nx) * dims.ny};
  const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(stride_vox[axis]) * n;
  auto& out = img.data();
  const auto& in = src.data();
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const int coord[3] = {x, y, z};
        const size_t base = img.voxel_index(x, y, z) * n;
        for (int d = 0; d < n; ++d) out[base + d] = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int c = coord[axis] + k;
          if (c < 0 || c >= extent[axis]) continue;
          const double w = kernel[k + radius];
          const double* srcp = in.data() + static_cast<std::ptrdiff_t>(base) + stride * k;
          for (int d = 0; d < n; ++d) out[base + d] += w * srcp[d];
        }
      }
}

}  // namespace

SpatioDirectionalImage spatial_smooth(const SpatioDirectionalImage& img, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("spatial_smooth: sigma must be >= 0");
  if (sigma == 0.0) return img;
  std::vector<double> kernel;
  if (sigma <= 0.8) {
    kernel = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
  } else {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    kernel.resize(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
      sum += kernel[k + radius];
    }
    for (auto& w : kernel) w /= sum;
  }
  SpatioDirectionalImage out = img;
  for (int axis = 0; axis < 3; ++axis) convolve_axis(out, axis, kernel);
  return out;
}

double sample(const SpatioDirectionalImage& img, const Vec3& pos, const Vec3& dir, double kappa) {
  const int n = img.ndirs();
  std::vector<double> w;
  int nearest = -1;
  if (std::isinf(kappa)) {
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      const double t = std::fabs(dot(img.directions()[i], dir));
      if (t > best) {
        best = t;
        nearest = i;
      }
    }
  } else {
    w = watson_weights(img.directions(), kappa, normalized(dir));
  }

  const int x0 = static_cast<int>(std::floor(pos.x));
  const int y0 = static_cast<int>(std::floor(pos.y));
  const int z0 = static_cast<int>(std::floor(pos.z));
  const double fx = pos.x - x0, fy = pos.y - y0, fz = pos.z - z0;

  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double tw = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) * (dz ? fz : 1.0 - fz);
        if (tw == 0.0) continue;
        const double* vox = img.voxel(x0 + dx, y0 + dy, z0 + dz);
        if (!vox) continue;
        double s;
        if (nearest >= 0) {
          s = vox[nearest];
        } else {
          s = 0.0;
          for (int i = 0; i < n; ++i) s += w[i] * vox[i];
        }
        acc += tw * s;
      }
  return acc;
}

SpatioDirectionalImage subsample_directions(const SpatioDirectionalImage& img, int m,
                                            double kappa) {
  if (m < 1) throw std::invalid_argument("subsample_directions: m must be >= 1");
  if (m > img.ndirs())
    throw std::invalid_argument("subsample_directions: m exceeds direction count");
  auto new_dirs = std::make_shared<DirectionSet>(DirectionSet::generate(m));
  SpatioDirectionalImage out(img.dims(), new_dirs);
  const int n = img.ndirs();

  // per new channel: weights over the old channels
  std::vector<std::vector<double>> weights(m);
  for (int k = 0; k < m; ++k) {
    if (std::isinf(kappa)) {
      weights[k].assign(n, 0.0);
      int nearest = 0;
      double best = -1.0;
      for (int i = 0; i < n; ++i) {
        const double t = std::fabs(dot(img.directions()[i], (*new_dirs)[k]));
        if (t > best) {
          best = t;
          nearest = i;
        }
      }
      weights[k][nearest] = 1.0;
    } else {
      weights[k] = watson_weights(img.directions(), kappa, (*new_dirs)[k]);
    }
  }

  const size_t voxels = img.dims().voxels();
  for (size_t v = 0; v < voxels; ++v) {
    const double* src = img.data().data() + v * n;
    double* dst = out.data().data() + v * m;
    for (int k = 0; k < m; ++k) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += weights[k][i] * src[i];
      dst[k] = acc;
    }
  }
  return out;
}

double adc_from_signal(double S, double S0, double b) {
  if (!(S0 > 0.0) || !(b > 0.0)) throw std::invalid_argument("adc_from_signal: S0, b must be > 0");
  if (!(S > 0.0) || S > S0)
    throw std::domain_error("adc_from_signal: signal must satisfy 0 < S <= S0");
  return -std::log(S / S0) / b;
}

double signal_from_adc(double adc, double S0, double b) {
  if (!(S0 > 0.0) || !(b > 0.0)) throw std::invalid_argument("signal_from_adc: S0, b must be > 0");
  return S0 * std::exp(-b * adc);
}

void save_scalar_lsdv(const ScalarVolume& vol, const std::string& path) {
  auto dirs = std::make_shared<DirectionSet>(std::vector<Vec3>{{0, 0, 1}});
  SpatioDirectionalImage img(vol.dims(), dirs);
  // scalar exports may carry signed fields (curl components, divergence);
  // shift is the caller's concern, here values are written as-is
  img.data() = vol.data();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << "LSDV1 " << vol.dims().nx << " " << vol.dims().ny << " " << vol.dims().nz << " 1\n";
  out << "0 0 1\nDATA\n";
  write_doubles_le(out, vol.data());
}

}  // namespace lord
