#include "lord/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lord/errors.hpp"

namespace lord {

Vec3 canonical_representative(const Vec3& v) {
  if (v.z < 0.0) return -v;
  if (v.z == 0.0) {
    if (v.y < 0.0) return -v;
    if (v.y == 0.0 && v.x < 0.0) return -v;
  }
  return v;
}

DirectionSet::DirectionSet(std::vector<Vec3> dirs) : dirs_(std::move(dirs)) {
  if (dirs_.empty()) throw std::invalid_argument("DirectionSet: empty direction list");
  for (auto& d : dirs_) {
    const double n = norm(d);
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::invalid_argument("DirectionSet: zero or non-finite direction");
    // keep already-unit vectors bit-identical so serialization round-trips
    if (std::fabs(n - 1.0) > 1e-12) d *= 1.0 / n;
  }
  const int n = static_cast<int>(dirs_.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::fabs(dot(dirs_[i], dirs_[j])) > 1.0 - 1e-9)
        throw std::invalid_argument("DirectionSet: duplicate projective direction");
}

double DirectionSet::min_projective_angle() const {
  double best = std::numbers::pi;
  const int n = size();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      best = std::min(best, projective_angle(dirs_[i], dirs_[j]));
  return best;
}

bool DirectionSet::same_as(const DirectionSet& other, double tol) const {
  if (size() != other.size()) return false;
  for (int i = 0; i < size(); ++i)
    if (norm(dirs_[i] - other.dirs_[i]) > tol) return false;
  return true;
}

DirectionSet DirectionSet::generate(int n, std::uint64_t /*seed*/) {
  if (n < 1) throw std::invalid_argument("generate_directions: n must be >= 1");

  // Fibonacci spiral on the upper hemisphere; the first point sits exactly
  // at the pole so n = 1 canonicalizes to (0, 0, 1).
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> pts(n);
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - static_cast<double>(i) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double a = golden_angle * i;
    pts[i] = {r * std::cos(a), r * std::sin(a), z};
  }

  if (n > 2) {
    // One repulsion pass on the projective metric, evaluated from a frozen
    // snapshot so the result is independent of point order.
    const double theta0 = std::sqrt(2.0 * std::numbers::pi / n);  // mean spacing
    const double step = 0.3 * theta0;
    std::vector<Vec3> moved(pts);
    for (int i = 0; i < n; ++i) {
      Vec3 force{0, 0, 0};
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double s = dot(pts[i], pts[j]) >= 0.0 ? 1.0 : -1.0;
        const Vec3 away = pts[i] - s * pts[j];
        const double theta = projective_angle(pts[i], pts[j]);
        const double w = std::exp(-(theta * theta) / (theta0 * theta0));
        const double len = norm(away);
        if (len > 1e-12) force += away * (w / len);
      }
      // project to the tangent plane and take one bounded step
      force -= pts[i] * dot(force, pts[i]);
      const double flen = norm(force);
      if (flen > 1e-12) moved[i] = normalized(pts[i] + force * (step / flen * std::min(1.0, flen)));
    }
    pts.swap(moved);
  }

  for (auto& p : pts) p = canonical_representative(p);
  return DirectionSet(std::move(pts));
}

void DirectionSet::save(std::ostream& out) const {
  out << size() << "\n";
  char buf[96];
  for (const auto& d : dirs_) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", d.x, d.y, d.z);
    out << buf;
  }
}

DirectionSet DirectionSet::load(std::istream& in) {
  int n = 0;
  if (!(in >> n) || n < 1) throw io_error("direction table: bad count");
  std::vector<Vec3> dirs(n);
  for (int i = 0; i < n; ++i)
    if (!(in >> dirs[i].x >> dirs[i].y >> dirs[i].z))
      throw io_error("direction table: truncated at line " + std::to_string(i + 2));
  return DirectionSet(std::move(dirs));
}

std::vector<double> watson_weights(const DirectionSet& dirs, double kappa, const Vec3& query) {
  if (kappa < 0.0) throw std::invalid_argument("watson_weights: kappa must be >= 0");
  if (std::fabs(norm(query) - 1.0) > 1e-6)
    throw std::invalid_argument("watson_weights: query must be a unit vector");
  const int n = dirs.size();
  std::vector<double> w(n);
  double emax = -1.0;
  for (int i = 0; i < n; ++i) {
    const double t = dot(dirs[i], query);
    w[i] = kappa * t * t;
    emax = std::max(emax, w[i]);
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = std::exp(w[i] - emax);
    sum += w[i];
  }
  const double inv = 1.0 / sum;
  for (auto& v : w) v *= inv;
  return w;
}

WatsonTable WatsonTable::build(const DirectionSet& dirs, double kappa) {
  WatsonTable t;
  t.kappa = kappa;
  t.n = dirs.size();
  t.weights.resize(static_cast<size_t>(t.n) * t.n);
  for (int m = 0; m < t.n; ++m) {
    const auto row = watson_weights(dirs, kappa, dirs[m]);
    std::copy(row.begin(), row.end(), t.weights.begin() + static_cast<size_t>(m) * t.n);
  }
  return t;
}

std::vector<double> directional_smooth(std::span<const double> signal, const WatsonTable& table) {
  if (static_cast<int>(signal.size()) != table.n)
    throw std::invalid_argument("directional_smooth: signal length does not match table");
  std::vector<double> out(table.n, 0.0);
  for (int m = 0; m < table.n; ++m) {
    const double* row = table.weights.data() + static_cast<size_t>(m) * table.n;
    double acc = 0.0;
    for (int i = 0; i < table.n; ++i) acc += signal[i] * row[i];
    out[m] = acc;
  }
  return out;
}

std::vector<double> funk_radon(std::span<const double> signal, const DirectionSet& dirs,
                               double band_halfwidth) {
  if (!(band_halfwidth > 0.0) || !(band_halfwidth < std::numbers::pi / 2))
    throw std::invalid_argument("funk_radon: band halfwidth must be in (0, pi/2)");
  const int n = dirs.size();
  if (static_cast<int>(signal.size()) != n)
    throw std::invalid_argument("funk_radon: signal length does not match direction set");
  const double band = std::sin(band_halfwidth);
  std::vector<double> odf(n, 0.0);
  for (int m = 0; m < n; ++m) {
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
      if (std::fabs(dot(dirs[i], dirs[m])) <= band) {
        acc += signal[i];
        ++count;
      }
    }
    if (count == 0) {
      std::ostringstream msg;
      msg << "funk_radon: empty equatorial band for direction " << m << " (" << dirs[m].x << ", "
          << dirs[m].y << ", " << dirs[m].z << ")";
      throw numerical_error(msg.str());
    }
    odf[m] = acc / count;
  }
  const double mx = *std::max_element(odf.begin(), odf.end());
  if (mx > 0.0)
    for (auto& v : odf) v /= mx;
  return odf;
}

double gfa(std::span<const double> signal) {
  const size_t n = signal.size();
  if (n < 2) throw std::invalid_argument("gfa: need at least 2 directions");
  double mean = 0.0, sq = 0.0;
  for (double v : signal) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(n);
  const double rms2 = sq / static_cast<double>(n);
  if (rms2 <= 0.0) throw numerical_error("gfa: undefined for an all-zero signal");
  const double var = std::max(0.0, rms2 - mean * mean);
  return std::sqrt(var / rms2);
}

int argmax_index(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

Vec3 principal_axis(std::span<const double> odf, const DirectionSet& dirs) {
  const int n = dirs.size();
  if (static_cast<int>(odf.size()) != n)
    throw std::invalid_argument("principal_axis: length mismatch");
  const double lo = *std::min_element(odf.begin(), odf.end());
  Mat3 tensor = Mat3::zero();
  for (int i = 0; i < n; ++i) {
    const double w = (odf[i] - lo) * (odf[i] - lo);
    tensor += outer(dirs[i], dirs[i]) * w;
  }
  // power iteration; start from the strongest coordinate axis
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (tensor(a, a) > tensor(axis, axis)) axis = a;
  Vec3 v{axis == 0 ? 1.0 : 0.0, axis == 1 ? 1.0 : 0.0, axis == 2 ? 1.0 : 0.0};
  for (int it = 0; it < 64; ++it) {
    Vec3 w = tensor * v;
    const double len = norm(w);
    if (len < 1e-300) break;
    v = w * (1.0 / len);
  }
  return canonical_representative(v);
}

}  // namespace lord
