#include "lord/density.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "lord/errors.hpp"

namespace lord {

void IntensityMap::validate() const {
  if (!(hi > lo)) throw std::invalid_argument("IntensityMap: range must satisfy hi > lo");
  if (bins < 2) throw std::invalid_argument("IntensityMap: need at least 2 bins");
  if (beta < 0.0) throw std::invalid_argument("IntensityMap: beta must be >= 0");
  if (beta > 3.0) throw std::invalid_argument("IntensityMap: beta above 3 bin widths unsupported");
}

double IntensityMap::coord(double a) const {
  const double c = std::clamp(a, lo, hi);
  return (c - lo) / width() - 0.5;
}

namespace {

double bspline3(double t) {
  t = std::fabs(t);
  if (t >= 2.0) return 0.0;
  if (t >= 1.0) {
    const double s = 2.0 - t;
    return s * s * s / 6.0;
  }
  return (4.0 - 6.0 * t * t + 3.0 * t * t * t) / 6.0;
}

double bspline3_deriv(double t) {
  const double a = std::fabs(t);
  if (a >= 2.0) return 0.0;
  double d;
  if (a >= 1.0) {
    const double s = 2.0 - a;
    d = -s * s / 2.0;
  } else {
    d = a * (3.0 * a - 4.0) / 2.0;
  }
  return t < 0.0 ? -d : d;
}

}  // namespace

DepositWindow deposit_window(const IntensityMap& map, double a) {
  map.validate();
  DepositWindow out;
  out.clamped = a < map.lo || a > map.hi;
  const double u = map.coord(a);

  if (map.beta == 0.0) {
    int k = static_cast<int>(std::lround(u));
    k = std::clamp(k, 0, map.bins - 1);
    out.first = k;
    out.count = 1;
    out.w[0] = 1.0;
    out.dw[0] = 0.0;
    return out;
  }

  const double support = 2.0 * map.beta;
  int k0 = static_cast<int>(std::ceil(u - support));
  int k1 = static_cast<int>(std::floor(u + support));
  k0 = std::max(k0, 0);
  k1 = std::min(k1, map.bins - 1);
  if (k1 - k0 + 1 > DepositWindow::kMaxSpan)
    throw std::invalid_argument("deposit_window: window exceeds span limit");
  out.first = k0;
  out.count = k1 - k0 + 1;

  const double inv_beta = 1.0 / map.beta;
  const double du = out.clamped ? 0.0 : 1.0 / map.width();
  double sum = 0.0, dsum = 0.0;
  for (int k = 0; k < out.count; ++k) {
    const double t = (u - (k0 + k)) * inv_beta;
    out.w[k] = bspline3(t);
    out.dw[k] = bspline3_deriv(t) * inv_beta * du;
    sum += out.w[k];
    dsum += out.dw[k];
  }
  // normalize so each sample deposits exactly unit mass, also at the edges
  const double inv = 1.0 / sum;
  for (int k = 0; k < out.count; ++k) {
    out.dw[k] = (out.dw[k] * sum - out.w[k] * dsum) * inv * inv;
    out.w[k] *= inv;
  }
  return out;
}

JointDensity joint_histogram(std::span<const std::pair<double, double>> samples,
                             const IntensityMap& map) {
  map.validate();
  if (samples.size() < 2) throw std::invalid_argument("joint_histogram: need at least 2 samples");
  JointDensity jd;
  jd.map = map;
  const int bins = map.bins;
  jd.counts.assign(static_cast<size_t>(bins) * bins, 0.0);
  for (const auto& [a, b] : samples) {
    const DepositWindow wa = deposit_window(map, a);
    const DepositWindow wb = deposit_window(map, b);
    if (wa.clamped || wb.clamped) ++jd.clamped_samples;
    for (int i = 0; i < wa.count; ++i) {
      double* row = jd.counts.data() + static_cast<size_t>(wa.first + i) * bins;
      for (int j = 0; j < wb.count; ++j) row[wb.first + j] += wa.w[i] * wb.w[j];
    }
  }
  double total = 0.0;
  for (double c : jd.counts) total += c;
  jd.total = total;
  jd.p.resize(jd.counts.size());
  const double inv = 1.0 / total;
  for (size_t i = 0; i < jd.counts.size(); ++i) jd.p[i] = jd.counts[i] * inv;
  jd.p_a.assign(bins, 0.0);
  jd.p_b.assign(bins, 0.0);
  for (int i = 0; i < bins; ++i)
    for (int j = 0; j < bins; ++j) {
      const double v = jd.p[static_cast<size_t>(i) * bins + j];
      jd.p_a[i] += v;
      jd.p_b[j] += v;
    }
  return jd;
}

double entropy(std::span<const double> p, double cell) {
  double sum = 0.0;
  for (double v : p) {
    if (v < -1e-12) throw numerical_error("entropy: negative density entry");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-6) throw std::invalid_argument("entropy: density must sum to 1");
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v / cell);
  return h;
}

double nmi(const JointDensity& jd) {
  const NmiTables t = NmiTables::build(jd);
  return t.value;
}

NmiTables NmiTables::build(const JointDensity& jd) {
  NmiTables t;
  t.bins = jd.map.bins;
  t.total = jd.total;
  t.ln_pa.assign(jd.p_a.size(), 0.0);
  t.ln_p.assign(jd.p.size(), 0.0);
  double h_b = 0.0;
  for (size_t i = 0; i < jd.p_a.size(); ++i) {
    if (jd.p_a[i] > 0.0) {
      t.ln_pa[i] = std::log(jd.p_a[i]);
      t.h_a -= jd.p_a[i] * t.ln_pa[i];
    }
    if (jd.p_b[i] > 0.0) h_b -= jd.p_b[i] * std::log(jd.p_b[i]);
  }
  t.h_b = h_b;
  for (size_t i = 0; i < jd.p.size(); ++i) {
    if (jd.p[i] > 0.0) {
      t.ln_p[i] = std::log(jd.p[i]);
      t.h_ab -= jd.p[i] * t.ln_p[i];
    }
  }
  if (std::fabs(t.h_ab) < 1e-12)
    throw numerical_error("nmi: degenerate joint distribution (zero joint entropy)");
  t.value = (t.h_a + t.h_b) / t.h_ab;
  return t;
}

double d_nmi_d_sample(const NmiTables& tables, const IntensityMap& map, double a, double b) {
  const DepositWindow wa = deposit_window(map, a);
  if (wa.clamped) return 0.0;
  const DepositWindow wb = deposit_window(map, b);
  const double inv_total = 1.0 / tables.total;
  double dh_a = 0.0, dh_ab = 0.0;
  for (int i = 0; i < wa.count; ++i) {
    const double dwi = wa.dw[i];
    if (dwi == 0.0) continue;
    dh_a -= dwi * tables.ln_pa[wa.first + i];
    const double* lnrow = tables.ln_p.data() + static_cast<size_t>(wa.first + i) * tables.bins;
    double acc = 0.0;
    for (int j = 0; j < wb.count; ++j) acc += wb.w[j] * lnrow[wb.first + j];
    dh_ab -= dwi * acc;
  }
  dh_a *= inv_total;
  dh_ab *= inv_total;
  return (dh_a - tables.value * dh_ab) / tables.h_ab;
}

double d_nmi_d_sample(const JointDensity& jd, std::pair<double, double> sample) {
  const NmiTables tables = NmiTables::build(jd);
  return d_nmi_d_sample(tables, jd.map, sample.first, sample.second);
}

void JointDensity::export_csv(std::ostream& out) const {
  for (int i = 0; i < map.bins; ++i) {
    for (int j = 0; j < map.bins; ++j) {
      if (j) out << ",";
      out << density(i, j);
    }
    out << "\n";
  }
}

}  // namespace lord
