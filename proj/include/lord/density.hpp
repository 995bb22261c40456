#ifndef LORD_DENSITY_HPP
#define LORD_DENSITY_HPP

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace lord {

/// Intensity binning: range [lo, hi], bin count, and the Parzen scale beta
/// in bin widths. beta = 0 degenerates to nearest-bin deposits.
struct IntensityMap {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 32;
  double beta = 1.0;

  void validate() const;
  double width() const { return (hi - lo) / bins; }
  /// Continuous bin coordinate of a clamped value; bin centers at integers.
  double coord(double a) const;
};

/// Per-axis Parzen deposit of one sample: a short run of bins with weights
/// normalized to total mass exactly 1, plus their derivative in the value.
struct DepositWindow {
  static constexpr int kMaxSpan = 16;
  int first = 0;
  int count = 0;
  double w[kMaxSpan];
  double dw[kMaxSpan];
  bool clamped = false;  // value fell outside the range
};

DepositWindow deposit_window(const IntensityMap& map, double a);

/// Joint histogram with its normalized density and marginals.
/// Convention: index i runs over the first sample coordinate (rows).
class JointDensity {
 public:
  IntensityMap map;
  double total = 0.0;
  std::vector<double> counts;  // bins x bins, row-major
  std::vector<double> p;
  std::vector<double> p_a, p_b;
  long clamped_samples = 0;

  double density(int i, int j) const { return p[static_cast<size_t>(i) * map.bins + j]; }

  /// CSV: one row per i, bins comma-separated densities.
  void export_csv(std::ostream& out) const;
};

JointDensity joint_histogram(std::span<const std::pair<double, double>> samples,
                             const IntensityMap& map);

/// -sum p ln(p / cell) with the 0 ln 0 = 0 convention. cell = 1 gives the
/// discrete Shannon entropy used by the NMI objective.
double entropy(std::span<const double> p, double cell = 1.0);

double nmi(const JointDensity& jd);

/// Entropies and log-density tables reused across many derivative queries.
struct NmiTables {
  double h_a = 0.0, h_b = 0.0, h_ab = 0.0;
  double value = 0.0;  // (h_a + h_b) / h_ab
  double total = 0.0;
  int bins = 0;
  std::vector<double> ln_pa, ln_p;  // 0 where the density vanishes

  static NmiTables build(const JointDensity& jd);
};

/// dNMI/da for one of the samples the histogram was built from.
double d_nmi_d_sample(const JointDensity& jd, std::pair<double, double> sample);
double d_nmi_d_sample(const NmiTables& tables, const IntensityMap& map, double a, double b);

}  // namespace lord

#endif
