#include "lord/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "lord/errors.hpp"
#include "lord/gradient.hpp"
#include "lord/metrics.hpp"
#include "lord/rng.hpp"

namespace lord {

using nlohmann::json;

void RunConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("config: sigma must be > 0");
  if (lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
  if (beta < 0.0) throw std::invalid_argument("config: beta must be >= 0");
  if (directions < 0) throw std::invalid_argument("config: directions must be >= 0");
  schedule.validate();
}

std::string RunConfig::to_json() const {
  json j;
  j["sigma"] = sigma;
  j["lambda"] = lambda;
  j["beta"] = beta;
  j["directions"] = directions;
  j["seed"] = seed;
  j["steps"] = json::array();
  for (const auto& s : schedule.steps) {
    json step;
    step["delta"] = s.delta;
    step["bins"] = s.bins;
    step["kappa"] = s.kappa;
    step["stride"] = s.stride;
    step["max_iters"] = s.max_iters;
    step["tol"] = s.tol;
    j["steps"].push_back(step);
  }
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  static const std::vector<std::string> known = {"sigma",      "lambda", "beta",
                                                 "directions", "seed",   "steps"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw std::invalid_argument("config: unknown key '" + it.key() + "'");
  RunConfig cfg;
  try {
    if (j.contains("sigma")) cfg.sigma = j["sigma"].get<double>();
    if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
    if (j.contains("beta")) cfg.beta = j["beta"].get<double>();
    if (j.contains("directions")) cfg.directions = j["directions"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (!j.contains("steps")) throw std::invalid_argument("config: missing 'steps'");
    for (const auto& step : j["steps"]) {
      static const std::vector<std::string> step_keys = {"delta",  "bins",      "kappa",
                                                         "stride", "max_iters", "tol"};
      for (auto it = step.begin(); it != step.end(); ++it)
        if (std::find(step_keys.begin(), step_keys.end(), it.key()) == step_keys.end())
          throw std::invalid_argument("config: unknown step key '" + it.key() + "'");
      StepConfig s;
      s.delta = step.at("delta").get<double>();
      s.bins = step.at("bins").get<int>();
      if (step.contains("kappa")) s.kappa = step["kappa"].get<double>();
      if (step.contains("stride")) s.stride = step["stride"].get<int>();
      if (step.contains("max_iters")) s.max_iters = step["max_iters"].get<int>();
      if (step.contains("tol")) s.tol = step["tol"].get<double>();
      cfg.schedule.steps.push_back(s);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

// --- cubic B-spline prefilter ---------------------------------------------

namespace {

// Recursive two-pass filter along one axis (pole of the cubic B-spline).
void prefilter_axis(std::vector<double>& line) {
  constexpr double z = -0.26794919243112270647;  // sqrt(3) - 2
  const size_t n = line.size();
  if (n == 1) return;
  const double gain = 6.0;
  for (auto& v : line) v *= gain;
  // causal init: mirror-extended geometric sum
  double sum = line[0];
  double zk = z;
  const int horizon = std::min<size_t>(n, 42);
  for (int k = 1; k < horizon; ++k) {
    sum += zk * line[k];
    zk *= z;
  }
  line[0] = sum;
  for (size_t i = 1; i < n; ++i) line[i] += z * line[i - 1];
  // anticausal init
  line[n - 1] = (z / (z * z - 1.0)) * (line[n - 1] + z * line[n - 2]);
  for (size_t i = n - 1; i-- > 0;) line[i] = z * (line[i + 1] - line[i]);
}

}  // namespace

CubicInterpolator::CubicInterpolator(const SpatioDirectionalImage& img) : coeffs_(img) {
  const auto dims = img.dims();
  const int n = img.ndirs();
  std::vector<double> line;
  // x lines
  line.resize(dims.nx);
  for (int d = 0; d < n; ++d)
    for (int z = 0; z < dims.nz; ++z)
      for (int y = 0; y < dims.ny; ++y) {
        for (int x = 0; x < dims.nx; ++x) line[x] = coeffs_.at(x, y, z, d);
        prefilter_axis(line);
        for (int x = 0; x < dims.nx; ++x) coeffs_.at(x, y, z, d) = line[x];
      }
  line.resize(dims.ny);
  for (int d = 0; d < n; ++d)
    for (int z = 0; z < dims.nz; ++z)
      for (int x = 0; x < dims.nx; ++x) {
        for (int y = 0; y < dims.ny; ++y) line[y] = coeffs_.at(x, y, z, d);
        prefilter_axis(line);
        for (int y = 0; y < dims.ny; ++y) coeffs_.at(x, y, z, d) = line[y];
      }
  line.resize(dims.nz);
  for (int d = 0; d < n; ++d)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        for (int z = 0; z < dims.nz; ++z) line[z] = coeffs_.at(x, y, z, d);
        prefilter_axis(line);
        for (int z = 0; z < dims.nz; ++z) coeffs_.at(x, y, z, d) = line[z];
      }
}

double CubicInterpolator::channel(const Vec3& pos, int nchan) const {
  const auto dims = coeffs_.dims();
  double wx[4], wy[4], wz[4];
  const int bx = static_cast<int>(std::floor(pos.x)) - 1;
  const int by = static_cast<int>(std::floor(pos.y)) - 1;
  const int bz = static_cast<int>(std::floor(pos.z)) - 1;
  CubicBasis::weights(pos.x - std::floor(pos.x), wx);
  CubicBasis::weights(pos.y - std::floor(pos.y), wy);
  CubicBasis::weights(pos.z - std::floor(pos.z), wz);
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    const int z = bz + k;
    if (z < 0 || z >= dims.nz) continue;
    for (int j = 0; j < 4; ++j) {
      const int y = by + j;
      if (y < 0 || y >= dims.ny) continue;
      for (int i = 0; i < 4; ++i) {
        const int x = bx + i;
        if (x < 0 || x >= dims.nx) continue;
        acc += wx[i] * wy[j] * wz[k] * coeffs_.value(x, y, z, nchan);
      }
    }
  }
  return acc;
}

double CubicInterpolator::sample(const Vec3& pos, const Vec3& dir, double kappa) const {
  const int n = coeffs_.ndirs();
  std::vector<double> w;
  int nearest = -1;
  if (std::isinf(kappa)) {
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      const double t = std::fabs(dot(coeffs_.directions()[i], dir));
      if (t > best) {
        best = t;
        nearest = i;
      }
    }
  } else {
    w = watson_weights(coeffs_.directions(), kappa, normalized(dir));
  }
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double wi = nearest >= 0 ? (i == nearest ? 1.0 : 0.0) : w[i];
    if (wi == 0.0) continue;
    acc += wi * channel(pos, i);
  }
  return acc;
}

SpatioDirectionalImage warp_image(const SpatioDirectionalImage& img, const HierarchicalFFD& ffd,
                                  double kappa, bool cubic) {
  SpatioDirectionalImage out(img.dims(), img.directions_ptr());
  const int n = img.ndirs();
  const auto dims = img.dims();
  std::unique_ptr<CubicInterpolator> interp;
  if (cubic) interp = std::make_unique<CubicInterpolator>(img);
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const Vec3 p{double(x), double(y), double(z)};
        const Vec3 phi = deform(ffd, p);
        const Mat3 J = spatial_jacobian(ffd, p);
        double* vox = out.voxel(x, y, z);
        for (int d = 0; d < n; ++d) {
          const Vec3 psi = J * img.directions()[d];
          double v;
          if (cubic)
            v = interp->sample(phi, psi, kappa);
          else
            v = sample(img, phi, normalized(psi), kappa);
          vox[d] = std::max(0.0, v);
        }
      }
  return out;
}

// --- sweeps ----------------------------------------------------------------

Schedule sweep_schedule(const std::vector<int>& bins, double kappa,
                        const std::vector<int>& strides, int max_iters) {
  const double deltas[4] = {10.0, 5.0, 3.5, 3.0};
  Schedule s;
  for (int i = 0; i < 4; ++i) {
    StepConfig step;
    step.delta = deltas[i];
    step.bins = bins[i];
    step.kappa = kappa;
    step.stride = strides[i];
    step.max_iters = max_iters;
    step.tol = 1e-6;
    s.steps.push_back(step);
  }
  s.validate();
  return s;
}

std::vector<SweepRow> run_sweep_variant(const std::string& sweep, const std::string& variant,
                                        const Schedule& schedule, double kappa_override,
                                        std::uint64_t seed, const SweepSetup& setup) {
  Schedule sched = schedule;
  if (kappa_override >= 0.0)
    for (auto& s : sched.steps) s.kappa = kappa_override;

  const auto moving = sweep_phantom(setup.dims, setup.ndirs, seed);
  const auto warp = synthetic_warp(setup.dims, setup.warp_delta, setup.warp_magnitude, seed + 1);
  const auto target = warp_image(moving, warp, setup.warp_kappa);

  std::vector<Vec3> probes;
  for (int z = 0; z < setup.dims.nz; ++z)
    for (int y = 0; y < setup.dims.ny; ++y)
      for (int x = 0; x < setup.dims.nx; ++x) probes.push_back({double(x), double(y), double(z)});

  std::vector<SweepRow> rows;
  std::vector<DeformationReport> step_reports;
  const auto t0 = std::chrono::steady_clock::now();

  RegisterOptions opts;
  opts.sigma = 0.6;
  opts.lambda = kDefaultLambda;
  opts.enum_dirs = setup.enum_dirs;
  opts.seed = seed;
  opts.on_step = [&](int step, const HierarchicalFFD& ffd) {
    // metrics of this step's displacement increment
    VectorField u(setup.dims);
    const ControlGrid& level = ffd.level(step - 1);
    size_t i = 0;
    for (int z = 0; z < setup.dims.nz; ++z)
      for (int y = 0; y < setup.dims.ny; ++y)
        for (int x = 0; x < setup.dims.nx; ++x)
          u.u[i++] = displacement(level, {double(x), double(y), double(z)});
    auto rep = deformation_report(u);
    rep.mse = coordinate_mse([&](const Vec3& p) { return deform(ffd, p); },
                             [&](const Vec3& p) { return deform(warp, p); }, probes);
    step_reports.push_back(std::move(rep));
    const auto acc = accumulate(step_reports);
    SweepRow row;
    row.sweep = sweep;
    row.variant = variant;
    row.seed = seed;
    row.step = step;
    row.mse = step_reports.back().mse;
    row.mean_curl = acc.mean_curl;
    row.mean_abs_div = acc.mean_abs_div;
    row.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);
  };
  register_images(moving, target, sched, opts);
  return rows;
}

std::vector<SweepRow> run_sweep(const std::string& name, std::uint64_t seed,
                                const SweepSetup& setup) {
  const std::vector<int> progressive = {50, 100, 200, 500};
  const std::vector<int> full_res = {1, 1, 1, 1};
  std::vector<SweepRow> rows;
  auto append = [&](std::vector<SweepRow> r) {
    rows.insert(rows.end(), r.begin(), r.end());
  };
  if (name == "bins_sweep") {
    append(run_sweep_variant(name, "fixed50",
                             sweep_schedule({50, 50, 50, 50}, 15.0, full_res, setup.max_iters),
                             -1.0, seed, setup));
    append(run_sweep_variant(name, "fixed500",
                             sweep_schedule({500, 500, 500, 500}, 15.0, full_res, setup.max_iters),
                             -1.0, seed, setup));
    append(run_sweep_variant(name, "progressive",
                             sweep_schedule(progressive, 15.0, full_res, setup.max_iters), -1.0,
                             seed, setup));
  } else if (name == "kappa_sweep") {
    for (double kappa : {0.0, 10.0, 15.0, 30.0}) {
      char label[32];
      std::snprintf(label, sizeof label, "kappa%g", kappa);
      append(run_sweep_variant(name, label,
                               sweep_schedule(progressive, kappa, full_res, setup.max_iters),
                               -1.0, seed, setup));
    }
  } else if (name == "spatial_sweep") {
    append(run_sweep_variant(name, "full",
                             sweep_schedule(progressive, 15.0, full_res, setup.max_iters), -1.0,
                             seed, setup));
    append(run_sweep_variant(name, "low_to_full",
                             sweep_schedule(progressive, 15.0, {4, 3, 2, 1}, setup.max_iters),
                             -1.0, seed, setup));
  } else {
    throw std::invalid_argument(
        "unknown experiment '" + name +
        "'; valid names: bins_sweep kappa_sweep spatial_sweep");
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "sweep,variant,seed,step,mse,mean_curl,mean_abs_div,wall_ms\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%llu,%d,%.12g,%.12g,%.12g,%.3f\n", r.sweep.c_str(),
                  r.variant.c_str(), static_cast<unsigned long long>(r.seed), r.step, r.mse,
                  r.mean_curl, r.mean_abs_div, r.wall_ms);
    out << buf;
  }
}

double gradient_selfcheck(std::uint64_t seed, double kappa, int ncoords) {
  const GridDims dims{8, 8, 8};
  auto dirs = std::make_shared<DirectionSet>(DirectionSet::generate(12));
  SpatioDirectionalImage moving(dims, dirs), target(dims, dirs);
  Rng rng(seed);
  for (auto& v : moving.data()) v = rng.uniform();
  for (auto& v : target.data()) v = rng.uniform();

  SimilarityConfig cfg;
  cfg.kappa = kappa;
  cfg.bins = 16;
  RegistrationObjective obj(moving, target, HierarchicalFFD{}, ControlGrid(1, {4, 4, 4}, 3.0),
                            cfg);
  std::vector<double> x0(obj.dof());
  for (auto& v : x0) v = rng.uniform(-0.2, 0.2);
  std::vector<double> grad;
  obj.evaluate(x0, &grad);

  const double h = 1e-5;
  double max_rel = 0.0;
  for (int trial = 0; trial < ncoords; ++trial) {
    const int q = static_cast<int>(rng.uniform() * obj.dof());
    const double saved = x0[q];
    x0[q] = saved + h;
    const double up = obj.evaluate(x0, nullptr);
    x0[q] = saved - h;
    const double dn = obj.evaluate(x0, nullptr);
    x0[q] = saved;
    const double fd = (up - dn) / (2 * h);
    const double err = std::fabs(grad[q] - fd);
    max_rel = std::max(max_rel, err / std::max(std::fabs(fd), 1e-7));
  }
  return max_rel;
}

// --- glyph export ----------------------------------------------------------

namespace {

std::string gfa_color(double g) {
  // dark blue (isotropic) to red (anisotropic)
  const double t = std::clamp(g, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 * t));
  const int b = static_cast<int>(std::lround(255 * (1.0 - t) * 0.7 + 60 * (1 - t)));
  const int gg = static_cast<int>(std::lround(40 * (1 - t)));
  return "rgb(" + std::to_string(r) + "," + std::to_string(gg) + "," +
         std::to_string(std::min(255, b)) + ")";
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

void export_frt_glyphs(const SpatioDirectionalImage& img, int slice, std::ostream& svg,
                       std::ostream& csv, double band_halfwidth) {
  const auto dims = img.dims();
  if (slice < 0 || slice >= dims.nz) throw std::invalid_argument("frt: slice out of range");
  const int n = img.ndirs();
  const double cell = 20.0;

  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << dims.nx * cell << "\" height=\""
      << dims.ny * cell << "\" viewBox=\"0 0 " << dims.nx * cell << " " << dims.ny * cell
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  csv << "x,y";
  for (int d = 0; d < n; ++d) csv << ",odf" << d;
  csv << "\n";

  // in-plane angles of both representatives of every direction
  struct Spoke {
    double angle;
    int dir;
  };
  std::vector<Spoke> spokes;
  for (int d = 0; d < n; ++d) {
    const Vec3& v = img.directions()[d];
    const double len = std::hypot(v.x, v.y);
    if (len < 0.15) continue;  // nearly orthogonal to the slice plane
    const double a = std::atan2(v.y, v.x);
    spokes.push_back({a, d});
    spokes.push_back({a > 0 ? a - std::numbers::pi : a + std::numbers::pi, d});
  }
  std::sort(spokes.begin(), spokes.end(),
            [](const Spoke& a, const Spoke& b) { return a.angle < b.angle; });

  for (int y = 0; y < dims.ny; ++y)
    for (int x = 0; x < dims.nx; ++x) {
      std::span<const double> sig(img.voxel(x, y, slice), n);
      double g = 0.0;
      bool flat = true;
      for (int d = 1; d < n; ++d) flat = flat && sig[d] == sig[0];
      if (!flat) g = gfa(sig);
      std::vector<double> odf;
      try {
        odf = funk_radon(sig, img.directions(), band_halfwidth);
      } catch (const numerical_error&) {
        odf.assign(n, 1.0);
      }
      csv << x << "," << y;
      for (int d = 0; d < n; ++d) csv << "," << round6(odf[d]);
      csv << "\n";

      const double cx = (x + 0.5) * cell;
      const double cy = (y + 0.5) * cell;
      svg << "<polyline fill=\"none\" stroke=\"" << gfa_color(g)
          << "\" stroke-width=\"1\" points=\"";
      for (const auto& s : spokes) {
        const double r = 0.45 * cell * odf[s.dir];
        svg << round6(cx + r * std::cos(s.angle)) << "," << round6(cy + r * std::sin(s.angle))
            << " ";
      }
      if (!spokes.empty()) {
        const double r = 0.45 * cell * odf[spokes.front().dir];
        svg << round6(cx + r * std::cos(spokes.front().angle)) << ","
            << round6(cy + r * std::sin(spokes.front().angle));
      }
      svg << "\"/>\n";
    }
  svg << "</svg>\n";
}

}  // namespace lord
