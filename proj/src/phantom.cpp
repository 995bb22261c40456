#include "lord/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lord/errors.hpp"
#include "lord/rng.hpp"

namespace lord {

void Blueprint::add_fiber(int i, int j, const Vec3& tangent, double weight) {
  if (i < 0 || i >= cols || j < 0 || j >= rows)
    throw std::invalid_argument("Blueprint: cell out of range");
  if (!(weight > 0.0) || weight > 1.0)
    throw std::invalid_argument("Blueprint: weight must be in (0, 1]");
  cell(i, j).push_back({normalized(tangent), weight});
}

void Blueprint::save(std::ostream& out) const {
  char buf[160];
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i)
      for (const auto& f : cell(i, j)) {
        std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g %.17g %.17g\n", i, j, f.tangent.x,
                      f.tangent.y, f.tangent.z, f.weight);
        out << buf;
      }
}

Blueprint Blueprint::load(std::istream& in, int cols, int rows) {
  Blueprint bp(cols, rows);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    int i, j;
    Vec3 t;
    double w;
    if (!(ls >> i)) continue;  // blank
    if (!(ls >> j >> t.x >> t.y >> t.z >> w))
      throw io_error("blueprint: malformed line " + std::to_string(lineno));
    bp.add_fiber(i, j, t, w);
  }
  return bp;
}

std::vector<double> single_fiber_signal(const Vec3& tangent, const DirectionSet& dirs,
                                        double sharpness) {
  if (!(sharpness > 0.0)) throw std::invalid_argument("single_fiber_signal: sharpness must be > 0");
  const Vec3 t = normalized(tangent);
  std::vector<double> s(dirs.size());
  for (int i = 0; i < dirs.size(); ++i) {
    const double d = dot(dirs[i], t);
    s[i] = std::exp(-sharpness * d * d);
  }
  return s;
}

SpatioDirectionalImage synthesize(const Blueprint& bp,
                                  std::shared_ptr<const DirectionSet> dirs,
                                  const SynthesisOptions& opts) {
  if (opts.cell_voxels < 1 || opts.thickness < 1)
    throw std::invalid_argument("synthesize: cell_voxels and thickness must be >= 1");
  if (opts.noise_amplitude < 0.0)
    throw std::invalid_argument("synthesize: noise amplitude must be >= 0");
  if (!(opts.iso_level > 0.0) || opts.iso_level > 1.0)
    throw std::invalid_argument("synthesize: iso level must be in (0, 1]");

  const GridDims dims{bp.cols * opts.cell_voxels, bp.rows * opts.cell_voxels, opts.thickness};
  SpatioDirectionalImage img(dims, dirs);
  const int n = dirs->size();

  // per-cell signals, computed once
  std::vector<std::vector<double>> cell_signal(static_cast<size_t>(bp.cols) * bp.rows);
  for (int j = 0; j < bp.rows; ++j)
    for (int i = 0; i < bp.cols; ++i) {
      auto& sig = cell_signal[static_cast<size_t>(j) * bp.cols + i];
      const auto& fibers = bp.cell(i, j);
      if (fibers.empty()) {
        sig.assign(n, opts.iso_level);
        continue;
      }
      sig.assign(n, 0.0);
      for (const auto& f : fibers) {
        const auto s = single_fiber_signal(f.tangent, *dirs, opts.sharpness);
        for (int k = 0; k < n; ++k) sig[k] += f.weight * s[k];
      }
    }

  Rng rng(opts.seed);
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const int ci = x / opts.cell_voxels;
        const int cj = y / opts.cell_voxels;
        const auto& sig = cell_signal[static_cast<size_t>(cj) * bp.cols + ci];
        double* vox = img.voxel(x, y, z);
        for (int k = 0; k < n; ++k) {
          double v = sig[k];
          if (opts.noise_amplitude > 0.0) v += rng.uniform(0.0, opts.noise_amplitude);
          vox[k] = v;
        }
      }
  return img;
}

namespace {

using Curve = std::function<Vec3(double)>;  // t -> (x, y) in cell coordinates, z ignored

// Stamp fibers along a parametric curve: every cell whose center lies within
// width/2 of a sampled curve point receives the local tangent. A cell keeps
// at most one fiber per distinct orientation (> 20 degrees apart).
void draw_curve(Blueprint& bp, const Curve& c, double t0, double t1, double width,
                double weight = 1.0) {
  const int steps = 600;
  const double half = width / 2.0;
  for (int s = 0; s <= steps; ++s) {
    const double t = t0 + (t1 - t0) * s / steps;
    const double dt = (t1 - t0) / steps;
    const Vec3 p = c(t);
    Vec3 tan = c(std::min(t + dt, t1)) - c(std::max(t - dt, t0));
    if (norm(tan) < 1e-12) continue;
    tan = normalized(tan);
    const int i0 = std::max(0, static_cast<int>(std::floor(p.x - half - 0.5)));
    const int i1 = std::min(bp.cols - 1, static_cast<int>(std::ceil(p.x + half + 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::floor(p.y - half - 0.5)));
    const int j1 = std::min(bp.rows - 1, static_cast<int>(std::ceil(p.y + half + 0.5)));
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        const double dx = (i + 0.5) - p.x, dy = (j + 0.5) - p.y;
        if (dx * dx + dy * dy > half * half) continue;
        auto& fibers = bp.cell(i, j);
        bool known = false;
        for (auto& f : fibers)
          if (projective_angle(f.tangent, tan) < 20.0 * std::numbers::pi / 180.0) {
            known = true;
            break;
          }
        if (!known) fibers.push_back({tan, weight});
      }
  }
}

void draw_segment(Blueprint& bp, Vec3 a, Vec3 b, double width, double weight = 1.0) {
  draw_curve(bp, [a, b](double t) { return a + (b - a) * t; }, 0.0, 1.0, width, weight);
}

void draw_ring(Blueprint& bp, Vec3 center, double radius, double width) {
  draw_curve(
      bp,
      [center, radius](double t) {
        return center + Vec3{radius * std::cos(t), radius * std::sin(t), 0.0};
      },
      0.0, 2.0 * std::numbers::pi, width);
}

std::pair<Blueprint, Blueprint> make_blueprints(const std::string& name) {
  Blueprint mov(20, 20), tgt(20, 20);
  const double w = 2.0;  // tract width in cells

  auto wavy = [](Blueprint& bp, double width) {
    draw_curve(
        bp,
        [](double t) {
          return Vec3{t, 10.0 + 2.4 * std::sin(2.0 * std::numbers::pi * (t - 2.0) / 16.0), 0.0};
        },
        2.0, 18.0, width);
  };

  if (name == "straight_wavy_bounded") {
    draw_segment(mov, {2, 10, 0}, {18, 10, 0}, w);
    wavy(tgt, w);
    for (Blueprint* bp : {&mov, &tgt}) {
      draw_segment(*bp, {2.5, 2, 0}, {2.5, 18, 0}, w);
      draw_segment(*bp, {17.5, 2, 0}, {17.5, 18, 0}, w);
    }
  } else if (name == "straight_wavy_free") {
    draw_segment(mov, {2, 10, 0}, {18, 10, 0}, w);
    wavy(tgt, w);
  } else if (name == "crossing_shifted") {
    draw_segment(mov, {2, 9, 0}, {18, 9, 0}, w);
    draw_segment(mov, {9, 2, 0}, {9, 18, 0}, w);
    draw_segment(tgt, {2, 11, 0}, {18, 11, 0}, w);
    draw_segment(tgt, {11, 2, 0}, {11, 18, 0}, w);
    for (Blueprint* bp : {&mov, &tgt}) {
      draw_ring(*bp, {3.5, 3.5, 0}, 1.8, 1.4);
      draw_ring(*bp, {16.5, 3.5, 0}, 1.8, 1.4);
      draw_ring(*bp, {3.5, 16.5, 0}, 1.8, 1.4);
      draw_ring(*bp, {16.5, 16.5, 0}, 1.8, 1.4);
    }
  } else if (name == "sheared_30_45") {
    draw_segment(mov, {1, 4, 0}, {19, 4, 0}, w);
    draw_segment(tgt, {1, 4, 0}, {19, 4, 0}, w);
    const double t30 = std::tan(30.0 * std::numbers::pi / 180.0);
    // X crossing at the grid center; moving sheared 30 degrees, target 45
    draw_segment(mov, {10.0 - 5.0 * t30, 5, 0}, {10.0 + 5.0 * t30, 15, 0}, w);
    draw_segment(mov, {10.0 + 5.0 * t30, 5, 0}, {10.0 - 5.0 * t30, 15, 0}, w);
    draw_segment(tgt, {5, 5, 0}, {15, 15, 0}, w);
    draw_segment(tgt, {15, 5, 0}, {5, 15, 0}, w);
  } else if (name == "fanning_kissing") {
    draw_segment(mov, {3, 3, 0}, {17, 17, 0}, w);
    draw_segment(mov, {3, 17, 0}, {17, 3, 0}, w);
    draw_curve(
        tgt, [](double t) { return Vec3{t, 10.0 + (t - 10.0) * (t - 10.0) / 9.0, 0.0}; }, 2.0,
        18.0, w);
    draw_curve(
        tgt, [](double t) { return Vec3{t, 10.0 - (t - 10.0) * (t - 10.0) / 9.0, 0.0}; }, 2.0,
        18.0, w);
  } else if (name == "straight_kissing") {
    draw_segment(mov, {1, 7, 0}, {19, 7, 0}, w);
    draw_segment(mov, {1, 13, 0}, {19, 13, 0}, w);
    draw_curve(
        tgt,
        [](double t) {
          return Vec3{t, 7.0 + 2.8 * std::exp(-(t - 10.0) * (t - 10.0) / 14.0), 0.0};
        },
        1.0, 19.0, w);
    draw_curve(
        tgt,
        [](double t) {
          return Vec3{t, 13.0 - 2.8 * std::exp(-(t - 10.0) * (t - 10.0) / 14.0), 0.0};
        },
        1.0, 19.0, w);
  } else {
    std::ostringstream msg;
    msg << "unknown experiment '" << name << "'; valid names:";
    for (const auto& n : experiment_names()) msg << " " << n;
    throw std::invalid_argument(msg.str());
  }
  return {std::move(mov), std::move(tgt)};
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "straight_wavy_bounded", "straight_wavy_free", "crossing_shifted",
      "sheared_30_45",         "fanning_kissing",    "straight_kissing"};
  return names;
}

ExperimentPair builtin_experiment(const std::string& name, int ndirs, std::uint64_t seed) {
  auto [mov_bp, tgt_bp] = make_blueprints(name);
  auto dirs = std::make_shared<DirectionSet>(DirectionSet::generate(ndirs));
  SynthesisOptions opts;
  opts.noise_amplitude = 0.02;
  opts.seed = seed;
  ExperimentPair pair;
  pair.moving = synthesize(mov_bp, dirs, opts);
  opts.seed = seed + 1000;
  pair.target = synthesize(tgt_bp, dirs, opts);
  pair.moving_bp = std::move(mov_bp);
  pair.target_bp = std::move(tgt_bp);
  return pair;
}

HierarchicalFFD synthetic_warp(GridDims dims, double delta, double magnitude_fraction,
                               std::uint64_t seed) {
  if (magnitude_fraction < 0.0 || magnitude_fraction > 0.5)
    throw std::invalid_argument("synthetic_warp: magnitude fraction must be in [0, 0.5]");
  Rng rng(seed);
  const double amp = magnitude_fraction * delta;
  for (int attempt = 0; attempt < 100; ++attempt) {
    ControlGrid grid = ControlGrid::cover(dims, delta);
    for (auto& c : grid.coeffs)
      c = {rng.uniform(-amp, amp), rng.uniform(-amp, amp), rng.uniform(-amp, amp)};
    HierarchicalFFD ffd;
    const auto probes = guard_probes(dims, grid);
    ffd.add_level(std::move(grid));
    if (amp == 0.0 || check_diffeomorphism(ffd, probes).pass) return ffd;
  }
  throw numerical_error("synthetic_warp: no valid warp after 100 attempts (magnitude too large)");
}

SpatioDirectionalImage sweep_phantom(GridDims dims, int ndirs, std::uint64_t seed) {
  auto dirs = std::make_shared<DirectionSet>(DirectionSet::generate(ndirs));
  SpatioDirectionalImage img(dims, dirs);
  const int n = dirs->size();

  // C-shaped arc in the (y, z) plane, extruded along x, plus a straight
  // tract along y crossing the upper arm
  const double cy = dims.ny * 0.5, cz = dims.nz * 0.5;
  const double radius = 0.38 * dims.nz;
  const double tract_z = cz + radius * 0.55;
  const double half_width = 2.2;

  std::vector<double> iso(n, kDefaultIsoLevel);
  Rng rng(seed);

  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y) {
      // distance of (y, z) to the arc and local tangent
      const double dy = y - cy, dz = z - cz;
      const double r = std::sqrt(dy * dy + dz * dz);
      const double theta = std::atan2(dz, dy);
      const bool on_arc = std::fabs(r - radius) <= half_width &&
                          theta > -1.9 && theta < 1.9;
      const bool on_tract = std::fabs(z - tract_z) <= half_width;
      std::vector<double> sig = iso;
      if (on_arc || on_tract) {
        sig.assign(n, 0.0);
        if (on_arc) {
          const Vec3 tangent = normalized(Vec3{0.0, -std::sin(theta), std::cos(theta)});
          const auto s = single_fiber_signal(tangent, *dirs);
          for (int k = 0; k < n; ++k) sig[k] += s[k];
        }
        if (on_tract) {
          const auto s = single_fiber_signal(Vec3{0, 1, 0}, *dirs);
          for (int k = 0; k < n; ++k) sig[k] += s[k];
        }
      }
      for (int x = 0; x < dims.nx; ++x) {
        double* vox = img.voxel(x, y, z);
        for (int k = 0; k < n; ++k) vox[k] = sig[k] + rng.uniform(0.0, 0.03);
      }
    }
  return img;
}

}  // namespace lord
