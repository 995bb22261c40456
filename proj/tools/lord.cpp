// Command-line driver: phantom generation, registration, warping, metrics,
// glyph export, parameter sweeps, and the gradient self-check.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lord/errors.hpp"
#include "lord/metrics.hpp"
#include "lord/pipeline.hpp"
#include "lord/threads.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

using namespace lord;

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw io_error("cannot open for writing: " + path);
  return out;
}

int cmd_phantom(const std::string& name, const std::string& blueprint_path,
                const std::string& moving_out, const std::string& target_out,
                const std::string& single_out, const std::string& echo_blueprint, int ndirs,
                double noise, double iso, std::uint64_t seed) {
  if (!blueprint_path.empty()) {
    std::ifstream in(blueprint_path);
    if (!in) throw io_error("cannot open blueprint: " + blueprint_path);
    const Blueprint bp = Blueprint::load(in);
    SynthesisOptions opts;
    opts.noise_amplitude = noise;
    opts.iso_level = iso;
    opts.seed = seed;
    const auto img =
        synthesize(bp, std::make_shared<DirectionSet>(DirectionSet::generate(ndirs)), opts);
    img.save_file(single_out.empty() ? "phantom.lsdv" : single_out);
    if (!echo_blueprint.empty()) {
      auto out = open_out(echo_blueprint);
      bp.save(out);
    }
    return 0;
  }
  const auto pair = builtin_experiment(name, ndirs, seed);
  pair.moving.save_file(moving_out);
  pair.target.save_file(target_out);
  if (!echo_blueprint.empty()) {
    auto out = open_out(echo_blueprint + ".moving.txt");
    pair.moving_bp.save(out);
    auto out2 = open_out(echo_blueprint + ".target.txt");
    pair.target_bp.save(out2);
  }
  return 0;
}

int cmd_register(const std::string& moving_path, const std::string& target_path,
                 const std::string& config_path, const std::string& ffd_out,
                 const std::string& trace_out, bool deterministic, std::uint64_t seed_override,
                 bool has_seed) {
  RunConfig cfg = RunConfig::load_file(config_path);
  if (has_seed) cfg.seed = seed_override;
  const auto moving = SpatioDirectionalImage::load_file(moving_path);
  const auto target = SpatioDirectionalImage::load_file(target_path);

  RegisterOptions opts;
  opts.sigma = cfg.sigma;
  opts.lambda = cfg.lambda;
  opts.beta = cfg.beta;
  opts.enum_dirs = cfg.directions;
  opts.seed = cfg.seed;
  opts.deterministic = deterministic;
  const auto res = register_images(moving, target, cfg.schedule, opts);

  res.ffd.save_file(ffd_out);
  if (!trace_out.empty()) {
    auto out = open_out(trace_out);
    write_trace_csv(out, res.trace);
  }
  std::fprintf(stderr, "registered: nmi %.6f -> %.6f, guard %s\n", res.initial_nmi.front(),
               res.final_nmi.back(), res.guard_ok ? "ok" : "FAILED");
  return 0;
}

int cmd_warp(const std::string& image_path, const std::string& ffd_path,
             const std::string& out_path, double kappa, bool cubic, bool force) {
  const auto img = SpatioDirectionalImage::load_file(image_path);
  const auto ffd = HierarchicalFFD::load_file(ffd_path);
  if (ffd.num_levels() > 0) {
    const auto probes = guard_probes(img.dims(), ffd.level(ffd.num_levels() - 1));
    const auto rep = check_diffeomorphism(ffd, probes);
    if (!rep.pass) {
      std::fprintf(stderr,
                   "warning: deformation fails the diffeomorphism guard (worst det %.4g at "
                   "%.1f %.1f %.1f)\n",
                   rep.worst_det, rep.worst_location.x, rep.worst_location.y,
                   rep.worst_location.z);
      if (!force) throw numerical_error("guard failure; pass --force to warp anyway");
    }
  }
  warp_image(img, ffd, kappa, cubic).save_file(out_path);
  return 0;
}

int cmd_metrics(const std::string& ffd_path, const std::string& ref_path, const std::string& dims_s,
                const std::string& out_path, const std::string& fields_prefix) {
  const auto ffd = HierarchicalFFD::load_file(ffd_path);
  HierarchicalFFD ref;
  if (ref_path != "identity") ref = HierarchicalFFD::load_file(ref_path);

  GridDims dims;
  if (std::sscanf(dims_s.c_str(), "%d,%d,%d", &dims.nx, &dims.ny, &dims.nz) != 3 ||
      dims.nx < 3 || dims.ny < 3 || dims.nz < 3)
    throw std::invalid_argument("metrics: --dims must be nx,ny,nz with each >= 3");

  std::vector<Vec3> probes;
  VectorField u(dims);
  size_t i = 0;
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const Vec3 p{double(x), double(y), double(z)};
        probes.push_back(p);
        u.u[i++] = deform(ffd, p) - p;
      }
  auto rep = deformation_report(u);
  rep.mse = coordinate_mse([&](const Vec3& p) { return deform(ffd, p); },
                           [&](const Vec3& p) { return deform(ref, p); }, probes);

  auto out = open_out(out_path);
  out << "mse,mean_curl,mean_abs_div\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", rep.mse, rep.mean_curl, rep.mean_abs_div);
  out << buf;
  if (!fields_prefix.empty()) {
    save_scalar_lsdv(rep.curl_mag, fields_prefix + "_curl.lsdv");
    save_scalar_lsdv(rep.divergence, fields_prefix + "_div.lsdv");
  }
  return 0;
}

int cmd_frt(const std::string& image_path, int slice, const std::string& svg_path,
            const std::string& csv_path, double band) {
  const auto img = SpatioDirectionalImage::load_file(image_path);
  auto svg = open_out(svg_path);
  auto csv = open_out(csv_path);
  export_frt_glyphs(img, slice, svg, csv, band);
  return 0;
}

int cmd_experiment(const std::string& name, std::uint64_t seed, const std::string& out_path) {
  const auto rows = run_sweep(name, seed);
  auto out = open_out(out_path);
  write_sweep_csv(out, rows);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  double worst = 0.0;
  for (double kappa : {0.0, 5.0, 15.0}) {
    const double err = gradient_selfcheck(seed, kappa);
    std::printf("kappa %5.1f: max rel error %.3e\n", kappa, err);
    worst = std::max(worst, err);
  }
  std::printf("max rel error %.3e (%s)\n", worst, worst <= 1e-4 ? "PASS" : "FAIL");
  return worst <= 1e-4 ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lord: registration toolkit for spatio-directional images"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores, 1 = strict order)");

  // phantom
  auto* phantom = app.add_subcommand("phantom", "generate built-in or blueprint phantoms");
  std::string ph_name, ph_blueprint, ph_moving = "moving.lsdv", ph_target = "target.lsdv";
  std::string ph_out, ph_echo;
  int ph_dirs = 60;
  double ph_noise = 0.02, ph_iso = kDefaultIsoLevel;
  std::uint64_t ph_seed = 1;
  phantom->add_option("name", ph_name, "built-in experiment name");
  phantom->add_option("--blueprint", ph_blueprint, "blueprint text file instead of a built-in");
  phantom->add_option("--moving", ph_moving, "moving image output (built-in mode)");
  phantom->add_option("--target", ph_target, "target image output (built-in mode)");
  phantom->add_option("--out", ph_out, "output image (blueprint mode)");
  phantom->add_option("--echo-blueprint", ph_echo, "write the blueprint(s) back as text");
  phantom->add_option("--dirs", ph_dirs, "direction count");
  phantom->add_option("--noise", ph_noise, "uniform noise amplitude");
  phantom->add_option("--iso", ph_iso, "isotropic background level");
  phantom->add_option("--seed", ph_seed, "noise seed");

  // register
  auto* reg = app.add_subcommand("register", "nonrigid registration of two LSDV images");
  std::string rg_moving, rg_target, rg_config, rg_ffd = "out.ffd", rg_trace;
  bool rg_det = false;
  std::uint64_t rg_seed = 0;
  reg->add_option("moving", rg_moving, "moving image")->required();
  reg->add_option("target", rg_target, "target image")->required();
  reg->add_option("--config", rg_config, "JSON run configuration")->required();
  reg->add_option("--out", rg_ffd, "output deformation file");
  reg->add_option("--trace", rg_trace, "per-iteration trace CSV");
  reg->add_flag("--deterministic", rg_det, "strict-order mode with zeroed timings");
  auto* seed_opt = reg->add_option("--seed", rg_seed, "override the config seed");

  // warp
  auto* warp = app.add_subcommand("warp", "pull an image through a deformation, reorienting");
  std::string wp_image, wp_ffd, wp_out = "warped.lsdv";
  double wp_kappa = 15.0;
  bool wp_cubic = false, wp_force = false;
  warp->add_option("image", wp_image, "input image")->required();
  warp->add_option("ffd", wp_ffd, "deformation file")->required();
  warp->add_option("--out", wp_out, "output image");
  warp->add_option("--kappa", wp_kappa, "directional interpolation concentration");
  warp->add_flag("--cubic", wp_cubic, "cubic B-spline image interpolation");
  warp->add_flag("--force", wp_force, "proceed despite a guard failure");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "deformation quality measures");
  std::string mt_ffd, mt_ref = "identity", mt_dims, mt_out = "metrics.csv", mt_fields;
  metrics->add_option("ffd", mt_ffd, "deformation file")->required();
  metrics->add_option("--ref", mt_ref, "reference deformation file or 'identity'");
  metrics->add_option("--dims", mt_dims, "evaluation grid nx,ny,nz")->required();
  metrics->add_option("--out", mt_out, "summary CSV");
  metrics->add_option("--fields", mt_fields, "prefix for curl/divergence LSDV fields");

  // frt
  auto* frt = app.add_subcommand("frt", "ODF glyph export of one slice");
  std::string fr_image, fr_svg = "glyphs.svg", fr_csv = "glyphs.csv";
  int fr_slice = 0;
  double fr_band = kFrtBandHalfwidth;
  frt->add_option("image", fr_image, "input image")->required();
  frt->add_option("--slice", fr_slice, "z slice index");
  frt->add_option("--svg", fr_svg, "output SVG");
  frt->add_option("--csv", fr_csv, "output CSV of raw ODF values");
  frt->add_option("--band", fr_band, "equatorial band halfwidth (radians)");

  // experiment
  auto* exp = app.add_subcommand("experiment", "synthetic-warp parameter sweeps");
  std::string ex_name, ex_out = "sweep.csv";
  std::uint64_t ex_seed = 1;
  exp->add_option("name", ex_name, "bins_sweep | kappa_sweep | spatial_sweep")->required();
  exp->add_option("--seed", ex_seed, "phantom/warp seed");
  exp->add_option("--out", ex_out, "output CSV");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient self-check");
  std::uint64_t gc_seed = 1;
  gradcheck->add_option("--seed", gc_seed, "problem seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (threads > 0) lord::set_thread_count(threads);

  try {
    if (*phantom)
      return cmd_phantom(ph_name, ph_blueprint, ph_moving, ph_target, ph_out, ph_echo, ph_dirs,
                         ph_noise, ph_iso, ph_seed);
    if (*reg)
      return cmd_register(rg_moving, rg_target, rg_config, rg_ffd, rg_trace, rg_det, rg_seed,
                          seed_opt->count() > 0);
    if (*warp) return cmd_warp(wp_image, wp_ffd, wp_out, wp_kappa, wp_cubic, wp_force);
    if (*metrics) return cmd_metrics(mt_ffd, mt_ref, mt_dims, mt_out, mt_fields);
    if (*frt) return cmd_frt(fr_image, fr_slice, fr_svg, fr_csv, fr_band);
    if (*exp) return cmd_experiment(ex_name, ex_seed, ex_out);
    if (*gradcheck) return cmd_gradcheck(gc_seed);
  } catch (const lord::io_error& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const lord::numerical_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
  return 0;
}
