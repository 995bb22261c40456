#include "lord/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "lord/errors.hpp"
#include "lord/threads.hpp"

namespace lord {

namespace {

struct Kernel {
  double sigma = 0.6;
  double inv_sigma2 = 0.0;
  double norm = 0.0;
  int radius = 0;

  explicit Kernel(double s) : sigma(s) {
    if (!(s > 0.0)) throw std::invalid_argument("spatial kernel: sigma must be > 0");
    inv_sigma2 = 1.0 / (s * s);
    norm = std::pow(2.0 * std::numbers::pi * s * s, -1.5);
    radius = static_cast<int>(std::ceil(3.0 * s));
  }

  double eval_r2(double r2) const { return norm * std::exp(-0.5 * r2 * inv_sigma2); }
};

// Accumulates the window sums at a continuous position:
//   A[n]  = sum_y K(pos - y) I(y, n)
//   G[n] += sum_y K(pos - y) I(y, n) (y - pos) / sigma^2   (optional)
void accumulate_window(const SpatioDirectionalImage& img, const Vec3& pos, const Kernel& k,
                       double* A, Vec3* G) {
  const int n = img.ndirs();
  std::fill(A, A + n, 0.0);
  if (G) std::fill(G, G + n, Vec3{0, 0, 0});
  const auto& dims = img.dims();
  const int cx = static_cast<int>(std::lround(pos.x));
  const int cy = static_cast<int>(std::lround(pos.y));
  const int cz = static_cast<int>(std::lround(pos.z));
  const int x0 = std::max(0, cx - k.radius), x1 = std::min(dims.nx - 1, cx + k.radius);
  const int y0 = std::max(0, cy - k.radius), y1 = std::min(dims.ny - 1, cy + k.radius);
  const int z0 = std::max(0, cz - k.radius), z1 = std::min(dims.nz - 1, cz + k.radius);
  for (int z = z0; z <= z1; ++z)
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const Vec3 d{x - pos.x, y - pos.y, z - pos.z};
        const double w = k.eval_r2(norm2(d));
        const double* vox = img.data().data() + img.voxel_index(x, y, z) * n;
        if (G) {
          const Vec3 gd = d * k.inv_sigma2;
          for (int i = 0; i < n; ++i) {
            A[i] += w * vox[i];
            G[i] += gd * (w * vox[i]);
          }
        } else {
          for (int i = 0; i < n; ++i) A[i] += w * vox[i];
        }
      }
}

// Normalized Watson weights against a direction set; fills t (dots) and
// f (scaled exponentials), returns their sum.
double watson_row(const DirectionSet& dirs, double kappa, const Vec3& psi, double* t, double* f) {
  const int n = dirs.size();
  double emax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    t[i] = dot(dirs[i], psi);
    f[i] = kappa * t[i] * t[i];
    emax = std::max(emax, f[i]);
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    f[i] = std::exp(f[i] - emax);
    sum += f[i];
  }
  return sum;
}

Vec3 normalize_dir(const Vec3& v) {
  const double n = norm(v);
  if (n < 1e-12) throw numerical_error("singular Jacobian action on direction");
  return v * (1.0 / n);
}

}  // namespace

double smoothed_value(const SpatioDirectionalImage& img, const Vec3& pos, const Vec3& dir,
                      double sigma, double kappa) {
  if (kappa < 0.0) throw std::invalid_argument("smoothed_value: kappa must be >= 0");
  const Kernel k(sigma);
  const int n = img.ndirs();
  std::vector<double> A(n), t(n), f(n);
  accumulate_window(img, pos, k, A.data(), nullptr);
  const Vec3 psi = normalize_dir(dir);
  const double sum = watson_row(img.directions(), kappa, psi, t.data(), f.data());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += f[i] * A[i];
  return acc / sum;
}

Vec3 spatial_kernel_coeff(const Vec3& phi, const Vec3& y, double sigma) {
  const Kernel k(sigma);
  const Vec3 d = phi - y;
  return d * (-k.eval_r2(norm2(d)) * k.inv_sigma2);
}

std::vector<Vec3> jac_spatial_kernel(const Vec3& phi, const Vec3& y, double sigma,
                                     const SplineSupport& supp, const ControlGrid& grid) {
  const Vec3 coeff = spatial_kernel_coeff(phi, y, sigma);
  std::vector<Vec3> row(grid.num_points(), Vec3{0, 0, 0});
  for (int k = 0; k < 64; ++k) {
    const auto idx = supp.control(grid, k);
    if (idx < 0) continue;
    row[idx] += coeff * supp.weight(k);
  }
  return row;
}

Vec3 watson_row_coeff(const DirectionSet& dirs, int n_index, std::span<const double> f,
                      double kappa, const PsiJacobian& jp) {
  const int n = dirs.size();
  double sum = 0.0;
  for (double v : f) sum += v;
  if (!(sum > 0.0)) throw std::invalid_argument("watson_row_coeff: weights must sum > 0");
  Vec3 wbar{0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const double ti = dot(dirs[i], jp.psi);
    wbar += dirs[i] * (f[i] / sum * ti);
  }
  const double gamma_n = f[n_index] / sum;
  const double tn = dot(dirs[n_index], jp.psi);
  const Vec3 core = dirs[n_index] * tn - wbar;
  return jp.proj * (core * (2.0 * kappa * gamma_n));
}

std::vector<Vec3> jac_watson_row(const DirectionSet& dirs, int n_index,
                                 std::span<const double> f, double kappa, const PsiJacobian& jp,
                                 const ControlGrid& grid) {
  const Vec3 d = watson_row_coeff(dirs, n_index, f, kappa, jp);
  std::vector<Vec3> row(grid.num_points(), Vec3{0, 0, 0});
  for (int k = 0; k < 64; ++k) {
    const auto idx = jp.supp.control(grid, k);
    if (idx < 0) continue;
    row[idx] += d * jp.s[k];
  }
  return row;
}

std::vector<Vec3> jac_smoothed_intensity(const Vec3& x, const Vec3& v, const HierarchicalFFD& ffd,
                                         int active_level, const SpatioDirectionalImage& img,
                                         double sigma, double kappa) {
  const Kernel k(sigma);
  const ControlGrid& grid = ffd.level(active_level);
  const Vec3 phi = deform(ffd, x);
  const PsiJacobian jp = jac_psi(ffd, active_level, x, v);
  const SplineSupport supp = spline_support(grid, x);

  const int n = img.ndirs();
  std::vector<double> A(n), t(n), f(n);
  accumulate_window(img, phi, k, A.data(), nullptr);
  const double sum = watson_row(img.directions(), kappa, jp.psi, t.data(), f.data());

  // spatial term: sum over window cells of the kernel derivative weighted by
  // the Watson-smoothed cell value
  Vec3 spatial{0, 0, 0};
  const auto& dims = img.dims();
  const int cx = static_cast<int>(std::lround(phi.x));
  const int cy = static_cast<int>(std::lround(phi.y));
  const int cz = static_cast<int>(std::lround(phi.z));
  for (int z = std::max(0, cz - k.radius); z <= std::min(dims.nz - 1, cz + k.radius); ++z)
    for (int y = std::max(0, cy - k.radius); y <= std::min(dims.ny - 1, cy + k.radius); ++y)
      for (int xx = std::max(0, cx - k.radius); xx <= std::min(dims.nx - 1, cx + k.radius); ++xx) {
        const double* vox = img.data().data() + img.voxel_index(xx, y, z) * n;
        double smoothed = 0.0;
        for (int i = 0; i < n; ++i) smoothed += f[i] * vox[i];
        smoothed /= sum;
        const Vec3 yc{static_cast<double>(xx), static_cast<double>(y), static_cast<double>(z)};
        spatial += spatial_kernel_coeff(phi, yc, sigma) * smoothed;
      }

  // directional term: sum_n A_n * watson row coefficient
  Vec3 directional{0, 0, 0};
  if (kappa > 0.0) {
    Vec3 wbar{0, 0, 0};
    for (int i = 0; i < n; ++i) wbar += img.directions()[i] * (f[i] / sum * t[i]);
    Vec3 qhat{0, 0, 0};
    double a = 0.0;
    for (int i = 0; i < n; ++i) {
      const double gamma = f[i] / sum;
      qhat += img.directions()[i] * (A[i] * gamma * t[i]);
      a += gamma * A[i];
    }
    directional = jp.proj * ((qhat - wbar * a) * (2.0 * kappa));
  }

  std::vector<Vec3> row(grid.num_points(), Vec3{0, 0, 0});
  for (int kk = 0; kk < 64; ++kk) {
    const auto idx = supp.control(grid, kk);
    if (idx < 0) continue;
    row[idx] += spatial * supp.weight(kk) + directional * jp.s[kk];
  }
  return row;
}

// ---------------------------------------------------------------------------

struct RegistrationObjective::Impl {
  // collapsed copies when the kappa == 0 scalar path applies
  SpatioDirectionalImage moving_store, target_store;
  const SpatioDirectionalImage* moving = nullptr;
  const SpatioDirectionalImage* target = nullptr;
  HierarchicalFFD prev;
  ControlGrid grid;
  SimilarityConfig cfg;
  double sigma_eff = 0.6;

  std::vector<Vec3> vs;    // enumerated directions
  std::vector<Vec3> xs;    // sample positions
  std::vector<Vec3> phi_prev;
  std::vector<Mat3> jac_prev;
  std::vector<SplineSupport> supports;
  std::vector<double> b;   // target-side values, sample-major (x outer, v inner)
  IntensityMap map;

  std::vector<Vec3> probes;
  std::vector<Mat3> probe_jac_prev;

  // per-evaluation scratch
  std::vector<double> A;       // nx samples * N
  std::vector<Vec3> G;
  std::vector<double> a;       // warped-side values
  std::vector<Vec3> phi_cur;
  std::vector<Mat3> jac_cur;
  std::vector<double> hist_buf;
  std::vector<double> grad_buf;

  double last_nmi = 0.0;
  double last_penalty = 0.0;
  long clamped = 0;

  int nv() const { return static_cast<int>(vs.size()); }
  int nsamples() const { return static_cast<int>(xs.size()) * nv(); }

  double run(std::span<const double> coeffs, std::vector<double>* grad, bool with_penalty);
  void compute_target_side();
  void freeze_intensity_range();
};

namespace {

SpatioDirectionalImage collapse_to_mean(const SpatioDirectionalImage& img) {
  auto dirs = std::make_shared<DirectionSet>(std::vector<Vec3>{{0, 0, 1}});
  SpatioDirectionalImage out(img.dims(), dirs);
  const int n = img.ndirs();
  const size_t voxels = img.dims().voxels();
  for (size_t v = 0; v < voxels; ++v) {
    const double* src = img.data().data() + v * n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += src[i];
    out.data()[v] = acc / n;
  }
  return out;
}

int axis_stride(int stride, int extent, int max_extent) {
  const int s = static_cast<int>(std::lround(static_cast<double>(stride) * extent / max_extent));
  return std::max(1, s);
}

}  // namespace

RegistrationObjective::RegistrationObjective(const SpatioDirectionalImage& moving,
                                             const SpatioDirectionalImage& target,
                                             const HierarchicalFFD& prev, ControlGrid active,
                                             const SimilarityConfig& cfg)
    : impl_(std::make_unique<Impl>()) {
  if (!(moving.dims() == target.dims()))
    throw std::invalid_argument("registration: images must share dimensions");
  if (!moving.directions().same_as(target.directions(), 1e-9))
    throw std::invalid_argument("registration: images must share a direction set");
  if (cfg.kappa < 0.0) throw std::invalid_argument("registration: kappa must be >= 0");
  if (cfg.stride < 1) throw std::invalid_argument("registration: stride must be >= 1");

  Impl& im = *impl_;
  im.cfg = cfg;
  im.prev = prev;
  im.grid = std::move(active);

  const bool collapse = cfg.kappa == 0.0 && cfg.collapse_kappa0 && moving.ndirs() > 1;
  if (collapse) {
    im.moving_store = collapse_to_mean(moving);
    im.target_store = collapse_to_mean(target);
    im.moving = &im.moving_store;
    im.target = &im.target_store;
  } else {
    im.moving = &moving;
    im.target = &target;
  }

  im.sigma_eff = cfg.sigma * cfg.stride;
  Kernel(im.sigma_eff);  // validates sigma

  // enumerated directions
  if (collapse) {
    im.vs = {Vec3{0, 0, 1}};
  } else if (cfg.enum_dirs > 0 && cfg.enum_dirs < im.moving->ndirs()) {
    const DirectionSet sub = DirectionSet::generate(cfg.enum_dirs);
    im.vs = sub.dirs();
  } else {
    im.vs = im.moving->directions().dirs();
  }

  // sample positions: strided voxel centers, stride scaled per axis
  const auto dims = im.target->dims();
  const int max_extent = std::max({dims.nx, dims.ny, dims.nz});
  const int sx = axis_stride(cfg.stride, dims.nx, max_extent);
  const int sy = axis_stride(cfg.stride, dims.ny, max_extent);
  const int sz = axis_stride(cfg.stride, dims.nz, max_extent);
  for (int z = 0; z < dims.nz; z += sz)
    for (int y = 0; y < dims.ny; y += sy)
      for (int x = 0; x < dims.nx; x += sx)
        im.xs.push_back({static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)});

  const int nx = static_cast<int>(im.xs.size());
  im.phi_prev.resize(nx);
  im.jac_prev.resize(nx);
  im.supports.resize(nx);
  for (int i = 0; i < nx; ++i) {
    im.phi_prev[i] = deform(im.prev, im.xs[i]);
    im.jac_prev[i] = spatial_jacobian(im.prev, im.xs[i]);
    im.supports[i] = spline_support(im.grid, im.xs[i]);
  }

  im.probes = guard_probes(dims, im.grid);
  im.probe_jac_prev.resize(im.probes.size());
  for (size_t i = 0; i < im.probes.size(); ++i)
    im.probe_jac_prev[i] = spatial_jacobian(im.prev, im.probes[i]);

  im.compute_target_side();
  im.freeze_intensity_range();
}

RegistrationObjective::~RegistrationObjective() = default;

void RegistrationObjective::Impl::compute_target_side() {
  const Kernel kern(sigma_eff);
  const int n = target->ndirs();
  const int ndir = nv();
  const int nxs = static_cast<int>(xs.size());
  b.assign(static_cast<size_t>(nxs) * ndir, 0.0);
  const int workers = plan_workers(nxs);
  std::vector<std::vector<double>> scratch(workers);
  for (auto& s : scratch) s.resize(3 * static_cast<size_t>(n));
  parallel_items(nxs, [&](int w, int i) {
    double* A_ = scratch[w].data();
    double* t_ = A_ + n;
    double* f_ = t_ + n;
    accumulate_window(*target, xs[i], kern, A_, nullptr);
    for (int d = 0; d < ndir; ++d) {
      const Vec3 psi = normalize_dir(vs[d]);
      const double sum = watson_row(target->directions(), cfg.kappa, psi, t_, f_);
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += f_[k] * A_[k];
      b[static_cast<size_t>(i) * ndir + d] = acc / sum;
    }
  });
}

void RegistrationObjective::Impl::freeze_intensity_range() {
  const Kernel kern(sigma_eff);
  const int n = moving->ndirs();
  const int ndir = nv();
  const int nxs = static_cast<int>(xs.size());
  std::vector<double> a0(static_cast<size_t>(nxs) * ndir, 0.0);
  const int workers = plan_workers(nxs);
  std::vector<std::vector<double>> scratch(workers);
  for (auto& s : scratch) s.resize(3 * static_cast<size_t>(n));
  parallel_items(nxs, [&](int w, int i) {
    double* A_ = scratch[w].data();
    double* t_ = A_ + n;
    double* f_ = t_ + n;
    accumulate_window(*moving, phi_prev[i], kern, A_, nullptr);
    for (int d = 0; d < ndir; ++d) {
      const Vec3 psi = normalize_dir(jac_prev[i] * vs[d]);
      const double sum = watson_row(moving->directions(), cfg.kappa, psi, t_, f_);
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += f_[k] * A_[k];
      a0[static_cast<size_t>(i) * ndir + d] = acc / sum;
    }
  });
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : b) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : a0) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double pad = 2.0 * (hi - lo) / cfg.bins;
  map.lo = lo - pad;
  map.hi = hi + pad;
  map.bins = cfg.bins;
  map.beta = cfg.beta;
  map.validate();
}

double RegistrationObjective::Impl::run(std::span<const double> coeffs, std::vector<double>* grad,
                                        bool with_penalty) {
  const int dof = static_cast<int>(grid.num_points()) * 3;
  if (static_cast<int>(coeffs.size()) != dof)
    throw std::invalid_argument("objective: coefficient vector has wrong size");
  std::memcpy(reinterpret_cast<double*>(grid.coeffs.data()), coeffs.data(),
              coeffs.size() * sizeof(double));

  const Kernel kern(sigma_eff);
  const int n = moving->ndirs();
  const int ndir = nv();
  const int nxs = static_cast<int>(xs.size());
  const int bins = map.bins;
  const size_t bins2 = static_cast<size_t>(bins) * bins;

  A.resize(static_cast<size_t>(nxs) * n);
  a.resize(static_cast<size_t>(nxs) * ndir);
  phi_cur.resize(nxs);
  jac_cur.resize(nxs);
  if (grad) G.resize(static_cast<size_t>(nxs) * n);

  const int workers = plan_workers(nxs);
  hist_buf.assign(static_cast<size_t>(workers) * bins2, 0.0);
  std::vector<long> clamped_w(workers, 0);
  std::vector<std::vector<double>> scratch(workers);
  for (auto& s : scratch) s.resize(2 * static_cast<size_t>(n));

  const bool want_grad = grad != nullptr;
  parallel_items(nxs, [&](int w, int i) {
    const SplineSupport& supp = supports[i];
    Vec3 phi = phi_prev[i];
    Mat3 J = jac_prev[i];
    for (int k = 0; k < 64; ++k) {
      const auto idx = supp.control(grid, k);
      if (idx < 0) continue;
      const Vec3& c = grid.coeffs[idx];
      phi += c * supp.weight(k);
      const Vec3 g = supp.grad(k);
      for (int r = 0; r < 3; ++r)
        for (int col = 0; col < 3; ++col) J(r, col) += c[r] * g[col];
    }
    phi_cur[i] = phi;
    jac_cur[i] = J;

    double* A_ = A.data() + static_cast<size_t>(i) * n;
    Vec3* G_ = want_grad ? G.data() + static_cast<size_t>(i) * n : nullptr;
    accumulate_window(*moving, phi, kern, A_, G_);

    double* t_ = scratch[w].data();
    double* f_ = t_ + n;
    double* hist = hist_buf.data() + static_cast<size_t>(w) * bins2;
    for (int d = 0; d < ndir; ++d) {
      const Vec3 psi = normalize_dir(J * vs[d]);
      const double sum = watson_row(moving->directions(), cfg.kappa, psi, t_, f_);
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += f_[k] * A_[k];
      const double av = acc / sum;
      a[static_cast<size_t>(i) * ndir + d] = av;
      const double bv = b[static_cast<size_t>(i) * ndir + d];
      const DepositWindow wa = deposit_window(map, av);
      const DepositWindow wb = deposit_window(map, bv);
      if (wa.clamped || wb.clamped) ++clamped_w[w];
      for (int ii = 0; ii < wa.count; ++ii) {
        double* row = hist + static_cast<size_t>(wa.first + ii) * bins;
        for (int jj = 0; jj < wb.count; ++jj) row[wb.first + jj] += wa.w[ii] * wb.w[jj];
      }
    }
  });

  // merge in worker order
  JointDensity jd;
  jd.map = map;
  jd.counts.assign(bins2, 0.0);
  for (int w = 0; w < workers; ++w) {
    const double* hist = hist_buf.data() + static_cast<size_t>(w) * bins2;
    for (size_t k = 0; k < bins2; ++k) jd.counts[k] += hist[k];
  }
  clamped = 0;
  for (long c : clamped_w) clamped += c;
  double total = 0.0;
  for (double c : jd.counts) total += c;
  jd.total = total;
  jd.p.resize(bins2);
  for (size_t k = 0; k < bins2; ++k) jd.p[k] = jd.counts[k] / total;
  jd.p_a.assign(bins, 0.0);
  jd.p_b.assign(bins, 0.0);
  for (int i = 0; i < bins; ++i)
    for (int j = 0; j < bins; ++j) {
      const double v = jd.p[static_cast<size_t>(i) * bins + j];
      jd.p_a[i] += v;
      jd.p_b[j] += v;
    }
  const NmiTables tables = NmiTables::build(jd);
  last_nmi = tables.value;
  last_penalty = with_penalty ? penalty(grid, cfg.lambda) : 0.0;

  if (grad) {
    grad->assign(dof, 0.0);
    grad_buf.assign(static_cast<size_t>(workers) * dof, 0.0);
    const double two_kappa = 2.0 * cfg.kappa;
    parallel_items(nxs, [&](int w, int i) {
      const SplineSupport& supp = supports[i];
      const Mat3& J = jac_cur[i];
      const double* A_ = A.data() + static_cast<size_t>(i) * n;
      const Vec3* G_ = G.data() + static_cast<size_t>(i) * n;
      double* t_ = scratch[w].data();
      double* f_ = t_ + n;
      Vec3 ghat{0, 0, 0};
      Mat3 D = Mat3::zero();
      bool any = false;
      for (int d = 0; d < ndir; ++d) {
        const double av = a[static_cast<size_t>(i) * ndir + d];
        const double bv = b[static_cast<size_t>(i) * ndir + d];
        const double dl = d_nmi_d_sample(tables, map, av, bv);
        if (dl == 0.0) continue;
        any = true;
        const Vec3 V = J * vs[d];
        const double vnorm = norm(V);
        if (vnorm < 1e-12) throw numerical_error("objective: singular Jacobian action");
        const Vec3 psi = V * (1.0 / vnorm);
        const double sum = watson_row(moving->directions(), cfg.kappa, psi, t_, f_);
        const double inv_sum = 1.0 / sum;
        Vec3 g3{0, 0, 0};
        Vec3 qhat{0, 0, 0}, wbar{0, 0, 0};
        for (int k = 0; k < n; ++k) {
          const double gamma = f_[k] * inv_sum;
          g3 += G_[k] * gamma;
          const double gt = gamma * t_[k];
          wbar += moving->directions()[k] * gt;
          qhat += moving->directions()[k] * (gt * A_[k]);
        }
        ghat += g3 * dl;
        if (cfg.kappa > 0.0) {
          const Vec3 core = qhat - wbar * av;
          const Vec3 proj = (core - psi * dot(psi, core)) * (two_kappa / vnorm);
          D += outer(proj, vs[d]) * dl;
        }
      }
      if (!any) return;
      double* gw = grad_buf.data() + static_cast<size_t>(w) * dof;
      for (int k = 0; k < 64; ++k) {
        const auto idx = supp.control(grid, k);
        if (idx < 0) continue;
        const Vec3 contrib = ghat * supp.weight(k) + D * supp.grad(k);
        gw[3 * idx + 0] += contrib.x;
        gw[3 * idx + 1] += contrib.y;
        gw[3 * idx + 2] += contrib.z;
      }
    });
    for (int w = 0; w < workers; ++w) {
      const double* gw = grad_buf.data() + static_cast<size_t>(w) * dof;
      for (int k = 0; k < dof; ++k) (*grad)[k] += gw[k];
    }
    if (with_penalty) {
      const auto pg = penalty_gradient(grid, cfg.lambda);
      for (size_t g = 0; g < pg.size(); ++g) {
        (*grad)[3 * g + 0] += pg[g].x;
        (*grad)[3 * g + 1] += pg[g].y;
        (*grad)[3 * g + 2] += pg[g].z;
      }
    }
  }
  return last_nmi + last_penalty;
}

int RegistrationObjective::dof() const { return static_cast<int>(impl_->grid.num_points()) * 3; }

double RegistrationObjective::evaluate(std::span<const double> coeffs, std::vector<double>* grad) {
  return impl_->run(coeffs, grad, true);
}

std::vector<double> RegistrationObjective::similarity_gradient(std::span<const double> coeffs) {
  std::vector<double> grad;
  impl_->run(coeffs, &grad, false);
  return grad;
}

GuardReport RegistrationObjective::guard(std::span<const double> coeffs) const {
  Impl& im = *impl_;
  std::memcpy(reinterpret_cast<double*>(im.grid.coeffs.data()), coeffs.data(),
              coeffs.size() * sizeof(double));
  GuardReport report;
  report.worst_det = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < im.probes.size(); ++i) {
    const Mat3 J = im.probe_jac_prev[i] + displacement_jacobian(im.grid, im.probes[i]);
    const double d = det(J);
    if (d < report.worst_det) {
      report.worst_det = d;
      report.worst_location = im.probes[i];
    }
  }
  report.pass = report.worst_det > kDetFloor;
  return report;
}

const IntensityMap& RegistrationObjective::intensity_map() const { return impl_->map; }
double RegistrationObjective::last_nmi() const { return impl_->last_nmi; }
double RegistrationObjective::last_penalty() const { return impl_->last_penalty; }
long RegistrationObjective::clamped_samples() const { return impl_->clamped; }
const ControlGrid& RegistrationObjective::active_grid() const { return impl_->grid; }

std::vector<Vec3> grad_similarity(const HierarchicalFFD& ffd, int active_level,
                                  const SpatioDirectionalImage& moving,
                                  const SpatioDirectionalImage& target,
                                  const SimilarityConfig& cfg) {
  std::vector<ControlGrid> frozen;
  for (int r = 0; r < ffd.num_levels(); ++r)
    if (r != active_level) frozen.push_back(ffd.level(r));
  RegistrationObjective obj(moving, target, HierarchicalFFD(std::move(frozen)),
                            ffd.level(active_level), cfg);
  const auto& coeffs = ffd.level(active_level).coeffs;
  std::span<const double> flat(reinterpret_cast<const double*>(coeffs.data()), coeffs.size() * 3);
  const auto grad = obj.similarity_gradient(flat);
  std::vector<Vec3> out(coeffs.size());
  for (size_t g = 0; g < out.size(); ++g)
    out[g] = {grad[3 * g], grad[3 * g + 1], grad[3 * g + 2]};
  return out;
}

}  // namespace lord
