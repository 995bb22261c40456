#include "lord/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <ostream>
#include <stdexcept>

#include "lord/errors.hpp"
#include "lord/threads.hpp"

namespace lord {

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

double dot_n(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

LbfgsResult lbfgs_maximize(const ObjectiveFn& fn, std::vector<double> x0,
                           const LbfgsOptions& opts, const GuardFn& guard,
                           const IterCallback& on_iter) {
  const size_t n = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);

  std::vector<double> grad(n, 0.0);
  long evals = 0;

  // internally minimize phi = -M
  auto eval = [&](std::span<const double> x, std::vector<double>& g) {
    const double m = fn(x, g);
    for (auto& v : g) v = -v;
    ++evals;
    return -m;
  };

  double f = eval(res.x, grad);
  if (!std::isfinite(f)) throw std::invalid_argument("lbfgs: non-finite objective at start");

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> d(n), x_trial(n), g_trial(n), g_prev(n);
  int guard_rejections = 0;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    const double ginf = inf_norm(grad);
    if (on_iter) on_iter({iter, -f, ginf, evals});
    if (ginf <= opts.tol) {
      res.converged = true;
      break;
    }

    // two-loop recursion: d = -H g
    d.assign(grad.begin(), grad.end());
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * dot_n(s_hist[i], d);
      for (size_t k = 0; k < n; ++k) d[k] -= alpha[i] * y_hist[i][k];
    }
    if (m > 0) {
      const double gamma = dot_n(s_hist[m - 1], y_hist[m - 1]) / dot_n(y_hist[m - 1], y_hist[m - 1]);
      for (auto& v : d) v *= gamma;
    }
    for (int i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * dot_n(y_hist[i], d);
      for (size_t k = 0; k < n; ++k) d[k] += (alpha[i] - beta) * s_hist[i][k];
    }
    for (auto& v : d) v = -v;

    double dphi0 = dot_n(grad, d);
    if (dphi0 >= 0.0) {  // not a descent direction; reset to steepest descent
      for (size_t k = 0; k < n; ++k) d[k] = -grad[k];
      dphi0 = dot_n(grad, d);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      if (dphi0 >= 0.0) break;  // zero gradient
    }

    // strong Wolfe line search with guarded trials
    auto trial_point = [&](double alpha_step) {
      for (size_t k = 0; k < n; ++k) x_trial[k] = res.x[k] + alpha_step * d[k];
    };
    auto guarded = [&](double alpha_step) {
      if (!guard) return true;
      trial_point(alpha_step);
      return guard(x_trial);
    };

    const double phi0 = f;
    double alpha_step = 1.0;
    double alpha_lo = 0.0, alpha_hi = 0.0;
    double phi_lo = phi0;
    double phi_prev = phi0;
    bool bracketed = false, accepted = false, fail = false;
    double phi_a = 0.0, dphi_a = 0.0;
    bool stall = false;

    for (int ls = 0; ls < 30 && !accepted && !fail; ++ls) {
      if (!guarded(alpha_step)) {
        ++guard_rejections;
        if (guard_rejections >= opts.max_guard_rejections) {
          stall = true;
          break;
        }
        // treat as infeasible far point: bracket toward the origin
        alpha_hi = alpha_step;
        bracketed = true;
        alpha_step = 0.5 * (alpha_lo + alpha_step);
        continue;
      }
      guard_rejections = 0;
      trial_point(alpha_step);
      phi_a = eval(x_trial, g_trial);
      dphi_a = dot_n(g_trial, d);

      if (!bracketed) {
        if (phi_a > phi0 + opts.c1 * alpha_step * dphi0 || (ls > 0 && phi_a >= phi_prev)) {
          alpha_hi = alpha_step;
          bracketed = true;
          alpha_step = 0.5 * (alpha_lo + alpha_hi);
          continue;
        }
        if (std::fabs(dphi_a) <= -opts.c2 * dphi0) {
          accepted = true;
          break;
        }
        if (dphi_a >= 0.0) {
          alpha_hi = alpha_lo;
          alpha_lo = alpha_step;
          phi_lo = phi_a;
          bracketed = true;
          alpha_step = 0.5 * (alpha_lo + alpha_hi);
          continue;
        }
        phi_prev = phi_a;
        alpha_lo = alpha_step;
        phi_lo = phi_a;
        alpha_step *= 2.0;
        if (alpha_step > 1e6) fail = true;
      } else {
        // zoom by bisection
        if (phi_a > phi0 + opts.c1 * alpha_step * dphi0 || phi_a >= phi_lo) {
          alpha_hi = alpha_step;
        } else {
          if (std::fabs(dphi_a) <= -opts.c2 * dphi0) {
            accepted = true;
            break;
          }
          if (dphi_a * (alpha_hi - alpha_lo) >= 0.0) alpha_hi = alpha_lo;
          alpha_lo = alpha_step;
          phi_lo = phi_a;
        }
        alpha_step = 0.5 * (alpha_lo + alpha_hi);
        if (std::fabs(alpha_hi - alpha_lo) * inf_norm(d) < 1e-14) fail = true;
      }
    }

    if (stall) {
      res.stalled = true;
      break;
    }
    if (!accepted) {
      // fall back to the best bracketed point if it improves the objective
      if (bracketed && phi_lo < phi0 && alpha_lo > 0.0) {
        trial_point(alpha_lo);
        phi_a = eval(x_trial, g_trial);
        dphi_a = dot_n(g_trial, d);
        accepted = phi_a < phi0;
      }
      if (!accepted) {
        res.line_search_failed = true;
        break;
      }
      alpha_step = alpha_lo;
    }

    // update history
    g_prev = grad;
    std::vector<double> s_new(n), y_new(n);
    for (size_t k = 0; k < n; ++k) {
      s_new[k] = x_trial[k] - res.x[k];
      y_new[k] = g_trial[k] - g_prev[k];
    }
    const double sy = dot_n(s_new, y_new);
    if (sy > 1e-14) {
      s_hist.push_back(std::move(s_new));
      y_hist.push_back(std::move(y_new));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.depth) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    res.x = x_trial;
    grad = g_trial;
    f = phi_a;
    res.iterations = iter + 1;
  }

  res.value = -f;
  res.evals = evals;
  return res;
}

void Schedule::validate() const {
  if (steps.empty()) throw std::invalid_argument("schedule: no steps");
  for (size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    if (!(s.delta > 0.0)) throw std::invalid_argument("schedule: delta must be > 0");
    if (s.bins < 2) throw std::invalid_argument("schedule: bins must be >= 2");
    if (s.kappa < 0.0) throw std::invalid_argument("schedule: kappa must be >= 0");
    if (s.stride < 1) throw std::invalid_argument("schedule: stride must be >= 1");
    if (s.max_iters < 1) throw std::invalid_argument("schedule: max_iters must be >= 1");
    if (!(s.tol > 0.0)) throw std::invalid_argument("schedule: tol must be > 0");
    if (i > 0) {
      if (!(s.delta < steps[i - 1].delta))
        throw std::invalid_argument("schedule: deltas must strictly decrease");
      if (s.bins < steps[i - 1].bins)
        throw std::invalid_argument("schedule: bins must be nondecreasing");
      if (s.stride > steps[i - 1].stride)
        throw std::invalid_argument("schedule: strides must be nonincreasing");
    }
  }
}

RegistrationResult register_images(const SpatioDirectionalImage& moving,
                                   const SpatioDirectionalImage& target,
                                   const Schedule& schedule, const RegisterOptions& opts) {
  schedule.validate();
  if (opts.deterministic) set_thread_count(1);

  RegistrationResult result;
  const auto t_start = std::chrono::steady_clock::now();

  for (size_t s = 0; s < schedule.steps.size(); ++s) {
    const StepConfig& step = schedule.steps[s];
    ControlGrid grid =
        ControlGrid::cover(target.dims(), step.delta, static_cast<int>(s) + 1);

    SimilarityConfig cfg;
    cfg.sigma = opts.sigma;
    cfg.kappa = step.kappa;
    cfg.bins = step.bins;
    cfg.beta = opts.beta;
    cfg.stride = step.stride;
    cfg.enum_dirs = opts.enum_dirs;
    cfg.lambda = opts.lambda;

    RegistrationObjective objective(moving, target, result.ffd, grid, cfg);

    LbfgsOptions lopts;
    lopts.depth = opts.lbfgs_depth;
    lopts.max_iters = step.max_iters;
    lopts.tol = step.tol;

    auto objective_cb = [&](std::span<const double> x, std::vector<double>& g) {
      return objective.evaluate(x, &g);
    };
    auto guard_cb = [&](std::span<const double> x) { return objective.guard(x).pass; };
    auto iter_cb = [&](const LbfgsIterate& it) {
      TraceRow row;
      row.step = static_cast<int>(s) + 1;
      row.iteration = it.iteration;
      row.objective = it.value;
      row.nmi = objective.last_nmi();
      row.penalty = objective.last_penalty();
      row.grad_inf = it.grad_inf;
      row.evals = it.evals;
      row.wall_ms =
          opts.deterministic
              ? 0.0
              : std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          t_start)
                    .count();
      result.trace.push_back(row);
      if (it.iteration == 0) result.initial_nmi.push_back(objective.last_nmi());
    };

    std::vector<double> x0(objective.dof(), 0.0);
    LbfgsResult lres = lbfgs_maximize(objective_cb, std::move(x0), lopts, guard_cb, iter_cb);

    // bake the optimized level; a stalled line search keeps the progress so far
    std::memcpy(reinterpret_cast<double*>(grid.coeffs.data()), lres.x.data(),
                lres.x.size() * sizeof(double));
    result.ffd.add_level(std::move(grid));

    objective.evaluate(lres.x, nullptr);  // refresh diagnostics at the accepted iterate
    result.final_nmi.push_back(objective.last_nmi());
    const GuardReport rep = objective.guard(lres.x);
    result.guard_ok = result.guard_ok && rep.pass;

    if (opts.on_step) opts.on_step(static_cast<int>(s) + 1, result.ffd);
  }
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "step,iteration,objective,nmi,penalty,grad_inf_norm,evals,wall_ms\n";
  char buf[256];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.12g,%.12g,%.12g,%.12g,%ld,%.3f\n", r.step,
                  r.iteration, r.objective, r.nmi, r.penalty, r.grad_inf, r.evals, r.wall_ms);
    out << buf;
  }
}

}  // namespace lord
