#ifndef LORD_OPTIMIZER_HPP
#define LORD_OPTIMIZER_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lord/gradient.hpp"

namespace lord {

struct LbfgsOptions {
  int depth = 10;
  int max_iters = 100;
  double tol = 1e-6;  // infinity norm of the gradient
  double c1 = 1e-4;   // Armijo
  double c2 = 0.9;    // curvature
  int max_guard_rejections = 20;
};

struct LbfgsIterate {
  int iteration = 0;
  double value = 0.0;
  double grad_inf = 0.0;
  long evals = 0;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  long evals = 0;
  bool converged = false;          // gradient tolerance reached
  bool line_search_failed = false; // returned best iterate early
  bool stalled = false;            // consecutive guard rejections
};

/// Objective to maximize: returns the value at x and fills grad.
using ObjectiveFn = std::function<double(std::span<const double> x, std::vector<double>& grad)>;
/// Feasibility test of a trial point; rejected trials shrink the step.
using GuardFn = std::function<bool(std::span<const double> x)>;
using IterCallback = std::function<void(const LbfgsIterate&)>;

/// Limited-memory quasi-Newton ascent with a strong Wolfe line search.
/// Accepted iterations never decrease the objective.
LbfgsResult lbfgs_maximize(const ObjectiveFn& fn, std::vector<double> x0,
                           const LbfgsOptions& opts, const GuardFn& guard = nullptr,
                           const IterCallback& on_iter = nullptr);

struct StepConfig {
  double delta = 4.0;  // control point spacing, voxels
  int bins = 20;
  double kappa = 15.0;
  int stride = 1;
  int max_iters = 10;
  double tol = 1e-6;
};

struct Schedule {
  std::vector<StepConfig> steps;
  /// deltas strictly decreasing, bins nondecreasing, strides nonincreasing.
  void validate() const;
};

struct RegisterOptions {
  double sigma = 0.6;
  double lambda = kDefaultLambda;
  double beta = 1.0;
  int enum_dirs = 0;
  int lbfgs_depth = 10;
  std::uint64_t seed = 0;   // recorded for provenance
  bool deterministic = false;  // strict-order evaluation, zeroed timings
  /// Called after each finished step with the accumulated deformation.
  std::function<void(int step, const HierarchicalFFD&)> on_step;
};

struct TraceRow {
  int step = 0;
  int iteration = 0;
  double objective = 0.0;
  double nmi = 0.0;
  double penalty = 0.0;
  double grad_inf = 0.0;
  long evals = 0;
  double wall_ms = 0.0;
};

struct RegistrationResult {
  HierarchicalFFD ffd;
  std::vector<TraceRow> trace;
  std::vector<double> initial_nmi;  // per step, at the step's zero iterate
  std::vector<double> final_nmi;
  bool guard_ok = true;
};

/// Coarse-to-fine registration: one grid per schedule step, earlier levels
/// frozen, L-BFGS on the active level under the diffeomorphism guard.
RegistrationResult register_images(const SpatioDirectionalImage& moving,
                                   const SpatioDirectionalImage& target,
                                   const Schedule& schedule, const RegisterOptions& opts);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace lord

#endif
