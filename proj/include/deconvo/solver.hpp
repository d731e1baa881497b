#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"

#include "deconvo/common.hpp"
#include "deconvo/model.hpp"

namespace deconvo {

struct SolveOptions {
  int max_iters = 20000;
  double tol_rel_change = 1e-7;
  /// Absolute tolerance on max(0, ||A X - y|| - tau). Unset means
  /// max(1e-8 ||y||, 1e-14).
  std::optional<double> tol_feasibility;
  /// Product of primal step, dual step and ||A||^2.
  double step_scale = 0.99;
  /// Primal step is ratio * ||y|| / ||A||; the dual step absorbs the rest.
  double primal_dual_ratio = 0.005;
  int opnorm_iters = 100;
  std::uint64_t seed = 0;
  /// Record the feasibility gap every this many iterations.
  int history_stride = 10;

  void validate() const;
};

struct SolveReport {
  Matrix X_star;
  int iterations = 0;
  double feasibility_gap = 0.0;
  double objective = 0.0;
  double last_rel_change = 0.0;
  double tau = 0.0;
  bool converged = false;
  std::vector<double> residual_history;

  nlohmann::json to_json(bool include_matrix) const;
};

/// sqrt of the largest eigenvalue of A^*A by power iteration from a seeded
/// random start, reported as the Rayleigh quotient ||A X|| of the unit iterate.
double power_opnorm(const SubspaceModel& model, int iters, std::uint64_t seed);
/// As above but stops early once the relative change drops below `tol`.
double power_opnorm(const SubspaceModel& model, int iters, double tol, std::uint64_t seed);

/// Singular value soft-thresholding, the proximal map of lambda ||.||_*.
Matrix svt(const Matrix& X, double lambda);

/// minimize ||X||_* subject to ||A X - y|| <= tau, by primal-dual splitting:
/// the primal step is svt(), the dual step projects the residual onto the
/// tau-ball. Starts from X = 0 with a zero dual variable.
SolveReport solve_constrained(const SubspaceModel& model, const Vector& y, double tau,
                              const SolveOptions& opts);

/// Equality-constrained variant, solved with tau = tol_feasibility / 10.
SolveReport solve_noiseless(const SubspaceModel& model, const Vector& y, const SolveOptions& opts);

/// Resolved feasibility tolerance for a given right-hand side.
double feasibility_tolerance(const SolveOptions& opts, const Vector& y);

}  // namespace deconvo
