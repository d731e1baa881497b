#include "deconvo/solver.hpp"

#include <algorithm>
#include <cmath>

#include "deconvo/linalg.hpp"
#include "deconvo/rng.hpp"

namespace deconvo {

void SolveOptions::validate() const {
  require(max_iters >= 1, "max_iters must be at least 1");
  require(tol_rel_change > 0.0, "tol_rel_change must be positive");
  require(!tol_feasibility || *tol_feasibility > 0.0, "tol_feasibility must be positive");
  require(step_scale > 0.0 && step_scale <= 1.0, "step_scale must lie in (0, 1]");
  require(primal_dual_ratio > 0.0, "primal_dual_ratio must be positive");
  require(opnorm_iters >= 1, "opnorm_iters must be at least 1");
  require(history_stride >= 1, "history_stride must be at least 1");
}

nlohmann::json SolveReport::to_json(bool include_matrix) const {
  nlohmann::json doc{{"iterations", iterations},
                     {"feasibility_gap", feasibility_gap},
                     {"objective", objective},
                     {"last_rel_change", last_rel_change},
                     {"tau", tau},
                     {"converged", converged},
                     {"residual_history", residual_history}};
  if (include_matrix) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < X_star.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < X_star.cols(); ++j)
        row.push_back({X_star(i, j).real(), X_star(i, j).imag()});
      rows.push_back(row);
    }
    doc["X_star"] = rows;
  }
  return doc;
}

double power_opnorm(const SubspaceModel& model, int iters, std::uint64_t seed) {
  return power_opnorm(model, iters, 0.0, seed);
}

double power_opnorm(const SubspaceModel& model, int iters, double tol, std::uint64_t seed) {
  require(iters >= 1, "power iteration needs at least one step");
  Rng rng(seed);
  Matrix X = rng.complex_gaussian_matrix(model.K(), model.N());
  X /= X.norm();
  double estimate = 0.0;
  for (int it = 0; it < iters; ++it) {
    Matrix next = apply_A_adjoint(model, apply_A(model, X));
    const double n = next.norm();
    if (n == 0.0) return 0.0;
    X = next / n;
    const double updated = apply_A(model, X).norm();
    const double change = std::abs(updated - estimate) / std::max(updated, 1e-300);
    estimate = updated;
    if (tol > 0.0 && it > 0 && change <= tol) break;
  }
  return estimate;
}

Matrix svt(const Matrix& X, double lambda) {
  require(lambda >= 0.0, "threshold must be nonnegative");
  if (lambda == 0.0 || X.size() == 0) return X;
  const Svd svd(X);
  const Eigen::Index rank = (svd.sigma.array() > lambda).count();
  if (rank == 0) return Matrix::Zero(X.rows(), X.cols());
  const RealVector shrunk = (svd.sigma.head(rank).array() - lambda).matrix();
  return svd.U.leftCols(rank) * shrunk.cast<cplx>().asDiagonal() * svd.V.leftCols(rank).adjoint();
}

double feasibility_tolerance(const SolveOptions& opts, const Vector& y) {
  if (opts.tol_feasibility) return *opts.tol_feasibility;
  return std::max(1e-8 * y.norm(), 1e-14);
}

SolveReport solve_constrained(const SubspaceModel& model, const Vector& y, double tau,
                              const SolveOptions& opts) {
  opts.validate();
  require(tau >= 0.0, "tau must be nonnegative");
  require(y.size() == model.L(), "y must have length L");
  const double tol_feas = feasibility_tolerance(opts, y);
  if (tau == 0.0) tau = tol_feas / 10.0;

  // 1% headroom over the power estimate, which approaches ||A|| from below.
  const double opnorm = 1.01 * power_opnorm(model, opts.opnorm_iters, 1e-12, opts.seed);
  require(opnorm > 0.0, "measurement operator is zero");
  const double scale = y.norm() > 0.0 ? y.norm() : 1.0;
  const double primal_step = opts.primal_dual_ratio * scale / opnorm;
  const double dual_step = opts.step_scale / (primal_step * opnorm * opnorm);

  SolveReport report;
  report.tau = tau;
  Matrix X = Matrix::Zero(model.K(), model.N());
  Vector AX = Vector::Zero(model.L());
  Vector u = Vector::Zero(model.L());
  Matrix Asu = Matrix::Zero(model.K(), model.N());

  for (int it = 1; it <= opts.max_iters; ++it) {
    Matrix X_next = svt(X - primal_step * Asu, primal_step);
    Vector AX_next = apply_A(model, X_next);

    // Moreau: prox of the conjugate of the tau-ball indicator around y.
    const Vector v = u + dual_step * (2.0 * AX_next - AX);
    Vector w = v / dual_step - y;
    const double wn = w.norm();
    if (wn > tau) w *= tau / wn;
    u = v - dual_step * (y + w);
    Asu = apply_A_adjoint(model, u);

    const double step = (X_next - X).norm();
    const double size = X_next.norm();
    report.last_rel_change = size > 0.0 ? step / size : (step > 0.0 ? 1.0 : 0.0);
    X = std::move(X_next);
    AX = std::move(AX_next);
    report.feasibility_gap = std::max(0.0, (AX - y).norm() - tau);
    report.iterations = it;
    if (it % opts.history_stride == 0) report.residual_history.push_back(report.feasibility_gap);

    if (report.last_rel_change <= opts.tol_rel_change && report.feasibility_gap <= tol_feas) {
      report.converged = true;
      break;
    }
  }
  report.X_star = X;
  report.objective = singular_values(X).sum();
  return report;
}

SolveReport solve_noiseless(const SubspaceModel& model, const Vector& y, const SolveOptions& opts) {
  opts.validate();
  return solve_constrained(model, y, feasibility_tolerance(opts, y) / 10.0, opts);
}

}  // namespace deconvo
