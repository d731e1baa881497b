#include "deconvo/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "deconvo/kernels.hpp"
#include "deconvo/linalg.hpp"
#include "deconvo/rng.hpp"
#include "deconvo/solver.hpp"

namespace deconvo {
namespace {

constexpr double kAdmissibleAlpha = 1.0 / 32.0;
constexpr double kConsistencyTol = 1e-10;

// (A_p X)_k = b_k^* X c_k for k in rows, zero elsewhere.
Vector forward_rows(const SubspaceModel& model, const Matrix& X,
                    const std::vector<Eigen::Index>& rows) {
  Vector out = Vector::Zero(model.L());
  const RowMatrix& b = model.b_rows();
  const RowMatrix& c = model.c_rows();
  for (const Eigen::Index l : rows) {
    out(l) = (b.row(l).conjugate() * X * c.row(l).transpose())(0, 0);
  }
  return out;
}

Matrix block_gram(const SubspaceModel& model, const std::vector<Eigen::Index>& rows, double scale) {
  const RowMatrix& b = model.b_rows();
  Matrix T = Matrix::Zero(model.K(), model.K());
  for (const Eigen::Index l : rows) {
    T.noalias() += b.row(l).transpose() * b.row(l).conjugate();
  }
  return scale * T;
}

Eigen::Map<const Vector> vec(const Matrix& X) { return {X.data(), X.size()}; }

}  // namespace

double Partition::block_scale() const {
  if (blocks.empty()) return 0.0;
  Eigen::Index L = 0;
  for (const auto& b : blocks) L += static_cast<Eigen::Index>(b.size());
  return static_cast<double>(L) / Q;
}

nlohmann::json Partition::to_json() const {
  nlohmann::json sizes = nlohmann::json::array();
  for (const auto& b : blocks) sizes.push_back(b.size());
  return {{"P", P()}, {"Q", Q}, {"alpha", alpha}, {"block_sizes", sizes}, {"tries", tries_used}};
}

Partition make_partition(const SubspaceModel& model, std::vector<std::vector<Eigen::Index>> blocks) {
  const Eigen::Index L = model.L();
  require(!blocks.empty(), "partition needs at least one block");
  std::vector<char> seen(static_cast<std::size_t>(L), 0);
  Eigen::Index covered = 0;
  for (const auto& blk : blocks) {
    require(!blk.empty(), "partition blocks must be nonempty");
    for (const Eigen::Index l : blk) {
      require(l >= 0 && l < L, "partition index out of range");
      require(!seen[static_cast<std::size_t>(l)], "partition blocks overlap");
      seen[static_cast<std::size_t>(l)] = 1;
      ++covered;
    }
  }
  require(covered == L, "partition does not cover all measurements");

  Partition part;
  part.Q = static_cast<double>(L) / static_cast<double>(blocks.size());
  part.blocks = std::move(blocks);
  const double scale = static_cast<double>(L) / part.Q;
  const Matrix I = Matrix::Identity(model.K(), model.K());
  for (const auto& blk : part.blocks) {
    Matrix T = block_gram(model, blk, scale);
    T = 0.5 * (T + T.adjoint()).eval();
    part.alpha = std::max(part.alpha, spectral_norm(I - T));
    part.T.push_back(std::move(T));
  }
  for (const auto& T : part.T) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(T, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
      throw PartitionFailure("block Gram matrix T_p is singular", part.alpha);
    }
    part.S.push_back(T.llt().solve(I));
  }
  return part;
}

Partition build_partition(const SubspaceModel& model, std::size_t P, double alpha_target,
                          int max_tries, std::uint64_t seed) {
  const auto L = static_cast<std::size_t>(model.L());
  require(P >= 1 && P <= L, "P must lie in [1, L]");
  require(alpha_target > 0.0 && alpha_target < 1.0, "alpha_target must lie in (0, 1)");
  require(max_tries >= 1, "max_tries must be at least 1");

  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> order(L);
  for (int t = 0; t < max_tries; ++t) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    if (t > 0) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
      rng.shuffle(order);
    }
    std::vector<std::vector<Eigen::Index>> blocks(P);
    for (std::size_t i = 0; i < L; ++i) blocks[i % P].push_back(order[i]);
    for (auto& blk : blocks) std::sort(blk.begin(), blk.end());
    try {
      Partition part = make_partition(model, std::move(blocks));
      part.tries_used = t + 1;
      if (part.alpha <= alpha_target) return part;
      best = std::min(best, part.alpha);
    } catch (const PartitionFailure& err) {
      best = std::min(best, err.best_alpha());
    }
  }
  throw PartitionFailure("no partition reached alpha <= " + std::to_string(alpha_target) + " in " +
                             std::to_string(max_tries) + " tries",
                         best);
}

std::size_t choose_P(const SubspaceModel& model, double omega, double opnorm_estimate) {
  require(omega >= 1.0, "omega must be at least 1");
  require(opnorm_estimate > 0.0, "operator norm estimate must be positive");
  const double zeta = opnorm_bound(model, omega);
  const double upper_real = std::floor(std::log(8.0 * zeta) + 1.0);
  const auto L = static_cast<double>(model.L());
  const double upper = std::max(1.0, std::min(L, upper_real));
  const double raw = std::ceil(0.5 * std::log(8.0 * opnorm_estimate) - 1e-12);
  return static_cast<std::size_t>(std::clamp(raw, 1.0, upper));
}

std::size_t choose_P(const SubspaceModel& model, double omega, std::uint64_t seed) {
  return choose_P(model, omega, certificate_opnorm(model, seed));
}

double certificate_opnorm(const SubspaceModel& model, std::uint64_t seed) {
  return power_opnorm(model, 20, 1e-6, seed);
}

double coherence_mu_h0_omega_upper(const SubspaceModel& model, const Partition& partition,
                                   const Vector& h0) {
  require(h0.size() == model.K(), "h0 must have length K");
  const double n2 = h0.squaredNorm();
  require(n2 > 0.0, "h0 must be nonzero");
  const RowMatrix& b = model.b_rows();
  double worst = (b.conjugate() * h0).cwiseAbs2().maxCoeff();
  for (const auto& S : partition.S) {
    worst = std::max(worst, (b.conjugate() * (S * h0)).cwiseAbs2().maxCoeff());
  }
  return static_cast<double>(model.L()) * worst / n2;
}

std::string to_string(CertificateKind kind) {
  return kind == CertificateKind::Exact ? "exact" : "approximate";
}

nlohmann::json Certificate::to_json() const {
  nlohmann::json doc{{"kind", to_string(kind)},
                     {"tangent_residual", tangent_residual},
                     {"offtangent_norm", offtangent_norm},
                     {"z_norm", z_norm},
                     {"consistency_residual", consistency_residual},
                     {"decay_trace", decay_trace}};
  if (kind == CertificateKind::Exact) {
    doc["correction_norm"] = correction_norm;
    doc["delta"] = delta;
  }
  return doc;
}

void fill_diagnostics(const SubspaceModel& model, const TangentSpace& ts, Certificate& cert) {
  const Matrix base = ts.h0() * ts.m0().adjoint();
  cert.tangent_residual = (ts.project(cert.Y) - base).norm();
  cert.offtangent_norm = spectral_norm(ts.project_perp(cert.Y));
  cert.z_norm = cert.z.norm();
  const Matrix Az = apply_A_adjoint(model, cert.z);
  cert.consistency_residual =
      (cert.Y - Az).norm() / std::max(cert.Y.norm(), std::numeric_limits<double>::min());
}

Certificate golfing(const SubspaceModel& model, const Partition& partition, const Vector& h0,
                    const Vector& m0) {
  require(h0.size() == model.K() && m0.size() == model.N(), "h0, m0 must have lengths K, N");
  require(partition.P() >= 1 && partition.S.size() == partition.P(), "partition is incomplete");
  require(partition.alpha <= kAdmissibleAlpha,
          "partition is not admissible: alpha = " + std::to_string(partition.alpha) +
              " exceeds 1/32");
  const TangentSpace ts(h0, m0);
  const Matrix base = ts.h0() * ts.m0().adjoint();
  const double scale = partition.block_scale();

  Certificate cert;
  cert.kind = CertificateKind::Approximate;
  cert.z = Vector::Zero(model.L());
  cert.Y = Matrix::Zero(model.K(), model.N());
  Matrix W = base;
  cert.decay_trace.push_back(W.norm());
  for (std::size_t p = 0; p < partition.P(); ++p) {
    const auto& rows = partition.blocks[p];
    const Vector zp = scale * forward_rows(model, partition.S[p] * W, rows);
    cert.z += zp;
    cert.Y += kernels::adjoint_rows(model.b_rows(), model.c_rows(), zp, rows);
    W = base - ts.project(cert.Y);
    cert.decay_trace.push_back(W.norm());
  }
  fill_diagnostics(model, ts, cert);
  if (!(cert.consistency_residual <= kConsistencyTol)) {
    throw SolveFailure("golfing certificate fails Y = A^*(z): relative residual " +
                       std::to_string(cert.consistency_residual));
  }
  return cert;
}

namespace {

// Columns A(E_i) for the tangent basis.
Matrix tangent_images(const SubspaceModel& model, const TangentSpace& ts) {
  const auto& basis = ts.basis();
  Matrix M(model.L(), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    M.col(static_cast<Eigen::Index>(i)) = apply_A(model, basis[i]);
  }
  return M;
}

void check_dims(const SubspaceModel& model, const TangentSpace& ts) {
  require(model.K() == ts.K() && model.N() == ts.N(), "model and tangent space disagree");
}

}  // namespace

Matrix tangent_gram(const SubspaceModel& model, const TangentSpace& ts) {
  check_dims(model, ts);
  const Matrix M = tangent_images(model, ts);
  Matrix G = M.adjoint() * M;
  return 0.5 * (G + G.adjoint());
}

double rip_delta_on_T(const SubspaceModel& model, const TangentSpace& ts) {
  return max_deviation_from_one(tangent_gram(model, ts));
}

double rip_delta_on_T_dense(const SubspaceModel& model, const TangentSpace& ts) {
  check_dims(model, ts);
  const Eigen::Index K = model.K(), N = model.N(), D = K * N;
  Matrix op(model.L(), D);
  Matrix proj(D, D);
  for (Eigen::Index j = 0; j < D; ++j) {
    Matrix E = Matrix::Zero(K, N);
    E(j % K, j / K) = 1.0;  // column-major vec index
    op.col(j) = apply_A(model, E);
    proj.col(j) = vec(ts.project(E));
  }
  Matrix H = proj * (op.adjoint() * op) * proj - proj;
  H = 0.5 * (H + H.adjoint()).eval();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(H, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

double rip_delta_on_Tp(const SubspaceModel& model, const Partition& partition,
                       const TangentSpace& ts, std::size_t p) {
  check_dims(model, ts);
  require(p < partition.P(), "block index out of range");
  const Eigen::Index K = model.K(), N = model.N();
  const auto& basis = ts.basis();
  const auto d = static_cast<Eigen::Index>(basis.size());
  const Matrix& S = partition.S[p];
  const Matrix& T = partition.T[p];

  Matrix span(K * N, 2 * d);
  for (Eigen::Index i = 0; i < d; ++i) {
    span.col(i) = vec(basis[static_cast<std::size_t>(i)]);
    const Matrix SE = S * basis[static_cast<std::size_t>(i)];
    span.col(d + i) = vec(SE);
  }
  const Eigen::JacobiSVD<Matrix> svd(span, Eigen::ComputeThinU);
  const RealVector& sv = svd.singularValues();
  const Eigen::Index rank = (sv.array() > 1e-10 * sv(0)).count();
  if (rank < d) {
    throw DegenerateSubspace("T + S_p(T) has rank " + std::to_string(rank) + " below dim T = " +
                             std::to_string(d));
  }

  const auto& rows = partition.blocks[p];
  const double scale = partition.block_scale();
  Matrix images(model.L(), rank);
  Matrix weighted(K * N, rank);
  for (Eigen::Index i = 0; i < rank; ++i) {
    const Matrix Yi = Eigen::Map<const Matrix>(svd.matrixU().col(i).data(), K, N);
    images.col(i) = forward_rows(model, Yi, rows);
    const Matrix TYi = T * Yi;
    weighted.col(i) = vec(TYi);
  }
  Matrix num = scale * (images.adjoint() * images);
  Matrix den = svd.matrixU().leftCols(rank).adjoint() * weighted;
  num = 0.5 * (num + num.adjoint()).eval();
  den = 0.5 * (den + den.adjoint()).eval();
  const Eigen::LLT<Matrix> chol(den);
  if (chol.info() != Eigen::Success) {
    throw DegenerateSubspace("T_p is not positive definite on T + S_p(T)");
  }
  // Reduce to the standard problem L^{-1} num L^{-*}.
  Matrix reduced = chol.matrixL().solve(num);
  reduced = chol.matrixL().solve(reduced.adjoint().eval()).adjoint();
  reduced = 0.5 * (reduced + reduced.adjoint()).eval();
  return max_deviation_from_one(reduced);
}

Certificate exactify(const SubspaceModel& model, const TangentSpace& ts, const Certificate& cert) {
  check_dims(model, ts);
  require(cert.z.size() == model.L(), "certificate z must have length L");
  const auto& basis = ts.basis();
  const Matrix M = tangent_images(model, ts);
  Matrix G = M.adjoint() * M;
  G = 0.5 * (G + G.adjoint()).eval();
  const double delta = max_deviation_from_one(G);
  if (!(delta < 0.75)) {
    throw IllConditionedTangent("RIP constant on T is " + std::to_string(delta) + " >= 3/4",
                                delta);
  }

  const Matrix residual = ts.h0() * ts.m0().adjoint() - ts.project(apply_A_adjoint(model, cert.z));
  Vector rhs(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    rhs(static_cast<Eigen::Index>(i)) = frob_inner(basis[i], residual);
  }
  const Vector coeff = G.llt().solve(rhs);
  const double solve_residual = (G * coeff - rhs).norm();
  if (!(solve_residual <= 1e-10 * std::max(1.0, rhs.norm()))) {
    throw SolveFailure("tangent solve residual " + std::to_string(solve_residual) +
                       " exceeds 1e-10");
  }

  Certificate out;
  out.kind = CertificateKind::Exact;
  const Vector x = M * coeff;
  out.z = cert.z + x;
  out.Y = apply_A_adjoint(model, out.z);
  out.decay_trace = cert.decay_trace;
  out.correction_norm = x.norm();
  out.delta = delta;
  fill_diagnostics(model, ts, out);
  return out;
}

bool VerificationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json VerificationReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks) {
    list.push_back({{"name", c.name},
                    {"passed", c.passed},
                    {"value", c.value},
                    {"threshold", c.threshold},
                    {"margin", c.margin}});
  }
  return {{"all_passed", all_passed()}, {"checks", list}};
}

namespace {

CheckResult at_most(std::string name, double value, double threshold) {
  return {std::move(name), value <= threshold, value, threshold, threshold - value};
}

CheckResult below(std::string name, double value, double threshold) {
  return {std::move(name), value < threshold, value, threshold, threshold - value};
}

}  // namespace

VerificationReport verify_certificate(const SubspaceModel& model, const TangentSpace& ts,
                                      const Certificate& cert, double opnorm_estimate) {
  check_dims(model, ts);
  require(opnorm_estimate > 0.0, "operator norm estimate must be positive");
  Certificate c = cert;
  fill_diagnostics(model, ts, c);
  VerificationReport report;
  if (c.kind == CertificateKind::Approximate) {
    report.checks.push_back(
        at_most("tangent_residual", c.tangent_residual, 1.0 / (8.0 * opnorm_estimate)));
    report.checks.push_back(below("offtangent_norm", c.offtangent_norm, 0.5));
  } else {
    report.checks.push_back(at_most("tangent_residual", c.tangent_residual, 1e-8));
    report.checks.push_back(at_most("offtangent_norm", c.offtangent_norm, 0.75));
  }
  report.checks.push_back(at_most("consistency", c.consistency_residual, kConsistencyTol));
  return report;
}

}  // namespace deconvo
