#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "deconvo/common.hpp"
#include "deconvo/geometry.hpp"
#include "deconvo/model.hpp"

namespace deconvo {

/// Split of the measurement indices [L] into P blocks Gamma_p, with the
/// Gram correctors T_p = (L/Q) sum_{k in Gamma_p} b_k b_k^* and S_p = T_p^{-1}.
struct Partition {
  std::vector<std::vector<Eigen::Index>> blocks;
  /// Nominal block size L / P.
  double Q = 0.0;
  std::vector<Matrix> T;
  std::vector<Matrix> S;
  /// max_p ||I_K - T_p|| (spectral).
  double alpha = 0.0;
  int tries_used = 0;

  std::size_t P() const { return blocks.size(); }
  /// L / Q, the rescaling applied to each partial operator.
  double block_scale() const;
  nlohmann::json to_json() const;
};

/// Builds T_p and S_p for the given blocks. Throws PartitionFailure when a
/// T_p is singular.
Partition make_partition(const SubspaceModel& model, std::vector<std::vector<Eigen::Index>> blocks);

/// Candidate 0 assigns index l to block l mod P; for identity-columns B with
/// L/P an integer >= K this gives T_p = I exactly. Further candidates are
/// uniformly random balanced assignments. Returns the first candidate with
/// alpha <= alpha_target, otherwise throws PartitionFailure carrying the
/// best alpha seen.
Partition build_partition(const SubspaceModel& model, std::size_t P, double alpha_target,
                          int max_tries, std::uint64_t seed);

/// ceil(log(8 ||A||) / 2) clamped to [1, min(L, floor(log(8 zeta) + 1))],
/// where zeta is opnorm_bound(model, omega).
std::size_t choose_P(const SubspaceModel& model, double omega, double opnorm_estimate);
/// As above with ||A|| from certificate_opnorm().
std::size_t choose_P(const SubspaceModel& model, double omega, std::uint64_t seed = 0);

/// Upper bound on the minimal coherence over admissible partitions, from
/// the partition actually used: L max{ max_l |b_l^* h0|^2, max_{l,p} |b_l^* S_p h0|^2 }.
double coherence_mu_h0_omega_upper(const SubspaceModel& model, const Partition& partition,
                                   const Vector& h0);

enum class CertificateKind { Approximate, Exact };
std::string to_string(CertificateKind kind);

struct Certificate {
  Vector z;
  Matrix Y;
  CertificateKind kind = CertificateKind::Approximate;
  /// ||P_T Y - h0 m0^*||_F
  double tangent_residual = 0.0;
  /// ||P_Tperp Y|| (spectral)
  double offtangent_norm = 0.0;
  double z_norm = 0.0;
  /// ||W_p||_F for p = 0..P, W_p = h0 m0^* - P_T Y_p.
  std::vector<double> decay_trace;
  /// ||Y - A^*(z)||_F / max(||Y||_F, tiny)
  double consistency_residual = 0.0;
  /// exactify only: ||x||_2 of the correction and the RIP constant used.
  double correction_norm = 0.0;
  double delta = 0.0;

  nlohmann::json to_json() const;
};

/// Refreshes tangent_residual, offtangent_norm, z_norm and consistency_residual.
void fill_diagnostics(const SubspaceModel& model, const TangentSpace& ts, Certificate& cert);

/// Golfing recursion Y_p = Y_{p-1} + (L/Q) A_p^* A_p S_p (h0 m0^* - P_T Y_{p-1}),
/// z = sum_p (L/Q) A_p S_p (W_{p-1}). Requires partition.alpha <= 1/32.
Certificate golfing(const SubspaceModel& model, const Partition& partition, const Vector& h0,
                    const Vector& m0);

/// Corrects an approximate certificate so that P_T Y' = h0 m0^*, via a dense
/// Hermitian solve with P_T A^*A P_T in the tangent basis.
Certificate exactify(const SubspaceModel& model, const TangentSpace& ts, const Certificate& cert);

/// Gram matrix <A(E_i), A(E_j)> over the tangent basis.
Matrix tangent_gram(const SubspaceModel& model, const TangentSpace& ts);
/// delta = max |lambda - 1| over the spectrum of tangent_gram().
double rip_delta_on_T(const SubspaceModel& model, const TangentSpace& ts);
/// ||P_T A^*A P_T - P_T|| from the full KN x KN operator; no tangent basis.
double rip_delta_on_T_dense(const SubspaceModel& model, const TangentSpace& ts);

/// RIP constant of (L/Q) A_p^* A_p on T + S_p(T) relative to ||T_p^{1/2} Y||_F^2.
/// p is zero-based.
double rip_delta_on_Tp(const SubspaceModel& model, const Partition& partition,
                       const TangentSpace& ts, std::size_t p);

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  /// threshold - value; positive means slack.
  double margin = 0.0;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  bool all_passed() const;
  nlohmann::json to_json() const;
};

/// Approximate kind: ||P_T Y - h0m0^*||_F <= 1/(8 ||A||), ||P_Tperp Y|| < 1/2.
/// Exact kind: tangent residual <= 1e-8, ||P_Tperp Y|| <= 3/4.
/// Both: Y = A^*(z) to 1e-10 relative.
VerificationReport verify_certificate(const SubspaceModel& model, const TangentSpace& ts,
                                      const Certificate& cert, double opnorm_estimate);

/// ||A|| as used in the approximate-certificate threshold: power_opnorm with
/// 20 iterations and tolerance 1e-6.
double certificate_opnorm(const SubspaceModel& model, std::uint64_t seed);

}  // namespace deconvo
