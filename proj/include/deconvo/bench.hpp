#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "deconvo/common.hpp"
#include "deconvo/model.hpp"
#include "deconvo/solver.hpp"

namespace deconvo {

enum class NoiseMode { Random, TangentAligned, Cancel, GreedyAdversarial };
std::string to_string(NoiseMode mode);
NoiseMode parse_noise_mode(const std::string& name);

struct ExperimentConfig {
  Eigen::Index L = 512;
  Eigen::Index K = 16;
  Eigen::Index N = 16;
  BType b_type = BType::IdentityColumns;
  double omega = 1.0;
  double nu = 1.0;
  /// Noise levels as fractions of nu.
  std::vector<double> tau_grid{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  NoiseMode noise_mode = NoiseMode::Random;
  int n_seeds = 20;
  /// Instance seeds are first_seed, ..., first_seed + n_seeds - 1.
  std::uint64_t first_seed = 0;
  std::uint64_t master_seed = 0;
  SolveOptions solver;
  /// CSV path; the JSON summary goes next to it (see summary_path()).
  std::string output;
  /// Worker cap for the sweep; 0 uses the OpenMP default.
  int threads = 0;

  void validate() const;
};

/// Strict parse: unknown keys raise InvalidInput naming the key.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
SolveOptions parse_solve_options(const nlohmann::json& doc);
nlohmann::json to_json(const SolveOptions& opts);
nlohmann::json to_json(const ExperimentConfig& config);

/// Noise vector with ||e|| = tau.
///   random: uniform direction on the sphere.
///   tangent-aligned: direction of A(h0 m0_perp^*) with a random unit m0_perp.
///   cancel: -A(X0) / ||A(X0)||.
///   greedy-adversarial: the dictionary entry with the largest error in a
///   short pilot solve; see greedy_dictionary().
Vector make_noise(const SubspaceModel& model, const GroundTruth& truth, double tau, NoiseMode mode,
                  std::uint64_t seed, const SolveOptions& pilot_base = {});

/// Unit candidate directions for the greedy mode: A(h0 m0_perp^*), A(h0_perp m0^*),
/// A(h0_perp m0_perp^*), -A(h0 m0^*), the top left singular direction of A and
/// one random direction.
std::vector<Vector> greedy_dictionary(const SubspaceModel& model, const GroundTruth& truth,
                                      std::uint64_t seed);

/// max{ (log(omega L))^{1/4} sqrt(nu tau), sqrt(log(omega L)) tau }.
double noise_bound(double omega, Eigen::Index L, double nu, double tau);

struct SweepRecord {
  std::uint64_t seed = 0;
  Eigen::Index L = 0, K = 0, N = 0;
  BType b_type = BType::IdentityColumns;
  double omega = 1.0;
  NoiseMode noise_mode = NoiseMode::Random;
  double tau = 0.0;
  double nu = 1.0;
  double error = 0.0;
  double bound = 0.0;
  double beta = 0.0, gamma = 0.0, eta = 0.0, m_nuclear = 0.0;
  double objective = 0.0;
  double feasibility_gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// One record per (seed, tau), ordered by seed then tau. The model and ground
/// truth depend only on the seed. For the random, tangent-aligned and cancel
/// modes so does the noise direction; greedy mode reruns its pilot at each tau.
std::vector<SweepRecord> sweep_tau(const ExperimentConfig& config);

/// Single cell of the sweep, exposed for tests.
SweepRecord run_cell(const ExperimentConfig& config, std::uint64_t seed, double tau_fraction);

/// Median of the values (mean of the middle pair for even counts).
double median(std::vector<double> values);

/// Least-squares slope of log(median error) against log(tau) over the distinct
/// taus in [tau_min, tau_max]. Needs at least 3 of them.
double fit_slope(const std::vector<SweepRecord>& records, double tau_min, double tau_max);

/// Median error per distinct tau, ascending in tau.
std::vector<std::pair<double, double>> median_error_by_tau(const std::vector<SweepRecord>& records);

/// Number of strict decreases along median_error_by_tau().
int count_inversions(const std::vector<SweepRecord>& records);

/// Largest error / bound over records with 0 < tau <= nu.
double calibrate_constant(const std::vector<SweepRecord>& records);

/// Share of records with 0 < tau <= nu and error <= c * bound.
double bound_coverage(const std::vector<SweepRecord>& records, double c);

std::string csv_header();
std::string to_csv_row(const SweepRecord& record);
std::string to_csv(const std::vector<SweepRecord>& records);
nlohmann::json summarize(const std::vector<SweepRecord>& records);

/// "<stem>.summary.json" next to the CSV path.
std::string summary_path(const std::string& csv_path);

/// Writes the CSV and its JSON summary. Throws std::runtime_error naming the
/// path on I/O failure.
void emit_report(const std::vector<SweepRecord>& records, const std::string& csv_path);

}  // namespace deconvo
