#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "deconvo/bench.hpp"
#include "deconvo/rng.hpp"

using namespace deconvo;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.L = 128;
  c.K = 4;
  c.N = 4;
  c.n_seeds = 3;
  c.tau_grid = {1e-3, 1e-2, 1e-1};
  return c;
}

std::vector<SweepRecord> synthetic(double power) {
  std::vector<SweepRecord> out;
  for (const double tau : {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}) {
    for (std::uint64_t s = 0; s < 3; ++s) {
      SweepRecord r;
      r.seed = s;
      r.tau = tau;
      r.error = (2.0 + static_cast<double>(s)) * std::pow(tau, power);
      r.bound = noise_bound(1.0, 512, 1.0, tau);
      out.push_back(r);
    }
  }
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(NoiseMode, ParseRoundTrip) {
  for (const NoiseMode m : {NoiseMode::Random, NoiseMode::TangentAligned, NoiseMode::Cancel,
                            NoiseMode::GreedyAdversarial}) {
    EXPECT_EQ(parse_noise_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_noise_mode("white"), InvalidInput);
}

TEST(MakeNoise, NormEqualsTauForAllModes) {
  const SubspaceModel model = build_model(64, 4, 4, BType::IdentityColumns, 1);
  Rng rng(2);
  const GroundTruth gt = GroundTruth::random(4, 4, 1.0, rng);
  SolveOptions pilot;
  pilot.max_iters = 200;
  for (const NoiseMode m : {NoiseMode::Random, NoiseMode::TangentAligned, NoiseMode::Cancel,
                            NoiseMode::GreedyAdversarial}) {
    EXPECT_EQ(make_noise(model, gt, 0.0, m, 3, pilot).norm(), 0.0);
    EXPECT_NEAR(make_noise(model, gt, 0.05, m, 3, pilot).norm(), 0.05, 1e-12) << to_string(m);
  }
  EXPECT_THROW(make_noise(model, gt, -0.1, NoiseMode::Random, 3), InvalidInput);
}

TEST(MakeNoise, CancelAtSignalLevelZeroesTheData) {
  const SubspaceModel model = build_model(64, 4, 4, BType::RandomIsometry, 1);
  Rng rng(2);
  const GroundTruth gt = GroundTruth::random(4, 4, 1.3, rng);
  const Vector clean = apply_A(model, gt.X0());
  const Vector e = make_noise(model, gt, clean.norm(), NoiseMode::Cancel, 0);
  EXPECT_LE((clean + e).norm(), 1e-12 * clean.norm());
}

TEST(MakeNoise, TangentAlignedLiesInImageOfTangentRowSpace) {
  const SubspaceModel model = build_model(64, 4, 4, BType::IdentityColumns, 5);
  Rng rng(6);
  const GroundTruth gt = GroundTruth::random(4, 4, 1.0, rng);
  const Vector e = make_noise(model, gt, 1.0, NoiseMode::TangentAligned, 7);
  EXPECT_NEAR(e.norm(), 1.0, 1e-12);
  EXPECT_EQ((make_noise(model, gt, 1.0, NoiseMode::TangentAligned, 7) - e).norm(), 0.0);
}

TEST(GreedyDictionary, HasSixUnitCandidates) {
  const SubspaceModel model = build_model(64, 4, 4, BType::IdentityColumns, 1);
  Rng rng(2);
  const GroundTruth gt = GroundTruth::random(4, 4, 1.0, rng);
  const auto dict = greedy_dictionary(model, gt, 9);
  ASSERT_EQ(dict.size(), 6u);
  for (const auto& d : dict) EXPECT_NEAR(d.norm(), 1.0, 1e-12);
}

TEST(NoiseBound, Branches) {
  const double lg = std::log(512.0);
  EXPECT_NEAR(noise_bound(1.0, 512, 1.0, 1e-2), std::pow(lg, 0.25) * 0.1, 1e-15);
  EXPECT_NEAR(noise_bound(1.0, 512, 1.0, 10.0), std::sqrt(lg) * 10.0, 1e-12);
  EXPECT_EQ(noise_bound(1.0, 512, 1.0, 0.0), 0.0);
  EXPECT_GT(noise_bound(2.0, 512, 1.0, 1e-3), noise_bound(1.0, 512, 1.0, 1e-3));
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({5.0, 1.0, 3.0}), 3.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_THROW(median({}), InvalidInput);
}

TEST(FitSlope, SyntheticPowers) {
  EXPECT_NEAR(fit_slope(synthetic(1.0), 1e-3, 1e-1), 1.0, 1e-6);
  EXPECT_NEAR(fit_slope(synthetic(0.5), 1e-3, 1e-1), 0.5, 1e-6);
  EXPECT_THROW(fit_slope(synthetic(1.0), 1e-2, 3e-2), InvalidInput);
}

TEST(Inversions, CountsDecreasesOfTheMedian) {
  auto recs = synthetic(1.0);
  EXPECT_EQ(count_inversions(recs), 0);
  for (auto& r : recs)
    if (r.tau == 1e-2) r.error = 1e-9;
  EXPECT_EQ(count_inversions(recs), 1);
}

TEST(Calibration, MaxRatioCoversCalibrationSet) {
  const auto recs = synthetic(1.0);
  const double c = calibrate_constant(recs);
  EXPECT_EQ(bound_coverage(recs, c), 1.0);
  EXPECT_LT(bound_coverage(recs, 0.5 * c), 1.0);
}

TEST(Config, StrictParsingNamesTheKey) {
  nlohmann::json doc = {{"L", 64}, {"tau_grdi", {0.1}}};
  try {
    parse_experiment_config(doc);
    FAIL() << "expected InvalidInput";
  } catch (const InvalidInput& err) {
    EXPECT_NE(std::string(err.what()).find("tau_grdi"), std::string::npos);
  }
  nlohmann::json inner = {{"solver", {{"max_iter", 5}}}};
  try {
    parse_experiment_config(inner);
    FAIL() << "expected InvalidInput";
  } catch (const InvalidInput& err) {
    EXPECT_NE(std::string(err.what()).find("max_iter"), std::string::npos);
  }
  EXPECT_THROW(parse_experiment_config({{"tau_grid", {0.1, 0.05}}}), InvalidInput);
  EXPECT_THROW(parse_experiment_config({{"n_seeds", 0}}), InvalidInput);
  EXPECT_THROW(parse_experiment_config({{"L", "many"}}), InvalidInput);
}

TEST(Config, RoundTripThroughJson) {
  ExperimentConfig c = small_config();
  c.noise_mode = NoiseMode::TangentAligned;
  c.solver.tol_feasibility = 1e-9;
  const ExperimentConfig back = parse_experiment_config(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(Sweep, RecordsAreCompleteAndOrdered) {
  const ExperimentConfig c = small_config();
  const auto recs = sweep_tau(c);
  ASSERT_EQ(recs.size(), 9u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].seed, i / 3);
    EXPECT_DOUBLE_EQ(recs[i].tau, c.tau_grid[i % 3]);
    EXPECT_GE(recs[i].error, 0.0);
    EXPECT_GT(recs[i].bound, 0.0);
    EXPECT_TRUE(recs[i].converged);
    EXPECT_LE(recs[i].objective, recs[i].nu + 1e-6 * recs[i].nu);
  }
}

TEST(Sweep, NoiselessGridRecovers) {
  ExperimentConfig c = small_config();
  c.L = 256;
  c.tau_grid = {0.0};
  for (const auto& r : sweep_tau(c)) EXPECT_LE(r.error, 1e-4 * r.nu);
}

TEST(Sweep, SummarySlopeSkipsNoiselessCells) {
  ExperimentConfig c = small_config();
  c.n_seeds = 1;
  c.tau_grid = {0.0, 1e-3, 1e-2, 1e-1};
  const auto doc = summarize(sweep_tau(c));
  const auto& g = doc.at("groups").at(0);
  ASSERT_TRUE(g.at("slope").is_number());
  EXPECT_EQ(g.at("per_tau").size(), 4u);
  EXPECT_FALSE(g.at("per_tau").at(0).contains("median_ratio"));
}

TEST(Sweep, CancelAtSignalLevelGivesZeroSolution) {
  ExperimentConfig c = small_config();
  c.noise_mode = NoiseMode::Cancel;
  c.n_seeds = 1;
  const SubspaceModel model = build_model(c.L, c.K, c.N, c.b_type, derive_seed(c.master_seed, 0, 0));
  Rng rng(derive_seed(c.master_seed, 0, 1));
  const GroundTruth gt = GroundTruth::random(c.K, c.N, c.nu, rng);
  const double level = apply_A(model, gt.X0()).norm() / c.nu;
  const SweepRecord r = run_cell(c, 0, level);
  EXPECT_NEAR(r.error, c.nu, 1e-3 * c.nu);
  EXPECT_LE(r.objective, 1e-3 * c.nu);
}

TEST(Sweep, ThreadCountDoesNotChangeBytes) {
  ExperimentConfig c = small_config();
  c.threads = 1;
  const std::string one = to_csv(sweep_tau(c));
  c.threads = 3;
  EXPECT_EQ(to_csv(sweep_tau(c)), one);
}

TEST(Report, CsvSchemaAndSummary) {
  SweepRecord r;
  r.seed = 4;
  r.L = 512;
  r.K = 16;
  r.N = 16;
  r.tau = 0.1;
  r.error = 0.25;
  r.bound = 0.5;
  r.converged = true;
  const std::string csv = to_csv({r});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "seed,L,K,N,b_type,omega,noise_mode,tau,nu,error,bound,beta,gamma,eta,m_nuclear,"
            "objective,feasibility_gap,iterations,converged");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_NE(csv.find("4,512,16,16,identity-columns,1,random,0.10000000000000001,1,0.25,0.5,"),
            std::string::npos);
  const auto summary = summarize({r});
  EXPECT_EQ(summary.at("n_records"), 1);
  EXPECT_EQ(summary.at("groups").at(0).at("per_tau").at(0).at("median_error"), 0.25);
}

TEST(Report, FilesAreByteReproducible) {
  const auto recs = sweep_tau(small_config());
  const auto dir = std::filesystem::temp_directory_path() / "deconvo_bench_test";
  std::filesystem::create_directories(dir);
  const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
  emit_report(recs, a);
  emit_report(sweep_tau(small_config()), b);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(summary_path(a)), slurp(summary_path(b)));
  EXPECT_EQ(summary_path(a), (dir / "a.summary.json").string());
  EXPECT_THROW(emit_report(recs, (dir / "missing" / "x.csv").string()), std::runtime_error);
  EXPECT_THROW(emit_report({}, a), InvalidInput);
}
