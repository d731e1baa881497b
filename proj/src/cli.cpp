#include "deconvo/cli.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "deconvo/bench.hpp"
#include "deconvo/certify.hpp"
#include "deconvo/dft.hpp"
#include "deconvo/geometry.hpp"
#include "deconvo/linalg.hpp"
#include "deconvo/model.hpp"
#include "deconvo/rng.hpp"
#include "deconvo/solver.hpp"

namespace deconvo::cli {
namespace {

using nlohmann::json;

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  bool quiet = false;
  int threads = 0;
  bool strict = false;
};

struct Dims {
  Eigen::Index L = 512;
  Eigen::Index K = 16;
  Eigen::Index N = 16;
  std::string b_type = "identity-columns";
  std::string model_path;
};

void add_dims(CLI::App* cmd, Dims& d) {
  cmd->add_option("--L", d.L, "measurement length")->capture_default_str();
  cmd->add_option("--K", d.K, "dimension of the h subspace")->capture_default_str();
  cmd->add_option("--N", d.N, "dimension of the m subspace")->capture_default_str();
  cmd->add_option("--b-type", d.b_type, "identity-columns or random-isometry")->capture_default_str();
  cmd->add_option("--model", d.model_path, "load the model from a `gen` file instead");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& err) {
    throw InvalidInput("malformed JSON in '" + path + "': " + err.what());
  }
}

SubspaceModel load_model(const Dims& d, std::uint64_t seed) {
  if (!d.model_path.empty()) return model_from_json(read_json_file(d.model_path));
  return build_model(d.L, d.K, d.N, parse_btype(d.b_type), seed);
}

// The instance ground truth is drawn from its own stream so that it does not
// depend on how the model was obtained.
GroundTruth instance_truth(const SubspaceModel& model, std::uint64_t seed, double nu) {
  Rng rng(derive_seed(seed, 0x7275746855ULL));
  return GroundTruth::random(model.K(), model.N(), nu, rng);
}

void write_text(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(g.out, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + g.out + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + g.out + "'");
}

void write_json(const Globals& g, const json& doc) { write_text(g, doc.dump(2) + '\n'); }

void reject_unknown(const json& doc, const std::set<std::string>& keys, const std::string& where) {
  require(doc.is_object(), where + " must be a JSON object");
  for (const auto& item : doc.items()) {
    if (!keys.count(item.key())) throw InvalidInput("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
void maybe_get(const json& doc, const std::string& key, T& target, const std::string& where) {
  if (!doc.contains(key)) return;
  try {
    target = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidInput("key '" + key + "' in " + where + " has the wrong type");
  }
}

// ---- gen ----------------------------------------------------------------

int cmd_gen(const Globals& g, const Dims& d) {
  const SubspaceModel model = build_model(d.L, d.K, d.N, parse_btype(d.b_type), g.seed);
  write_json(g, model_to_json(model));
  return kExitOk;
}

// ---- solve --------------------------------------------------------------

struct SolveArgs {
  double tau = 0.0;
  double nu = 1.0;
  std::string noise_mode = "random";
  std::string config;
  bool emit_matrix = false;
};

int cmd_solve(const Globals& g, const Dims& d, SolveArgs a) {
  SolveOptions opts;
  opts.seed = g.seed;
  if (!a.config.empty()) {
    const json doc = read_json_file(a.config);
    const std::string where = "solve config";
    reject_unknown(doc, {"tau", "nu", "noise_mode", "emit_matrix", "solver"}, where);
    maybe_get(doc, "tau", a.tau, where);
    maybe_get(doc, "nu", a.nu, where);
    maybe_get(doc, "noise_mode", a.noise_mode, where);
    maybe_get(doc, "emit_matrix", a.emit_matrix, where);
    if (doc.contains("solver")) opts = parse_solve_options(doc.at("solver"));
  }
  require(a.tau >= 0.0, "tau must be nonnegative");
  require(a.nu > 0.0, "nu must be positive");
  const NoiseMode mode = parse_noise_mode(a.noise_mode);

  const SubspaceModel model = load_model(d, g.seed);
  const GroundTruth truth = instance_truth(model, g.seed, a.nu);
  const double tau = a.tau * a.nu;
  const Vector e = make_noise(model, truth, tau, mode, derive_seed(g.seed, 2), opts);
  const MeasurementSet ms = measure(model, truth, e, tau);
  const SolveReport rep =
      tau > 0.0 ? solve_constrained(model, ms.y, tau, opts) : solve_noiseless(model, ms.y, opts);

  json doc{{"L", model.L()},
           {"K", model.K()},
           {"N", model.N()},
           {"b_type", to_string(model.b_type())},
           {"seed", g.seed},
           {"nu", a.nu},
           {"tau", tau},
           {"noise_mode", to_string(mode)},
           {"error", (rep.X_star - truth.X0()).norm()},
           {"report", rep.to_json(a.emit_matrix)}};
  write_json(g, doc);
  if (g.strict && !rep.converged) {
    std::cerr << "deconvo: solve did not converge in " << rep.iterations << " iterations\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

// ---- certify ------------------------------------------------------------

struct CertifyArgs {
  double omega = 1.0;
  int P = 0;
  double alpha_target = 1.0 / 32.0;
  int max_tries = 50;
  bool timing = false;
  std::string config;
};

int cmd_certify(const Globals& g, const Dims& d, CertifyArgs a) {
  if (!a.config.empty()) {
    const json doc = read_json_file(a.config);
    const std::string where = "certify config";
    reject_unknown(doc, {"omega", "P", "alpha_target", "max_tries"}, where);
    maybe_get(doc, "omega", a.omega, where);
    maybe_get(doc, "P", a.P, where);
    maybe_get(doc, "alpha_target", a.alpha_target, where);
    maybe_get(doc, "max_tries", a.max_tries, where);
  }
  require(a.P >= 0, "P must be nonnegative (0 picks it automatically)");
  const auto t0 = std::chrono::steady_clock::now();
  const SubspaceModel model = load_model(d, g.seed);
  const GroundTruth truth = instance_truth(model, g.seed, 1.0);
  const TangentSpace ts(truth);
  const double opnorm = certificate_opnorm(model, g.seed);
  const std::size_t P =
      a.P > 0 ? static_cast<std::size_t>(a.P) : choose_P(model, a.omega, opnorm);
  const Partition part = build_partition(model, P, a.alpha_target, a.max_tries, g.seed);

  json doc{{"L", model.L()},
           {"K", model.K()},
           {"N", model.N()},
           {"b_type", to_string(model.b_type())},
           {"seed", g.seed},
           {"omega", a.omega},
           {"opnorm_estimate", opnorm},
           {"opnorm_bound", opnorm_bound(model, a.omega)},
           {"partition", part.to_json()},
           {"mu2_h0_omega_upper", coherence_mu_h0_omega_upper(model, part, truth.h0)}};
  json block_delta = json::array();
  for (std::size_t p = 0; p < part.P(); ++p) block_delta.push_back(rip_delta_on_Tp(model, part, ts, p));
  doc["rip_delta_T"] = rip_delta_on_T(model, ts);
  doc["rip_delta_Tp"] = block_delta;

  const Certificate approx = golfing(model, part, truth.h0, truth.m0);
  doc["approximate"] = approx.to_json();
  doc["approximate"]["verification"] = verify_certificate(model, ts, approx, opnorm).to_json();
  bool certified = false;
  try {
    const Certificate exact = exactify(model, ts, approx);
    const VerificationReport ver = verify_certificate(model, ts, exact, opnorm);
    doc["exact"] = exact.to_json();
    doc["exact"]["verification"] = ver.to_json();
    certified = ver.all_passed();
  } catch (const IllConditionedTangent& err) {
    doc["exact"] = {{"error", err.what()}, {"delta", err.delta()}};
  }
  doc["certified"] = certified;
  if (a.timing) {
    doc["timing_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  write_json(g, doc);
  return kExitOk;
}

// ---- rip ----------------------------------------------------------------

struct RipArgs {
  double omega = 1.0;
  int P = 0;
  bool dense = false;
};

int cmd_rip(const Globals& g, const Dims& d, const RipArgs& a) {
  require(a.P >= 0, "P must be nonnegative (0 picks it automatically)");
  const SubspaceModel model = load_model(d, g.seed);
  const GroundTruth truth = instance_truth(model, g.seed, 1.0);
  const TangentSpace ts(truth);
  const double opnorm = certificate_opnorm(model, g.seed);
  json doc{{"L", model.L()},
           {"K", model.K()},
           {"N", model.N()},
           {"b_type", to_string(model.b_type())},
           {"seed", g.seed},
           {"mu2_max", coherence_mu_max(model)},
           {"mu2_h0", coherence_mu_h0(model, truth.h0)},
           {"opnorm_estimate", opnorm},
           {"opnorm_bound", opnorm_bound(model, a.omega)},
           {"rip_delta_T", rip_delta_on_T(model, ts)}};
  if (a.dense) doc["rip_delta_T_dense"] = rip_delta_on_T_dense(model, ts);
  const std::size_t P = a.P > 0 ? static_cast<std::size_t>(a.P) : choose_P(model, a.omega, opnorm);
  try {
    const Partition part = build_partition(model, P, 0.999, 50, g.seed);
    json blocks = json::array();
    for (std::size_t p = 0; p < part.P(); ++p) blocks.push_back(rip_delta_on_Tp(model, part, ts, p));
    doc["partition"] = part.to_json();
    doc["rip_delta_Tp"] = blocks;
  } catch (const PartitionFailure& err) {
    doc["partition"] = {{"error", err.what()}, {"best_alpha", err.best_alpha()}};
  }
  write_json(g, doc);
  return kExitOk;
}

// ---- sweep --------------------------------------------------------------

int cmd_sweep(const Globals& g, const std::string& config_path, bool threads_given) {
  require(!config_path.empty(), "sweep needs --config <json>");
  ExperimentConfig config = parse_experiment_config(read_json_file(config_path));
  if (threads_given) config.threads = g.threads;
  if (!g.out.empty()) config.output = g.out;
  require(!config.output.empty(), "sweep needs an output path (--out, DECONVO_OUT or \"output\")");
  const auto records = sweep_tau(config);
  emit_report(records, config.output);
  if (!g.quiet) std::cout << summarize(records).dump(2) << '\n';
  std::size_t flagged = 0;
  for (const auto& r : records) flagged += r.converged ? 0 : 1;
  if (g.strict && flagged > 0) {
    std::cerr << "deconvo: " << flagged << " sweep cells did not converge\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

// ---- selftest -----------------------------------------------------------

int cmd_selftest(const Globals& g) {
  const Eigen::Index L = 32, K = 4, N = 4;
  int failures = 0;
  const auto check = [&](const std::string& name, bool ok, double value) {
    if (!ok) ++failures;
    if (!g.quiet || !ok) {
      std::cout << (ok ? "ok    " : "FAIL  ") << name << "  (" << value << ")\n";
    }
  };

  for (const BType type : {BType::IdentityColumns, BType::RandomIsometry}) {
    const std::string tag = to_string(type) + ": ";
    const SubspaceModel model = build_model(L, K, N, type, g.seed);
    Rng rng(derive_seed(g.seed, 99));
    const GroundTruth truth = GroundTruth::random(K, N, 1.0, rng);
    const TangentSpace ts(truth);

    const double iso = (model.B().adjoint() * model.B() - Matrix::Identity(K, K)).norm();
    check(tag + "B isometry", iso <= 1e-10, iso);

    const Matrix X = rng.complex_gaussian_matrix(K, N);
    const Vector z = rng.complex_gaussian(L);
    const double adj = std::abs(apply_A(model, X).dot(z) - frob_inner(X, apply_A_adjoint(model, z))) /
                       (X.norm() * z.norm());
    check(tag + "adjoint identity", adj <= 1e-10, adj);

    const Vector fast = apply_A_rank1(model, truth.h0, truth.m0);
    const double diff_fast = (fast - apply_A(model, truth.base_point())).norm() / fast.norm();
    check(tag + "rank-1 fast path", diff_fast <= 1e-10, diff_fast);
    const Vector oracle =
        dft(convolve_oracle(model.B() * truth.h0, model.C() * truth.m0.conjugate()));
    const double diff_conv = (oracle - fast).norm() / oracle.norm();
    check(tag + "convolution oracle", diff_conv <= 1e-8, diff_conv);

    const Matrix Z = rng.complex_gaussian_matrix(K, N);
    const double split = (ts.project(Z) + ts.project_perp(Z) - Z).norm();
    check(tag + "P_T + P_Tperp = I", split <= 1e-12 * Z.norm(), split);
    const double idem = (ts.project(ts.project(Z)) - ts.project(Z)).norm();
    check(tag + "P_T idempotent", idem <= 1e-12 * Z.norm(), idem);

    const DescentDecomposition dec = decompose_descent(ts, Z);
    const double reas = (dec.reassemble(ts) - Z).norm();
    check(tag + "descent decomposition reassembles", reas <= 1e-10 * Z.norm(), reas);

    const Matrix cone = sample_descent_cone(ts, derive_seed(g.seed, 5), ConeMix::Uniform);
    const DescentCheck dc = is_descent_direction(ts, cone);
    check(tag + "sampled cone element is a descent direction", dc.is_descent, dc.margin);

    const double nn = std::abs(nuclear_norm_2x2(0.3, -1.2, 0.7) -
                               nuclear_norm((Matrix(2, 2) << 0.3, -1.2, 0.7, 0.0).finished()));
    check(tag + "2x2 closed form", nn <= 1e-12, nn);

    const Matrix W = svt(Matrix::Identity(K, N) * 3.0, 1.0);
    const double svt_err = (W - 2.0 * Matrix::Identity(K, N)).norm();
    check(tag + "singular value thresholding", svt_err <= 1e-12, svt_err);

    const double delta = rip_delta_on_T(model, ts);
    const double delta_dense = rip_delta_on_T_dense(model, ts);
    check(tag + "tangent RIP basis vs dense", std::abs(delta - delta_dense) <= 1e-10,
          std::abs(delta - delta_dense));

    const Partition whole = build_partition(model, 1, 0.5, 1, g.seed);
    check(tag + "single block is exactly balanced", whole.alpha <= 1e-10, whole.alpha);

    SolveOptions opts;
    opts.seed = g.seed;
    const SolveReport zero = solve_noiseless(model, Vector::Zero(L), opts);
    check(tag + "y = 0 solves to X = 0", zero.X_star.norm() <= 1e-12, zero.X_star.norm());
  }
  if (failures > 0) {
    std::cout << failures << " selftest checks failed\n";
    return kExitFailure;
  }
  if (!g.quiet) std::cout << "all selftest checks passed\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Randomized blind deconvolution workbench"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master seed for all randomness")->capture_default_str();
  app.add_option("--out", g.out, "output file (DECONVO_OUT overrides)");
  app.add_flag("--quiet", g.quiet, "suppress informational output");
  auto* threads_opt = app.add_option("--threads", g.threads, "worker cap for sweep");
  app.add_flag("--strict", g.strict, "exit 3 when a solve does not converge");

  Dims dims;
  auto* gen = app.add_subcommand("gen", "build a model and write it as JSON");
  add_dims(gen, dims);

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "generate an instance and solve it");
  add_dims(solve, dims);
  solve->add_option("--tau", solve_args.tau, "noise level as a fraction of nu")->capture_default_str();
  solve->add_option("--nu", solve_args.nu, "ground-truth scale")->capture_default_str();
  solve->add_option("--noise-mode", solve_args.noise_mode,
                    "random, tangent-aligned, cancel or greedy-adversarial")
      ->capture_default_str();
  solve->add_option("--config", solve_args.config, "JSON with tau, nu, noise_mode, solver");
  solve->add_flag("--emit-matrix", solve_args.emit_matrix, "include X_star in the report");

  CertifyArgs cert_args;
  auto* certify = app.add_subcommand("certify", "build and verify a dual certificate");
  add_dims(certify, dims);
  certify->add_option("--omega", cert_args.omega)->capture_default_str();
  certify->add_option("--P", cert_args.P, "number of blocks (0 = automatic)");
  certify->add_option("--alpha-target", cert_args.alpha_target)->capture_default_str();
  certify->add_option("--max-tries", cert_args.max_tries)->capture_default_str();
  certify->add_option("--config", cert_args.config, "JSON with omega, P, alpha_target, max_tries");
  certify->add_flag("--timing", cert_args.timing, "add wall-clock time to the report");

  RipArgs rip_args;
  auto* rip = app.add_subcommand("rip", "RIP constants, coherence and operator norm");
  add_dims(rip, dims);
  rip->add_option("--omega", rip_args.omega)->capture_default_str();
  rip->add_option("--P", rip_args.P, "number of blocks (0 = automatic)");
  rip->add_flag("--dense", rip_args.dense, "also evaluate delta from the dense operator");

  std::string sweep_config;
  auto* sweep = app.add_subcommand("sweep", "tau sweep from a JSON experiment config");
  sweep->add_option("--config", sweep_config, "experiment config")->required();

  auto* selftest = app.add_subcommand("selftest", "invariant suite at L=32, K=N=4");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  if (const char* env = std::getenv("DECONVO_OUT"); env != nullptr && *env != '\0') g.out = env;

  try {
    if (*sweep) {
      if (threads_opt->count() > 0) require(g.threads >= 1, "--threads must be at least 1");
      return cmd_sweep(g, sweep_config, threads_opt->count() > 0);
    }
    omp_set_num_threads(1);
    if (*gen) return cmd_gen(g, dims);
    if (*solve) return cmd_solve(g, dims, solve_args);
    if (*certify) return cmd_certify(g, dims, cert_args);
    if (*rip) return cmd_rip(g, dims, rip_args);
    if (*selftest) return cmd_selftest(g);
  } catch (const InvalidInput& err) {
    std::cerr << "deconvo: configuration error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "deconvo: " << err.what() << '\n';
    return kExitFailure;
  }
  return kExitConfig;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

}  // namespace deconvo::cli
