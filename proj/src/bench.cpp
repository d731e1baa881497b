#include "deconvo/bench.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "deconvo/geometry.hpp"
#include "deconvo/linalg.hpp"
#include "deconvo/rng.hpp"

namespace deconvo {

std::string to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::Random:
      return "random";
    case NoiseMode::TangentAligned:
      return "tangent-aligned";
    case NoiseMode::Cancel:
      return "cancel";
    case NoiseMode::GreedyAdversarial:
      return "greedy-adversarial";
  }
  return "unknown";
}

NoiseMode parse_noise_mode(const std::string& name) {
  if (name == "random") return NoiseMode::Random;
  if (name == "tangent-aligned") return NoiseMode::TangentAligned;
  if (name == "cancel") return NoiseMode::Cancel;
  if (name == "greedy-adversarial") return NoiseMode::GreedyAdversarial;
  throw InvalidInput("unknown noise mode '" + name + "'");
}

void ExperimentConfig::validate() const {
  require(L >= 1 && K >= 1 && N >= 1 && K <= L, "need 1 <= K <= L and N >= 1");
  require(omega >= 1.0, "omega must be at least 1");
  require(nu > 0.0, "nu must be positive");
  require(!tau_grid.empty(), "tau_grid must not be empty");
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    require(tau_grid[i] >= 0.0 && std::isfinite(tau_grid[i]), "tau_grid entries must be >= 0");
    if (i > 0) require(tau_grid[i] > tau_grid[i - 1], "tau_grid must be strictly increasing");
  }
  require(n_seeds >= 1, "n_seeds must be at least 1");
  require(threads >= 0, "threads must be nonnegative");
  solver.validate();
}

namespace {

using nlohmann::json;

void reject_unknown(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
  require(doc.is_object(), where + " must be a JSON object");
  for (const auto& item : doc.items()) {
    if (!allowed.count(item.key())) {
      throw InvalidInput("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
T get_as(const json& doc, const std::string& key, const std::string& where) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidInput("key '" + key + "' in " + where + " has the wrong type");
  }
}

}  // namespace

SolveOptions parse_solve_options(const json& doc) {
  static const std::set<std::string> keys{"max_iters",         "tol_rel_change", "tol_feasibility",
                                          "step_scale",        "primal_dual_ratio",
                                          "opnorm_iters",      "seed",           "history_stride"};
  const std::string where = "solver options";
  reject_unknown(doc, keys, where);
  SolveOptions o;
  if (doc.contains("max_iters")) o.max_iters = get_as<int>(doc, "max_iters", where);
  if (doc.contains("tol_rel_change")) o.tol_rel_change = get_as<double>(doc, "tol_rel_change", where);
  if (doc.contains("tol_feasibility") && !doc.at("tol_feasibility").is_null())
    o.tol_feasibility = get_as<double>(doc, "tol_feasibility", where);
  if (doc.contains("step_scale")) o.step_scale = get_as<double>(doc, "step_scale", where);
  if (doc.contains("primal_dual_ratio"))
    o.primal_dual_ratio = get_as<double>(doc, "primal_dual_ratio", where);
  if (doc.contains("opnorm_iters")) o.opnorm_iters = get_as<int>(doc, "opnorm_iters", where);
  if (doc.contains("seed")) o.seed = get_as<std::uint64_t>(doc, "seed", where);
  if (doc.contains("history_stride")) o.history_stride = get_as<int>(doc, "history_stride", where);
  o.validate();
  return o;
}

json to_json(const SolveOptions& o) {
  json doc{{"max_iters", o.max_iters},
           {"tol_rel_change", o.tol_rel_change},
           {"step_scale", o.step_scale},
           {"primal_dual_ratio", o.primal_dual_ratio},
           {"opnorm_iters", o.opnorm_iters},
           {"seed", o.seed},
           {"history_stride", o.history_stride}};
  doc["tol_feasibility"] = o.tol_feasibility ? json(*o.tol_feasibility) : json(nullptr);
  return doc;
}

ExperimentConfig parse_experiment_config(const json& doc) {
  static const std::set<std::string> keys{"L",          "K",           "N",       "b_type",
                                          "omega",      "nu",          "tau_grid", "noise_mode",
                                          "n_seeds",    "first_seed",  "master_seed",
                                          "solver",     "output",      "threads"};
  const std::string where = "experiment config";
  reject_unknown(doc, keys, where);
  ExperimentConfig c;
  if (doc.contains("L")) c.L = get_as<Eigen::Index>(doc, "L", where);
  if (doc.contains("K")) c.K = get_as<Eigen::Index>(doc, "K", where);
  if (doc.contains("N")) c.N = get_as<Eigen::Index>(doc, "N", where);
  if (doc.contains("b_type")) c.b_type = parse_btype(get_as<std::string>(doc, "b_type", where));
  if (doc.contains("omega")) c.omega = get_as<double>(doc, "omega", where);
  if (doc.contains("nu")) c.nu = get_as<double>(doc, "nu", where);
  if (doc.contains("tau_grid")) c.tau_grid = get_as<std::vector<double>>(doc, "tau_grid", where);
  if (doc.contains("noise_mode"))
    c.noise_mode = parse_noise_mode(get_as<std::string>(doc, "noise_mode", where));
  if (doc.contains("n_seeds")) c.n_seeds = get_as<int>(doc, "n_seeds", where);
  if (doc.contains("first_seed")) c.first_seed = get_as<std::uint64_t>(doc, "first_seed", where);
  if (doc.contains("master_seed")) c.master_seed = get_as<std::uint64_t>(doc, "master_seed", where);
  if (doc.contains("solver")) c.solver = parse_solve_options(doc.at("solver"));
  if (doc.contains("output")) c.output = get_as<std::string>(doc, "output", where);
  if (doc.contains("threads")) c.threads = get_as<int>(doc, "threads", where);
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  return {{"L", c.L},
          {"K", c.K},
          {"N", c.N},
          {"b_type", to_string(c.b_type)},
          {"omega", c.omega},
          {"nu", c.nu},
          {"tau_grid", c.tau_grid},
          {"noise_mode", to_string(c.noise_mode)},
          {"n_seeds", c.n_seeds},
          {"first_seed", c.first_seed},
          {"master_seed", c.master_seed},
          {"solver", to_json(c.solver)},
          {"output", c.output},
          {"threads", c.threads}};
}

namespace {

Vector random_orthogonal(const Vector& v, Rng& rng) {
  Vector g = rng.complex_gaussian(v.size());
  g -= v * v.dot(g);
  const double n = g.norm();
  if (n < 1e-12) return first_orthogonal(v);
  return g / n;
}

Vector unit_or_zero(const Vector& v) {
  const double n = v.norm();
  return n > 0.0 ? Vector(v / n) : Vector(Vector::Zero(v.size()));
}

// Left singular direction of A for its largest singular value.
Vector top_left_direction(const SubspaceModel& model, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X = rng.complex_gaussian_matrix(model.K(), model.N());
  X /= X.norm();
  for (int it = 0; it < 50; ++it) {
    Matrix next = apply_A_adjoint(model, apply_A(model, X));
    const double n = next.norm();
    if (n == 0.0) break;
    X = next / n;
  }
  return unit_or_zero(apply_A(model, X));
}

}  // namespace

std::vector<Vector> greedy_dictionary(const SubspaceModel& model, const GroundTruth& truth,
                                      std::uint64_t seed) {
  Rng rng(seed);
  const Vector m_perp = random_orthogonal(truth.m0, rng);
  const Vector h_perp = random_orthogonal(truth.h0, rng);
  std::vector<Vector> dict;
  dict.push_back(unit_or_zero(apply_A_rank1(model, truth.h0, m_perp)));
  dict.push_back(unit_or_zero(apply_A_rank1(model, h_perp, truth.m0)));
  dict.push_back(unit_or_zero(apply_A_rank1(model, h_perp, m_perp)));
  dict.push_back(unit_or_zero(-apply_A_rank1(model, truth.h0, truth.m0)));
  dict.push_back(top_left_direction(model, derive_seed(seed, 1)));
  dict.push_back(rng.unit_vector(model.L()));
  return dict;
}

Vector make_noise(const SubspaceModel& model, const GroundTruth& truth, double tau, NoiseMode mode,
                  std::uint64_t seed, const SolveOptions& pilot_base) {
  require(tau >= 0.0 && std::isfinite(tau), "tau must be nonnegative");
  require(truth.h0.size() == model.K() && truth.m0.size() == model.N(),
          "ground truth does not match the model");
  const Eigen::Index L = model.L();
  if (tau == 0.0) return Vector::Zero(L);

  Vector direction;
  switch (mode) {
    case NoiseMode::Random: {
      Rng rng(seed);
      direction = rng.unit_vector(L);
      break;
    }
    case NoiseMode::TangentAligned: {
      Rng rng(seed);
      direction = unit_or_zero(apply_A_rank1(model, truth.h0, random_orthogonal(truth.m0, rng)));
      break;
    }
    case NoiseMode::Cancel:
      direction = unit_or_zero(-apply_A_rank1(model, truth.h0, truth.m0));
      break;
    case NoiseMode::GreedyAdversarial: {
      SolveOptions pilot = pilot_base;
      pilot.max_iters = std::min(pilot.max_iters, 2000);
      pilot.tol_rel_change = std::max(pilot.tol_rel_change, 1e-5);
      const Vector clean = apply_A(model, truth.X0());
      const Matrix X0 = truth.X0();
      double worst = -1.0;
      for (const Vector& cand : greedy_dictionary(model, truth, seed)) {
        if (cand.norm() == 0.0) continue;
        const Vector y = clean + tau * cand;
        const double err = (solve_constrained(model, y, tau, pilot).X_star - X0).norm();
        if (err > worst) {
          worst = err;
          direction = cand;
        }
      }
      break;
    }
  }
  if (direction.size() == 0 || direction.norm() == 0.0) {
    throw SolveFailure("noise direction degenerated to zero");
  }
  return tau * direction / direction.norm();
}

double noise_bound(double omega, Eigen::Index L, double nu, double tau) {
  require(omega >= 1.0 && L >= 1, "need omega >= 1 and L >= 1");
  require(nu >= 0.0 && tau >= 0.0, "nu and tau must be nonnegative");
  const double lg = std::log(omega * static_cast<double>(L));
  return std::max(std::pow(lg, 0.25) * std::sqrt(nu * tau), std::sqrt(lg) * tau);
}

SweepRecord run_cell(const ExperimentConfig& config, std::uint64_t seed, double tau_fraction) {
  const SubspaceModel model = build_model(config.L, config.K, config.N, config.b_type,
                                          derive_seed(config.master_seed, seed, 0));
  Rng truth_rng(derive_seed(config.master_seed, seed, 1));
  const GroundTruth truth = GroundTruth::random(config.K, config.N, config.nu, truth_rng);
  const double tau = tau_fraction * config.nu;
  const Vector e = make_noise(model, truth, tau, config.noise_mode,
                              derive_seed(config.master_seed, seed, 2), config.solver);
  const MeasurementSet ms = measure(model, truth, e, tau);
  const SolveReport rep = tau > 0.0 ? solve_constrained(model, ms.y, tau, config.solver)
                                    : solve_noiseless(model, ms.y, config.solver);

  SweepRecord r;
  r.seed = seed;
  r.L = config.L;
  r.K = config.K;
  r.N = config.N;
  r.b_type = config.b_type;
  r.omega = config.omega;
  r.noise_mode = config.noise_mode;
  r.tau = tau;
  r.nu = config.nu;
  const Matrix diff = rep.X_star - truth.X0();
  r.error = diff.norm();
  r.bound = noise_bound(config.omega, config.L, config.nu, tau);
  if (r.error > 0.0) {
    const DescentDecomposition d = decompose_descent(TangentSpace(truth), diff / r.error);
    r.beta = d.beta;
    r.gamma = d.gamma;
    r.eta = d.eta;
    r.m_nuclear = d.m_nuclear();
  }
  r.objective = rep.objective;
  r.feasibility_gap = rep.feasibility_gap;
  r.iterations = rep.iterations;
  r.converged = rep.converged;
  return r;
}

std::vector<SweepRecord> sweep_tau(const ExperimentConfig& config) {
  config.validate();
  const auto n_tau = static_cast<long>(config.tau_grid.size());
  const long cells = static_cast<long>(config.n_seeds) * n_tau;
  std::vector<SweepRecord> records(static_cast<std::size_t>(cells));
  std::vector<std::string> failures(static_cast<std::size_t>(cells));
  const int threads = config.threads > 0 ? config.threads : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long cell = 0; cell < cells; ++cell) {
    const std::uint64_t seed = config.first_seed + static_cast<std::uint64_t>(cell / n_tau);
    const double tau = config.tau_grid[static_cast<std::size_t>(cell % n_tau)];
    try {
      records[static_cast<std::size_t>(cell)] = run_cell(config, seed, tau);
    } catch (const std::exception& err) {
      failures[static_cast<std::size_t>(cell)] = err.what();
    }
  }
  for (long cell = 0; cell < cells; ++cell) {
    if (!failures[static_cast<std::size_t>(cell)].empty()) {
      throw std::runtime_error("sweep cell " + std::to_string(cell) +
                               " failed: " + failures[static_cast<std::size_t>(cell)]);
    }
  }
  return records;
}

double median(std::vector<double> values) {
  require(!values.empty(), "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<std::pair<double, double>> median_error_by_tau(const std::vector<SweepRecord>& records) {
  std::map<double, std::vector<double>> by_tau;
  for (const auto& r : records) by_tau[r.tau].push_back(r.error);
  std::vector<std::pair<double, double>> out;
  for (auto& [tau, errs] : by_tau) out.emplace_back(tau, median(errs));
  return out;
}

double fit_slope(const std::vector<SweepRecord>& records, double tau_min, double tau_max) {
  std::vector<double> xs, ys;
  for (const auto& [tau, med] : median_error_by_tau(records)) {
    if (tau < tau_min || tau > tau_max) continue;
    require(tau > 0.0 && med > 0.0, "slope fit needs positive tau and median error");
    xs.push_back(std::log(tau));
    ys.push_back(std::log(med));
  }
  require(xs.size() >= 3, "slope fit needs at least 3 distinct tau values in range");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

int count_inversions(const std::vector<SweepRecord>& records) {
  const auto meds = median_error_by_tau(records);
  int inversions = 0;
  for (std::size_t i = 1; i < meds.size(); ++i) {
    if (meds[i].second < meds[i - 1].second) ++inversions;
  }
  return inversions;
}

namespace {

bool in_bound_regime(const SweepRecord& r) { return r.tau > 0.0 && r.tau <= r.nu; }

}  // namespace

double calibrate_constant(const std::vector<SweepRecord>& records) {
  double c = 0.0;
  bool any = false;
  for (const auto& r : records) {
    if (!in_bound_regime(r)) continue;
    c = std::max(c, r.error / r.bound);
    any = true;
  }
  require(any, "no records with 0 < tau <= nu to calibrate on");
  return c;
}

double bound_coverage(const std::vector<SweepRecord>& records, double c) {
  std::size_t total = 0, covered = 0;
  for (const auto& r : records) {
    if (!in_bound_regime(r)) continue;
    ++total;
    if (r.error <= c * r.bound) ++covered;
  }
  require(total > 0, "no records with 0 < tau <= nu");
  return static_cast<double>(covered) / static_cast<double>(total);
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string csv_header() {
  return "seed,L,K,N,b_type,omega,noise_mode,tau,nu,error,bound,beta,gamma,eta,m_nuclear,"
         "objective,feasibility_gap,iterations,converged";
}

std::string to_csv_row(const SweepRecord& r) {
  std::string row;
  row += std::to_string(r.seed) + ',' + std::to_string(r.L) + ',' + std::to_string(r.K) + ',' +
         std::to_string(r.N) + ',' + to_string(r.b_type) + ',' + num(r.omega) + ',' +
         to_string(r.noise_mode) + ',' + num(r.tau) + ',' + num(r.nu) + ',' + num(r.error) + ',' +
         num(r.bound) + ',' + num(r.beta) + ',' + num(r.gamma) + ',' + num(r.eta) + ',' +
         num(r.m_nuclear) + ',' + num(r.objective) + ',' + num(r.feasibility_gap) + ',' +
         std::to_string(r.iterations) + ',' + (r.converged ? "true" : "false");
  return row;
}

std::string to_csv(const std::vector<SweepRecord>& records) {
  std::string out = csv_header() + '\n';
  for (const auto& r : records) out += to_csv_row(r) + '\n';
  return out;
}

nlohmann::json summarize(const std::vector<SweepRecord>& records) {
  require(!records.empty(), "cannot summarize an empty sweep");
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::vector<SweepRecord>> groups;
  for (const auto& r : records) groups[{to_string(r.b_type), to_string(r.noise_mode)}].push_back(r);

  nlohmann::json out{{"format", "deconvo-sweep-summary/1"}, {"n_records", records.size()}};
  std::size_t flagged = 0;
  for (const auto& r : records) flagged += r.converged ? 0 : 1;
  out["n_flagged"] = flagged;

  nlohmann::json group_list = nlohmann::json::array();
  for (const auto& [key, recs] : groups) {
    nlohmann::json g{{"b_type", key.first}, {"noise_mode", key.second}};
    nlohmann::json per_tau = nlohmann::json::array();
    std::map<double, std::vector<const SweepRecord*>> by_tau;
    for (const auto& r : recs) by_tau[r.tau].push_back(&r);
    std::vector<double> ratios;
    for (const auto& [tau, rs] : by_tau) {
      std::vector<double> errs, bounds, rat;
      for (const auto* r : rs) {
        errs.push_back(r->error);
        bounds.push_back(r->bound);
        if (r->bound > 0.0) rat.push_back(r->error / r->bound);
      }
      nlohmann::json entry{{"tau", tau},
                           {"n", rs.size()},
                           {"median_error", median(errs)},
                           {"median_bound", median(bounds)}};
      if (!rat.empty()) {
        entry["median_ratio"] = median(rat);
        entry["max_ratio"] = *std::max_element(rat.begin(), rat.end());
        ratios.insert(ratios.end(), rat.begin(), rat.end());
      }
      per_tau.push_back(entry);
    }
    g["per_tau"] = per_tau;
    const auto positive = std::count_if(by_tau.begin(), by_tau.end(),
                                        [](const auto& kv) { return kv.first > 0.0; });
    try {
      g["slope"] = positive >= 3 ? nlohmann::json(fit_slope(recs, std::numeric_limits<double>::min(), 1e300)) : nlohmann::json();
    } catch (const InvalidInput&) {
      g["slope"] = nullptr;
    }
    g["inversions"] = count_inversions(recs);
    if (!ratios.empty()) {
      g["bound_ratio"] = {{"min", *std::min_element(ratios.begin(), ratios.end())},
                          {"median", median(ratios)},
                          {"max", *std::max_element(ratios.begin(), ratios.end())}};
    }
    group_list.push_back(g);
  }
  out["groups"] = group_list;
  return out;
}

std::string summary_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".summary.json");
  return p.string();
}

void emit_report(const std::vector<SweepRecord>& records, const std::string& csv_path) {
  require(!records.empty(), "no records to write");
  const auto write = [](const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    out.close();
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
  };
  write(csv_path, to_csv(records));
  write(summary_path(csv_path), summarize(records).dump(2) + '\n');
}

}  // namespace deconvo
