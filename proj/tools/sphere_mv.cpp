// Command-line front end: sphere_mv <command> [options].

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sphere_mv/io.hpp"
#include "sphere_mv/kernels.hpp"
#include "sphere_mv/meanfield.hpp"
#include "sphere_mv/parallel.hpp"
#include "sphere_mv/particles.hpp"
#include "sphere_mv/solver.hpp"

namespace {

using namespace sphere_mv;
using io::Json;

constexpr int kValidationExit = 2;
constexpr int kNumericalExit = 3;

// Failure after partial results were written.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::string kernel;
  std::optional<int> n;
  std::optional<double> gamma, gamma_min, gamma_max;
  std::optional<int> gamma_steps;
  std::optional<int> K, M, mode;
  std::optional<std::string> out, format;
  std::optional<long long> seed, particles, steps, sample_every;
  std::optional<double> dt, amplitude, tau, tol, delta;
  std::optional<int> max_iters, degree;
  std::optional<std::string> method, start, snapshot;
};

// Flag value if given, else the config file entry, else the default.
template <class T>
T resolve(const std::optional<T>& flag, const Json& file, const char* key, T fallback) {
  if (flag) return *flag;
  if (file.contains(key)) {
    try {
      return file.at(key).get<T>();
    } catch (const Json::exception&) {
      throw std::invalid_argument(std::string("config: field \"") + key + "\" has the wrong type");
    }
  }
  return fallback;
}

template <class T>
std::optional<T> resolve_opt(const std::optional<T>& flag, const Json& file, const char* key) {
  if (flag) return flag;
  if (file.contains(key)) {
    try {
      return file.at(key).get<T>();
    } catch (const Json::exception&) {
      throw std::invalid_argument(std::string("config: field \"") + key + "\" has the wrong type");
    }
  }
  return std::nullopt;
}

Json parse_kernel_argument(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') {
    try {
      return Json::parse(arg);
    } catch (const Json::parse_error& e) {
      throw std::invalid_argument(std::string("--kernel: invalid inline JSON: ") + e.what());
    }
  }
  return io::read_json(arg);
}

struct Resolved {
  std::string command;
  KernelSpec kernel;
  Json config;  // resolved settings written into every output
  Json file;
  Options opt;
  std::string format;
  std::optional<std::string> out;
  SolverConfig solver;
};

Resolved resolve_common(const std::string& command, const Options& opt) {
  Resolved r;
  r.command = command;
  r.opt = opt;
  r.file = opt.config_path.empty() ? Json::object() : io::read_json(opt.config_path);
  if (!r.file.is_object()) throw std::invalid_argument("config: expected a JSON object");

  Json kj;
  if (!opt.kernel.empty()) {
    kj = parse_kernel_argument(opt.kernel);
  } else if (r.file.contains("kernel")) {
    kj = r.file.at("kernel").is_string() ? parse_kernel_argument(r.file.at("kernel").get<std::string>())
                                         : r.file.at("kernel");
  } else {
    throw std::invalid_argument("a kernel is required (--kernel <file or JSON>)");
  }
  if (!kj.is_object()) throw std::invalid_argument("kernel: expected a JSON object");
  if (auto n = resolve_opt(opt.n, r.file, "n")) kj["n"] = *n;
  r.kernel = io::kernel_from_json(kj);

  r.format = resolve<std::string>(opt.format, r.file, "format", "csv");
  if (r.format != "csv" && r.format != "json") throw std::invalid_argument("--format must be csv or json");
  r.out = resolve_opt(opt.out, r.file, "out");

  r.solver.K = resolve(opt.K, r.file, "K", kDefaultTruncation);
  r.solver.M = resolve(opt.M, r.file, "M", std::max(128, r.solver.K + 2));
  r.solver.tau = resolve(opt.tau, r.file, "tau", r.solver.tau);
  r.solver.tol = resolve(opt.tol, r.file, "tol", r.solver.tol);
  r.solver.max_iters = resolve(opt.max_iters, r.file, "max_iters", r.solver.max_iters);
  r.solver.seed_amplitude = resolve(opt.amplitude, r.file, "amplitude", r.solver.seed_amplitude);
  r.solver.validate();

  r.config["command"] = command;
  r.config["kernel"] = io::kernel_to_json(r.kernel);
  r.config["format"] = r.format;
  return r;
}

void add_solver_config(Resolved& r) {
  r.config["K"] = r.solver.K;
  r.config["M"] = r.solver.M;
  r.config["tau"] = r.solver.tau;
  r.config["tol"] = r.solver.tol;
  r.config["max_iters"] = r.solver.max_iters;
}

double require_gamma(const Resolved& r) {
  const auto g = resolve_opt(r.opt.gamma, r.file, "gamma");
  if (!g) throw std::invalid_argument("--gamma is required");
  if (!(*g > 0.0) || !std::isfinite(*g)) throw std::invalid_argument("--gamma must be positive and finite");
  return *g;
}

// Explicit range, or nullopt when no range flag was given.
std::optional<std::vector<double>> gamma_range(const Resolved& r, int default_steps) {
  const auto lo = resolve_opt(r.opt.gamma_min, r.file, "gamma_min");
  const auto hi = resolve_opt(r.opt.gamma_max, r.file, "gamma_max");
  const auto steps = resolve_opt(r.opt.gamma_steps, r.file, "gamma_steps");
  if (!lo && !hi && !steps) return std::nullopt;
  if (!lo || !hi) throw std::invalid_argument("--gamma-min and --gamma-max must be given together");
  const int count = steps.value_or(default_steps);
  if (!(*lo > 0.0) || !(*hi >= *lo) || !std::isfinite(*hi)) {
    throw std::invalid_argument("gamma range must satisfy 0 < gamma-min <= gamma-max");
  }
  if (count < 1) throw std::invalid_argument("--gamma-steps must be >= 1");
  if (count > 1 && *hi == *lo) throw std::invalid_argument("gamma range is empty but several steps were requested");
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = count == 1 ? *lo : *lo + (*hi - *lo) * i / (count - 1);
  return g;
}

void emit(const Resolved& r, const io::Table& table, const Json& summary, const Json& json_body) {
  std::ostringstream buf;
  if (r.format == "csv") {
    io::write_csv(buf, r.config, table, summary);
  } else {
    Json doc;
    doc["config"] = r.config;
    doc["result"] = json_body;
    buf << doc.dump(2) << '\n';
  }
  if (r.out) {
    std::ofstream f(*r.out, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot open output file " + *r.out);
    f << buf.str();
    if (!f) throw std::runtime_error("failed writing " + *r.out);
  } else {
    std::cout << buf.str();
  }
}

void emit_table(const Resolved& r, const io::Table& table, const Json& summary = Json()) {
  Json body = io::table_json(Json(), table);
  body.erase("config");
  if (!summary.is_null()) body["summary"] = summary;
  emit(r, table, summary, body);
}

// ---------------------------------------------------------------------------

void run_decompose(Resolved& r) {
  add_solver_config(r);
  std::vector<std::string> warnings;
  const auto c = r.kernel.is_custom() ? quadrature_coefficients(r.kernel, r.solver.K)
                                      : closed_form_coefficients(r.kernel, r.solver.K, &warnings);
  Json summary;
  summary["source"] = r.kernel.is_custom() ? "quadrature" : "closed_form";
  const auto st = stability_check(c);
  summary["stable"] = st.stable;
  summary["first_negative"] = st.first_negative;
  if (!warnings.empty()) summary["warnings"] = warnings;
  emit_table(r, io::coefficient_table(c), summary);
}

void run_bifurcations(Resolved& r) {
  add_solver_config(r);
  const auto c = coefficients(r.kernel, r.solver.K);
  const auto set = bifurcation_points(c);
  const auto sharp = gamma_sharp(c);
  Json summary;
  summary["gamma_sharp"] = io::number(sharp.gamma);
  summary["sharp_indices"] = sharp.indices;
  summary["ties"] = set.ties;
  if (const auto go = convexity_threshold(r.kernel)) {
    summary["gamma_convex"] = io::number(*go);
  } else {
    summary["gamma_convex"] = nullptr;
  }
  emit_table(r, io::bifurcation_table(set), summary);
}

void run_spectrum(Resolved& r) {
  add_solver_config(r);
  const auto c = coefficients(r.kernel, r.solver.K);
  std::vector<double> gammas;
  if (auto range = gamma_range(r, 50)) {
    gammas = *range;
    r.config["gammas"] = gammas;
  } else {
    gammas = {require_gamma(r)};
    r.config["gamma"] = gammas[0];
  }
  io::Table all;
  for (double g : gammas) {
    const auto t = io::spectrum_table(linear_spectrum(c, g, r.solver.K));
    all.columns = t.columns;
    all.rows.insert(all.rows.end(), t.rows.begin(), t.rows.end());
  }
  emit_table(r, all);
}

void run_solve(Resolved& r) {
  add_solver_config(r);
  const double gamma = require_gamma(r);
  const int mode = resolve(r.opt.mode, r.file, "mode", 0);
  const double amp = resolve(r.opt.amplitude, r.file, "amplitude", 0.5);
  if (mode < 0 || mode > r.solver.K) throw std::invalid_argument("--mode must lie in [0, K]");
  r.config["gamma"] = gamma;
  r.config["mode"] = mode;
  r.config["amplitude"] = amp;
  const auto c = coefficients(r.kernel, r.solver.K);
  const auto T = make_transform(r.kernel.n, r.solver.M, r.solver.K);
  // Seed rho_bar (1 + a Y_k / |Y_k|_inf); |Y_k| peaks at the poles.
  const ZonalDensity seed = mode == 0 ? ZonalDensity::uniform(T)
                                      : ZonalDensity::perturbed_uniform(
                                            T, {mode}, {amp / std::abs(zonal_harmonic(mode, r.kernel.n, 1.0))});
  const auto fp = gibbs_fixed_point(c, gamma, seed, r.solver);
  const Json summary = io::fixed_point_json(c, fp, gamma);
  emit_table(r, io::density_table(fp.density), summary);
  if (!fp.converged) throw NumericalFailure("fixed point did not converge: residual " + io::format_double(fp.residual));
}

void run_branch(Resolved& r) {
  add_solver_config(r);
  const auto c = coefficients(r.kernel, r.solver.K);
  const auto set = bifurcation_points(c);
  int mode = resolve(r.opt.mode, r.file, "mode", 0);
  if (mode == 0) {
    if (set.points.empty()) throw std::domain_error("no simple bifurcation point to trace");
    mode = set.points.front().k;
  }
  if (mode < 1 || mode > r.solver.K) throw std::invalid_argument("--mode must lie in [1, K]");
  if (!(c[mode] < 0.0)) throw std::invalid_argument("mode " + std::to_string(mode) + " has no bifurcation (W_k >= 0)");
  const double gk = -1.0 / c[mode];
  std::vector<double> gammas;
  if (auto range = gamma_range(r, 20)) {
    gammas = *range;
  } else {
    for (int i = 1; i <= 20; ++i) gammas.push_back(gk * (1.0 + 0.5 * i / 20.0));
  }
  r.config["mode"] = mode;
  r.config["gammas"] = gammas;
  r.config["amplitude"] = r.solver.seed_amplitude;
  const auto b = trace_branch(c, mode, gammas, r.solver);
  Json summary = io::branch_json(b);
  summary.erase("points");
  summary["points_traced"] = b.points.size();
  emit(r, io::branch_table(b), summary, io::branch_json(b));
  if (b.points.size() < gammas.size()) throw NumericalFailure("branch stopped early: " + b.diagnostic);
}

void run_transition(Resolved& r) {
  add_solver_config(r);
  const auto c = coefficients(r.kernel, r.solver.K);
  std::vector<double> grid;
  if (auto range = gamma_range(r, 200)) grid = *range;
  r.config["gammas"] = grid.empty() ? Json("default") : Json(grid);
  const auto rep = find_transition(c, grid, r.solver);
  Json body = io::transition_json(rep);
  io::Table scan{{"gamma", "best_gap", "source"}, {}};
  for (const auto& row : rep.scan) scan.rows.push_back({row.gamma, row.best_gap, row.source});
  Json summary = body;
  summary.erase("scan");
  emit(r, scan, summary, body);
}

void run_simulate(Resolved& r) {
  SimConfig sc;
  sc.gamma = resolve(r.opt.gamma, r.file, "gamma", std::numeric_limits<double>::infinity());
  sc.dt = resolve(r.opt.dt, r.file, "dt", sc.dt);
  sc.steps = resolve(r.opt.steps, r.file, "steps", 1000LL);
  sc.seed = static_cast<std::uint64_t>(resolve(r.opt.seed, r.file, "seed", 0LL));
  sc.degree = resolve(r.opt.degree, r.file, "degree", sc.degree);
  sc.sample_every = resolve(r.opt.sample_every, r.file, "sample_every", std::min(100LL, sc.steps));
  const std::string method = resolve<std::string>(r.opt.method, r.file, "method", "auto");
  if (method == "auto") {
    sc.method = ForceMethod::automatic;
  } else if (method == "pairwise") {
    sc.method = ForceMethod::pairwise;
  } else if (method == "spectral") {
    sc.method = ForceMethod::spectral;
  } else {
    throw std::invalid_argument("--method must be auto, pairwise or spectral");
  }
  const long long particles = resolve(r.opt.particles, r.file, "particles", 1000LL);
  if (particles < 1) throw std::invalid_argument("--particles must be >= 1");
  const std::string start = resolve<std::string>(r.opt.start, r.file, "start", "uniform");
  if (start != "uniform" && start != "polar") throw std::invalid_argument("--start must be uniform or polar");
  if (r.opt.seed && *r.opt.seed < 0) throw std::invalid_argument("--seed must be nonnegative");
  const int mode = resolve(r.opt.mode, r.file, "mode", 2);
  if (mode < 0) throw std::invalid_argument("--mode must be nonnegative");
  sc.degrees = {mode};
  sc.validate();

  r.config["gamma"] = io::number(sc.gamma);
  r.config["dt"] = sc.dt;
  r.config["steps"] = sc.steps;
  r.config["seed"] = sc.seed;
  r.config["particles"] = particles;
  r.config["method"] = method;
  r.config["degree"] = sc.degree;
  r.config["sample_every"] = sc.sample_every;
  r.config["start"] = start;
  r.config["mode"] = mode;

  const int n = r.kernel.n;
  ParticleEnsemble e;
  if (start == "uniform") {
    e = uniform_ensemble(n, static_cast<std::size_t>(particles), sc.seed);
  } else {
    std::vector<double> axis(n, 0.0);
    axis[n - 1] = 1.0;
    e = polar_ensemble(n, static_cast<std::size_t>(particles), axis, sc.seed);
  }
  const auto res = simulate(e, r.kernel, sc);
  if (const auto snap = resolve_opt(r.opt.snapshot, r.file, "snapshot")) {
    std::ofstream f(*snap, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot open snapshot file " + *snap);
    write_snapshot(f, e);
  }
  const Json summary = io::simulation_json(res);
  Json body = summary;
  body["trajectory"] = io::table_json(Json(), io::trajectory_table(res));
  body["trajectory"].erase("config");
  emit(r, io::trajectory_table(res), summary, body);
}

void report_error(const char* kind, const std::string& command, const std::string& message) {
  Json j;
  j["error"] = kind;
  j["command"] = command;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field models on the sphere: spectra, stationary states, transitions and particle simulations."};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;

  app.add_option("--config", opt.config_path, "JSON file with default settings; flags take precedence");
  app.add_option("--kernel", opt.kernel, "Kernel JSON file, or inline JSON");
  app.add_option("--n", opt.n, "Ambient dimension (overrides the kernel file)");
  app.add_option("--gamma", opt.gamma, "Inverse temperature");
  app.add_option("--gamma-min", opt.gamma_min, "Lower end of a gamma range");
  app.add_option("--gamma-max", opt.gamma_max, "Upper end of a gamma range");
  app.add_option("--gamma-steps", opt.gamma_steps, "Points in a gamma range");
  app.add_option("--K", opt.K, "Spectral truncation");
  app.add_option("--M", opt.M, "Quadrature order");
  app.add_option("--mode", opt.mode, "Harmonic degree (seed, branch or order parameter)");
  app.add_option("--amplitude", opt.amplitude, "Seed amplitude");
  app.add_option("--tau", opt.tau, "Picard damping");
  app.add_option("--tol", opt.tol, "Residual tolerance");
  app.add_option("--max-iters", opt.max_iters, "Picard iteration cap");
  app.add_option("--out", opt.out, "Output path (default: stdout)");
  app.add_option("--format", opt.format, "csv or json");
  app.add_option("--seed", opt.seed, "Random seed");
  app.add_option("--particles", opt.particles, "Number of particles");
  app.add_option("--dt", opt.dt, "Time step");
  app.add_option("--steps", opt.steps, "Number of time steps");
  app.add_option("--sample-every", opt.sample_every, "Steps between order-parameter samples");
  app.add_option("--degree", opt.degree, "Polynomial degree of the spectral particle force");
  app.add_option("--method", opt.method, "Particle force: auto, pairwise or spectral");
  app.add_option("--start", opt.start, "Initial ensemble: uniform or polar");
  app.add_option("--snapshot", opt.snapshot, "Write final particle positions (little-endian doubles)");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"decompose", "Gegenbauer coefficients of the kernel"},
      {"bifurcations", "Bifurcation points gamma_k = -1 / W_k"},
      {"spectrum", "Linearized eigenvalues about the uniform state"},
      {"solve", "Stationary density by damped Picard iteration"},
      {"branch", "Continue the branch bifurcating at gamma_k"},
      {"transition", "Locate the phase transition"},
      {"simulate", "Interacting particle simulation"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("validation", "", e.what());
    return kValidationExit;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Resolved r = resolve_common(command, opt);
    if (command == "decompose") {
      run_decompose(r);
    } else if (command == "bifurcations") {
      run_bifurcations(r);
    } else if (command == "spectrum") {
      run_spectrum(r);
    } else if (command == "solve") {
      run_solve(r);
    } else if (command == "branch") {
      run_branch(r);
    } else if (command == "transition") {
      run_transition(r);
    } else {
      run_simulate(r);
    }
  } catch (const NumericalFailure& e) {
    report_error("numerical", command, e.what());
    return kNumericalExit;
  } catch (const std::invalid_argument& e) {
    report_error("validation", command, e.what());
    return kValidationExit;
  } catch (const std::out_of_range& e) {
    report_error("validation", command, e.what());
    return kValidationExit;
  } catch (const std::exception& e) {
    report_error("numerical", command, e.what());
    return kNumericalExit;
  }
  return 0;
}
