#ifndef SGGN_EXPERIMENT_HPP
#define SGGN_EXPERIMENT_HPP

// Experiment configuration (JSON), the built-in presets, and the driver that
// writes histories, parameters, hyperplane snapshots and a manifest.

#include <sggn/errors.hpp>
#include <sggn/linalg.hpp>
#include <sggn/lm.hpp>
#include <sggn/model.hpp>
#include <sggn/optimizer.hpp>
#include <sggn/problem.hpp>
#include <sggn/version.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace sggn {

enum class OptimizerKind { sggn, lm };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::sggn ? "sggn" : "lm"; }

struct OutputConfig {
  std::string dir = "out";
  int snapshot_every = 10;
};

struct ExperimentConfig {
  std::string name = "custom";
  ProblemSpec problem;
  int n = 1;
  InitStyle init = InitStyle::uniform_1d;
  std::optional<NetworkParams> init_params;  ///< for init = explicit
  OptimizerKind optimizer = OptimizerKind::sggn;
  SgGNConfig sggn;
  LMConfig lm;  ///< lm.scope is overridden by each entry of lm_scopes
  std::vector<LMScope> lm_scopes = {LMScope::nonlinear_only};
  OutputConfig output;
};

inline void validate(const ExperimentConfig& cfg) {
  validate(cfg.problem);
  if (cfg.n < 1) throw ConfigError("n must be >= 1");
  const int d = cfg.problem.domain.dim();
  if (cfg.init == InitStyle::uniform_1d && d != 1)
    throw ConfigError("init uniform_1d requires a one-dimensional domain");
  if ((cfg.init == InitStyle::horizontal_2d || cfg.init == InitStyle::vertical_2d) && d != 2)
    throw ConfigError(std::string("init ") + to_string(cfg.init) + " requires a two-dimensional domain");
  if (cfg.init == InitStyle::explicit_params) {
    if (!cfg.init_params) throw ConfigError("init explicit requires init_params");
    if (static_cast<int>(cfg.init_params->width()) != cfg.n || cfg.init_params->d != d)
      throw ConfigError("init_params do not match n or the domain dimension");
  }
  if (const auto* g = std::get_if<GridSampling>(&cfg.problem.sampling)) {
    if (cfg.init != InitStyle::explicit_params) {
      const int axis = cfg.init == InitStyle::horizontal_2d ? 1 : 0;
      const double spacing =
          (cfg.problem.domain.upper[axis] - cfg.problem.domain.lower[axis]) / (cfg.n + 1);
      if (spacing < g->h)
        throw ConfigError("n = " + std::to_string(cfg.n) +
                          " puts initial hyperplanes closer than sampling.h");
    }
  }
  if (cfg.output.dir.empty()) throw ConfigError("output.dir must not be empty");
  if (cfg.output.snapshot_every < 1) throw ConfigError("output.snapshot_every must be >= 1");
  if (cfg.optimizer == OptimizerKind::sggn) {
    validate(cfg.sggn);
  } else {
    validate(cfg.lm);
    if (cfg.lm_scopes.empty()) throw ConfigError("lm.scopes must not be empty");
    std::set<LMScope> seen(cfg.lm_scopes.begin(), cfg.lm_scopes.end());
    if (seen.size() != cfg.lm_scopes.size()) throw ConfigError("lm.scopes lists a scope twice");
  }
}

// --- JSON ------------------------------------------------------------------

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + "." + key + " is required");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

template <class T>
T get_field(const nlohmann::json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  return get_field<T>(j, key, where);
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace detail

/// Parses an experiment document. Relative data paths resolve against base_dir.
inline ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir = {}) {
  using detail::get_field;
  detail::check_keys(j, "config",
                     {"name", "domain", "target", "mu", "sampling", "n", "init", "init_params",
                      "optimizer", "sggn", "lm", "output"});
  ExperimentConfig cfg;
  cfg.name = get_field<std::string>(j, "name", "config", cfg.name);

  const auto& jd = j.contains("domain") ? j.at("domain") : throw ConfigError("domain is required");
  detail::check_keys(jd, "domain", {"lower", "upper"});
  cfg.problem.domain.lower = detail::to_vector(get_field<std::vector<double>>(jd, "lower", "domain"));
  cfg.problem.domain.upper = detail::to_vector(get_field<std::vector<double>>(jd, "upper", "domain"));
  validate(cfg.problem.domain);

  const auto& jt = j.contains("target") ? j.at("target") : throw ConfigError("target is required");
  detail::check_keys(jt, "target", {"tag", "params"});
  cfg.problem.target = builtin_target(get_field<std::string>(jt, "tag", "target"),
                                      jt.contains("params") ? jt.at("params") : nlohmann::json{});
  cfg.problem.mu = get_field<double>(j, "mu", "config", 1.0);

  const auto& js = j.contains("sampling") ? j.at("sampling") : throw ConfigError("sampling is required");
  detail::check_keys(js, "sampling", {"h", "data_path"});
  if (js.contains("h") == js.contains("data_path"))
    throw ConfigError("sampling needs exactly one of h or data_path");
  if (js.contains("h")) {
    cfg.problem.sampling = GridSampling{get_field<double>(js, "h", "sampling")};
  } else {
    std::filesystem::path p = get_field<std::string>(js, "data_path", "sampling");
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    cfg.problem.sampling = DataSampling{p.string()};
  }

  cfg.n = get_field<int>(j, "n", "config");
  cfg.init = init_style_from_string(get_field<std::string>(j, "init", "config", "uniform_1d"));
  if (j.contains("init_params")) cfg.init_params = network_from_json(j.at("init_params"));

  const auto opt = get_field<std::string>(j, "optimizer", "config", "sggn");
  if (opt == "sggn") cfg.optimizer = OptimizerKind::sggn;
  else if (opt == "lm") cfg.optimizer = OptimizerKind::lm;
  else throw ConfigError("optimizer must be sggn or lm, got '" + opt + "'");

  if (j.contains("sggn")) {
    const auto& g = j.at("sggn");
    detail::check_keys(g, "sggn",
                       {"max_iters", "eps_c", "gamma_max", "max_expansions", "line_search_tol",
                        "mass_tol", "gn_tol", "stop_loss", "renormalize_each_iter",
                        "freeze_kinked_on_stall", "kink_tol", "stall_rtol"});
    auto& s = cfg.sggn;
    s.max_iters = get_field<int>(g, "max_iters", "sggn", s.max_iters);
    s.eps_c = get_field<double>(g, "eps_c", "sggn", s.eps_c);
    s.line_search.gamma_max = get_field<double>(g, "gamma_max", "sggn", s.line_search.gamma_max);
    s.line_search.max_expansions =
        get_field<int>(g, "max_expansions", "sggn", s.line_search.max_expansions);
    s.line_search.rel_tol = get_field<double>(g, "line_search_tol", "sggn", s.line_search.rel_tol);
    s.mass_tol = get_field<double>(g, "mass_tol", "sggn", s.mass_tol);
    s.gn_tol = get_field<double>(g, "gn_tol", "sggn", s.gn_tol);
    if (g.contains("stop_loss") && !g.at("stop_loss").is_null())
      s.stop_loss = get_field<double>(g, "stop_loss", "sggn");
    s.renormalize_each_iter =
        get_field<bool>(g, "renormalize_each_iter", "sggn", s.renormalize_each_iter);
    s.freeze_kinked_on_stall =
        get_field<bool>(g, "freeze_kinked_on_stall", "sggn", s.freeze_kinked_on_stall);
    s.kink_tol = get_field<double>(g, "kink_tol", "sggn", s.kink_tol);
    s.stall_rtol = get_field<double>(g, "stall_rtol", "sggn", s.stall_rtol);
  }
  if (j.contains("lm")) {
    const auto& l = j.at("lm");
    detail::check_keys(l, "lm",
                       {"max_iters", "lambda0", "increase", "decrease", "max_adjust", "lambda_max",
                        "mass_tol", "scopes"});
    auto& m = cfg.lm;
    m.max_iters = get_field<int>(l, "max_iters", "lm", m.max_iters);
    m.lambda0 = get_field<double>(l, "lambda0", "lm", m.lambda0);
    m.increase = get_field<double>(l, "increase", "lm", m.increase);
    m.decrease = get_field<double>(l, "decrease", "lm", m.decrease);
    m.max_adjust = get_field<int>(l, "max_adjust", "lm", m.max_adjust);
    m.lambda_max = get_field<double>(l, "lambda_max", "lm", m.lambda_max);
    m.mass_tol = get_field<double>(l, "mass_tol", "lm", m.mass_tol);
    if (l.contains("scopes")) {
      cfg.lm_scopes.clear();
      for (const auto& s : get_field<std::vector<std::string>>(l, "scopes", "lm"))
        cfg.lm_scopes.push_back(lm_scope_from_string(s));
    }
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::check_keys(o, "output", {"dir", "snapshot_every"});
    cfg.output.dir = get_field<std::string>(o, "dir", "output", cfg.output.dir);
    cfg.output.snapshot_every = get_field<int>(o, "snapshot_every", "output", cfg.output.snapshot_every);
  }
  validate(cfg);
  return cfg;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return experiment_from_json(j, std::filesystem::path(path).parent_path());
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["name"] = cfg.name;
  j["domain"] = {{"lower", detail::to_std(cfg.problem.domain.lower)},
                 {"upper", detail::to_std(cfg.problem.domain.upper)}};
  j["target"] = to_json(cfg.problem.target);
  j["mu"] = cfg.problem.mu;
  if (const auto* g = std::get_if<GridSampling>(&cfg.problem.sampling))
    j["sampling"] = {{"h", g->h}};
  else
    j["sampling"] = {{"data_path", std::get<DataSampling>(cfg.problem.sampling).path}};
  j["n"] = cfg.n;
  j["init"] = to_string(cfg.init);
  if (cfg.init_params) j["init_params"] = to_json(*cfg.init_params);
  j["optimizer"] = to_string(cfg.optimizer);
  if (cfg.optimizer == OptimizerKind::sggn) {
    const auto& s = cfg.sggn;
    nlohmann::ordered_json g;
    g["max_iters"] = s.max_iters;
    g["eps_c"] = s.eps_c;
    g["gamma_max"] = s.line_search.gamma_max;
    g["max_expansions"] = s.line_search.max_expansions;
    g["line_search_tol"] = s.line_search.rel_tol;
    g["mass_tol"] = s.mass_tol;
    g["gn_tol"] = s.gn_tol;
    g["stop_loss"] = s.stop_loss ? nlohmann::ordered_json(*s.stop_loss) : nlohmann::ordered_json();
    g["renormalize_each_iter"] = s.renormalize_each_iter;
    g["freeze_kinked_on_stall"] = s.freeze_kinked_on_stall;
    g["kink_tol"] = s.kink_tol;
    g["stall_rtol"] = s.stall_rtol;
    j["sggn"] = std::move(g);
  } else {
    const auto& m = cfg.lm;
    nlohmann::ordered_json l;
    l["max_iters"] = m.max_iters;
    l["lambda0"] = m.lambda0;
    l["increase"] = m.increase;
    l["decrease"] = m.decrease;
    l["max_adjust"] = m.max_adjust;
    l["lambda_max"] = m.lambda_max;
    l["mass_tol"] = m.mass_tol;
    auto scopes = nlohmann::ordered_json::array();
    for (auto s : cfg.lm_scopes) scopes.push_back(to_string(s));
    l["scopes"] = std::move(scopes);
    j["lm"] = std::move(l);
  }
  j["output"] = {{"dir", cfg.output.dir}, {"snapshot_every", cfg.output.snapshot_every}};
  return j;
}

// --- presets ---------------------------------------------------------------

namespace detail {
inline ExperimentConfig grid_problem(const std::string& name, Domain dom, const std::string& tag,
                                     int n, InitStyle init, int iters) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.problem.domain = std::move(dom);
  cfg.problem.target = builtin_target(tag);
  cfg.problem.sampling = GridSampling{0.01};
  cfg.n = n;
  cfg.init = init;
  cfg.sggn.max_iters = iters;
  cfg.lm.max_iters = iters;
  cfg.output.dir = "out/" + name;
  return cfg;
}
}  // namespace detail

/// The six named experiments, all on a midpoint grid with h = 0.01.
inline std::vector<ExperimentConfig> presets() {
  using detail::grid_problem;
  const Domain square = Domain::box({-1.0, -1.0}, {1.0, 1.0});
  std::vector<ExperimentConfig> out;
  out.push_back(grid_problem("step1d", Domain::interval(0.0, 10.0), "step1d", 30,
                             InitStyle::uniform_1d, 825));
  out.push_back(grid_problem("delta1d", Domain::interval(-1.5, 1.5), "delta1d", 15,
                             InitStyle::uniform_1d, 334));
  out.push_back(grid_problem("step2d", square, "step2d", 4, InitStyle::horizontal_2d, 142));
  out.push_back(grid_problem("synthetic2d_h", square, "synthetic2d", 5, InitStyle::horizontal_2d, 207));
  out.push_back(grid_problem("synthetic2d_v", square, "synthetic2d", 5, InitStyle::vertical_2d, 105));
  auto lm = grid_problem("lm_step1d", Domain::interval(0.0, 10.0), "step1d", 30,
                         InitStyle::uniform_1d, 825);
  lm.optimizer = OptimizerKind::lm;
  lm.lm_scopes = {LMScope::nonlinear_only, LMScope::full};
  out.push_back(std::move(lm));
  return out;
}

inline ExperimentConfig preset(const std::string& name) {
  for (auto& p : presets())
    if (p.name == name) return p;
  std::string names;
  for (const auto& p : presets()) names += (names.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown preset '" + name + "' (available: " + names + ")");
}

// --- outputs ---------------------------------------------------------------

inline void write_history_csv(const std::string& path, const std::vector<IterationRecord>& hist) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "iter,loss,gamma,active_count,mass_rank,gn_rank\n" << std::setprecision(17);
  for (const auto& r : hist)
    out << r.k << ',' << r.loss << ',' << r.gamma << ',' << r.active_count << ',' << r.mass_rank
        << ',' << r.gn_rank << '\n';
}

inline void write_params_json(const std::string& path, const NetworkParams& p) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << to_json(p).dump(2) << '\n';
}

/// Hyperplane snapshots, one row per neuron and snapshot. In one dimension
/// the breakpoint -b/w is added as the last column.
class HyperplaneWriter {
public:
  HyperplaneWriter(const std::string& path, const Domain& dom) : out_(path), dom_(dom) {
    if (!out_) throw ConfigError("cannot write '" + path + "'");
    out_ << "iter,neuron,b";
    for (int k = 1; k <= dom.dim(); ++k) out_ << ",w" << k;
    out_ << ",c,intersects_domain";
    if (dom.dim() == 1) out_ << ",breakpoint";
    out_ << '\n' << std::setprecision(17);
  }

  void write(int iter, const NetworkParams& p) {
    if (iter == last_) return;
    last_ = iter;
    for (const auto& h : hyperplanes(p, dom_)) {
      out_ << iter << ',' << h.index << ',' << h.bias;
      for (Eigen::Index k = 0; k < h.weight.size(); ++k) out_ << ',' << h.weight[k];
      out_ << ',' << p.c[static_cast<Eigen::Index>(h.index)] << ',' << (h.intersects_domain ? 1 : 0);
      if (dom_.dim() == 1) out_ << ',' << -h.bias / h.weight[0];
      out_ << '\n';
    }
  }

private:
  std::ofstream out_;
  Domain dom_;
  int last_ = -1;
};

struct RunSummary {
  std::string label;  ///< "sggn" or "lm_<scope>"
  std::string history_path;
  std::string params_path;
  std::string hyperplanes_path;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  double best_loss = 0.0;
  int best_iteration = 0;
  std::optional<std::string> diagnostic;
};

struct RunManifest {
  nlohmann::ordered_json config;
  std::string version = kVersion;
  double wall_clock_seconds = 0.0;
  std::vector<RunSummary> runs;
  std::string manifest_path;
};

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["config"] = m.config;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  auto runs = nlohmann::ordered_json::array();
  for (const auto& r : m.runs) {
    nlohmann::ordered_json jr;
    jr["label"] = r.label;
    jr["history"] = r.history_path;
    jr["params"] = r.params_path;
    jr["hyperplanes"] = r.hyperplanes_path;
    jr["initial_loss"] = r.initial_loss;
    jr["final_loss"] = r.final_loss;
    jr["iterations"] = r.iterations;
    jr["best_loss"] = r.best_loss;
    jr["best_iteration"] = r.best_iteration;
    jr["diagnostic"] = r.diagnostic ? nlohmann::ordered_json(*r.diagnostic) : nlohmann::ordered_json();
    runs.push_back(std::move(jr));
  }
  j["runs"] = std::move(runs);
  return j;
}

namespace detail {
inline void summarize(RunSummary& s, double initial, const std::vector<IterationRecord>& hist) {
  s.initial_loss = initial;
  s.final_loss = hist.empty() ? initial : hist.back().loss;
  s.iterations = static_cast<int>(hist.size());
  s.best_loss = initial;
  s.best_iteration = 0;
  for (const auto& r : hist) {
    if (r.loss < s.best_loss) {
      s.best_loss = r.loss;
      s.best_iteration = r.k;
    }
  }
}
}  // namespace detail

/// Progress hook: (run label, iteration record).
using ProgressCallback = std::function<void(const std::string&, const IterationRecord&)>;

/// Runs the configured optimizer(s) and writes every artifact under
/// cfg.output.dir. File names: history[_lm_<scope>].csv, params[...].json,
/// hyperplanes[...].csv and manifest.json.
inline RunManifest run_experiment(const ExperimentConfig& cfg, const ProgressCallback& progress = {}) {
  validate(cfg);
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = cfg.output.dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + cfg.output.dir + "': " + ec.message());
  const fs::path absdir = fs::absolute(dir);

  const auto pts = build_point_set(cfg.problem);
  std::optional<double> h;
  if (const auto* g = std::get_if<GridSampling>(&cfg.problem.sampling)) h = g->h;
  const double mass_tol = cfg.optimizer == OptimizerKind::sggn ? cfg.sggn.mass_tol : cfg.lm.mass_tol;
  const auto init = initialize(cfg.problem.domain, pts, cfg.n, cfg.init, mass_tol,
                               cfg.init_params ? &*cfg.init_params : nullptr, h);

  RunManifest manifest;
  manifest.config = to_json(cfg);

  auto run_one = [&](const std::string& label, const std::string& suffix, auto&& optimize) {
    RunSummary s;
    s.label = label;
    s.history_path = (absdir / ("history" + suffix + ".csv")).string();
    s.params_path = (absdir / ("params" + suffix + ".json")).string();
    s.hyperplanes_path = (absdir / ("hyperplanes" + suffix + ".csv")).string();
    HyperplaneWriter planes(s.hyperplanes_path, cfg.problem.domain);
    planes.write(0, init);
    auto on_iter = [&](const NetworkParams& p, const IterationRecord& r) {
      if (r.k % cfg.output.snapshot_every == 0) planes.write(r.k, p);
      if (progress) progress(label, r);
    };
    const auto res = optimize(on_iter);
    planes.write(static_cast<int>(res.history.size()), res.params);
    write_history_csv(s.history_path, res.history);
    write_params_json(s.params_path, res.params);
    detail::summarize(s, res.initial_loss, res.history);
    return std::pair{s, res.params};
  };

  if (cfg.optimizer == OptimizerKind::sggn) {
    auto [s, params] = run_one("sggn", "", [&](const IterationCallback& cb) {
      return run_sggn(init, pts, cfg.sggn, cb);
    });
    manifest.runs.push_back(std::move(s));
  } else {
    for (LMScope scope : cfg.lm_scopes) {
      LMConfig lc = cfg.lm;
      lc.scope = scope;
      std::optional<std::string> diag;
      auto [s, params] = run_one(std::string("lm_") + to_string(scope),
                                 std::string("_lm_") + to_string(scope),
                                 [&](const IterationCallback& cb) {
                                   auto r = run_lm(init, pts, lc, cb);
                                   diag = r.diagnostic;
                                   return r;
                                 });
      s.diagnostic = diag;
      manifest.runs.push_back(std::move(s));
    }
  }

  manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.manifest_path = (absdir / "manifest.json").string();
  std::ofstream out(manifest.manifest_path);
  if (!out) throw ConfigError("cannot write '" + manifest.manifest_path + "'");
  out << to_json(manifest).dump(2) << '\n';
  return manifest;
}

/// Writes the conditioning study as CSV and returns the reports.
inline std::vector<ConditionReport> run_condition_sweep(const std::vector<int>& ns,
                                                        const std::string& path,
                                                        const SweepConfig& sc = {}) {
  auto reps = condition_sweep(ns, sc);
  write_condition_csv(path, reps);
  return reps;
}

}  // namespace sggn

#endif  // SGGN_EXPERIMENT_HPP
