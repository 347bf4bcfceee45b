#ifndef SGGN_OPTIMIZER_HPP
#define SGGN_OPTIMIZER_HPP

// Structure-guided Gauss-Newton iteration for shallow ReLU least squares.
//
// Each step
//   (i)   picks the active neurons |c_i| >= eps_c,
//   (ii)  solves the reduced layer system H~ s = G~ by truncated SVD and
//         scales p~ = (D(c~)^{-1} (x) I) s, zero for inactive neurons,
//   (iii) line-searches gamma >= 0 on J(c_hat, r - gamma p) and renormalizes,
//   (iv)  re-solves the mass system A(r) c_hat = f(r) at the new r.
// No shift is ever added to a matrix: singular directions caused by vanishing
// output coefficients are dropped from the system instead.

#include <sggn/assembly.hpp>
#include <sggn/errors.hpp>
#include <sggn/line_search.hpp>
#include <sggn/linalg.hpp>
#include <sggn/model.hpp>
#include <sggn/problem.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace sggn {

struct SgGNConfig {
  int max_iters = 100;
  double eps_c = 1e-8;
  LineSearchOptions line_search;
  double mass_tol = 1e-12;
  double gn_tol = 1e-12;
  std::optional<double> stop_loss;
  bool renormalize_each_iter = true;
  /// On a failed line search, retry once without neurons whose hyperplane
  /// passes through a sample point (see kinked_neurons).
  bool freeze_kinked_on_stall = true;
  double kink_tol = 1e-10;
  double stall_rtol = 1e-10;  ///< decrease below stall_rtol * loss counts as a stall
};

inline void validate(const SgGNConfig& cfg) {
  if (cfg.max_iters < 1) throw ConfigError("sggn.max_iters must be >= 1");
  if (!(cfg.eps_c > 0.0)) throw ConfigError("sggn.eps_c must be > 0");
  if (!(cfg.mass_tol > 0.0 && cfg.mass_tol < 1.0)) throw ConfigError("sggn.mass_tol must lie in (0, 1)");
  if (!(cfg.gn_tol > 0.0 && cfg.gn_tol < 1.0)) throw ConfigError("sggn.gn_tol must lie in (0, 1)");
  if (!(cfg.line_search.gamma_max > 0.0)) throw ConfigError("sggn.gamma_max must be > 0");
  if (!(cfg.line_search.rel_tol > 0.0)) throw ConfigError("sggn.line_search_tol must be > 0");
  if (cfg.line_search.max_expansions < 1) throw ConfigError("sggn.max_expansions must be >= 1");
}

struct IterationRecord {
  int k = 0;
  double loss = 0.0;
  double gamma = 0.0;
  int active_count = 0;
  int mass_rank = 0;
  int gn_rank = 0;
  double mass_residual = 0.0;  ///< ||A c_hat - f|| / max(||f||, 1) after the linear solve
};

enum class InitStyle { uniform_1d, horizontal_2d, vertical_2d, explicit_params };

inline const char* to_string(InitStyle s) {
  switch (s) {
    case InitStyle::uniform_1d: return "uniform_1d";
    case InitStyle::horizontal_2d: return "horizontal_2d";
    case InitStyle::vertical_2d: return "vertical_2d";
    case InitStyle::explicit_params: return "explicit";
  }
  return "?";
}

inline InitStyle init_style_from_string(const std::string& s) {
  if (s == "uniform_1d") return InitStyle::uniform_1d;
  if (s == "horizontal_2d") return InitStyle::horizontal_2d;
  if (s == "vertical_2d") return InitStyle::vertical_2d;
  if (s == "explicit") return InitStyle::explicit_params;
  throw ConfigError("unknown init style '" + s + "'");
}

struct LinearSolveResult {
  NetworkParams params;
  SpdSolveReport report;
  double optimality = 0.0;  ///< ||A c_hat - f|| / max(||f||, 1)
};

/// Truncated SVD solve of A x = f after symmetric Jacobi equilibration
/// S A S y = S f, x = S y with S = diag(a_ii^{-1/2}). Zero diagonal entries
/// (basis functions vanishing on every point) keep a unit scale.
inline SpdSolveReport equilibrated_solve(const Eigen::Ref<const Matrix>& A,
                                         const Eigen::Ref<const Vector>& f, double rel_tol) {
  Vector scale(A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    scale[i] = A(i, i) > 0.0 ? 1.0 / std::sqrt(A(i, i)) : 1.0;
  const Matrix scaled = scale.asDiagonal() * A * scale.asDiagonal();
  SpdSolveReport rep = truncated_svd_solve(scaled, scale.cwiseProduct(f), rel_tol);
  rep.solution = scale.cwiseProduct(rep.solution);
  const double fnorm = f.norm();
  rep.relative_residual = fnorm > 0.0 ? (A * rep.solution - f).norm() / fnorm : 0.0;
  return rep;
}

/// Optimal linear coefficients for fixed hidden parameters.
///
/// When truncation leaves the result with a higher loss than the coefficients
/// already in p, the tolerance is tightened by 1e-2 down to 1e-16 and the
/// lowest-loss solve is kept.
inline LinearSolveResult solve_linear(const NetworkParams& p, const WeightedPointSet& pts,
                                      double mass_tol) {
  const auto [A, f] = assemble_mass(p, pts);
  const double reference = loss(p, pts);
  LinearSolveResult out;
  double best = std::numeric_limits<double>::infinity();
  for (double tol = mass_tol;; tol *= 1e-2) {
    const SpdSolveReport rep = equilibrated_solve(A, f, tol);
    const NetworkParams q = with_linear(p, rep.solution);
    const double value = loss(q, pts);
    if (!(value >= best)) {
      best = value;
      out.report = rep;
      out.params = q;
      out.optimality = (A * rep.solution - f).norm() / std::max(f.norm(), 1.0);
    }
    if (best <= reference || std::isnan(best) || tol * 1e-2 < 1e-16) break;
  }
  return out;
}

/// Hidden parameters whose hyperplanes uniformly partition the domain,
/// followed by the optimal linear solve.
///
/// uniform_1d puts breakpoints at a + k(b-a)/(n+1) with w = +1;
/// horizontal_2d / vertical_2d use the lines x2 = const / x1 = const.
inline NetworkParams initialize(const Domain& dom, const WeightedPointSet& pts, int n,
                                InitStyle style, double mass_tol = 1e-12,
                                const NetworkParams* explicit_params = nullptr,
                                std::optional<double> grid_h = std::nullopt) {
  if (n < 1) throw ConfigError("n must be >= 1");
  validate(dom);
  NetworkParams p;
  p.d = dom.dim();
  p.c = Vector::Zero(n);
  auto place = [&](int axis) {
    const double a = dom.lower[axis];
    const double b = dom.upper[axis];
    const double spacing = (b - a) / (n + 1);
    if (grid_h && spacing < *grid_h)
      throw ConfigError("n = " + std::to_string(n) + " places hyperplanes closer than the mesh size; "
                        "several would share a quadrature cell");
    for (int k = 1; k <= n; ++k) {
      NeuronParams nr;
      nr.weight = Vector::Zero(p.d);
      nr.weight[axis] = 1.0;
      nr.bias = -(a + k * spacing);
      p.neurons.push_back(std::move(nr));
    }
  };
  switch (style) {
    case InitStyle::uniform_1d:
      if (p.d != 1) throw ConfigError("init uniform_1d requires a one-dimensional domain");
      place(0);
      break;
    case InitStyle::horizontal_2d:
      if (p.d != 2) throw ConfigError("init horizontal_2d requires a two-dimensional domain");
      place(1);
      break;
    case InitStyle::vertical_2d:
      if (p.d != 2) throw ConfigError("init vertical_2d requires a two-dimensional domain");
      place(0);
      break;
    case InitStyle::explicit_params:
      if (!explicit_params) throw ConfigError("init explicit requires initial parameters");
      p = *explicit_params;
      validate(p);
      if (static_cast<int>(p.width()) != n || p.d != dom.dim())
        throw ConfigError("explicit initial parameters do not match n or the domain dimension");
      p = normalize(p);
      break;
  }
  return solve_linear(p, pts, mass_tol).params;
}

/// Search direction p with p_i = 0 for inactive neurons, plus solve data.
struct DirectionResult {
  Vector direction;
  ActiveSet active;
  int gn_rank = 0;
};

/// Neurons whose hyperplane passes through a sample point, |w.x + b| <= tol * (|b| + |w|.|x|).
/// The loss is not differentiable in r_i there.
inline std::vector<bool> kinked_neurons(const NetworkParams& p, const WeightedPointSet& pts,
                                        double tol) {
  std::vector<bool> out(p.width(), false);
  for (std::size_t i = 0; i < p.width(); ++i) {
    const auto& nr = p.neurons[i];
    for (Eigen::Index j = 0; j < pts.size() && !out[i]; ++j) {
      const double* x = pts.points.col(j).data();
      double scale = std::abs(nr.bias);
      for (int k = 0; k < p.d; ++k) scale += std::abs(nr.weight[k] * x[k]);
      out[i] = std::abs(nr.preactivation(x)) <= tol * scale;
    }
  }
  return out;
}

inline DirectionResult sggn_direction(const NetworkParams& p, const WeightedPointSet& pts,
                                      const SgGNConfig& cfg,
                                      const std::vector<bool>* frozen = nullptr) {
  DirectionResult out;
  const Eigen::Index s = p.d + 1;
  out.direction = Vector::Zero(static_cast<Eigen::Index>(p.nonlinear_size()));
  out.active = active_set(p.c, cfg.eps_c);
  if (frozen) {
    std::erase_if(out.active.indices, [&](std::size_t i) { return (*frozen)[i]; });
  }
  if (out.active.empty()) return out;
  const Matrix H = assemble_layer_gn(p, pts);
  const Vector G = assemble_scaled_gradient(p, pts);
  const ReducedSystem red = reduce(H, G, p.c, p.d, out.active);
  const SpdSolveReport rep = equilibrated_solve(red.H, red.G, cfg.gn_tol);
  out.gn_rank = rep.numerical_rank;
  for (std::size_t a = 0; a < out.active.size(); ++a) {
    const double ci = red.c[static_cast<Eigen::Index>(a)];
    if (!(std::abs(ci) >= cfg.eps_c)) throw NumericalError("sggn: scaling by an inactive coefficient");
    const auto i = static_cast<Eigen::Index>(out.active.indices[a]);
    out.direction.segment(i * s, s) = rep.solution.segment(static_cast<Eigen::Index>(a) * s, s) / ci;
  }
  return out;
}

struct StepResult {
  NetworkParams params;
  IterationRecord record;
};

inline StepResult sggn_step(const NetworkParams& p, const WeightedPointSet& pts,
                            const SgGNConfig& cfg, int k = 0) {
  try {
    StepResult out;
    out.record.k = k;
    NetworkParams next = p;
    const Vector r = nonlinear_vector(p);
    const double base = loss(p, pts);
    struct Attempt {
      DirectionResult dir;
      LineSearchResult ls;
    };
    auto attempt = [&](DirectionResult dir) {
      Attempt a{std::move(dir), {}};
      a.ls.value = base;
      if (a.dir.active.empty() || a.dir.direction.squaredNorm() == 0.0) return a;
      auto phi = [&](double gamma) {
        return loss(with_nonlinear(p, r - gamma * a.dir.direction), pts);
      };
      a.ls = line_search(phi, cfg.line_search);
      return a;
    };
    Attempt best = attempt(sggn_direction(p, pts, cfg));
    if (cfg.freeze_kinked_on_stall && base - best.ls.value <= cfg.stall_rtol * base) {
      // Negligible decrease along the full direction: retry with the neurons
      // sitting on a sample point held fixed.
      const auto frozen = kinked_neurons(p, pts, cfg.kink_tol);
      if (std::find(frozen.begin(), frozen.end(), true) != frozen.end()) {
        Attempt retry = attempt(sggn_direction(p, pts, cfg, &frozen));
        if (retry.ls.value < best.ls.value) best = std::move(retry);
      }
    }
    out.record.active_count = static_cast<int>(best.dir.active.size());
    out.record.gn_rank = best.dir.gn_rank;
    out.record.gamma = best.ls.gamma;
    if (best.ls.gamma > 0.0) next = with_nonlinear(p, r - best.ls.gamma * best.dir.direction);
    if (cfg.renormalize_each_iter) next = normalize(next);
    const auto lin = solve_linear(next, pts, cfg.mass_tol);
    out.params = lin.params;
    out.record.mass_rank = lin.report.numerical_rank;
    out.record.mass_residual = lin.optimality;
    out.record.loss = loss(out.params, pts);
    if (!std::isfinite(out.record.loss)) throw NumericalError("non-finite loss");
    return out;
  } catch (const NumericalError& e) {
    throw NumericalError("iteration " + std::to_string(k) + ": " + e.what());
  } catch (const DegenerateNeuronError& e) {
    throw NumericalError("iteration " + std::to_string(k) + ": " + e.what());
  }
}

struct RunResult {
  NetworkParams params;
  std::vector<IterationRecord> history;
  double initial_loss = 0.0;
};

using IterationCallback = std::function<void(const NetworkParams&, const IterationRecord&)>;

/// Iterates sggn_step from an initialized network until max_iters, or until an
/// iteration ends at or below stop_loss.
inline RunResult run_sggn(const NetworkParams& init, const WeightedPointSet& pts,
                          const SgGNConfig& cfg, const IterationCallback& on_iter = {}) {
  validate(cfg);
  validate(init);
  RunResult out;
  out.params = init;
  out.initial_loss = loss(init, pts);
  for (int k = 1; k <= cfg.max_iters; ++k) {
    auto step = sggn_step(out.params, pts, cfg, k);
    out.params = std::move(step.params);
    out.history.push_back(step.record);
    if (on_iter) on_iter(out.params, step.record);
    if (cfg.stop_loss && step.record.loss <= *cfg.stop_loss) break;
  }
  return out;
}

/// Initialization plus iteration for a problem specification.
inline RunResult run_sggn(const ProblemSpec& spec, int n, InitStyle style, const SgGNConfig& cfg,
                          const NetworkParams* explicit_params = nullptr,
                          const IterationCallback& on_iter = {}) {
  const auto pts = build_point_set(spec);
  std::optional<double> h;
  if (const auto* g = std::get_if<GridSampling>(&spec.sampling)) h = g->h;
  const auto init = initialize(spec.domain, pts, n, style, cfg.mass_tol, explicit_params, h);
  return run_sggn(init, pts, cfg, on_iter);
}

}  // namespace sggn

#endif  // SGGN_OPTIMIZER_HPP
