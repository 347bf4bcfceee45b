#ifndef SGGN_LM_HPP
#define SGGN_LM_HPP

// Levenberg-Marquardt baseline: theta <- theta - (J^T J + lambda I)^{-1} J^T R
// with the residual R_j = sqrt(w_j) (u_n(x_j) - u_j).

#include <sggn/assembly.hpp>
#include <sggn/errors.hpp>
#include <sggn/model.hpp>
#include <sggn/optimizer.hpp>
#include <sggn/problem.hpp>

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace sggn {

enum class LMScope { nonlinear_only, full };

inline const char* to_string(LMScope s) {
  return s == LMScope::nonlinear_only ? "nonlinear_only" : "full";
}

inline LMScope lm_scope_from_string(const std::string& s) {
  if (s == "nonlinear_only") return LMScope::nonlinear_only;
  if (s == "full") return LMScope::full;
  throw ConfigError("unknown LM scope '" + s + "' (expected nonlinear_only or full)");
}

struct LMConfig {
  int max_iters = 100;
  double lambda0 = 1e-3;
  double increase = 10.0;
  double decrease = 0.1;
  int max_adjust = 30;  ///< rejected trials per iteration before giving up
  double lambda_max = 1e16;
  LMScope scope = LMScope::nonlinear_only;
  double mass_tol = 1e-12;  ///< truncation for the c_hat refresh (nonlinear_only)
};

inline void validate(const LMConfig& cfg) {
  if (cfg.max_iters < 1) throw ConfigError("lm.max_iters must be >= 1");
  if (!(cfg.lambda0 > 0.0)) throw ConfigError("lm.lambda0 must be > 0");
  if (!(cfg.increase > 1.0)) throw ConfigError("lm.increase must be > 1");
  if (!(cfg.decrease > 0.0 && cfg.decrease < 1.0)) throw ConfigError("lm.decrease must lie in (0, 1)");
  if (cfg.max_adjust < 1) throw ConfigError("lm.max_adjust must be >= 1");
  if (!(cfg.lambda_max > cfg.lambda0)) throw ConfigError("lm.lambda_max must exceed lm.lambda0");
  if (!(cfg.mass_tol > 0.0 && cfg.mass_tol < 1.0)) throw ConfigError("lm.mass_tol must lie in (0, 1)");
}

/// p = (M + lambda I)^{-1} g. Directions M cannot see are scaled by 1/lambda.
inline Vector lm_shifted_solve(const Eigen::Ref<const Matrix>& M, const Eigen::Ref<const Vector>& g,
                               double lambda) {
  if (M.rows() != M.cols() || g.size() != M.rows())
    throw DimensionError("lm_shifted_solve: shape mismatch");
  if (!(lambda > 0.0)) throw ConfigError("lm_shifted_solve: lambda must be > 0");
  Matrix shifted = M;
  shifted.diagonal().array() += lambda;
  Eigen::LDLT<Matrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw NumericalError("lm_shifted_solve: factorization failed");
  Vector p = ldlt.solve(g);
  if (!p.allFinite()) throw NumericalError("lm_shifted_solve: non-finite step");
  return p;
}

/// Parameter vector of the chosen scope: r, or (c_hat, r).
inline Vector lm_theta(const NetworkParams& p, LMScope scope) {
  if (scope == LMScope::nonlinear_only) return nonlinear_vector(p);
  const Vector c = linear_vector(p);
  const Vector r = nonlinear_vector(p);
  Vector t(c.size() + r.size());
  t << c, r;
  return t;
}

inline NetworkParams lm_with_theta(const NetworkParams& p, const Vector& theta, LMScope scope) {
  if (scope == LMScope::nonlinear_only) return with_nonlinear(p, theta);
  const auto nc = static_cast<Eigen::Index>(p.width() + 1);
  return with_nonlinear(with_linear(p, theta.head(nc)), theta.tail(theta.size() - nc));
}

/// Weighted residual R and its Jacobian with respect to theta.
inline std::pair<Vector, Matrix> lm_residual_jacobian(const NetworkParams& p,
                                                      const WeightedPointSet& pts, LMScope scope) {
  const auto m = pts.size();
  const auto n = static_cast<Eigen::Index>(p.width());
  const Eigen::Index s = p.d + 1;
  const Eigen::Index off = scope == LMScope::full ? n + 1 : 0;
  Vector R(m);
  Matrix J = Matrix::Zero(m, off + n * s);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto fv = feature_vectors(p, pts.points.col(j));
    const double sw = std::sqrt(pts.weights[j]);
    R[j] = sw * (fv.sigma_hat.dot(linear_vector(p)) - pts.targets[j]);
    if (scope == LMScope::full) J.row(j).head(n + 1) = sw * fv.sigma_hat.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fv.heaviside[i] == 0.0) continue;
      J.row(j).segment(off + i * s, s) = (sw * p.c[i]) * fv.y.transpose();
    }
  }
  return {R, J};
}

struct LMRunResult {
  NetworkParams params;
  std::vector<IterationRecord> history;
  std::vector<double> lambdas;  ///< shift used by each accepted step
  double initial_loss = 0.0;
  std::optional<std::string> diagnostic;  ///< set when the shift overflowed
};

/// LM from an initialized network. An iteration is one accepted step; after
/// max_adjust rejections in a row, or once lambda exceeds lambda_max, the run
/// stops and reports why.
inline LMRunResult run_lm(const NetworkParams& init, const WeightedPointSet& pts,
                          const LMConfig& cfg, const IterationCallback& on_iter = {}) {
  validate(cfg);
  validate(init);
  LMRunResult out;
  out.params = init;
  out.initial_loss = loss(init, pts);
  double lambda = cfg.lambda0;
  double current = out.initial_loss;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    const auto [R, J] = lm_residual_jacobian(out.params, pts, cfg.scope);
    const Matrix M = J.transpose() * J;
    const Vector g = J.transpose() * R;
    const Vector theta = lm_theta(out.params, cfg.scope);
    bool accepted = false;
    for (int trial = 0; trial < cfg.max_adjust && !accepted; ++trial) {
      NetworkParams cand;
      double value = std::numeric_limits<double>::infinity();
      try {
        cand = lm_with_theta(out.params, theta - lm_shifted_solve(M, g, lambda), cfg.scope);
        value = loss(cand, pts);
      } catch (const NumericalError&) {
      }
      if (std::isfinite(value) && value < current) {
        accepted = true;
        out.lambdas.push_back(lambda);
        cand = normalize(cand);
        IterationRecord rec;
        rec.k = k;
        rec.gamma = 1.0;
        rec.active_count = static_cast<int>(cand.width());
        rec.gn_rank = static_cast<int>(theta.size());
        if (cfg.scope == LMScope::nonlinear_only) {
          const auto lin = solve_linear(cand, pts, cfg.mass_tol);
          cand = lin.params;
          rec.mass_rank = lin.report.numerical_rank;
          rec.mass_residual = lin.optimality;
        }
        rec.loss = loss(cand, pts);
        out.params = std::move(cand);
        current = rec.loss;
        out.history.push_back(rec);
        if (on_iter) on_iter(out.params, rec);
        lambda *= cfg.decrease;
      } else {
        lambda *= cfg.increase;
        if (lambda > cfg.lambda_max) break;
      }
    }
    if (!accepted) {
      out.diagnostic = "lm: no decrease at iteration " + std::to_string(k) + " after raising lambda to " +
                       std::to_string(lambda) + "; stopping";
      break;
    }
  }
  return out;
}

/// Initialization plus LM for a problem specification.
inline LMRunResult run_lm(const ProblemSpec& spec, int n, InitStyle style, const LMConfig& cfg,
                          const NetworkParams* explicit_params = nullptr,
                          const IterationCallback& on_iter = {}) {
  const auto pts = build_point_set(spec);
  std::optional<double> h;
  if (const auto* g = std::get_if<GridSampling>(&spec.sampling)) h = g->h;
  const auto init = initialize(spec.domain, pts, n, style, cfg.mass_tol, explicit_params, h);
  return run_lm(init, pts, cfg, on_iter);
}

}  // namespace sggn

#endif  // SGGN_LM_HPP
