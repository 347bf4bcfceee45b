#ifndef SGGN_LINALG_HPP
#define SGGN_LINALG_HPP

#include <sggn/assembly.hpp>
#include <sggn/errors.hpp>
#include <sggn/model.hpp>
#include <sggn/problem.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>
#include <vector>

namespace sggn {

struct SpdSolveReport {
  Vector solution;
  int numerical_rank = 0;
  double truncation_tol = 0.0;  ///< relative tolerance, kept sigma >= tol * sigma_max
  double relative_residual = 0.0;
  double smallest_kept_singular_value = 0.0;
  double largest_singular_value = 0.0;
};

/// Pseudoinverse solve of a symmetric system, discarding every direction
/// whose singular value |lambda_k| falls below rel_tol * sigma_max.
/// The symmetric eigendecomposition serves as the SVD.
inline SpdSolveReport truncated_svd_solve(const Eigen::Ref<const Matrix>& M,
                                          const Eigen::Ref<const Vector>& b, double rel_tol) {
  if (M.rows() != M.cols())
    throw DimensionError("truncated_svd_solve: matrix is " + std::to_string(M.rows()) + "x" +
                         std::to_string(M.cols()));
  if (b.size() != M.rows())
    throw DimensionError("truncated_svd_solve: right-hand side has length " +
                         std::to_string(b.size()) + ", expected " + std::to_string(M.rows()));
  if (!(rel_tol > 0.0 && rel_tol < 1.0))
    throw ConfigError("truncated_svd_solve: rel_tol must lie in (0, 1)");
  if (!M.allFinite() || !b.allFinite())
    throw NumericalError("truncated_svd_solve: non-finite input");
  const double mnorm = M.norm();
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * mnorm)
    throw DimensionError("truncated_svd_solve: matrix is not symmetric");

  SpdSolveReport rep;
  rep.truncation_tol = rel_tol;
  rep.solution = Vector::Zero(M.rows());
  if (M.rows() == 0) return rep;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
  if (eig.info() != Eigen::Success)
    throw NumericalError("truncated_svd_solve: eigendecomposition failed");
  const Vector& lambda = eig.eigenvalues();
  const Matrix& U = eig.eigenvectors();
  const double sigma_max = lambda.cwiseAbs().maxCoeff();
  rep.largest_singular_value = sigma_max;
  if (sigma_max > 0.0) {
    const double cut = rel_tol * sigma_max;
    const Vector coeff = U.transpose() * b;
    double smallest = sigma_max;
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      if (std::abs(lambda[k]) < cut) continue;
      rep.solution.noalias() += (coeff[k] / lambda[k]) * U.col(k);
      smallest = std::min(smallest, std::abs(lambda[k]));
      ++rep.numerical_rank;
    }
    rep.smallest_kept_singular_value = smallest;
  }
  const double bnorm = b.norm();
  rep.relative_residual = bnorm > 0.0 ? (M * rep.solution - b).norm() / bnorm : 0.0;
  return rep;
}

// --- conditioning --------------------------------------------------------------

/// layer_gn_bias is the bias-bias block of H. In one dimension the weights
/// live on {-1, +1}, so this block is the layer matrix seen by the
/// constrained problem; layer_gn is the full (b, w) matrix.
enum class MatrixTag { mass, layer_gn, layer_gn_bias };

inline const char* to_string(MatrixTag t) {
  switch (t) {
    case MatrixTag::mass: return "mass";
    case MatrixTag::layer_gn: return "layer_gn";
    case MatrixTag::layer_gn_bias: return "layer_gn_bias";
  }
  return "?";
}

struct ConditionReport {
  int n = 0;
  MatrixTag tag = MatrixTag::mass;
  double kappa2 = 1.0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
};

inline ConditionReport condition_of(const Eigen::Ref<const Matrix>& M, int n, MatrixTag tag) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("condition_of: eigendecomposition failed");
  const Vector s = eig.eigenvalues().cwiseAbs();
  ConditionReport rep;
  rep.n = n;
  rep.tag = tag;
  rep.sigma_max = s.maxCoeff();
  rep.sigma_min = s.minCoeff();
  rep.kappa2 = rep.sigma_min > 0.0 ? rep.sigma_max / rep.sigma_min
                                   : std::numeric_limits<double>::infinity();
  return rep;
}

enum class BreakpointLayout { uniform, clustered };

/// One-dimensional configuration on [0, 1] with mu = 1 and w_i = +1.
struct SweepConfig {
  BreakpointLayout layout = BreakpointLayout::uniform;
  int points_per_neuron = 50;
  double cluster_ratio = 0.5;
};

/// Breakpoints in (0, 1): k/(n+1) for the uniform layout; for the clustered
/// layout consecutive gaps shrink geometrically by cluster_ratio.
inline std::vector<double> sweep_breakpoints(int n, const SweepConfig& cfg) {
  std::vector<double> xs(static_cast<std::size_t>(n));
  if (cfg.layout == BreakpointLayout::uniform) {
    for (int k = 1; k <= n; ++k) xs[static_cast<std::size_t>(k - 1)] = double(k) / double(n + 1);
    return xs;
  }
  // n+1 gaps g0 * q^j summing to 1
  const double q = cfg.cluster_ratio;
  const double g0 = (1.0 - q) / (1.0 - std::pow(q, n + 1));
  double x = 0.0;
  for (int k = 0; k < n; ++k) {
    x += g0 * std::pow(q, k);
    xs[static_cast<std::size_t>(k)] = x;
  }
  return xs;
}

/// Network with the given breakpoints, w = +1, unit output coefficients.
inline NetworkParams breakpoint_network(const std::vector<double>& xs) {
  NetworkParams p;
  p.d = 1;
  p.c = Vector::Ones(static_cast<Eigen::Index>(xs.size()));
  for (double x : xs) p.neurons.push_back({-x, Vector::Ones(1)});
  return p;
}

/// Condition numbers of A(r), H(r) and its bias block for each n. The
/// midpoint grid has at least points_per_neuron * n cells and resolves the
/// smallest gap with ten.
inline std::vector<ConditionReport> condition_sweep(const std::vector<int>& ns,
                                                    const SweepConfig& cfg = {}) {
  std::vector<ConditionReport> out;
  for (int n : ns) {
    if (n < 4) throw ConfigError("condition_sweep: n must be >= 4");
    const auto xs = sweep_breakpoints(n, cfg);
    double min_gap = xs.front();
    for (std::size_t k = 1; k < xs.size(); ++k) min_gap = std::min(min_gap, xs[k] - xs[k - 1]);
    min_gap = std::min(min_gap, 1.0 - xs.back());
    const auto cells = static_cast<long>(
        std::max(static_cast<double>(cfg.points_per_neuron) * n, std::ceil(10.0 / min_gap)));
    // targets do not enter A or H
    const auto pts = midpoint_grid(Domain::interval(0.0, 1.0), 1.0 / static_cast<double>(cells),
                                   1.0, TargetFunction{"zero", Step1D{{0.0, 1.0}, {0.0}}});
    const auto net = breakpoint_network(xs);
    const auto [A, f] = assemble_mass(net, pts);
    out.push_back(condition_of(A, n, MatrixTag::mass));
    const Matrix H = assemble_layer_gn(net, pts);
    out.push_back(condition_of(H, n, MatrixTag::layer_gn));
    const Matrix Hb = H(Eigen::seqN(0, n, 2), Eigen::seqN(0, n, 2));
    out.push_back(condition_of(Hb, n, MatrixTag::layer_gn_bias));
  }
  return out;
}

/// Least-squares slope of log(kappa2) against log(n) for one matrix tag.
inline double loglog_slope(const std::vector<ConditionReport>& reps, MatrixTag tag) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& r : reps) {
    if (r.tag != tag) continue;
    const double lx = std::log(static_cast<double>(r.n));
    const double ly = std::log(r.kappa2);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) throw ConfigError("loglog_slope: need at least two sizes");
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

/// CSV columns: n,tag,kappa2,sigma_max,sigma_min
inline void write_condition_csv(const std::string& path, const std::vector<ConditionReport>& reps) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "n,tag,kappa2,sigma_max,sigma_min\n" << std::setprecision(17);
  for (const auto& r : reps)
    out << r.n << ',' << to_string(r.tag) << ',' << r.kappa2 << ',' << r.sigma_max << ','
        << r.sigma_min << '\n';
}

}  // namespace sggn

#endif  // SGGN_LINALG_HPP
