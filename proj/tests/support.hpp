#ifndef SGGN_TESTS_SUPPORT_HPP
#define SGGN_TESTS_SUPPORT_HPP

// Hand-rolled generators with fixed seeds and brute-force oracles. The
// oracles work straight from the definitions (max(0, t), indicator t > 0,
// y = (1, x)) and never call the library's feature or assembly code.

#include <sggn/sggn.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sggn::testing {

class Rng {
public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(g_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(g_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(g_); }
  bool coin() { return integer(0, 1) == 1; }

private:
  std::mt19937_64 g_;
};

inline TargetFunction zero_target() { return {"zero", Step1D{{-1e300, 1e300}, {0.0}}}; }

/// Unit weight vector: +-1 in 1D, a random direction otherwise.
inline Vector random_direction(Rng& rng, int d) {
  Vector w(d);
  if (d == 1) {
    w[0] = rng.coin() ? 1.0 : -1.0;
    return w;
  }
  do {
    for (int k = 0; k < d; ++k) w[k] = rng.normal();
  } while (w.norm() < 1e-3);
  return w / w.norm();
}

/// Random network whose hyperplanes pass through the inner part of the box
/// (shrunk by `inner` around the centre), with |c_i| >= 0.2. In 1D the
/// breakpoints are at least min_gap apart.
inline NetworkParams random_network(Rng& rng, int n, const Domain& dom, double inner = 0.8,
                                    double min_gap = 0.0) {
  const int d = dom.dim();
  NetworkParams p;
  p.d = d;
  p.c0 = rng.uniform(-1.0, 1.0);
  p.c = Vector(n);
  std::vector<double> breaks;
  for (int i = 0; i < n; ++i) {
    Vector anchor(d);
    for (;;) {
      for (int k = 0; k < d; ++k) {
        const double mid = 0.5 * (dom.lower[k] + dom.upper[k]);
        const double half = 0.5 * (dom.upper[k] - dom.lower[k]) * inner;
        anchor[k] = rng.uniform(mid - half, mid + half);
      }
      if (d != 1) break;
      if (std::all_of(breaks.begin(), breaks.end(),
                      [&](double b) { return std::abs(b - anchor[0]) >= min_gap; }))
        break;
    }
    if (d == 1) breaks.push_back(anchor[0]);
    NeuronParams nr;
    nr.weight = random_direction(rng, d);
    nr.bias = -nr.weight.dot(anchor);
    p.neurons.push_back(nr);
    const double mag = rng.uniform(0.2, 2.0);
    p.c[i] = rng.coin() ? mag : -mag;
  }
  return p;
}

inline double naive_pre(const NeuronParams& nr, const Vector& x) {
  double t = nr.bias;
  for (Eigen::Index k = 0; k < x.size(); ++k) t += nr.weight[k] * x[k];
  return t;
}

inline double naive_eval(const NetworkParams& p, const Vector& x) {
  double v = p.c0;
  for (std::size_t i = 0; i < p.neurons.size(); ++i)
    v += p.c[static_cast<Eigen::Index>(i)] * std::max(0.0, naive_pre(p.neurons[i], x));
  return v;
}

inline double naive_loss(const NetworkParams& p, const WeightedPointSet& pts) {
  long double acc = 0.0L;
  for (Eigen::Index j = 0; j < pts.size(); ++j) {
    const Vector x = pts.points.col(j);
    const long double r = naive_eval(p, x) - pts.targets[j];
    acc += pts.weights[j] * r * r;
  }
  return static_cast<double>(0.5L * acc);
}

inline Vector homogeneous(const Vector& x) {
  Vector y(x.size() + 1);
  y[0] = 1.0;
  y.tail(x.size()) = x;
  return y;
}

/// A = sum w sig sig^T and f = sum w u sig with sig = (1, sigma_1, ..., sigma_n).
inline std::pair<Matrix, Vector> naive_mass(const NetworkParams& p, const WeightedPointSet& pts) {
  const auto n = static_cast<Eigen::Index>(p.width());
  Matrix A = Matrix::Zero(n + 1, n + 1);
  Vector f = Vector::Zero(n + 1);
  for (Eigen::Index j = 0; j < pts.size(); ++j) {
    const Vector x = pts.points.col(j);
    Vector s(n + 1);
    s[0] = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) s[i + 1] = std::max(0.0, naive_pre(p.neurons[i], x));
    A += pts.weights[j] * s * s.transpose();
    f += pts.weights[j] * pts.targets[j] * s;
  }
  return {A, f};
}

/// Per-point Jacobian row of u_n with respect to r: block i is c_i 1[t_i > 0] y.
inline Vector jacobian_row(const NetworkParams& p, const Vector& x) {
  const auto n = static_cast<Eigen::Index>(p.width());
  const Eigen::Index s = p.d + 1;
  Vector row = Vector::Zero(n * s);
  const Vector y = homogeneous(x);
  for (Eigen::Index i = 0; i < n; ++i)
    if (naive_pre(p.neurons[i], x) > 0.0) row.segment(i * s, s) = p.c[i] * y;
  return row;
}

/// Explicit J^T W J.
inline Matrix jtwj(const NetworkParams& p, const WeightedPointSet& pts) {
  const auto dim = static_cast<Eigen::Index>(p.width() * (p.d + 1));
  Matrix M = Matrix::Zero(dim, dim);
  for (Eigen::Index j = 0; j < pts.size(); ++j) {
    const Vector row = jacobian_row(p, pts.points.col(j));
    M += pts.weights[j] * row * row.transpose();
  }
  return M;
}

/// Layer matrix from its definition: block (i, k) = sum w 1[t_i>0] 1[t_k>0] y y^T.
inline Matrix naive_layer_gn(const NetworkParams& p, const WeightedPointSet& pts) {
  const auto n = static_cast<Eigen::Index>(p.width());
  const Eigen::Index s = p.d + 1;
  Matrix H = Matrix::Zero(n * s, n * s);
  for (Eigen::Index j = 0; j < pts.size(); ++j) {
    const Vector x = pts.points.col(j);
    const Vector y = homogeneous(x);
    const Matrix yy = pts.weights[j] * y * y.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(naive_pre(p.neurons[i], x) > 0.0)) continue;
      for (Eigen::Index k = 0; k < n; ++k)
        if (naive_pre(p.neurons[k], x) > 0.0) H.block(i * s, k * s, s, s) += yy;
    }
  }
  return H;
}

/// G = sum w (u_n - u) (H (x) y).
inline Vector naive_scaled_gradient(const NetworkParams& p, const WeightedPointSet& pts) {
  const auto n = static_cast<Eigen::Index>(p.width());
  const Eigen::Index s = p.d + 1;
  Vector G = Vector::Zero(n * s);
  for (Eigen::Index j = 0; j < pts.size(); ++j) {
    const Vector x = pts.points.col(j);
    const double res = naive_eval(p, x) - pts.targets[j];
    for (Eigen::Index i = 0; i < n; ++i)
      if (naive_pre(p.neurons[i], x) > 0.0) G.segment(i * s, s) += pts.weights[j] * res * homogeneous(x);
  }
  return G;
}

/// Central differences of the loss with respect to r.
inline Vector fd_gradient_r(const NetworkParams& p, const WeightedPointSet& pts, double step) {
  const auto n = static_cast<Eigen::Index>(p.width());
  const Eigen::Index s = p.d + 1;
  Vector g(n * s);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < s; ++k) {
      NetworkParams plus = p;
      NetworkParams minus = p;
      auto bump = [&](NetworkParams& q, double h) {
        auto& nr = q.neurons[static_cast<std::size_t>(i)];
        if (k == 0) nr.bias += h;
        else nr.weight[k - 1] += h;
      };
      bump(plus, step);
      bump(minus, -step);
      g[i * s + k] = (naive_loss(plus, pts) - naive_loss(minus, pts)) / (2.0 * step);
    }
  }
  return g;
}

/// Smallest |w.x + b| over the sample points, across all neurons.
inline double min_hyperplane_distance(const NetworkParams& p, const WeightedPointSet& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < pts.size(); ++j) {
    const Vector x = pts.points.col(j);
    for (const auto& nr : p.neurons) best = std::min(best, std::abs(naive_pre(nr, x)) / nr.weight.norm());
  }
  return best;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline double min_eigenvalue(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

}  // namespace sggn::testing

#endif  // SGGN_TESTS_SUPPORT_HPP
