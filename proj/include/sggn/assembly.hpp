#ifndef SGGN_ASSEMBLY_HPP
#define SGGN_ASSEMBLY_HPP

// Mass matrix A(r), right-hand side f(r), layer Gauss-Newton matrix H(r) and
// scaled gradient G(c, r) as weighted sums over a point set.
//
// Ordering of the nonlinear block vectors follows the Kronecker product
// H(x) (x) y: entry i*(d+1) + k belongs to neuron i and homogeneous
// coordinate k, so block i is (b_i, w_i).
//
// Sums run in point order and accumulate in long double. Only the lower
// triangle is accumulated; the upper triangle is mirrored at the end, so the
// results are exactly symmetric.

#include <sggn/errors.hpp>
#include <sggn/model.hpp>
#include <sggn/problem.hpp>

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

namespace sggn {

using WideMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using WideVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

struct AssemblyBundle {
  Matrix A;
  Vector f;
  Matrix H;
  Vector G;
};

namespace detail {

inline void require_nonempty(const WeightedPointSet& pts) {
  if (pts.size() == 0) throw ConfigError("assembly: point set is empty");
}

inline Matrix mirror_lower(const WideMatrix& lower) {
  Matrix out = lower.cast<double>();
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < j; ++i) out(i, j) = out(j, i);
  return out;
}

}  // namespace detail

/// A = sum w Sigma_hat Sigma_hat^T and f = sum w u Sigma_hat.
inline std::pair<Matrix, Vector> assemble_mass(const NetworkParams& p, const WeightedPointSet& pts) {
  detail::require_nonempty(pts);
  detail::check_dim(p, pts.dim());
  const auto n = static_cast<Eigen::Index>(p.width());
  WideMatrix A = WideMatrix::Zero(n + 1, n + 1);
  WideVector f = WideVector::Zero(n + 1);
  std::vector<Eigen::Index> nz;
  std::vector<double> sig;
  nz.reserve(static_cast<std::size_t>(n + 1));
  sig.reserve(static_cast<std::size_t>(n + 1));
  for (Eigen::Index j = 0; j < pts.size(); ++j) {
    const double* x = pts.points.col(j).data();
    const long double w = pts.weights[j];
    nz.clear();
    sig.clear();
    nz.push_back(0);
    sig.push_back(1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = relu(p.neurons[static_cast<std::size_t>(i)].preactivation(x));
      if (s != 0.0) {
        nz.push_back(i + 1);
        sig.push_back(s);
      }
    }
    const long double wu = w * pts.targets[j];
    for (std::size_t a = 0; a < nz.size(); ++a) {
      const long double ws = w * sig[a];
      f[nz[a]] += wu * sig[a];
      for (std::size_t b = 0; b <= a; ++b) A(nz[a], nz[b]) += ws * sig[b];
    }
  }
  return {detail::mirror_lower(A), f.cast<double>()};
}

/// H = sum w (H H^T) (x) (y y^T), dimension n(d+1).
inline Matrix assemble_layer_gn(const NetworkParams& p, const WeightedPointSet& pts) {
  detail::require_nonempty(pts);
  detail::check_dim(p, pts.dim());
  const auto n = static_cast<Eigen::Index>(p.width());
  const Eigen::Index s = p.d + 1;
  WideMatrix H = WideMatrix::Zero(n * s, n * s);
  WideMatrix wyy(s, s);
  std::vector<Eigen::Index> active;
  active.reserve(static_cast<std::size_t>(n));
  std::vector<long double> y(static_cast<std::size_t>(s));
  for (Eigen::Index j = 0; j < pts.size(); ++j) {
    const double* x = pts.points.col(j).data();
    active.clear();
    for (Eigen::Index i = 0; i < n; ++i)
      if (p.neurons[static_cast<std::size_t>(i)].preactivation(x) > 0.0) active.push_back(i);
    if (active.empty()) continue;
    const long double w = pts.weights[j];
    y[0] = 1.0L;
    for (Eigen::Index k = 1; k < s; ++k) y[static_cast<std::size_t>(k)] = x[k - 1];
    for (Eigen::Index a = 0; a < s; ++a)
      for (Eigen::Index b = 0; b <= a; ++b)
        wyy(a, b) = w * y[static_cast<std::size_t>(a)] * y[static_cast<std::size_t>(b)];
    for (std::size_t ia = 0; ia < active.size(); ++ia) {
      const Eigen::Index bi = active[ia] * s;
      // diagonal block: lower triangle only
      for (Eigen::Index a = 0; a < s; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) H(bi + a, bi + b) += wyy(a, b);
      for (std::size_t ib = 0; ib < ia; ++ib) {
        const Eigen::Index bj = active[ib] * s;
        for (Eigen::Index a = 0; a < s; ++a)
          for (Eigen::Index b = 0; b < s; ++b)
            H(bi + a, bj + b) += b <= a ? wyy(a, b) : wyy(b, a);
      }
    }
  }
  return detail::mirror_lower(H);
}

/// G = sum w (u_n(x) - u(x)) H(x) (x) y.
inline Vector assemble_scaled_gradient(const NetworkParams& p, const WeightedPointSet& pts) {
  detail::require_nonempty(pts);
  detail::check_dim(p, pts.dim());
  const auto n = static_cast<Eigen::Index>(p.width());
  const Eigen::Index s = p.d + 1;
  WideVector G = WideVector::Zero(n * s);
  std::vector<double> t(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < pts.size(); ++j) {
    const double* x = pts.points.col(j).data();
    double v = p.c0;
    for (Eigen::Index i = 0; i < n; ++i) {
      t[static_cast<std::size_t>(i)] = p.neurons[static_cast<std::size_t>(i)].preactivation(x);
      v += p.c[i] * relu(t[static_cast<std::size_t>(i)]);
    }
    const long double wr = static_cast<long double>(pts.weights[j]) *
                           (static_cast<long double>(v) - pts.targets[j]);
    if (wr == 0.0L) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(t[static_cast<std::size_t>(i)] > 0.0)) continue;
      G[i * s] += wr;
      for (Eigen::Index k = 1; k < s; ++k) G[i * s + k] += wr * x[k - 1];
    }
  }
  return G.cast<double>();
}

inline AssemblyBundle assemble_all(const NetworkParams& p, const WeightedPointSet& pts) {
  AssemblyBundle b;
  std::tie(b.A, b.f) = assemble_mass(p, pts);
  b.H = assemble_layer_gn(p, pts);
  b.G = assemble_scaled_gradient(p, pts);
  return b;
}

/// Diagonal of D(c) (x) I_{d+1}.
inline Vector kron_scaling(const Eigen::Ref<const Vector>& c, int d) {
  const Eigen::Index s = d + 1;
  Vector out(c.size() * s);
  for (Eigen::Index i = 0; i < c.size(); ++i) out.segment(i * s, s).setConstant(c[i]);
  return out;
}

/// Full Gauss-Newton matrix (D(c) (x) I) H (D(c) (x) I). For verification only.
inline Matrix gn_matrix(const NetworkParams& p, const WeightedPointSet& pts) {
  const Matrix H = assemble_layer_gn(p, pts);
  const Vector dscale = kron_scaling(p.c, p.d);
  return dscale.asDiagonal() * H * dscale.asDiagonal();
}

/// Gradient of the loss with respect to r, (D(c) (x) I) G.
inline Vector loss_gradient_r(const NetworkParams& p, const WeightedPointSet& pts) {
  return kron_scaling(p.c, p.d).cwiseProduct(assemble_scaled_gradient(p, pts));
}

// --- active set and reduction ------------------------------------------------

struct ActiveSet {
  std::vector<std::size_t> indices;  ///< 0-based, ascending
  double threshold = 1e-8;

  bool empty() const { return indices.empty(); }
  std::size_t size() const { return indices.size(); }
};

inline ActiveSet active_set(const Eigen::Ref<const Vector>& c, double eps_c) {
  if (!(eps_c > 0.0)) throw ConfigError("active_set: threshold must be > 0");
  ActiveSet out;
  out.threshold = eps_c;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (std::abs(c[i]) >= eps_c) out.indices.push_back(static_cast<std::size_t>(i));
  return out;
}

struct ReducedSystem {
  Matrix H;     ///< principal block submatrix of the layer GN matrix
  Vector G;     ///< active blocks of the scaled gradient
  Vector c;     ///< active coefficients, the diagonal of D(c~)
};

inline ReducedSystem reduce(const Eigen::Ref<const Matrix>& H, const Eigen::Ref<const Vector>& G,
                            const Eigen::Ref<const Vector>& c, int d, const ActiveSet& active) {
  if (active.empty()) throw ConfigError("reduce: active set is empty");
  const Eigen::Index s = d + 1;
  const auto na = static_cast<Eigen::Index>(active.size());
  if (H.rows() != c.size() * s || H.cols() != H.rows() || G.size() != H.rows())
    throw DimensionError("reduce: H, G and c have inconsistent sizes");
  ReducedSystem r;
  r.H.resize(na * s, na * s);
  r.G.resize(na * s);
  r.c.resize(na);
  for (Eigen::Index a = 0; a < na; ++a) {
    const auto ia = static_cast<Eigen::Index>(active.indices[static_cast<std::size_t>(a)]);
    if (ia >= c.size()) throw DimensionError("reduce: active index out of range");
    r.c[a] = c[ia];
    r.G.segment(a * s, s) = G.segment(ia * s, s);
    for (Eigen::Index b = 0; b < na; ++b) {
      const auto ib = static_cast<Eigen::Index>(active.indices[static_cast<std::size_t>(b)]);
      r.H.block(a * s, b * s, s, s) = H.block(ia * s, ib * s, s, s);
    }
  }
  return r;
}

// --- export ------------------------------------------------------------------

/// Row-major CSV with a "# rows=R cols=C" first line.
inline void write_matrix_csv(const std::string& path, const Eigen::Ref<const Matrix>& M) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "# rows=" << M.rows() << " cols=" << M.cols() << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << M(i, j);
    out << '\n';
  }
}

inline constexpr char kMatrixMagic[8] = {'S', 'G', 'G', 'N', 'M', 'A', 'T', '1'};

/// Dense binary: 8-byte magic, uint64 rows, uint64 cols, row-major float64
/// values, all in host byte order.
inline void write_matrix_binary(const std::string& path, const Eigen::Ref<const Matrix>& M) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  const std::uint64_t rows = static_cast<std::uint64_t>(M.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(M.cols());
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      const double v = M(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

inline Matrix read_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  char magic[8];
  std::uint64_t rows = 0, cols = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || !std::equal(magic, magic + 8, kMatrixMagic))
    throw ConfigError("'" + path + "' is not a dense matrix file");
  Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) in.read(reinterpret_cast<char*>(&M(i, j)), sizeof(double));
  if (!in) throw ConfigError("'" + path + "' is truncated");
  return M;
}

}  // namespace sggn

#endif  // SGGN_ASSEMBLY_HPP
