#ifndef SGGN_MODEL_HPP
#define SGGN_MODEL_HPP

// Shallow ReLU network  u(x) = c0 + sum_i c_i * max(0, w_i . x + b_i)
// together with its feature vectors and breaking-hyperplane geometry.

#include <sggn/errors.hpp>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace sggn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline double relu(double t) { return t > 0.0 ? t : 0.0; }

/// Heaviside step used as the ReLU derivative. The value at t == 0 is 0.
inline double heaviside(double t) { return t > 0.0 ? 1.0 : 0.0; }

struct NeuronParams {
  double bias = 0.0;
  Vector weight;

  /// w.x + b, summed in a fixed order so that every code path agrees bitwise.
  double preactivation(const double* x) const {
    double t = bias;
    for (Eigen::Index k = 0; k < weight.size(); ++k) t += weight[k] * x[k];
    return t;
  }
  double preactivation(const Eigen::Ref<const Vector>& x) const { return preactivation(x.data()); }
};

struct NetworkParams {
  double c0 = 0.0;
  Vector c;
  std::vector<NeuronParams> neurons;
  int d = 1;

  std::size_t width() const { return neurons.size(); }
  /// Number of nonlinear parameters, n(d+1).
  std::size_t nonlinear_size() const { return neurons.size() * static_cast<std::size_t>(d + 1); }
};

/// Axis-aligned box lower <= x <= upper.
struct Domain {
  Vector lower;
  Vector upper;

  int dim() const { return static_cast<int>(lower.size()); }

  double volume() const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= upper[k] - lower[k];
    return v;
  }

  static Domain interval(double a, double b) {
    Domain dom;
    dom.lower = Vector::Constant(1, a);
    dom.upper = Vector::Constant(1, b);
    return dom;
  }

  static Domain box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
    Domain dom;
    dom.lower = Eigen::Map<const Vector>(lo.begin(), static_cast<Eigen::Index>(lo.size()));
    dom.upper = Eigen::Map<const Vector>(hi.begin(), static_cast<Eigen::Index>(hi.size()));
    return dom;
  }
};

inline void validate(const Domain& dom) {
  if (dom.lower.size() == 0 || dom.lower.size() != dom.upper.size())
    throw ConfigError("domain: lower and upper must be nonempty and of equal length");
  for (int k = 0; k < dom.dim(); ++k) {
    if (!(dom.lower[k] < dom.upper[k]))
      throw ConfigError("domain: lower[" + std::to_string(k) + "] must be < upper[" +
                        std::to_string(k) + "]");
  }
}

inline void validate(const NetworkParams& p) {
  if (p.d < 1) throw ConfigError("network: input dimension must be >= 1");
  if (p.neurons.empty()) throw ConfigError("network: at least one neuron required");
  if (static_cast<std::size_t>(p.c.size()) != p.neurons.size())
    throw ConfigError("network: c has " + std::to_string(p.c.size()) + " entries but there are " +
                      std::to_string(p.neurons.size()) + " neurons");
  if (!std::isfinite(p.c0) || !p.c.allFinite())
    throw ConfigError("network: non-finite output coefficients");
  for (std::size_t i = 0; i < p.neurons.size(); ++i) {
    const auto& nr = p.neurons[i];
    if (nr.weight.size() != p.d)
      throw ConfigError("network: neuron " + std::to_string(i) + " weight has length " +
                        std::to_string(nr.weight.size()) + ", expected " + std::to_string(p.d));
    if (!std::isfinite(nr.bias) || !nr.weight.allFinite())
      throw ConfigError("network: neuron " + std::to_string(i) + " has non-finite parameters");
  }
}

namespace detail {
inline void check_dim(const NetworkParams& p, Eigen::Index xdim) {
  if (xdim != p.d)
    throw DimensionError("point has dimension " + std::to_string(xdim) + ", network expects " +
                         std::to_string(p.d));
}
}  // namespace detail

inline double evaluate(const NetworkParams& p, const Eigen::Ref<const Vector>& x) {
  detail::check_dim(p, x.size());
  double acc = p.c0;
  for (std::size_t i = 0; i < p.neurons.size(); ++i)
    acc += p.c[static_cast<Eigen::Index>(i)] * relu(p.neurons[i].preactivation(x));
  return acc;
}

struct FeatureVectors {
  Vector sigma_hat;  ///< (1, sigma_1, ..., sigma_n)
  Vector heaviside;  ///< (H_1, ..., H_n), entries 0 or 1
  Vector y;          ///< homogeneous coordinates (1, x_1, ..., x_d)
};

inline FeatureVectors feature_vectors(const NetworkParams& p, const Eigen::Ref<const Vector>& x) {
  detail::check_dim(p, x.size());
  const auto n = static_cast<Eigen::Index>(p.width());
  FeatureVectors fv;
  fv.sigma_hat.resize(n + 1);
  fv.heaviside.resize(n);
  fv.y.resize(p.d + 1);
  fv.y[0] = 1.0;
  fv.y.tail(p.d) = x;
  fv.sigma_hat[0] = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = p.neurons[static_cast<std::size_t>(i)].preactivation(x);
    fv.sigma_hat[i + 1] = relu(t);
    fv.heaviside[i] = heaviside(t);
  }
  return fv;
}

/// Rescales every neuron onto the unit sphere, w <- w/s, b <- b/s, c <- c*s,
/// which leaves the network function unchanged.
inline NetworkParams normalize(NetworkParams p) {
  for (std::size_t i = 0; i < p.neurons.size(); ++i) {
    auto& nr = p.neurons[i];
    const double s = nr.weight.norm();
    if (!(s > 0.0) || !std::isfinite(s))
      throw DegenerateNeuronError(i, "neuron " + std::to_string(i) +
                                         " has a zero or non-finite weight vector");
    // Already on the sphere up to rounding: leave the neuron bitwise untouched.
    if (std::abs(s - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) continue;
    nr.weight /= s;
    nr.bias /= s;
    p.c[static_cast<Eigen::Index>(i)] *= s;
  }
  return p;
}

/// Flattened nonlinear parameters r = (r_1, ..., r_n) with r_i = (b_i, w_i).
inline Vector nonlinear_vector(const NetworkParams& p) {
  const int stride = p.d + 1;
  Vector r(static_cast<Eigen::Index>(p.nonlinear_size()));
  for (std::size_t i = 0; i < p.width(); ++i) {
    const auto off = static_cast<Eigen::Index>(i) * stride;
    r[off] = p.neurons[i].bias;
    r.segment(off + 1, p.d) = p.neurons[i].weight;
  }
  return r;
}

inline NetworkParams with_nonlinear(NetworkParams p, const Eigen::Ref<const Vector>& r) {
  const int stride = p.d + 1;
  if (static_cast<std::size_t>(r.size()) != p.nonlinear_size())
    throw DimensionError("nonlinear vector has length " + std::to_string(r.size()) +
                         ", expected " + std::to_string(p.nonlinear_size()));
  for (std::size_t i = 0; i < p.width(); ++i) {
    const auto off = static_cast<Eigen::Index>(i) * stride;
    p.neurons[i].bias = r[off];
    p.neurons[i].weight = r.segment(off + 1, p.d);
  }
  return p;
}

/// Linear coefficients c_hat = (c0, c_1, ..., c_n).
inline Vector linear_vector(const NetworkParams& p) {
  Vector ch(p.c.size() + 1);
  ch[0] = p.c0;
  ch.tail(p.c.size()) = p.c;
  return ch;
}

inline NetworkParams with_linear(NetworkParams p, const Eigen::Ref<const Vector>& c_hat) {
  if (c_hat.size() != p.c.size() + 1)
    throw DimensionError("linear vector has length " + std::to_string(c_hat.size()) +
                         ", expected " + std::to_string(p.c.size() + 1));
  p.c0 = c_hat[0];
  p.c = c_hat.tail(p.c.size());
  return p;
}

struct HyperplaneDescriptor {
  std::size_t index = 0;
  double bias = 0.0;
  Vector weight;
  bool intersects_domain = false;
};

/// Breaking hyperplane {x : w.x + b = 0} of each neuron, with a corner sign
/// test against the box domain.
inline std::vector<HyperplaneDescriptor> hyperplanes(const NetworkParams& p, const Domain& dom) {
  if (dom.dim() != p.d)
    throw DimensionError("domain dimension " + std::to_string(dom.dim()) +
                         " does not match network dimension " + std::to_string(p.d));
  std::vector<HyperplaneDescriptor> out;
  out.reserve(p.width());
  for (std::size_t i = 0; i < p.width(); ++i) {
    const auto& nr = p.neurons[i];
    // Extremes of an affine function over a box are attained at corners;
    // pick the corner coordinate per axis from the sign of the weight.
    double lo = nr.bias;
    double hi = nr.bias;
    for (int k = 0; k < p.d; ++k) {
      const double a = nr.weight[k] * dom.lower[k];
      const double b = nr.weight[k] * dom.upper[k];
      lo += std::min(a, b);
      hi += std::max(a, b);
    }
    out.push_back({i, nr.bias, nr.weight, lo <= 0.0 && hi >= 0.0});
  }
  return out;
}

// --- JSON ------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const NetworkParams& p) {
  nlohmann::ordered_json j;
  j["d"] = p.d;
  j["n"] = p.width();
  j["c0"] = p.c0;
  j["c"] = std::vector<double>(p.c.data(), p.c.data() + p.c.size());
  auto neurons = nlohmann::ordered_json::array();
  for (const auto& nr : p.neurons) {
    nlohmann::ordered_json jn;
    jn["b"] = nr.bias;
    jn["omega"] = std::vector<double>(nr.weight.data(), nr.weight.data() + nr.weight.size());
    neurons.push_back(std::move(jn));
  }
  j["neurons"] = std::move(neurons);
  return j;
}

inline NetworkParams network_from_json(const nlohmann::json& j) {
  try {
    NetworkParams p;
    p.d = j.at("d").get<int>();
    const auto n = j.at("n").get<std::size_t>();
    p.c0 = j.at("c0").get<double>();
    const auto c = j.at("c").get<std::vector<double>>();
    p.c = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
    for (const auto& jn : j.at("neurons")) {
      NeuronParams nr;
      nr.bias = jn.at("b").get<double>();
      const auto w = jn.at("omega").get<std::vector<double>>();
      nr.weight = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
      p.neurons.push_back(std::move(nr));
    }
    if (p.neurons.size() != n)
      throw ConfigError("network: n = " + std::to_string(n) + " but " +
                        std::to_string(p.neurons.size()) + " neurons listed");
    validate(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network JSON: ") + e.what());
  }
}

}  // namespace sggn

#endif  // SGGN_MODEL_HPP
