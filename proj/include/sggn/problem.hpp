#ifndef SGGN_PROBLEM_HPP
#define SGGN_PROBLEM_HPP

// Target functions and the weighted point set {(x_i, w_i, u_i)} that carries
// both the midpoint-quadrature (continuous) and the data (discrete) loss.

#include <sggn/errors.hpp>
#include <sggn/model.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace sggn {

enum class PointSetKind { quadrature, data };

struct WeightedPointSet {
  Matrix points;  ///< d x m, one column per point
  Vector weights;
  Vector targets;
  PointSetKind kind = PointSetKind::quadrature;

  int dim() const { return static_cast<int>(points.rows()); }
  Eigen::Index size() const { return points.cols(); }
};

inline void validate(const WeightedPointSet& pts) {
  if (pts.weights.size() != pts.size() || pts.targets.size() != pts.size())
    throw ConfigError("point set: points, weights and targets differ in length");
  for (Eigen::Index i = 0; i < pts.size(); ++i) {
    if (!std::isfinite(pts.weights[i]) || pts.weights[i] < 0.0)
      throw ConfigError("point set: weight " + std::to_string(i) + " is negative or non-finite");
  }
}

// --- target functions --------------------------------------------------------

/// Piecewise constant on [breaks_0, breaks_k], value[j] on [breaks_j, breaks_{j+1}).
struct Step1D {
  std::vector<double> breaks;
  std::vector<double> values;
};

/// Sum of Lorentzian peaks 1 / (w_i (x - x_i)^2 + 1).
struct Delta1D {
  std::vector<double> centers;
  std::vector<double> widths;
};

/// inside on the diagonal band |x1 + x2| <= half_width, outside elsewhere.
struct Step2D {
  double half_width = 0.5;
  double inside = 1.0;
  double outside = -1.0;
};

/// Target that is itself a shallow ReLU network; keeps the generating parameters.
struct NetworkTarget {
  NetworkParams generator;
};

/// Targets supplied only through a data file.
struct CustomTarget {};

struct TargetFunction {
  std::string tag;
  std::variant<Step1D, Delta1D, Step2D, NetworkTarget, CustomTarget> def;

  double operator()(const Eigen::Ref<const Vector>& x) const {
    return std::visit([&](const auto& t) { return eval(t, x); }, def);
  }

private:
  static double eval(const Step1D& t, const Eigen::Ref<const Vector>& x) {
    const double v = x[0];
    const std::size_t segs = t.values.size();
    for (std::size_t j = 0; j + 1 < segs; ++j)
      if (v < t.breaks[j + 1]) return t.values[j];
    return t.values.back();
  }
  static double eval(const Delta1D& t, const Eigen::Ref<const Vector>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.centers.size(); ++i) {
      const double dx = x[0] - t.centers[i];
      s += 1.0 / (t.widths[i] * dx * dx + 1.0);
    }
    return s;
  }
  static double eval(const Step2D& t, const Eigen::Ref<const Vector>& x) {
    const double s = x[0] + x[1];
    return (s >= -t.half_width && s <= t.half_width) ? t.inside : t.outside;
  }
  static double eval(const NetworkTarget& t, const Eigen::Ref<const Vector>& x) {
    return evaluate(t.generator, x);
  }
  static double eval(const CustomTarget&, const Eigen::Ref<const Vector>&) {
    throw ConfigError("custom target has no closed form; supply sampling.data_path");
  }
};

namespace defaults {

/// Ten-piece step on [0, 10] with jumps at the integers. The values are a
/// fixed draw from a right-skewed (log-normal like) sample, frozen here so
/// runs are deterministic.
inline Step1D step1d() {
  Step1D t;
  for (int k = 0; k <= 10; ++k) t.breaks.push_back(static_cast<double>(k));
  t.values = {0.35, 0.12, 1.64, 0.58, 0.21, 2.73, 0.47, 0.95, 0.16, 1.18};
  return t;
}

inline Delta1D delta1d() {
  const double pi = std::numbers::pi;
  return {{-pi * pi / 10.0, -(pi - 2.5), std::sqrt(85.0) / 10.0}, {1e4, 1e3, 5e3}};
}

/// Five-neuron network on [-1, 1]^2 used as an exactly representable target.
/// A random draw (angles uniform on [0, 2pi), biases on [-0.5, 0.5],
/// |c_i| on [0.5, 1.5] with random sign, c0 on [-0.5, 0.5]), stored as
/// literals so every standard library produces the same instance.
inline NetworkParams synthetic2d() {
  NetworkParams p;
  p.d = 2;
  p.c0 = 0.11028523862440565;
  p.c = Vector(5);
  p.c << -1.0245054993559508, -1.2308291994359386, 1.2727278227293937, 1.2384681214374753,
      1.3374325415361503;
  const double biases[5] = {0.46908652940378992, 0.2990905754223786, -0.49759103589108755,
                            0.43326113359521923, -0.12740349257331574};
  const double weights[5][2] = {{-0.82389543897387552, 0.56674183332276162},
                                {0.9932192711676554, 0.11625609395292541},
                                {-0.69146490891090628, 0.72241004958737387},
                                {-0.26767994448207771, 0.96350788648670216},
                                {-0.9525653523994887, -0.30433410819038664}};
  for (int i = 0; i < 5; ++i) {
    NeuronParams nr;
    nr.weight = Vector(2);
    nr.weight << weights[i][0], weights[i][1];
    nr.bias = biases[i];
    p.neurons.push_back(std::move(nr));
  }
  return p;
}

}  // namespace defaults

namespace detail {
inline std::vector<double> json_vec(const nlohmann::json& j, const char* key,
                                    std::vector<double> fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return j.at(key).get<std::vector<double>>();
}
}  // namespace detail

/// Builds one of the named targets: step1d, delta1d, step2d, synthetic2d, custom.
/// Missing parameters fall back to the built-in defaults.
inline TargetFunction builtin_target(const std::string& tag, const nlohmann::json& params = {}) {
  try {
    if (tag == "step1d") {
      auto t = defaults::step1d();
      t.breaks = detail::json_vec(params, "breaks", t.breaks);
      t.values = detail::json_vec(params, "values", t.values);
      if (t.values.empty() || t.breaks.size() != t.values.size() + 1)
        throw ConfigError("target.params: step1d needs len(breaks) == len(values) + 1");
      for (std::size_t j = 0; j + 1 < t.breaks.size(); ++j)
        if (!(t.breaks[j] < t.breaks[j + 1]))
          throw ConfigError("target.params: step1d breaks must be strictly increasing");
      return {tag, t};
    }
    if (tag == "delta1d") {
      auto t = defaults::delta1d();
      t.centers = detail::json_vec(params, "centers", t.centers);
      t.widths = detail::json_vec(params, "widths", t.widths);
      if (t.centers.size() != t.widths.size())
        throw ConfigError("target.params: delta1d centers and widths differ in length");
      return {tag, t};
    }
    if (tag == "step2d") {
      Step2D t;
      if (params.is_object()) {
        t.half_width = params.value("half_width", t.half_width);
        t.inside = params.value("inside", t.inside);
        t.outside = params.value("outside", t.outside);
      }
      return {tag, t};
    }
    if (tag == "synthetic2d") {
      NetworkTarget t{defaults::synthetic2d()};
      if (params.is_object() && params.contains("network"))
        t.generator = network_from_json(params.at("network"));
      return {tag, t};
    }
    if (tag == "custom") return {tag, CustomTarget{}};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("target.params for '" + tag + "': " + e.what());
  }
  throw ConfigError("unknown target tag '" + tag + "'");
}

inline nlohmann::ordered_json to_json(const TargetFunction& t) {
  nlohmann::ordered_json j;
  j["tag"] = t.tag;
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Step1D>) {
          p["breaks"] = v.breaks;
          p["values"] = v.values;
        } else if constexpr (std::is_same_v<T, Delta1D>) {
          p["centers"] = v.centers;
          p["widths"] = v.widths;
        } else if constexpr (std::is_same_v<T, Step2D>) {
          p["half_width"] = v.half_width;
          p["inside"] = v.inside;
          p["outside"] = v.outside;
        } else if constexpr (std::is_same_v<T, NetworkTarget>) {
          p["network"] = to_json(v.generator);
        }
      },
      t.def);
  j["params"] = std::move(p);
  return j;
}

// --- problem specification ---------------------------------------------------

struct GridSampling {
  double h = 0.01;
};

struct DataSampling {
  std::string path;
};

struct ProblemSpec {
  Domain domain;
  TargetFunction target;
  double mu = 1.0;  ///< constant weight function
  std::variant<GridSampling, DataSampling> sampling = GridSampling{};
};

namespace detail {
/// Number of cells per axis for mesh size h; throws unless h divides the edge.
inline std::vector<Eigen::Index> grid_cells(const Domain& dom, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("sampling.h must be positive");
  std::vector<Eigen::Index> cells;
  for (int k = 0; k < dom.dim(); ++k) {
    const double ratio = (dom.upper[k] - dom.lower[k]) / h;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
      throw ConfigError("sampling.h = " + std::to_string(h) + " does not divide edge " +
                        std::to_string(k) + " of the domain");
    cells.push_back(static_cast<Eigen::Index>(rounded));
  }
  return cells;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}
}  // namespace detail

inline void validate(const ProblemSpec& spec) {
  validate(spec.domain);
  if (!(spec.mu >= 0.0) || !std::isfinite(spec.mu)) throw ConfigError("mu must be finite and >= 0");
  if (const auto* g = std::get_if<GridSampling>(&spec.sampling)) {
    detail::grid_cells(spec.domain, g->h);
    if (std::holds_alternative<CustomTarget>(spec.target.def))
      throw ConfigError("target 'custom' requires sampling.data_path");
  }
  if (const auto* nt = std::get_if<NetworkTarget>(&spec.target.def)) {
    if (nt->generator.d != spec.domain.dim())
      throw ConfigError("target network dimension does not match the domain");
  }
}

/// Composite midpoint rule on the uniform grid of mesh size h. Points are
/// ordered with the first coordinate varying fastest; each weight is mu * h^d.
inline WeightedPointSet midpoint_grid(const Domain& dom, double h, double mu,
                                      const TargetFunction& target) {
  const auto cells = detail::grid_cells(dom, h);
  const int d = dom.dim();
  Eigen::Index m = 1;
  double cell_volume = 1.0;
  std::vector<double> hk(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    m *= cells[static_cast<std::size_t>(k)];
    hk[static_cast<std::size_t>(k)] =
        (dom.upper[k] - dom.lower[k]) / static_cast<double>(cells[static_cast<std::size_t>(k)]);
    cell_volume *= hk[static_cast<std::size_t>(k)];
  }
  WeightedPointSet pts;
  pts.kind = PointSetKind::quadrature;
  pts.points.resize(d, m);
  pts.weights = Vector::Constant(m, mu * cell_volume);
  pts.targets.resize(m);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(d), 0);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (int k = 0; k < d; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      pts.points(k, j) = dom.lower[k] + (static_cast<double>(idx[uk]) + 0.5) * hk[uk];
    }
    pts.targets[j] = target(pts.points.col(j));
    for (int k = 0; k < d; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (++idx[uk] < cells[uk]) break;
      idx[uk] = 0;
    }
  }
  return pts;
}

/// Reads "x1,...,xd,u[,w]" rows after a mandatory header line. Without a
/// weight column every weight is mu.
inline WeightedPointSet read_data_csv(const std::string& path, int d, double mu) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("data file '" + path + "' is empty");
  const auto header = detail::split_csv_line(line);
  const auto ncols = header.size();
  if (ncols != static_cast<std::size_t>(d + 1) && ncols != static_cast<std::size_t>(d + 2))
    throw ConfigError("data file '" + path + "': expected " + std::to_string(d + 1) + " or " +
                      std::to_string(d + 2) + " columns, header has " + std::to_string(ncols));
  const bool has_weight = ncols == static_cast<std::size_t>(d + 2);
  std::vector<double> flat;
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != ncols)
      throw ConfigError("data file '" + path + "' line " + std::to_string(lineno) + ": expected " +
                        std::to_string(ncols) + " fields");
    for (const auto& f : fields) {
      try {
        std::size_t used = 0;
        flat.push_back(std::stod(f, &used));
      } catch (const std::exception&) {
        throw ConfigError("data file '" + path + "' line " + std::to_string(lineno) +
                          ": cannot parse '" + f + "'");
      }
    }
    ++rows;
  }
  if (rows == 0) throw ConfigError("data file '" + path + "' has no data rows");
  WeightedPointSet pts;
  pts.kind = PointSetKind::data;
  const auto m = static_cast<Eigen::Index>(rows);
  pts.points.resize(d, m);
  pts.targets.resize(m);
  pts.weights.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double* row = flat.data() + static_cast<std::size_t>(j) * ncols;
    for (int k = 0; k < d; ++k) pts.points(k, j) = row[k];
    pts.targets[j] = row[d];
    pts.weights[j] = has_weight ? row[d + 1] : mu;
  }
  validate(pts);
  return pts;
}

inline WeightedPointSet build_point_set(const ProblemSpec& spec) {
  validate(spec);
  if (const auto* g = std::get_if<GridSampling>(&spec.sampling))
    return midpoint_grid(spec.domain, g->h, spec.mu, spec.target);
  const auto& data = std::get<DataSampling>(spec.sampling);
  return read_data_csv(data.path, spec.domain.dim(), spec.mu);
}

// --- loss ----------------------------------------------------------------------

/// Network values at every point of the set.
inline Vector evaluate_all(const NetworkParams& p, const WeightedPointSet& pts) {
  detail::check_dim(p, pts.dim());
  const Eigen::Index m = pts.size();
  Vector v(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double* x = pts.points.col(j).data();
    double acc = p.c0;
    for (std::size_t i = 0; i < p.neurons.size(); ++i)
      acc += p.c[static_cast<Eigen::Index>(i)] * relu(p.neurons[i].preactivation(x));
    v[j] = acc;
  }
  return v;
}

/// 0.5 * sum_i w_i (u_n(x_i) - u_i)^2, accumulated in point order in long double.
inline double loss(const NetworkParams& p, const WeightedPointSet& pts) {
  detail::check_dim(p, pts.dim());
  long double acc = 0.0L;
  for (Eigen::Index j = 0; j < pts.size(); ++j) {
    const double* x = pts.points.col(j).data();
    double v = p.c0;
    for (std::size_t i = 0; i < p.neurons.size(); ++i)
      v += p.c[static_cast<Eigen::Index>(i)] * relu(p.neurons[i].preactivation(x));
    const long double r = static_cast<long double>(v) - pts.targets[j];
    acc += static_cast<long double>(pts.weights[j]) * r * r;
  }
  return static_cast<double>(0.5L * acc);
}

}  // namespace sggn

#endif  // SGGN_PROBLEM_HPP
