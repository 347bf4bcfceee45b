#ifndef SGGN_LINE_SEARCH_HPP
#define SGGN_LINE_SEARCH_HPP

#include <algorithm>
#include <cmath>
#include <limits>

namespace sggn {

struct LineSearchOptions {
  double gamma_max = 1e3;
  int max_expansions = 60;  ///< doubling / halving probes while bracketing
  double rel_tol = 1e-4;    ///< golden-section stops at width rel_tol * bracket end
};

struct LineSearchResult {
  double gamma = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Approximate argmin of phi over [0, gamma_max].
///
/// Probes gamma = 1, then doubles while phi keeps decreasing or halves until
/// a descent point appears, and refines the resulting bracket by golden
/// section. The returned point is the best one evaluated, so its value never
/// exceeds phi(0). Non-finite values count as +inf.
template <class Objective>
LineSearchResult line_search(Objective&& phi, const LineSearchOptions& opt = {}) {
  LineSearchResult best;
  auto eval = [&](double g) {
    double v = phi(g);
    if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    ++best.evaluations;
    if (v < best.value) {
      best.value = v;
      best.gamma = g;
    }
    return v;
  };
  best.value = std::numeric_limits<double>::infinity();
  const double f0 = eval(0.0);
  if (!(opt.gamma_max > 0.0)) return best;

  double lo = 0.0;
  double hi = 0.0;
  double probe = std::min(1.0, opt.gamma_max);
  double fprobe = eval(probe);
  if (fprobe < f0) {
    double mid = probe;
    double fmid = fprobe;
    hi = mid;
    for (int it = 0; it < opt.max_expansions; ++it) {
      if (mid >= opt.gamma_max) {
        hi = opt.gamma_max;
        break;
      }
      const double next = std::min(2.0 * mid, opt.gamma_max);
      const double fnext = eval(next);
      hi = next;
      if (fnext >= fmid) break;
      lo = mid;
      mid = next;
      fmid = fnext;
    }
  } else {
    bool found = false;
    hi = probe;
    for (int it = 0; it < opt.max_expansions; ++it) {
      const double mid = 0.5 * hi;
      if (eval(mid) < f0) {
        found = true;
        break;
      }
      hi = mid;
    }
    if (!found) return best;
  }

  // golden section on [lo, hi]
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double tol = opt.rel_tol * hi;
  double a = lo;
  double b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = eval(d);
    }
  }
  return best;
}

}  // namespace sggn

#endif  // SGGN_LINE_SEARCH_HPP
