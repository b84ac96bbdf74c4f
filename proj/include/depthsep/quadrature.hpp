#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace depthsep {

enum class PanelRule { composite_simpson, gauss_legendre };

struct QuadratureSpec {
  int nodes_per_wavelength = 20;
  PanelRule panel_rule = PanelRule::gauss_legendre;
  double rel_tol = 1e-4;
  double abs_tol = 0.0;
  int max_refinements = 8;
  std::size_t node_budget = 200'000'000;

  void validate() const {
    if (nodes_per_wavelength < 20) throw std::invalid_argument("nodes_per_wavelength must be >= 20");
    if (!(rel_tol > 0.0 && rel_tol <= 1e-2)) throw std::invalid_argument("rel_tol must lie in (0, 1e-2]");
    if (abs_tol < 0.0) throw std::invalid_argument("abs_tol must be >= 0");
    if (max_refinements < 1) throw std::invalid_argument("max_refinements must be >= 1");
  }
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
};

class ToleranceNotMet : public std::runtime_error {
 public:
  ToleranceNotMet(double coarse, double fine)
      : std::runtime_error("quadrature tolerance not met: coarse=" + std::to_string(coarse) +
                           " fine=" + std::to_string(fine)),
        coarse_(coarse),
        fine_(fine) {}
  double coarse() const { return coarse_; }
  double fine() const { return fine_; }

 private:
  double coarse_, fine_;
};

inline constexpr int kGaussPanelNodes = 6;

struct GaussRule {
  std::vector<double> x, w;  // on [-1, 1]
};

inline GaussRule gauss_legendre_rule(int n) {
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    r.x[n - 1 - i] = z;
    r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

inline const GaussRule& panel_rule_gauss() {
  static const GaussRule rule = gauss_legendre_rule(kGaussPanelNodes);
  return rule;
}

namespace detail {

// One fixed-density pass at `density` nodes per wavelength; each segment gets at
// least `level_mult` panels so refinement always changes the rule.
template <class F>
void fixed_pass(F& f, std::span<const double> cuts, double wavelength, double density, double level_mult,
                PanelRule rule, double& sum, double& abs_sum, std::size_t& evals) {
  const GaussRule& g = panel_rule_gauss();
  const int per_panel = rule == PanelRule::gauss_legendre ? kGaussPanelNodes : 2;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s], b = cuts[s + 1];
    const double len = b - a;
    if (!(len > 0)) continue;
    double panels = level_mult;
    if (std::isfinite(wavelength) && wavelength > 0)
      panels = level_mult * std::max(1.0, std::ceil(len * density / (wavelength * per_panel)));
    const std::size_t np = static_cast<std::size_t>(panels);
    const double h = len / np;
    if (rule == PanelRule::gauss_legendre) {
      for (std::size_t p = 0; p < np; ++p) {
        const double mid = a + (p + 0.5) * h;
        double acc = 0.0, aacc = 0.0;
        for (int k = 0; k < kGaussPanelNodes; ++k) {
          const double v = g.w[k] * f(mid + 0.5 * h * g.x[k]);
          acc += v;
          aacc += std::fabs(v);
        }
        sum += 0.5 * h * acc;
        abs_sum += 0.5 * h * aacc;
      }
      evals += np * kGaussPanelNodes;
    } else {
      // composite Simpson: each panel is two subintervals
      const double q = 0.5 * h;
      double acc = 0.0, aacc = 0.0;
      double left = f(a);
      for (std::size_t p = 0; p < np; ++p) {
        const double x0 = a + p * h;
        const double mid = f(x0 + q);
        const double right = f(p + 1 == np ? b : x0 + h);
        acc += left + 4.0 * mid + right;
        aacc += std::fabs(left) + 4.0 * std::fabs(mid) + std::fabs(right);
        left = right;
      }
      sum += q / 3.0 * acc;
      abs_sum += q / 3.0 * aacc;
      evals += 2 * np + 1;
    }
  }
}

}  // namespace detail

// Integrates f over [a, b] split at the given breakpoints, with panels sized from
// the known oscillation wavelength. Compares successive density doublings.
template <class F>
QuadResult integrate_oscillatory(F&& f, double a, double b, double wavelength, const QuadratureSpec& spec,
                                 std::span<const double> breakpoints = {}) {
  QuadResult out;
  if (!(b > a)) return out;
  std::vector<double> cuts;
  cuts.reserve(breakpoints.size() + 2);
  cuts.push_back(a);
  for (double c : breakpoints)
    if (c > a && c < b) cuts.push_back(c);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double density = spec.nodes_per_wavelength;
  double mult = 1.0;
  double prev = 0.0, prev_abs = 0.0;
  std::size_t evals = 0;
  detail::fixed_pass(f, cuts, wavelength, density, mult, spec.panel_rule, prev, prev_abs, evals);
  double coarse = prev;
  for (int r = 1; r <= spec.max_refinements; ++r) {
    mult *= 2.0;
    double cur = 0.0, cur_abs = 0.0;
    detail::fixed_pass(f, cuts, wavelength, density, mult, spec.panel_rule, cur, cur_abs, evals);
    const double err = std::fabs(cur - prev);
    const double floor = std::max(spec.abs_tol, 256.0 * std::numeric_limits<double>::epsilon() * cur_abs);
    if (err <= std::max(spec.rel_tol * std::fabs(cur), floor)) {
      out.value = cur;
      out.error = err;
      out.evaluations = evals;
      return out;
    }
    coarse = prev;
    prev = cur;
    if (evals > spec.node_budget) break;
  }
  throw ToleranceNotMet(coarse, prev);
}

}  // namespace depthsep
