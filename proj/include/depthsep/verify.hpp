#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "depthsep/hardfn.hpp"
#include "depthsep/netbuild.hpp"
#include "depthsep/parallel.hpp"
#include "depthsep/radial.hpp"
#include "depthsep/specfun.hpp"
#include "depthsep/specfun_mp.hpp"

namespace depthsep {

enum class Verdict { hard_pass, informational_pass, informational_fail, fail };

inline std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::hard_pass: return "hard_pass";
    case Verdict::informational_pass: return "informational_pass";
    case Verdict::informational_fail: return "informational_fail";
    default: return "fail";
  }
}

struct LemmaReport {
  std::string lemma_id;
  std::vector<std::pair<std::string, std::string>> params;
  double measured = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // positive = satisfied
  Verdict verdict = Verdict::fail;
  std::string notes;

  std::string params_string() const {
    std::string s;
    for (const auto& [k, v] : params) s += (s.empty() ? "" : ";") + k + "=" + v;
    return s;
  }
  bool hard() const { return verdict == Verdict::hard_pass || verdict == Verdict::fail; }
  bool failed_hard() const { return verdict == Verdict::fail; }
};

// Which checks may be asserted: only those whose hypotheses are fully explicit.
struct CheckInfo {
  std::string id;
  bool hard;
  std::string condition;  // when hard depends on parameters
};

inline const std::vector<CheckInfo>& check_table() {
  static const std::vector<CheckInfo> t = {
      {"rd_bounds", true, ""},
      {"lipmag", true, ""},
      {"besapprox", true, "d >= 2, x >= d"},
      {"besbound", true, "d >= 2, r >= sqrt(d)"},
      {"besind", true, "beta d >= 127"},
      {"density_norm", true, ""},
      {"flat", false, "alpha above an unspecified constant"},
      {"nothinsh", true, "N >= 100 alpha d^(3/2)"},
      {"nothinsh2", false, "alpha, d above unspecified constants"},
      {"bigmass", false, "unspecified constants"},
      {"signschoice", false, "unspecified constant c"},
      {"lipapprox", true, "d >= 2"},
      {"fgg_identity", true, ""},
      {"prop_approx", true, ""},
  };
  return t;
}

inline const CheckInfo& check_info(const std::string& id) {
  for (const auto& c : check_table())
    if (c.id == id) return c;
  throw std::invalid_argument("unknown check: " + id);
}

// accepts "nothinsh" or "check_nothinsh"
inline std::string normalize_check_id(std::string id) {
  if (id.rfind("check_", 0) == 0) id = id.substr(6);
  check_info(id);
  return id;
}

namespace detail {

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline LemmaReport make_report(const std::string& id, std::vector<std::pair<std::string, std::string>> params,
                               double measured, double bound, double margin, bool hard, std::string notes = {}) {
  LemmaReport r;
  r.lemma_id = id;
  r.params = std::move(params);
  r.measured = measured;
  r.bound = bound;
  r.margin = std::isnan(margin) ? -std::numeric_limits<double>::infinity() : margin;
  const bool ok = r.margin >= 0.0;
  r.verdict = hard ? (ok ? Verdict::hard_pass : Verdict::fail)
                   : (ok ? Verdict::informational_pass : Verdict::informational_fail);
  r.notes = std::move(notes);
  return r;
}

struct McStats {
  double mean = 0.0, std_err = 0.0;
};

inline McStats mc_stats(const std::vector<double>& v) {
  McStats s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  for (double x : v) s.mean += x;
  s.mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std_err = v.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  return s;
}

}  // namespace detail

// ---- special-function checks ----

inline LemmaReport check_rd_bounds(int d_max = 200) {
  double worst = 0.0;  // max of (sqrt d / 5) / R_d and R_d / (sqrt d / 2)
  int at = 1;
  for (int d = 1; d <= d_max; ++d) {
    const double R = unit_ball_radius(d), s = std::sqrt(static_cast<double>(d));
    const double q = std::max(s / 5.0 / R, R / (s / 2.0));
    if (q > worst) worst = q, at = d;
  }
  return detail::make_report("rd_bounds", {{"d_max", std::to_string(d_max)}}, worst, 1.0, 1.0 - worst, true,
                             "tightest at d=" + std::to_string(at));
}

inline LemmaReport check_lipmag(double nu_max = 20.0, double nu_step = 0.25, double x_max = 100.0,
                                double x_step = 0.01) {
  double max_abs = 0.0, max_slope = 0.0;
  const int nx = static_cast<int>(std::lround(x_max / x_step));
  for (double nu = 0.0; nu <= nu_max + 1e-12; nu += nu_step) {
    const BesselJ J(nu);
    double prev = J(0.0);
    max_abs = std::max(max_abs, std::fabs(prev));
    for (int i = 1; i <= nx; ++i) {
      const double x0 = (i - 1) * x_step, x1 = i * x_step;
      const double cur = J(x1);
      max_abs = std::max(max_abs, std::fabs(cur));
      if (nu >= 1.0 && x0 >= 3.0 * nu) max_slope = std::max(max_slope, std::fabs(cur - prev) / (x1 - x0));
      prev = cur;
    }
  }
  const double measured = std::max(max_abs, max_slope - 1e-6);
  return detail::make_report("lipmag", {{"nu_max", detail::num(nu_max)}, {"x_max", detail::num(x_max)}}, measured,
                             1.0, 1.0 - measured, true,
                             "max|J|=" + detail::num(max_abs) + " max slope=" + detail::num(max_slope));
}

// |J_{d/2}(x) - asymptotic form| <= x^{-3/2} + slack, J from the high-precision series
inline LemmaReport check_besapprox(int d_min = 2, int d_max = 20, double x_step = 0.25, double slack = 1e-9,
                                   unsigned threads = 0) {
  struct Pt {
    int d;
    double x;
  };
  std::vector<Pt> pts;
  for (int d = d_min; d <= d_max; ++d) {
    const double lo = std::max(static_cast<double>(d), 30.0), hi = 10.0 * d;
    for (double x = lo; x <= hi + 1e-12; x += x_step) pts.push_back({d, x});
  }
  std::vector<double> ratio(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t i) {
    const double j = bessel_j_series_mp(0.5 * pts[i].d, pts[i].x);
    ratio[i] = std::fabs(j - krasikov_approx(pts[i].d, pts[i].x)) / (std::pow(pts[i].x, -1.5) + slack);
  });
  double worst = 0.0;
  for (double r : ratio) worst = std::max(worst, r);
  return detail::make_report("besapprox", {{"d", std::to_string(d_min) + ".." + std::to_string(d_max)}}, worst, 1.0,
                             1.0 - worst, true, std::to_string(pts.size()) + " grid points");
}

inline LemmaReport check_besbound(int d_min = 2, int d_max = 10, int points = 4000) {
  double worst = 0.0;
  for (int d = d_min; d <= d_max; ++d) {
    const Ball ball(d);
    const double s = std::sqrt(static_cast<double>(d));
    for (int i = 0; i <= points; ++i) {
      const double r = s + (10.0 * s - s) * i / points;
      const double j = ball.bessel(r);
      worst = std::max(worst, j * j / (1.3 / (r * s)));
    }
  }
  const std::string note = std::string("tightness (max ratio) ") + (worst >= 0.5 ? ">= 0.5" : "< 0.5");
  return detail::make_report("besbound", {{"d", std::to_string(d_min) + ".." + std::to_string(d_max)}}, worst, 1.0,
                             1.0 - worst, true, note);
}

struct BesindParts {
  double thresholded = 0.0, plain = 0.0;
  std::size_t crossings = 0;
};

// int_{bd}^{2bd} J^2_{d/2}(x)/x 1[J^2 >= 1/(20x)] dx, threshold crossings located by bisection
inline BesindParts besind_integral(int d, double beta, const QuadratureSpec& spec) {
  const BesselJ J(0.5 * d);
  const double a = beta * d, b = 2.0 * beta * d;
  auto q = [&](double x) {
    const double j = J(x);
    return j * j - 1.0 / (20.0 * x);
  };
  const double h = 2.0 * std::numbers::pi / 40.0;
  const auto n = static_cast<std::size_t>(std::ceil((b - a) / h));
  std::vector<double> bp;
  double x0 = a, q0 = q(a);
  for (std::size_t i = 1; i <= n; ++i) {
    const double x1 = i == n ? b : a + (b - a) * i / n;
    const double q1 = q(x1);
    if ((q0 >= 0) != (q1 >= 0)) {
      double lo = x0, hi = x1;
      const bool lo_pos = q0 >= 0;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((q(mid) >= 0) == lo_pos ? lo : hi) = mid;
      }
      bp.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    q0 = q1;
  }
  BesindParts out;
  out.crossings = bp.size();
  // J^2 oscillates with period pi
  auto plain = [&](double x) {
    const double j = J(x);
    return j * j / x;
  };
  std::vector<double> edges{a};
  edges.insert(edges.end(), bp.begin(), bp.end());
  edges.push_back(b);
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double lo = edges[k], hi = edges[k + 1];
    if (q(0.5 * (lo + hi)) < 0) continue;
    out.thresholded += integrate_oscillatory(plain, lo, hi, std::numbers::pi, spec).value;
  }
  out.plain = integrate_oscillatory(plain, a, b, std::numbers::pi, spec).value;
  return out;
}

inline LemmaReport check_besind(int d, double beta, const QuadratureSpec& spec) {
  const BesindParts p = besind_integral(d, beta, spec);
  const double bound = 0.005 / (beta * d);
  std::string notes = "crossings=" + std::to_string(p.crossings) + " unthresholded=" + detail::num(p.plain);
  if (p.plain < p.thresholded) notes += " (monotonicity violated)";
  const double margin = p.plain < p.thresholded ? -1.0 : p.thresholded - bound;
  return detail::make_report("besind", {{"d", std::to_string(d)}, {"beta", detail::num(beta)}}, p.thresholded, bound,
                             margin, beta * d >= 127.0, notes);
}

// quadrature mass up to r_max plus certified tail, worst over the listed dimensions
inline LemmaReport check_density_norm(const std::vector<int>& dims, double tail_tol, const QuadratureSpec& spec) {
  double worst = 0.0;
  std::string notes;
  for (int d : dims) {
    const RadialDensity dens = build_density(d, tail_tol, spec);
    const double m = radial_integrate(indicator_profile(0.0, dens.r_max), RadialWeight::phi_squared, d, spec);
    const double total = m + dens.tail_bound;
    worst = std::max(worst, std::fabs(total - 1.0));
    notes += "d=" + std::to_string(d) + ":" + detail::num(total) + " ";
  }
  std::string ds;
  for (int d : dims) ds += (ds.empty() ? "" : "/") + std::to_string(d);
  return detail::make_report("density_norm", {{"d", ds}, {"tail_tol", detail::num(tail_tol)}}, worst, 1e-3,
                             1e-3 - worst, true, notes);
}

// ---- hard-function checks ----

inline std::vector<std::pair<std::string, std::string>> family_params(const IntervalFamily& f) {
  return {{"d", std::to_string(f.d)}, {"alpha", detail::num(f.alpha)}, {"N", std::to_string(f.N)}};
}

inline LemmaReport check_flat(const IntervalFamily& fam) {
  const Ball ball(fam.d);
  const int pts = std::max(fam.grid_points, 20);
  double worst = 0.0;
  std::size_t sign_changes = 0;
  for (std::size_t i : fam.good_indices()) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    int sgn = 0;
    for (int k = 0; k < pts; ++k) {
      const double p = ball.phi(fam.lo(i) + (fam.hi(i) - fam.lo(i)) * k / (pts - 1));
      const int s = p > 0 ? 1 : (p < 0 ? -1 : 0);
      if (k == 0) sgn = s;
      if (s != sgn || s == 0) ++sign_changes;
      lo = std::min(lo, std::fabs(p));
      hi = std::max(hi, std::fabs(p));
    }
    worst = std::max(worst, hi / lo);
  }
  if (sign_changes) worst = std::numeric_limits<double>::infinity();
  const double bound = 1.0 + 1.0 / std::sqrt(static_cast<double>(fam.d));
  return detail::make_report("flat", family_params(fam), worst, bound, bound - worst, false,
                             "sign changes=" + std::to_string(sign_changes));
}

inline LemmaReport check_nothinsh(const IntervalFamily& fam, const QuadratureSpec& spec, unsigned threads = 0) {
  const Ball ball(fam.d);
  const std::vector<std::size_t> good = fam.good_indices();
  std::vector<double> ratio(good.size());
  parallel_for(good.size(), threads, [&](std::size_t g) {
    const double lo = fam.lo(good[g]), hi = fam.hi(good[g]);
    const double low = low_freq_mass_q(indicator_profile(lo, hi), ball, 2.0 * ball.R(), spec).value;
    ratio[g] = low / shell_volume(fam.d, lo, hi);
  });
  double worst = 0.0;
  for (double r : ratio) worst = std::max(worst, r);
  const bool hard = fam.N >= default_interval_count(fam.d, fam.alpha);
  return detail::make_report("nothinsh", family_params(fam), worst, 0.5, 0.5 - worst, hard,
                             std::to_string(good.size()) + " good intervals; max low-frequency fraction");
}

inline LemmaReport check_nothinsh2(const IntervalFamily& fam, const ShellSpectra& sp) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < sp.good.size(); ++g) {
    const double w = sp.weighted_mass[g];
    if (w > 0) worst = std::min(worst, (w - sp.interval_low[g]) / w);
  }
  if (sp.good.empty()) worst = 0.0;
  const double proof_side = 0.5 * (1.0 - 4.0 / std::sqrt(static_cast<double>(fam.d)));
  return detail::make_report("nothinsh2", family_params(fam), worst, 0.25, worst - 0.25, false,
                             "min high-frequency fraction; intermediate bound (1-4/sqrt d)/2 = " +
                                 detail::num(proof_side));
}

inline LemmaReport check_bigmass(const HardFunction& h, const QuadratureSpec& spec) {
  const double m = mass_report(h, spec);
  const double bound = 0.003 / h.family.alpha;
  return detail::make_report("bigmass", family_params(h.family), m, bound, m - bound, false);
}

inline LemmaReport check_signschoice(const IntervalFamily& fam, const SignSearch& s) {
  double mean = 0.0;
  for (double v : s.high_freq) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(1, s.high_freq.size()));
  const double total = s.spectra.total_mass;
  const double frac = total > 0 ? mean / total : 0.0;
  auto params = family_params(fam);
  params.push_back({"trials", std::to_string(s.high_freq.size())});
  return detail::make_report("signschoice", params, frac, 0.25, frac - 0.25, false,
                             "mean high-frequency mass over trials / total; best=" +
                                 detail::num(s.best.high_freq_mass / total));
}

inline double lipapprox_gap(const HardFunction& h, const QuadratureSpec& spec, double* ramps_only = nullptr) {
  const Ball ball(h.family.d);
  RadialProfile p = surrogate_profile(h);
  p.eval = [&h](double r) {
    const double e = eval_surrogate(h, r) - eval_gtilde(h, r);
    return e * e;
  };
  p.lipschitz_hint.reset();
  p.piecewise_linear = false;
  p.scale = 1.0 / ball.R();
  const double full = radial_integrate_q(p, RadialWeight::phi_squared, ball, spec).value;
  if (ramps_only) {
    double sum = 0.0;
    const double ramp = 1.0 / h.surrogate_lipschitz;
    for (std::size_t i : h.family.good_indices()) {
      const double lo = h.family.lo(i), hi = h.family.hi(i);
      const double len = std::min(ramp, 0.5 * (hi - lo));
      for (auto [a, b] : {std::pair{lo, lo + len}, std::pair{hi - len, hi}}) {
        RadialProfile q = p;
        q.lo = a;
        q.hi = b;
        q.breakpoints.clear();
        sum += radial_integrate_q(q, RadialWeight::phi_squared, ball, spec).value;
      }
    }
    *ramps_only = sum;
  }
  return full;
}

inline LemmaReport check_lipapprox(const HardFunction& h, const QuadratureSpec& spec) {
  double ramps = 0.0;
  const double gap = lipapprox_gap(h, spec, &ramps);
  const double bound = 3.0 / (h.family.alpha * h.family.alpha * std::sqrt(static_cast<double>(h.family.d)));
  return detail::make_report("lipapprox", family_params(h.family), gap, bound, bound - gap, true,
                             "ramps only=" + detail::num(ramps));
}

// ---- Monte Carlo checks ----

struct FggPair {
  std::string name;
  RadialProfile diff;  // f - g as a radial profile
  double sup_sq = 1.0;  // bound on (f - g)^2
};

inline LemmaReport check_fgg_identity(const FggPair& pair, const RadialDensity& dens, std::size_t n_mc,
                                      std::uint64_t seed, const QuadratureSpec& spec) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(n_mc);
  for (auto& x : v) {
    const std::vector<double> pt = sample_mu(dens, rng);
    const double e = pair.diff(vector_norm(pt));
    x = e * e;
  }
  const detail::McStats mc = detail::mc_stats(v);
  RadialProfile sq = pair.diff;
  sq.eval = [f = pair.diff.eval](double r) {
    const double e = f(r);
    return e * e;
  };
  sq.lipschitz_hint.reset();
  sq.piecewise_linear = false;
  const double quad = radial_integrate(sq, RadialWeight::phi_squared, dens.d, spec);
  const double diff = std::fabs(mc.mean - quad);
  const double allow = 3.0 * mc.std_err + dens.tail_bound * pair.sup_sq;
  return detail::make_report("fgg_identity",
                             {{"pair", pair.name}, {"d", std::to_string(dens.d)}, {"n_mc", std::to_string(n_mc)}},
                             diff, allow, allow - diff, true,
                             "mc=" + detail::num(mc.mean) + "+-" + detail::num(mc.std_err) + " quad=" + detail::num(quad));
}

inline std::vector<FggPair> default_fgg_pairs(const HardFunction& h, const RadialDensity& dens) {
  std::vector<FggPair> out;
  {
    FggPair p;
    p.name = "equal";
    p.diff = zero_profile(0.0, dens.r_max);
    p.sup_sq = 0.0;
    out.push_back(std::move(p));
  }
  {
    FggPair p;
    p.name = "surrogate_vs_zero";
    p.diff = surrogate_profile(h);
    out.push_back(std::move(p));
  }
  {
    FggPair p;
    p.name = "gauss_vs_ball";
    const double Rd = unit_ball_radius(dens.d);
    p.diff.lo = 0.0;
    p.diff.hi = dens.r_max;
    p.diff.eval = [Rd](double r) { return std::exp(-r * r) - (r <= Rd ? 1.0 : 0.0); };
    p.diff.breakpoints = {Rd};
    p.diff.scale = 0.5;
    out.push_back(std::move(p));
  }
  return out;
}

struct PropApproxResult {
  LemmaReport report;
  double distance = 0.0, distance_se = 0.0;
  double out_min = 0.0, out_max = 0.0;
  double max_surrogate_gap = 0.0;  // max |net - surrogate| over the sample
  std::size_t width = 0;
  double width_bound = 0.0;
};

inline PropApproxResult check_prop_approx(const HardFunction& h, const ThreeLayerNet& net, double delta,
                                          const RadialDensity& dens, std::size_t n_mc, std::uint64_t seed,
                                          const QuadratureSpec& spec, unsigned threads = 0) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> pts(n_mc);
  for (auto& p : pts) p = sample_mu(dens, rng);
  std::vector<double> sq(n_mc), out(n_mc), gap(n_mc);
  parallel_for(n_mc, threads, [&](std::size_t i) {
    const double r = vector_norm(pts[i]);
    out[i] = eval_three_layer(net, pts[i]);
    const double e = out[i] - eval_gtilde(h, r);
    sq[i] = e * e;
    gap[i] = std::fabs(out[i] - eval_surrogate(h, r));
  });
  PropApproxResult res;
  const detail::McStats mc = detail::mc_stats(sq);
  res.distance = std::sqrt(mc.mean);
  res.distance_se = mc.mean > 0 ? mc.std_err / (2.0 * res.distance) : 0.0;
  res.out_min = *std::min_element(out.begin(), out.end());
  res.out_max = *std::max_element(out.begin(), out.end());
  res.max_surrogate_gap = *std::max_element(gap.begin(), gap.end());
  res.width = net.width();
  res.width_bound = prop_approx_width_bound(h.family.d, h.family.alpha, h.family.N, delta, net.act.c_sigma);

  const double bound = std::sqrt(3.0) / (h.family.alpha * std::pow(h.family.d, 0.25)) + delta;
  const double measured = res.distance + 3.0 * res.distance_se;
  // quadrature side: ||net - g~|| <= ||net - surrogate|| + ||surrogate - g~||
  const double quad_side = res.max_surrogate_gap + std::sqrt(lipapprox_gap(h, spec));
  double margin = bound - measured;
  std::string notes = "distance=" + detail::num(res.distance) + "+-" + detail::num(res.distance_se) +
                      " quadrature bound=" + detail::num(quad_side) + " width=" + std::to_string(res.width) +
                      "/" + detail::num(res.width_bound) + " range=[" + detail::num(res.out_min) + "," +
                      detail::num(res.out_max) + "]";
  if (static_cast<double>(res.width) > res.width_bound) margin = std::min(margin, res.width_bound - res.width);
  if (res.out_min < -2.0 || res.out_max > 2.0)
    margin = std::min(margin, 2.0 - std::max(-res.out_min, res.out_max));
  auto params = family_params(h.family);
  params.push_back({"delta", detail::num(delta)});
  params.push_back({"n_mc", std::to_string(n_mc)});
  res.report = detail::make_report("prop_approx", params, measured, bound, margin, true, notes);
  return res;
}

// ---- suite ----

struct SuiteConfig {
  int d = 4;
  double alpha = 25.0;
  std::size_t N = 0;  // 0: 100 alpha d^(3/2) rounded up
  int grid_points = 21;
  std::uint64_t seed = 1;
  int sign_trials = 32;
  double delta = 0.05;
  std::size_t n_mc = 100000;
  double tail_tol = 1e-3;
  double radial_rel_tol = 1e-4;
  double nested_rel_tol = 1e-3;
  int nodes_per_wavelength = 20;
  int rd_dmax = 200;
  unsigned threads = 0;

  std::size_t interval_count() const { return N ? N : default_interval_count(d, alpha); }
  QuadratureSpec radial_spec() const {
    QuadratureSpec s;
    s.rel_tol = radial_rel_tol;
    s.nodes_per_wavelength = nodes_per_wavelength;
    return s;
  }
  QuadratureSpec nested_spec() const {
    QuadratureSpec s = radial_spec();
    s.rel_tol = nested_rel_tol;
    return s;
  }
  void validate() const {
    if (d < 2) throw std::invalid_argument("d must be >= 2");
    if (!(alpha >= 1.0)) throw std::invalid_argument("alpha must be >= 1");
    if (grid_points < 20) throw std::invalid_argument("grid_points must be >= 20");
    if (sign_trials < 1) throw std::invalid_argument("sign_trials must be >= 1");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (n_mc < 2) throw std::invalid_argument("n_mc must be >= 2");
    if (!(tail_tol > 0.0 && tail_tol <= 1e-2)) throw std::invalid_argument("tail_tol must lie in (0, 0.01]");
    if (rd_dmax < 1) throw std::invalid_argument("rd_dmax must be >= 1");
    radial_spec().validate();
    nested_spec().validate();
  }
};

struct HardBuild {
  HardFunction hard;
  SignSearch search;
};

inline HardBuild build_hard(const SuiteConfig& cfg) {
  IntervalFamily fam = build_family(cfg.d, cfg.alpha, cfg.interval_count(), cfg.grid_points);
  HardBuild b;
  b.search = sign_search(fam, cfg.sign_trials, cfg.nested_spec(), cfg.seed, cfg.threads);
  b.hard = make_hard_function(std::move(fam), b.search.best);
  return b;
}

// stream ids keep every Monte Carlo check on its own generator
enum : std::uint64_t { kStreamFgg = 101, kStreamProp = 202 };

inline std::vector<LemmaReport> run_suite(const SuiteConfig& cfg, const std::vector<std::string>& only = {},
                                          std::ostream* log = nullptr) {
  cfg.validate();
  std::vector<std::string> ids;
  for (const auto& s : only) ids.push_back(normalize_check_id(s));
  auto want = [&](const char* id) { return ids.empty() || std::find(ids.begin(), ids.end(), id) != ids.end(); };
  auto note = [&](const std::string& s) {
    if (log) *log << s << std::endl;
  };
  const QuadratureSpec rs = cfg.radial_spec(), ns = cfg.nested_spec();
  std::vector<LemmaReport> out;

  if (want("rd_bounds")) out.push_back(check_rd_bounds(cfg.rd_dmax));
  if (want("lipmag")) out.push_back(check_lipmag());
  if (want("besapprox")) out.push_back(check_besapprox(2, 20, 0.25, 1e-9, cfg.threads));
  if (want("besbound")) out.push_back(check_besbound());
  if (want("besind"))
    for (auto [d, beta] : {std::pair{2, 64.0}, std::pair{4, 32.0}, std::pair{2, 128.0}})
      out.push_back(check_besind(d, beta, rs));
  if (want("density_norm")) out.push_back(check_density_norm({2, 3, 4, 6}, cfg.tail_tol, rs));

  const bool need_family = want("flat") || want("nothinsh");
  const bool need_hard = want("nothinsh2") || want("bigmass") || want("signschoice") || want("lipapprox") ||
                         want("fgg_identity") || want("prop_approx");
  std::optional<IntervalFamily> fam;
  std::optional<HardBuild> hb;
  if (need_hard) {
    note("building hard function and sign spectra");
    hb = build_hard(cfg);
    fam = hb->hard.family;
  } else if (need_family) {
    fam = build_family(cfg.d, cfg.alpha, cfg.interval_count(), cfg.grid_points);
  }
  if (want("flat")) out.push_back(check_flat(*fam));
  if (want("nothinsh")) {
    note("low-frequency mass per good interval");
    out.push_back(check_nothinsh(*fam, ns, cfg.threads));
  }
  if (hb) {
    const HardFunction& h = hb->hard;
    if (want("nothinsh2")) out.push_back(check_nothinsh2(h.family, hb->search.spectra));
    if (want("signschoice")) out.push_back(check_signschoice(h.family, hb->search));
    if (want("bigmass")) out.push_back(check_bigmass(h, rs));
    if (want("lipapprox")) out.push_back(check_lipapprox(h, rs));
    if (want("fgg_identity") || want("prop_approx")) {
      const RadialDensity dens = build_density(cfg.d, cfg.tail_tol, rs);
      if (want("fgg_identity")) {
        const auto pairs = default_fgg_pairs(h, dens);
        for (std::size_t k = 0; k < pairs.size(); ++k)
          out.push_back(check_fgg_identity(pairs[k], dens, cfg.n_mc, derive_seed(cfg.seed, kStreamFgg + k), rs));
      }
      if (want("prop_approx")) {
        note("compiling the three-layer network");
        const ThreeLayerNet net = build_prop_approx(h, Activation::relu(), cfg.delta);
        out.push_back(check_prop_approx(h, net, cfg.delta, dens, cfg.n_mc, derive_seed(cfg.seed, kStreamProp), rs,
                                        cfg.threads)
                          .report);
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const LemmaReport& a, const LemmaReport& b) {
    return std::pair(a.lemma_id, a.params_string()) < std::pair(b.lemma_id, b.params_string());
  });
  return out;
}

inline void write_reports_csv(const std::vector<LemmaReport>& reps, std::ostream& os) {
  os << "lemma_id,params,measured,bound,margin,verdict\n";
  for (const auto& r : reps)
    os << r.lemma_id << ',' << r.params_string() << ',' << detail::num(r.measured) << ',' << detail::num(r.bound)
       << ',' << detail::num(r.margin) << ',' << verdict_name(r.verdict) << '\n';
}

inline void write_summary(const std::vector<LemmaReport>& reps, std::ostream& os) {
  for (const auto& r : reps) {
    char line[512];
    std::snprintf(line, sizeof line, "%-20s %-18s measured=%-12.6g bound=%-12.6g margin=%-12.6g", r.lemma_id.c_str(),
                  verdict_name(r.verdict).c_str(), r.measured, r.bound, r.margin);
    os << line << ' ' << r.params_string();
    if (!r.notes.empty()) os << "  [" << r.notes << ']';
    os << '\n';
  }
}

inline bool any_hard_failure(const std::vector<LemmaReport>& reps) {
  return std::any_of(reps.begin(), reps.end(), [](const LemmaReport& r) { return r.failed_hard(); });
}

}  // namespace depthsep
