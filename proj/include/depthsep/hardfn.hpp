#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthsep/parallel.hpp"
#include "depthsep/quadrature.hpp"
#include "depthsep/radial.hpp"

namespace depthsep {

inline std::size_t default_interval_count(int d, double alpha) {
  return static_cast<std::size_t>(std::ceil(100.0 * alpha * d * std::sqrt(static_cast<double>(d)) - 1e-9));
}

struct IntervalFamily {
  int d = 0;
  double alpha = 0.0;
  std::size_t N = 0;
  double base = 0.0;  // alpha * sqrt(d)
  int grid_points = 0;
  std::vector<std::uint8_t> good;

  double width() const { return base / static_cast<double>(N); }
  // zero-based: interval i covers [lo(i), hi(i))
  double lo(std::size_t i) const { return (1.0 + static_cast<double>(i) / N) * base; }
  double hi(std::size_t i) const { return (1.0 + static_cast<double>(i + 1) / N) * base; }

  std::optional<std::size_t> locate(double r) const {
    if (!(r >= lo(0)) || !(r < hi(N - 1))) return std::nullopt;
    double t = std::floor((r / base - 1.0) * N);
    std::size_t i = static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(N - 1)));
    while (i > 0 && r < lo(i)) --i;
    while (i + 1 < N && r >= hi(i)) ++i;
    return i;
  }

  std::size_t good_count() const { return static_cast<std::size_t>(std::count(good.begin(), good.end(), 1)); }

  std::vector<std::size_t> good_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < N; ++i)
      if (good[i]) out.push_back(i);
    return out;
  }
};

// J^2_{d/2}(2 pi R x) >= 1/(80 pi R x) on the whole interval, certified from a grid
// plus the 2 pi R Lipschitz bound of x -> J_{d/2}(2 pi R x).
inline bool interval_is_good(const Ball& ball, double lo, double hi, int grid_points) {
  const double R = ball.R();
  const double lip = 2.0 * std::numbers::pi * R;
  const int cells = std::max(grid_points, 20) - 1;
  const double h = (hi - lo) / cells;
  double prev = std::fabs(ball.bessel(lo));
  for (int k = 1; k <= cells; ++k) {
    const double a = lo + (k - 1) * h;
    const double b = k == cells ? hi : lo + k * h;
    const double cur = std::fabs(ball.bessel(b));
    const double floor_abs = 0.5 * (prev + cur - lip * (b - a));
    const double need = 1.0 / (80.0 * std::numbers::pi * R * a);
    if (floor_abs <= 0.0 || floor_abs * floor_abs < need) return false;
    prev = cur;
  }
  return true;
}

inline IntervalFamily build_family(int d, double alpha, std::size_t N, int grid_points = 21) {
  if (d < 2) throw std::invalid_argument("build_family: d must be >= 2");
  if (!(alpha >= 1.0)) throw std::invalid_argument("build_family: alpha must be >= 1");
  if (N < 1) throw std::invalid_argument("build_family: N must be >= 1");
  if (grid_points < 20) throw std::invalid_argument("build_family: at least 20 grid points");
  IntervalFamily f;
  f.d = d;
  f.alpha = alpha;
  f.N = N;
  f.base = alpha * std::sqrt(static_cast<double>(d));
  f.grid_points = grid_points;
  f.good.assign(N, 0);
  const Ball ball(d);
  for (std::size_t i = 0; i < N; ++i) f.good[i] = interval_is_good(ball, f.lo(i), f.hi(i), grid_points) ? 1 : 0;
  return f;
}

struct SignVector {
  std::vector<std::int8_t> eps;
  double high_freq_mass = 0.0;
  std::uint64_t seed = 0;
  std::size_t trial = 0;
};

struct HardFunction {
  IntervalFamily family;
  SignVector signs;
  double surrogate_lipschitz = 0.0;  // slope of the surrogate ramps per unit radius
};

inline std::vector<std::int8_t> trial_signs(std::size_t N, std::uint64_t seed, std::size_t trial) {
  std::mt19937_64 gen(derive_seed(seed, trial));
  std::vector<std::int8_t> eps(N);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < N; ++i) {
    if (i % 64 == 0) bits = gen();
    eps[i] = (bits >> (i % 64)) & 1 ? 1 : -1;
  }
  return eps;
}

inline double vector_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double eval_gtilde(const HardFunction& h, double r) {
  const auto i = h.family.locate(r);
  if (!i || !h.family.good[*i]) return 0.0;
  return h.signs.eps[*i];
}

inline double eval_gtilde(const HardFunction& h, std::span<const double> x) { return eval_gtilde(h, vector_norm(x)); }

inline double eval_surrogate(const HardFunction& h, double r) {
  const auto i = h.family.locate(r);
  if (!i || !h.family.good[*i]) return 0.0;
  const double dist = std::min(r - h.family.lo(*i), h.family.hi(*i) - r);
  return h.signs.eps[*i] * std::min(1.0, h.surrogate_lipschitz * std::max(dist, 0.0));
}

inline double eval_surrogate(const HardFunction& h, std::span<const double> x) {
  return eval_surrogate(h, vector_norm(x));
}

inline HardFunction make_hard_function(IntervalFamily family, SignVector signs) {
  if (signs.eps.size() != family.N) throw std::invalid_argument("sign vector length differs from N");
  HardFunction h;
  h.surrogate_lipschitz = static_cast<double>(family.N);
  h.family = std::move(family);
  h.signs = std::move(signs);
  return h;
}

inline RadialProfile gtilde_profile(const HardFunction& h) {
  RadialProfile p;
  p.lo = h.family.base;
  p.hi = 2.0 * h.family.base;
  p.eval = [&h](double r) { return eval_gtilde(h, r); };
  for (std::size_t i = 0; i < h.family.N; ++i) p.breakpoints.push_back(h.family.lo(i));
  p.piecewise_linear = true;
  return p;
}

inline std::vector<double> surrogate_breakpoints(const HardFunction& h) {
  std::vector<double> bp;
  const double ramp = 1.0 / h.surrogate_lipschitz;
  for (std::size_t i = 0; i < h.family.N; ++i) {
    if (!h.family.good[i]) continue;
    const double lo = h.family.lo(i), hi = h.family.hi(i);
    bp.push_back(lo);
    if (2.0 * ramp < hi - lo) {
      bp.push_back(lo + ramp);
      bp.push_back(hi - ramp);
    } else {
      bp.push_back(0.5 * (lo + hi));
    }
    bp.push_back(hi);
  }
  return bp;
}

inline RadialProfile surrogate_profile(const HardFunction& h) {
  RadialProfile p;
  p.lo = h.family.base;
  p.hi = 2.0 * h.family.base;
  p.eval = [&h](double r) { return eval_surrogate(h, r); };
  p.breakpoints = surrogate_breakpoints(h);
  p.lipschitz_hint = h.surrogate_lipschitz;
  p.piecewise_linear = true;
  return p;
}

// Integral of phi^2 over interval i, i.e. ||g_i||^2 in L2(mu).
inline QuadResult interval_weighted_mass(const IntervalFamily& fam, const Ball& ball, std::size_t i,
                                         const QuadratureSpec& spec) {
  return radial_integrate_q(indicator_profile(fam.lo(i), fam.hi(i)), RadialWeight::phi_squared, ball, spec);
}

inline double mass_report(const HardFunction& h, const QuadratureSpec& spec) {
  const Ball ball(h.family.d);
  double total = 0.0;
  for (std::size_t i = 0; i < h.family.N; ++i)
    if (h.family.good[i]) total += interval_weighted_mass(h.family, ball, i, spec).value;
  return total;
}

// Low-frequency spectra of the shell pieces g_i * phi and of signed sums of them,
// computed in one streaming pass over a shared frequency grid on [0, cutoff].
struct ShellSpectra {
  double cutoff = 0.0;
  std::vector<std::size_t> good;       // indices of good intervals
  std::vector<double> weighted_mass;   // int (g_i phi)^2
  std::vector<double> interval_low;    // int_{|w| <= cutoff} |FT(g_i phi)|^2
  std::vector<double> interval_low_err;
  std::vector<double> trial_low;       // same for sum_i eps_{t,i} g_i phi
  std::vector<double> trial_low_err;
  double total_mass = 0.0;
  int outer_levels = 0;
};

namespace detail {

struct InnerRule {
  std::vector<double> s, c;  // nodes and precomputed weight * phi(s) * kernel prefactor
};

inline InnerRule inner_rule(const Ball& ball, double lo, double hi, std::size_t panels, const GaussRule& g) {
  InnerRule r;
  const double h = (hi - lo) / panels;
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * h;
    for (std::size_t k = 0; k < g.x.size(); ++k) {
      const double s = mid + 0.5 * h * g.x[k];
      r.s.push_back(s);
      // kernel(s, 0) = C s^{d-1}; the w-dependence is the lambda factor
      r.c.push_back(0.5 * h * g.w[k] * ball.phi(s) * ball.hankel_kernel(s, 0.0));
    }
  }
  return r;
}

}  // namespace detail

inline ShellSpectra shell_spectra(const IntervalFamily& fam, const std::vector<std::vector<std::int8_t>>& trials,
                                  const QuadratureSpec& spec, unsigned threads = 0) {
  spec.validate();
  const Ball ball(fam.d);
  const BesselJ jm(0.5 * fam.d - 1.0);
  ShellSpectra out;
  out.cutoff = 2.0 * ball.R();
  out.good = fam.good_indices();
  const std::size_t G = out.good.size();
  const std::size_t T = trials.size();
  out.weighted_mass.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    out.weighted_mass[g] = interval_weighted_mass(fam, ball, out.good[g], spec).value;
    out.total_mass += out.weighted_mass[g];
  }
  out.interval_low.assign(G, 0.0);
  out.interval_low_err.assign(G, 0.0);
  out.trial_low.assign(T, 0.0);
  out.trial_low_err.assign(T, 0.0);
  if (G == 0) return out;

  // inner rules, fixed for every w in [0, cutoff]: a shell spans a small fraction of
  // one oscillation, so a 3-point Gauss rule checked against the 6-point rule suffices
  const double inner_wl = std::min(1.0 / ball.R(), 1.0 / out.cutoff);
  const std::size_t inner_panels = static_cast<std::size_t>(
      std::max(1.0, std::ceil(fam.width() * spec.nodes_per_wavelength / (inner_wl * kGaussPanelNodes))));
  const GaussRule g3 = gauss_legendre_rule(3);
  std::vector<detail::InnerRule> coarse(G), fine(G);
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t i = out.good[g];
    coarse[g] = detail::inner_rule(ball, fam.lo(i), fam.hi(i), inner_panels, g3);
    fine[g] = detail::inner_rule(ball, fam.lo(i), fam.hi(i), inner_panels, panel_rule_gauss());
  }
  std::vector<double> signs(G * T);
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t t = 0; t < T; ++t) signs[g * T + t] = trials[t][out.good[g]];

  const double two_pi = 2.0 * std::numbers::pi;
  auto transform = [&](std::size_t g, double w) {
    auto sum = [&](const detail::InnerRule& r) {
      double acc = 0.0;
      for (std::size_t n = 0; n < r.s.size(); ++n) acc += r.c[n] * jm.lambda(two_pi * r.s[n] * w);
      return acc;
    };
    const double a = sum(coarse[g]);
    const double b = sum(fine[g]);
    if (std::fabs(a - b) <= std::max(spec.rel_tol * std::fabs(b), 1e-13 * std::fabs(fine[g].c[0]) * fine[g].s.size()))
      return b;
    // fall back to the adaptive transform
    const std::size_t i = out.good[g];
    RadialProfile p;
    p.lo = fam.lo(i);
    p.hi = fam.hi(i);
    p.eval = [&ball](double s) { return ball.phi(s); };
    p.scale = 1.0 / ball.R();
    return hankel_transform_q(p, ball, w, spec).value;
  };

  // outer grid: Gauss panels sized from the largest support radius
  const double outer_wl = 1.0 / (2.0 * fam.base);
  const std::size_t base_panels = static_cast<std::size_t>(
      std::max(1.0, std::ceil(out.cutoff * spec.nodes_per_wavelength / (outer_wl * kGaussPanelNodes))));
  const GaussRule& gr = panel_rule_gauss();
  const int d = fam.d;
  const double A = ball.A();

  auto run_level = [&](std::size_t panels, std::vector<double>& ilow, std::vector<double>& tlow) {
    ilow.assign(G, 0.0);
    tlow.assign(T, 0.0);
    const double h = out.cutoff / panels;
    const std::size_t chunk = 4;  // panels per work item
    const std::size_t items = (panels + chunk - 1) / chunk;
    const unsigned nth = resolve_threads(threads);
    const std::size_t batch = std::max<std::size_t>(1, nth) * 4;
    for (std::size_t b0 = 0; b0 < items; b0 += batch) {
      const std::size_t nb = std::min(batch, items - b0);
      std::vector<std::vector<double>> part(nb, std::vector<double>(G + T, 0.0));
      parallel_for(nb, nth, [&](std::size_t k) {
        std::vector<double>& acc = part[k];
        std::vector<double> hv(G), st(T);
        const std::size_t p_begin = (b0 + k) * chunk;
        const std::size_t p_end = std::min(panels, p_begin + chunk);
        for (std::size_t p = p_begin; p < p_end; ++p) {
          const double mid = (p + 0.5) * h;
          for (int q = 0; q < kGaussPanelNodes; ++q) {
            const double w = mid + 0.5 * h * gr.x[q];
            const double wt = 0.5 * h * gr.w[q] * A * std::pow(w, d - 1);
            std::fill(st.begin(), st.end(), 0.0);
            for (std::size_t g = 0; g < G; ++g) {
              const double v = transform(g, w);
              acc[g] += wt * v * v;
              const double* sg = &signs[g * T];
              for (std::size_t t = 0; t < T; ++t) st[t] += sg[t] * v;
            }
            for (std::size_t t = 0; t < T; ++t) acc[G + t] += wt * st[t] * st[t];
          }
        }
      });
      for (std::size_t k = 0; k < nb; ++k) {
        for (std::size_t g = 0; g < G; ++g) ilow[g] += part[k][g];
        for (std::size_t t = 0; t < T; ++t) tlow[t] += part[k][G + t];
      }
    }
  };

  std::vector<double> prev_i, prev_t, cur_i, cur_t;
  std::vector<std::uint8_t> done_i(G, 0), done_t(T, 0);
  run_level(base_panels, prev_i, prev_t);
  std::size_t panels = base_panels;
  auto converged = [&](double a, double b) {
    return std::fabs(a - b) <= std::max({spec.rel_tol * std::fabs(b), spec.abs_tol, 1e-300});
  };
  for (int lvl = 1; lvl <= spec.max_refinements; ++lvl) {
    panels *= 2;
    run_level(panels, cur_i, cur_t);
    out.outer_levels = lvl + 1;
    bool all = true;
    for (std::size_t g = 0; g < G; ++g) {
      if (done_i[g]) continue;
      if (converged(prev_i[g], cur_i[g])) {
        done_i[g] = 1;
        out.interval_low[g] = cur_i[g];
        out.interval_low_err[g] = std::fabs(cur_i[g] - prev_i[g]);
      } else {
        all = false;
      }
    }
    for (std::size_t t = 0; t < T; ++t) {
      if (done_t[t]) continue;
      if (converged(prev_t[t], cur_t[t])) {
        done_t[t] = 1;
        out.trial_low[t] = cur_t[t];
        out.trial_low_err[t] = std::fabs(cur_t[t] - prev_t[t]);
      } else {
        all = false;
      }
    }
    if (all) return out;
    prev_i.swap(cur_i);
    prev_t.swap(cur_t);
  }
  throw ToleranceNotMet(prev_t.empty() ? prev_i[0] : prev_t[0], cur_t.empty() ? cur_i[0] : cur_t[0]);
}

struct SignSearch {
  SignVector best;
  std::vector<double> high_freq;  // per trial
  ShellSpectra spectra;
};

inline SignSearch sign_search(const IntervalFamily& fam, int trials, const QuadratureSpec& spec, std::uint64_t seed,
                              unsigned threads = 0) {
  if (trials < 1) throw std::invalid_argument("select_signs: trials must be >= 1");
  std::vector<std::vector<std::int8_t>> draws;
  for (int t = 0; t < trials; ++t) draws.push_back(trial_signs(fam.N, seed, t));
  SignSearch out;
  out.spectra = shell_spectra(fam, draws, spec, threads);
  out.high_freq.resize(trials);
  std::size_t best = 0;
  for (int t = 0; t < trials; ++t) {
    out.high_freq[t] = std::max(0.0, out.spectra.total_mass - out.spectra.trial_low[t]);
    if (out.high_freq[t] > out.high_freq[best]) best = t;
  }
  out.best.eps = std::move(draws[best]);
  out.best.high_freq_mass = out.high_freq[best];
  out.best.seed = seed;
  out.best.trial = best;
  return out;
}

inline SignVector select_signs(const IntervalFamily& fam, int trials, const QuadratureSpec& spec, std::uint64_t seed,
                               unsigned threads = 0) {
  return sign_search(fam, trials, spec, seed, threads).best;
}

// ---- plain-text record ----

inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw std::invalid_argument("bad number: " + s);
  return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("bad integer: " + s);
  return std::stoull(s);
}

inline void write_hard_function(const HardFunction& h, std::ostream& os) {
  os << "# hard function record\n";
  os << "d = " << h.family.d << "\n";
  os << "alpha = " << hexfloat(h.family.alpha) << "\n";
  os << "N = " << h.family.N << "\n";
  os << "grid_points = " << h.family.grid_points << "\n";
  os << "seed = " << h.signs.seed << "\n";
  os << "trial = " << h.signs.trial << "\n";
  os << "high_freq_mass = " << hexfloat(h.signs.high_freq_mass) << "\n";
  os << "surrogate_lipschitz = " << hexfloat(h.surrogate_lipschitz) << "\n";
  os << "good = ";
  for (auto g : h.family.good) os << (g ? '1' : '0');
  os << "\nsigns = ";
  for (auto e : h.signs.eps) os << (e > 0 ? '1' : '0');
  os << "\n";
}

inline std::map<std::string, std::string> read_key_values(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw std::invalid_argument("malformed line: " + line);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("malformed line: " + line);
    if (kv.count(key)) throw std::invalid_argument("duplicate key: " + key);
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline HardFunction read_hard_function(std::istream& is) {
  auto kv = read_key_values(is);
  auto need = [&](const char* k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw std::invalid_argument(std::string("hard function record missing ") + k);
    return it->second;
  };
  IntervalFamily f;
  f.d = static_cast<int>(parse_u64(need("d")));
  f.alpha = parse_double(need("alpha"));
  f.N = parse_u64(need("N"));
  f.grid_points = static_cast<int>(parse_u64(need("grid_points")));
  f.base = f.alpha * std::sqrt(static_cast<double>(f.d));
  const std::string& good = need("good");
  const std::string& signs = need("signs");
  if (good.size() != f.N || signs.size() != f.N) throw std::invalid_argument("bitstring length differs from N");
  SignVector s;
  for (char c : good) {
    if (c != '0' && c != '1') throw std::invalid_argument("bad good bitstring");
    f.good.push_back(c == '1');
  }
  for (char c : signs) {
    if (c != '0' && c != '1') throw std::invalid_argument("bad sign bitstring");
    s.eps.push_back(c == '1' ? 1 : -1);
  }
  s.seed = parse_u64(need("seed"));
  s.trial = parse_u64(need("trial"));
  s.high_freq_mass = parse_double(need("high_freq_mass"));
  HardFunction h = make_hard_function(std::move(f), std::move(s));
  h.surrogate_lipschitz = parse_double(need("surrogate_lipschitz"));
  return h;
}

}  // namespace depthsep
