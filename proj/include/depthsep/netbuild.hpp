#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthsep/hardfn.hpp"
#include "depthsep/radial.hpp"

namespace depthsep {

enum class ActivationKind { relu, threshold, custom };

struct UnivariateApproximator;

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  std::function<double(double)> fn;  // custom only
  double c_sigma = 3.0;
  double growth_C = 1.0, growth_alpha = 1.0;  // |sigma(x)| <= C (1 + |x|^alpha)
  // custom activations bring their own builders
  std::function<UnivariateApproximator(const std::function<double(double)>&, double, double, double)> builder;
  std::function<UnivariateApproximator(const std::vector<double>&, const std::vector<double>&)> from_knots;

  double operator()(double x) const {
    switch (kind) {
      case ActivationKind::relu: return x > 0.0 ? x : 0.0;
      case ActivationKind::threshold: return x >= 0.0 ? 1.0 : 0.0;
      default: return fn(x);
    }
  }

  static Activation relu() { return {}; }
  static Activation threshold() {
    Activation a;
    a.kind = ActivationKind::threshold;
    a.c_sigma = 2.0;
    a.growth_alpha = 0.0;
    return a;
  }
};

inline std::string activation_name(ActivationKind k) {
  switch (k) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::threshold: return "threshold";
    default: return "custom";
  }
}

inline ActivationKind parse_activation(const std::string& s) {
  if (s == "relu") return ActivationKind::relu;
  if (s == "threshold") return ActivationKind::threshold;
  if (s == "custom") return ActivationKind::custom;
  throw std::invalid_argument("unknown activation: " + s);
}

// Spot check of the declared growth bound on a log-spaced grid up to |x| = 1e6.
inline bool growth_bound_holds(const Activation& act) {
  if (act.kind == ActivationKind::custom && !act.fn) return false;
  auto ok = [&](double x) {
    const double v = act(x);
    return std::isfinite(v) && std::fabs(v) <= act.growth_C * (1.0 + std::pow(std::fabs(x), act.growth_alpha)) * (1 + 1e-12);
  };
  for (double t = -6.0; t <= 6.0; t += 0.01) {
    const double x = std::pow(10.0, t);
    if (!ok(x) || !ok(-x)) return false;
  }
  return ok(0.0);
}

struct UnivariateTerm {
  double alpha = 0.0, beta = 1.0, gamma = 0.0;
};

// h(x) = a + sum alpha_i sigma(beta_i x - gamma_i)
struct UnivariateApproximator {
  double a = 0.0;
  std::vector<UnivariateTerm> terms;

  std::size_t width() const { return terms.size(); }
  double operator()(const Activation& act, double x) const {
    double s = a;
    for (const auto& t : terms) s += t.alpha * act(t.beta * x - t.gamma);
    return s;
  }
  double max_abs_alpha() const {
    double m = 0.0;
    for (const auto& t : terms) m = std::max(m, std::fabs(t.alpha));
    return m;
  }
};

namespace detail {
inline void check_knots(const std::vector<double>& knots, const std::vector<double>& values) {
  if (knots.empty() || knots.size() != values.size()) throw std::invalid_argument("knots and values must match");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i] > knots[i - 1])) throw std::invalid_argument("knots must be strictly increasing");
}
}  // namespace detail

// ReLU form of the piecewise-linear interpolant, constant outside the knot range.
inline UnivariateApproximator relu_interpolant(const std::vector<double>& knots, const std::vector<double>& values) {
  detail::check_knots(knots, values);
  UnivariateApproximator h;
  h.a = values.front();
  double prev = 0.0;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const double next = i + 1 < knots.size() ? (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]) : 0.0;
    if (next != prev) h.terms.push_back({next - prev, 1.0, knots[i]});
    prev = next;
  }
  return h;
}

// Staircase taking values[i] around knots[i], steps at midpoints.
inline UnivariateApproximator threshold_staircase(const std::vector<double>& knots, const std::vector<double>& values) {
  detail::check_knots(knots, values);
  UnivariateApproximator h;
  h.a = values.front();
  for (std::size_t i = 1; i < knots.size(); ++i) {
    const double jump = values[i] - values[i - 1];
    if (jump != 0.0) h.terms.push_back({jump, 1.0, 0.5 * (knots[i - 1] + knots[i])});
  }
  return h;
}

inline UnivariateApproximator approximator_from_knots(const Activation& act, const std::vector<double>& knots,
                                                      const std::vector<double>& values) {
  switch (act.kind) {
    case ActivationKind::relu: return relu_interpolant(knots, values);
    case ActivationKind::threshold: return threshold_staircase(knots, values);
    default:
      if (!act.from_knots) throw std::invalid_argument("custom activation has no knot builder");
      return act.from_knots(knots, values);
  }
}

namespace detail {
inline void check_builder_args(double L, double R, double delta) {
  if (!(delta > 0.0)) throw std::domain_error("delta must be positive");
  if (!(L >= 0.0) || !(R >= 0.0)) throw std::domain_error("L and R must be non-negative");
}

inline std::vector<double> uniform_knots(double lo, double step, std::size_t count) {
  std::vector<double> k(count);
  for (std::size_t i = 0; i < count; ++i) k[i] = lo + static_cast<double>(i) * step;
  return k;
}
}  // namespace detail

// f L-Lipschitz and constant outside [-R, R]; sup error <= delta.
inline UnivariateApproximator build_univariate_relu(const std::function<double(double)>& f, double L, double R,
                                                    double delta) {
  detail::check_builder_args(L, R, delta);
  const double t = R * L / delta;
  if (t <= 1.0) return {f(0.0), {}};  // |f - f(0)| <= LR <= delta
  // interpolation error of a Lipschitz function is L * spacing / 2
  const double step = t >= 3.0 ? delta / L : 2.0 * delta / L;
  const auto m = static_cast<std::size_t>(std::ceil(R / step - 1e-12));
  std::vector<double> knots = detail::uniform_knots(-static_cast<double>(m) * step, step, 2 * m + 1);
  std::vector<double> vals(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) vals[i] = f(knots[i]);
  return relu_interpolant(knots, vals);
}

inline UnivariateApproximator build_univariate_threshold(const std::function<double(double)>& f, double L, double R,
                                                         double delta) {
  detail::check_builder_args(L, R, delta);
  if (R * L <= delta) return {f(0.0), {}};
  const double step = delta / L;
  const auto K = static_cast<std::size_t>(std::ceil(2.0 * R * L / delta - 1e-12));
  std::vector<double> knots = detail::uniform_knots(-R, step, K + 1);
  std::vector<double> vals(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) vals[i] = f(knots[i]);
  return threshold_staircase(knots, vals);
}

inline UnivariateApproximator build_univariate(const Activation& act, const std::function<double(double)>& f,
                                               double L, double R, double delta) {
  switch (act.kind) {
    case ActivationKind::relu: return build_univariate_relu(f, L, R, delta);
    case ActivationKind::threshold: return build_univariate_threshold(f, L, R, delta);
    default:
      if (!act.builder) throw std::invalid_argument("custom activation has no builder");
      return act.builder(f, L, R, delta);
  }
}

// ---- networks ----

struct TwoLayerNet {
  int d = 0;
  Activation act;
  std::vector<double> v, b, w;  // w is row-major, units x d

  std::size_t width() const { return v.size(); }
  void add_unit(double vi, std::span<const double> wi, double bi) {
    if (static_cast<int>(wi.size()) != d) throw std::invalid_argument("unit weight has wrong dimension");
    v.push_back(vi);
    b.push_back(bi);
    w.insert(w.end(), wi.begin(), wi.end());
  }
};

inline double eval_two_layer(const TwoLayerNet& net, std::span<const double> x) {
  if (static_cast<int>(x.size()) != net.d) throw std::invalid_argument("input dimension mismatch");
  double out = 0.0;
  const std::size_t d = x.size();
  for (std::size_t i = 0; i < net.v.size(); ++i) {
    double z = net.b[i];
    const double* wi = &net.w[i * d];
    for (std::size_t k = 0; k < d; ++k) z += wi[k] * x[k];
    out += net.v[i] * net.act(z);
  }
  return out;
}

// sum_i u_i sigma( beta_i * S(x) + v0_i * sigma(0) + c_i ),  S(x) = sum_j a_j sigma(<w_j, x> + b_j).
// Every second-layer unit sees the same first layer with weights v_ij = beta_i * a_j;
// v0_i is the weight on one extra first-layer unit with zero weights and bias.
struct ThreeLayerNet {
  int d = 0;
  Activation act;
  std::vector<double> w1, b1, a1;     // first layer
  std::vector<double> u, beta, v0, c;  // second layer and output

  // the defining pieces, kept when the net was compiled from a radial profile
  std::optional<UnivariateApproximator> l_tilde, s_tilde;

  std::vector<int> axis;  // cache: index of the single nonzero weight, or -1

  std::size_t first_units() const {
    const bool zero_unit = std::any_of(v0.begin(), v0.end(), [](double x) { return x != 0.0; });
    return a1.size() + (zero_unit ? 1 : 0);
  }
  std::size_t second_units() const { return u.size(); }
  std::size_t width() const { return std::max(first_units(), second_units()); }

  void finalize() {
    const std::size_t n = b1.size();
    if (w1.size() != n * static_cast<std::size_t>(d) || a1.size() != n)
      throw std::invalid_argument("first layer arrays inconsistent");
    if (beta.size() != u.size() || v0.size() != u.size() || c.size() != u.size())
      throw std::invalid_argument("second layer arrays inconsistent");
    axis.assign(n, -1);
    for (std::size_t j = 0; j < n; ++j) {
      int nz = 0, at = -1;
      for (int k = 0; k < d; ++k)
        if (w1[j * d + k] != 0.0) ++nz, at = k;
      if (nz == 1) axis[j] = at;
    }
  }
};

inline double first_layer_sum(const ThreeLayerNet& net, std::span<const double> x) {
  const std::size_t d = x.size();
  double S = 0.0;
  const bool fast = net.axis.size() == net.a1.size();
  const bool relu = net.act.kind == ActivationKind::relu;
  for (std::size_t j = 0; j < net.a1.size(); ++j) {
    double z = net.b1[j];
    if (fast && net.axis[j] >= 0) {
      z += net.w1[j * d + net.axis[j]] * x[net.axis[j]];
    } else {
      for (std::size_t k = 0; k < d; ++k) z += net.w1[j * d + k] * x[k];
    }
    S += net.a1[j] * (relu ? (z > 0.0 ? z : 0.0) : net.act(z));
  }
  return S;
}

inline double eval_three_layer(const ThreeLayerNet& net, std::span<const double> x) {
  if (static_cast<int>(x.size()) != net.d) throw std::invalid_argument("input dimension mismatch");
  const double S = first_layer_sum(net, x);
  const double s0 = net.act(0.0);
  double out = 0.0;
  for (std::size_t i = 0; i < net.u.size(); ++i) out += net.u[i] * net.act(net.beta[i] * S + net.v0[i] * s0 + net.c[i]);
  return out;
}

// s~( sum_k l~(x_k) ), the representation the net was compiled from
inline double eval_composition(const ThreeLayerNet& net, std::span<const double> x) {
  if (!net.l_tilde || !net.s_tilde) throw std::logic_error("net carries no composition");
  double ell = 0.0;
  for (double xk : x) ell += (*net.l_tilde)(net.act, xk);
  return (*net.s_tilde)(net.act, ell);
}

inline double radial_3layer_width_bound(int d, double r, double R, double L, double delta, double c_sigma) {
  return 2.0 * c_sigma * d * d * R * R * L / (std::sqrt(r) * delta) + 1.0;
}

inline double prop_approx_width_bound(int d, double alpha, std::size_t N, double delta, double c_sigma) {
  return 8.0 * c_sigma * std::pow(alpha, 1.5) * static_cast<double>(N) * std::pow(d, 2.75) / delta + 1.0;
}

struct BuildLimits {
  std::size_t max_knots = 50'000'000;
};

namespace detail {

inline void check_knot_budget(double count, const BuildLimits& lim) {
  if (!(count <= static_cast<double>(lim.max_knots)))
    throw std::length_error("approximator needs " + std::to_string(count) + " knots, over the build limit");
}

// l(x) = min(x^2, R^2) to sup error tol
inline UnivariateApproximator clipped_square(const Activation& act, double R, double tol, const BuildLimits& lim) {
  if (act.kind == ActivationKind::relu) {
    // chords of x^2 over spacing h overshoot by at most h^2 / 4; anchored at 0 so a = 0
    const double h0 = 2.0 * std::sqrt(tol);
    const double n_real = std::ceil(R / h0);
    check_knot_budget(2 * n_real + 2, lim);
    const auto n = static_cast<std::size_t>(std::max(1.0, n_real));
    const double h = R / static_cast<double>(n);
    UnivariateApproximator out;
    for (double side : {1.0, -1.0}) {
      double prev = 0.0;
      for (std::size_t k = 0; k <= n; ++k) {
        const double xk = k * h;
        const double next = k < n ? (std::pow((k + 1) * h, 2) - xk * xk) / h : 0.0;
        if (next != prev) out.terms.push_back({next - prev, side, xk});
        prev = next;
      }
    }
    return out;
  }
  // staircase error is 2R * spacing / 2
  const double step = tol / R;
  const double count = std::ceil(2.0 * R / step) + 1;
  check_knot_budget(count, lim);
  std::vector<double> knots = uniform_knots(-R, 2.0 * R / (count - 1), static_cast<std::size_t>(count));
  knots.back() = R;
  std::vector<double> vals(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) vals[i] = std::min(knots[i] * knots[i], R * R);
  return approximator_from_knots(act, knots, vals);
}

// knots in y = r^2 for s(y) = f(sqrt y)
inline UnivariateApproximator radial_outer(const Activation& act, const RadialProfile& f, double L, double tol,
                                           const BuildLimits& lim) {
  const double r0 = f.lo, R = f.hi;
  std::vector<double> rk;  // knots in radius
  auto add_segment = [&](double a, double b, double slope) {
    // pieces in r; a piece [p, q] in r is [p^2, q^2] in y
    double pieces = 1.0;
    if (slope != 0.0) {
      if (act.kind == ActivationKind::relu && f.piecewise_linear) {
        // chord error of c sqrt(y) over [p^2, q^2] is |c| (q - p)^2 / (4 (p + q))
        pieces = std::ceil((b - a) / std::sqrt(8.0 * std::max(a, 1e-300) * tol / std::fabs(slope)));
      } else {
        // Lipschitz constant of s on [a^2, b^2] is slope / (2a); staircase/interp error Lip * h / 2
        const double lip = std::fabs(slope) / (2.0 * a);
        pieces = std::ceil((b * b - a * a) * lip / (2.0 * tol));
      }
      pieces = std::max(pieces, 1.0);
    }
    check_knot_budget(rk.size() + pieces, lim);
    const auto n = static_cast<std::size_t>(pieces);
    for (std::size_t k = 0; k < n; ++k) {
      if (act.kind == ActivationKind::relu && f.piecewise_linear)
        rk.push_back(a + (b - a) * k / n);
      else
        rk.push_back(std::sqrt(a * a + (b * b - a * a) * k / n));
    }
  };
  if (f.piecewise_linear) {
    std::vector<double> bp{r0, R};
    for (double x : f.breakpoints)
      if (x > r0 && x < R) bp.push_back(x);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
      const double fa = f.eval(bp[i]), fb = f.eval(std::nextafter(bp[i + 1], bp[i]));
      add_segment(bp[i], bp[i + 1], (fb - fa) / (bp[i + 1] - bp[i]));
    }
  } else {
    add_segment(r0, R, L);
  }
  rk.push_back(R);
  std::vector<double> y(rk.size()), vals(rk.size());
  for (std::size_t i = 0; i < rk.size(); ++i) {
    y[i] = rk[i] * rk[i];
    vals[i] = f(rk[i]);
  }
  // drop knots that collapsed after squaring
  std::size_t m = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (m > 0 && !(y[i] > y[m - 1])) continue;
    y[m] = y[i];
    vals[m] = vals[i];
    ++m;
  }
  y.resize(m);
  vals.resize(m);
  return approximator_from_knots(act, y, vals);
}

inline double folding_shift(const Activation& act) {
  for (double z : {1.0, 2.0, -1.0, 0.5, 10.0})
    if (act(act(0.0) + z) != 0.0) return z;
  throw std::invalid_argument("activation vanishes at every trial point; cannot fold a constant");
}

}  // namespace detail

// f supported on [r, R] (f.lo, f.hi), L-Lipschitz; the returned net is within delta of f(|x|) on R^d.
inline ThreeLayerNet build_radial_3layer(const RadialProfile& f, double L, double delta, const Activation& act, int d,
                                         const BuildLimits& lim = {}) {
  f.validate();
  if (!(f.lo >= 1.0)) throw std::domain_error("build_radial_3layer: support must start at r >= 1");
  if (!(delta > 0.0)) throw std::domain_error("build_radial_3layer: delta must be positive");
  if (!(L > 0.0)) throw std::domain_error("build_radial_3layer: L must be positive");
  if (d < 1) throw std::domain_error("build_radial_3layer: d must be >= 1");
  const double r = f.lo, R = f.hi;

  ThreeLayerNet net;
  net.d = d;
  net.act = act;
  const double tol_l = std::sqrt(r) * delta / (d * L);
  net.l_tilde = detail::clipped_square(act, R, tol_l, lim);
  net.s_tilde = detail::radial_outer(act, f, L, 0.5 * delta, lim);

  const UnivariateApproximator& l = *net.l_tilde;
  const UnivariateApproximator& s = *net.s_tilde;
  for (int k = 0; k < d; ++k)
    for (const auto& t : l.terms) {
      for (int q = 0; q < d; ++q) net.w1.push_back(q == k ? t.beta : 0.0);
      net.b1.push_back(-t.gamma);
      net.a1.push_back(t.alpha);
    }
  const double l0 = d * l.a;
  for (const auto& t : s.terms) {
    net.u.push_back(t.alpha);
    net.beta.push_back(t.beta);
    net.v0.push_back(0.0);
    net.c.push_back(t.beta * l0 - t.gamma);
  }
  if (s.a != 0.0) {
    const double z = detail::folding_shift(act);
    net.u.push_back(s.a / act(act(0.0) + z));
    net.beta.push_back(0.0);
    net.v0.push_back(1.0);
    net.c.push_back(z);
  }
  net.finalize();
  return net;
}

// surrogate of the hard function through build_radial_3layer with R = 2 alpha sqrt d, r = alpha sqrt d, L = N
inline ThreeLayerNet build_prop_approx(const HardFunction& h, const Activation& act, double delta,
                                       const BuildLimits& lim = {}) {
  const RadialProfile p = surrogate_profile(h);
  ThreeLayerNet net = build_radial_3layer(p, h.surrogate_lipschitz, delta, act, h.family.d, lim);
  return net;
}

// ---- plain-text form, hex floats ----

inline void write_two_layer(const TwoLayerNet& net, std::ostream& os) {
  os << "layers 2\nd " << net.d << "\nactivation " << activation_name(net.act.kind) << "\nwidth " << net.width()
     << "\n";
  for (std::size_t i = 0; i < net.width(); ++i) {
    os << "U " << hexfloat(net.v[i]) << ' ' << hexfloat(net.b[i]);
    for (int k = 0; k < net.d; ++k) os << ' ' << hexfloat(net.w[i * net.d + k]);
    os << '\n';
  }
}

inline void write_three_layer(const ThreeLayerNet& net, std::ostream& os) {
  os << "layers 3\nd " << net.d << "\nactivation " << activation_name(net.act.kind) << "\nwidth " << net.width()
     << "\nfirst " << net.a1.size() << "\nsecond " << net.u.size() << "\n";
  for (std::size_t j = 0; j < net.a1.size(); ++j) {
    os << "F " << hexfloat(net.a1[j]) << ' ' << hexfloat(net.b1[j]);
    for (int k = 0; k < net.d; ++k) os << ' ' << hexfloat(net.w1[j * net.d + k]);
    os << '\n';
  }
  for (std::size_t i = 0; i < net.u.size(); ++i)
    os << "S " << hexfloat(net.u[i]) << ' ' << hexfloat(net.beta[i]) << ' ' << hexfloat(net.v0[i]) << ' '
       << hexfloat(net.c[i]) << '\n';
}

namespace detail {

struct NetHeader {
  int layers = 0, d = 0;
  ActivationKind kind = ActivationKind::relu;
  std::size_t width = 0, first = 0, second = 0;
};

inline std::string expect_key(std::istream& is, const char* key) {
  std::string k, v;
  if (!(is >> k >> v) || k != key) throw std::invalid_argument(std::string("network file: expected ") + key);
  return v;
}

inline NetHeader read_header(std::istream& is, int layers) {
  NetHeader h;
  h.layers = static_cast<int>(parse_u64(expect_key(is, "layers")));
  if (h.layers != layers) throw std::invalid_argument("network file has the wrong number of layers");
  h.d = static_cast<int>(parse_u64(expect_key(is, "d")));
  if (h.d < 1) throw std::invalid_argument("network file: d must be >= 1");
  h.kind = parse_activation(expect_key(is, "activation"));
  h.width = parse_u64(expect_key(is, "width"));
  if (layers == 3) {
    h.first = parse_u64(expect_key(is, "first"));
    h.second = parse_u64(expect_key(is, "second"));
  }
  return h;
}

inline std::vector<double> read_row(std::istream& is, const char* tag, std::size_t n) {
  std::string t;
  if (!(is >> t) || t != tag) throw std::invalid_argument(std::string("network file: expected row ") + tag);
  std::vector<double> out(n);
  for (auto& v : out) {
    std::string s;
    if (!(is >> s)) throw std::invalid_argument("network file: truncated row");
    v = parse_double(s);
  }
  return out;
}

inline Activation activation_for(ActivationKind k, const std::optional<Activation>& custom) {
  if (k == ActivationKind::relu) return Activation::relu();
  if (k == ActivationKind::threshold) return Activation::threshold();
  if (!custom || custom->kind != ActivationKind::custom)
    throw std::invalid_argument("network uses a custom activation; supply it when reading");
  return *custom;
}

inline void expect_end(std::istream& is) {
  std::string rest;
  if (is >> rest) throw std::invalid_argument("network file: trailing data");
}

}  // namespace detail

inline TwoLayerNet read_two_layer(std::istream& is, const std::optional<Activation>& custom = std::nullopt) {
  const auto h = detail::read_header(is, 2);
  TwoLayerNet net;
  net.d = h.d;
  net.act = detail::activation_for(h.kind, custom);
  for (std::size_t i = 0; i < h.width; ++i) {
    const auto row = detail::read_row(is, "U", 2 + h.d);
    net.add_unit(row[0], std::span<const double>(row).subspan(2), row[1]);
  }
  detail::expect_end(is);
  return net;
}

inline ThreeLayerNet read_three_layer(std::istream& is, const std::optional<Activation>& custom = std::nullopt) {
  const auto h = detail::read_header(is, 3);
  ThreeLayerNet net;
  net.d = h.d;
  net.act = detail::activation_for(h.kind, custom);
  for (std::size_t j = 0; j < h.first; ++j) {
    const auto row = detail::read_row(is, "F", 2 + h.d);
    net.a1.push_back(row[0]);
    net.b1.push_back(row[1]);
    net.w1.insert(net.w1.end(), row.begin() + 2, row.end());
  }
  for (std::size_t i = 0; i < h.second; ++i) {
    const auto row = detail::read_row(is, "S", 4);
    net.u.push_back(row[0]);
    net.beta.push_back(row[1]);
    net.v0.push_back(row[2]);
    net.c.push_back(row[3]);
  }
  detail::expect_end(is);
  net.finalize();
  if (net.width() != h.width) throw std::invalid_argument("network file: width does not match its units");
  return net;
}

}  // namespace depthsep
