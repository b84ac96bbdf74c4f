#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <vector>

#include "depthsep/quadrature.hpp"
#include "depthsep/specfun.hpp"

namespace depthsep {

struct RadialProfile {
  double lo = 0.0, hi = 0.0;
  std::function<double(double)> eval;
  std::optional<double> lipschitz_hint;
  std::vector<double> breakpoints;  // kinks or jumps inside [lo, hi]
  double scale = 0.0;               // length over which eval varies smoothly; 0 = no limit
  bool piecewise_linear = false;    // linear between consecutive breakpoints
  bool indicator = false;           // eval is 1 on [lo, hi]

  double operator()(double r) const { return (r < lo || r > hi) ? 0.0 : eval(r); }

  void validate() const {
    if (!(lo >= 0.0 && hi > lo)) throw std::invalid_argument("RadialProfile: support must satisfy 0 <= a < b");
    if (!eval) throw std::invalid_argument("RadialProfile: missing eval");
  }
};

inline RadialProfile indicator_profile(double lo, double hi) {
  RadialProfile p;
  p.lo = lo;
  p.hi = hi;
  p.eval = [](double) { return 1.0; };
  p.piecewise_linear = true;
  p.indicator = true;
  return p;
}

inline RadialProfile zero_profile(double lo, double hi) {
  RadialProfile p;
  p.lo = lo;
  p.hi = hi;
  p.eval = [](double) { return 0.0; };
  p.piecewise_linear = true;
  return p;
}

enum class RadialWeight { lebesgue_radial, phi_squared };

// Cached per-dimension constants and Bessel evaluators.
class Ball {
 public:
  explicit Ball(int d, SpecFunConfig cfg = {})
      : d_(d),
        R_(unit_ball_radius(d)),
        A_(sphere_area(d)),
        j_(0.5 * d, cfg),
        jm_(d >= 2 ? 0.5 * d - 1.0 : 0.0, cfg) {
    const double nu = 0.5 * d - 1.0;
    if (d >= 2)
      kernel_c_ = std::exp(std::log(2.0 * std::numbers::pi) + nu * std::log(std::numbers::pi) - log_gamma(nu + 1.0));
  }

  int d() const { return d_; }
  double R() const { return R_; }
  double A() const { return A_; }
  const BesselJ& j_half() const { return j_; }

  // J_{d/2}(2 pi R_d r)
  double bessel(double r) const { return j_(2.0 * std::numbers::pi * R_ * r); }

  double phi(double r) const {
    if (r < 0) throw std::domain_error("phi: r must be >= 0");
    return j_.lambda(2.0 * std::numbers::pi * R_ * r);
  }

  // radial density of mu: A_d r^{d-1} phi(r)^2 = d J^2 / r
  double density(double r) const {
    if (r <= 0.0) return d_ == 1 ? A_ : 0.0;
    const double x = 2.0 * std::numbers::pi * R_ * r;
    if (x > 1.0) {
      const double j = j_(x);
      return d_ * j * j / r;
    }
    const double p = j_.lambda(x);
    return A_ * std::pow(r, d_ - 1) * p * p;
  }

  // Exact transform of the shell indicator 1[lo <= r <= hi], from
  // d/dz (z^nu J_nu(z)) = z^nu J_{nu-1}(z):  (A_d/d) [s^d Lambda_{d/2}(2 pi s w)]_lo^hi.
  double shell_transform(double lo, double hi, double w) const {
    const double k = 2.0 * std::numbers::pi * w;
    return A_ / d_ * (std::pow(hi, d_) * j_.lambda(k * hi) - std::pow(lo, d_) * j_.lambda(k * lo));
  }

  // Kernel of the radial Fourier transform: ghat(w) = int g(s) K(s, w) ds.
  double hankel_kernel(double s, double w) const {
    const double z = 2.0 * std::numbers::pi * s * w;
    if (d_ == 1) return 2.0 * std::cos(z);
    double sp = kernel_c_;
    for (int k = 1; k < d_; ++k) sp *= s;
    return sp * jm_.lambda(z);
  }

 private:
  int d_;
  double R_, A_;
  BesselJ j_, jm_;
  double kernel_c_ = 0.0;
};

inline double phi(int d, double r) {
  if (d < 1) throw std::domain_error("phi: d must be >= 1");
  return Ball(d).phi(r);
}

inline double radial_density(int d, double r) { return Ball(d).density(r); }

inline double weight_wavelength(const RadialProfile& p, RadialWeight weight, const Ball& ball) {
  double wl = std::numeric_limits<double>::infinity();
  if (p.scale > 0) wl = p.scale;
  if (weight == RadialWeight::phi_squared) wl = std::min(wl, 1.0 / ball.R());
  if (!std::isfinite(wl)) wl = p.hi - p.lo;
  return wl;
}

inline QuadResult radial_integrate_q(const RadialProfile& p, RadialWeight weight, const Ball& ball,
                                     const QuadratureSpec& spec) {
  p.validate();
  const int d = ball.d();
  const double A = ball.A();
  auto f = [&](double r) {
    const double v = p.eval(r);
    if (v == 0.0) return 0.0;
    if (weight == RadialWeight::phi_squared) return v * ball.density(r);
    return v * A * std::pow(r, d - 1);
  };
  return integrate_oscillatory(f, p.lo, p.hi, weight_wavelength(p, weight, ball), spec, p.breakpoints);
}

inline double radial_integrate(const RadialProfile& p, RadialWeight weight, int d, const QuadratureSpec& spec) {
  return radial_integrate_q(p, weight, Ball(d), spec).value;
}

inline QuadResult hankel_transform_q(const RadialProfile& p, const Ball& ball, double w, const QuadratureSpec& spec) {
  if (w < 0) throw std::domain_error("hankel_transform: w must be >= 0");
  p.validate();
  if (p.indicator) return {ball.shell_transform(p.lo, p.hi, w), 0.0, 2};
  double wl = p.scale > 0 ? p.scale : std::numeric_limits<double>::infinity();
  if (w > 0) wl = std::min(wl, 1.0 / w);
  if (!std::isfinite(wl)) wl = p.hi - p.lo;
  auto f = [&](double s) {
    const double v = p.eval(s);
    return v == 0.0 ? 0.0 : v * ball.hankel_kernel(s, w);
  };
  return integrate_oscillatory(f, p.lo, p.hi, wl, spec, p.breakpoints);
}

inline double hankel_transform(const RadialProfile& p, int d, double w, const QuadratureSpec& spec) {
  return hankel_transform_q(p, Ball(d), w, spec).value;
}

inline QuadResult low_freq_mass_q(const RadialProfile& p, const Ball& ball, double cutoff, const QuadratureSpec& spec) {
  if (!(cutoff > 0)) throw std::domain_error("low_freq_mass: cutoff must be positive");
  const int d = ball.d();
  const double A = ball.A();
  auto f = [&](double w) {
    const double g = hankel_transform_q(p, ball, w, spec).value;
    return A * std::pow(w, d - 1) * g * g;
  };
  return integrate_oscillatory(f, 0.0, cutoff, 1.0 / p.hi, spec);
}

inline double low_freq_mass(const RadialProfile& p, int d, double cutoff, const QuadratureSpec& spec) {
  return low_freq_mass_q(p, Ball(d), cutoff, spec).value;
}

// Closed-form transform mass of a shell indicator, A_d (hi^d - lo^d) / d.
inline double shell_volume(int d, double lo, double hi) {
  return sphere_area(d) * (std::pow(hi, d) - std::pow(lo, d)) / d;
}

// Upper bound on the density mass beyond r, from the envelope
// |J_{d/2}(x)| <= sqrt(2/(pi c x)) + x^{-3/2}, valid for x >= d.
inline double density_tail_bound(const Ball& ball, double r) {
  const int d = ball.d();
  const double x0 = 2.0 * std::numbers::pi * ball.R() * r;
  if (d < 2 || x0 < d) return std::numeric_limits<double>::infinity();
  const double c0 = krasikov_terms(d, x0).c_dx;
  const double a = std::sqrt(2.0 / (std::numbers::pi * c0)) + 1.0 / x0;
  return d * a * a / x0;
}

struct RadialDensity {
  int d = 0;
  double R_d = 0.0;
  double r_max = 0.0;
  double tail_bound = 0.0;
  double tail_tol = 0.0;
  std::vector<double> r;  // cdf_grid abscissae, r[0] = 0
  std::vector<double> F;  // cdf_grid values

  double mass() const { return F.empty() ? 0.0 : F.back(); }
};

inline RadialDensity build_density(int d, double tail_tol, const QuadratureSpec& spec) {
  if (!(tail_tol > 0.0 && tail_tol <= 0.01)) throw std::invalid_argument("tail_tol must lie in (0, 0.01]");
  if (d < 2) throw std::invalid_argument("build_density: d must be >= 2 for the certified tail");
  spec.validate();
  const Ball ball(d);
  RadialDensity out;
  out.d = d;
  out.R_d = ball.R();
  out.tail_tol = tail_tol;
  // the bound is decreasing in r; bracket and bisect
  double lo = d / (2.0 * std::numbers::pi * ball.R());
  double hi = std::max(lo * 2.0, d / (std::numbers::pi * std::numbers::pi * ball.R() * tail_tol));
  while (density_tail_bound(ball, hi) > tail_tol) hi *= 1.5;
  for (int it = 0; it < 200 && hi - lo > 1e-9 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (density_tail_bound(ball, mid) > tail_tol ? lo : hi) = mid;
  }
  out.r_max = hi;
  out.tail_bound = density_tail_bound(ball, hi);

  const double h = 1.0 / (ball.R() * spec.nodes_per_wavelength);
  const std::size_t cells = static_cast<std::size_t>(std::ceil(out.r_max / h));
  if (cells * kGaussPanelNodes > spec.node_budget)
    throw std::invalid_argument("build_density: tail_tol unreachable within node budget");
  out.r.resize(cells + 1);
  out.F.resize(cells + 1);
  const GaussRule& g = panel_rule_gauss();
  const double step = out.r_max / cells;
  double acc = 0.0;
  out.r[0] = 0.0;
  out.F[0] = 0.0;
  for (std::size_t j = 0; j < cells; ++j) {
    const double a = j * step;
    const double mid = a + 0.5 * step;
    double cell = 0.0;
    for (int k = 0; k < kGaussPanelNodes; ++k) cell += g.w[k] * ball.density(mid + 0.5 * step * g.x[k]);
    acc += 0.5 * step * cell;
    out.r[j + 1] = j + 1 == cells ? out.r_max : (j + 1) * step;
    out.F[j + 1] = acc;
  }
  return out;
}

inline double sample_radius(const RadialDensity& dens, double u01) {
  const double target = u01 * dens.F.back();
  auto it = std::upper_bound(dens.F.begin(), dens.F.end(), target);
  if (it == dens.F.begin()) return 0.0;
  if (it == dens.F.end()) return dens.r_max;
  const std::size_t j = static_cast<std::size_t>(it - dens.F.begin());
  const double f0 = dens.F[j - 1], f1 = dens.F[j];
  const double t = f1 > f0 ? (target - f0) / (f1 - f0) : 0.0;
  return dens.r[j - 1] + t * (dens.r[j] - dens.r[j - 1]);
}

template <class Rng>
std::vector<double> sample_mu(const RadialDensity& dens, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double r = sample_radius(dens, uni(rng));
  std::vector<double> x(dens.d);
  double n2 = 0.0;
  while (n2 == 0.0) {
    n2 = 0.0;
    for (double& v : x) {
      v = gauss(rng);
      n2 += v * v;
    }
  }
  const double s = r / std::sqrt(n2);
  for (double& v : x) v *= s;
  return x;
}

inline double radial_cdf(const RadialDensity& dens, double r) {
  if (r <= 0) return 0.0;
  if (r >= dens.r_max) return dens.F.back();
  auto it = std::upper_bound(dens.r.begin(), dens.r.end(), r);
  const std::size_t j = static_cast<std::size_t>(it - dens.r.begin());
  const double t = (r - dens.r[j - 1]) / (dens.r[j] - dens.r[j - 1]);
  return dens.F[j - 1] + t * (dens.F[j] - dens.F[j - 1]);
}

inline void write_cdf_csv(const RadialDensity& dens, std::ostream& os) {
  os << "r,F\n";
  char buf[64];
  for (std::size_t j = 0; j < dens.r.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", dens.r[j], dens.F[j]);
    os << buf;
  }
}

}  // namespace depthsep
