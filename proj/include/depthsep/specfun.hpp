#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <limits>

namespace depthsep {

struct SpecFunConfig {
  int series_terms = 60;
  double asymptotic_switch = 30.0;
  double abs_tol = 1e-12;

  void validate() const {
    if (series_terms < 10) throw std::invalid_argument("series_terms must be >= 10");
    if (!(asymptotic_switch >= 1.0)) throw std::invalid_argument("asymptotic_switch must be >= 1");
    if (!(abs_tol > 0.0)) throw std::invalid_argument("abs_tol must be positive");
  }
};

// Stirling series after shifting the argument up to 15.
inline double log_gamma(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) throw std::domain_error("log_gamma: argument must be positive");
  double shift = 0.0;
  if (z < 15.0) {
    double prod = 1.0;
    while (z < 15.0) {
      prod *= z;
      z += 1.0;
    }
    shift = std::log(prod);
  }
  static constexpr double kB[] = {1.0 / 6.0,   -1.0 / 30.0,  1.0 / 42.0,   -1.0 / 30.0,
                                  5.0 / 66.0,  -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0};
  const double zi = 1.0 / z;
  const double zi2 = zi * zi;
  double corr = 0.0;
  double p = zi;
  for (int k = 1; k <= 8; ++k) {
    corr += kB[k - 1] / (2.0 * k * (2.0 * k - 1.0)) * p;
    p *= zi2;
  }
  const double half_log_2pi = 0.91893853320467274178;
  return (z - 0.5) * std::log(z) - z + half_log_2pi + corr - shift;
}

inline double unit_ball_radius(int d) {
  if (d < 1) throw std::domain_error("unit_ball_radius: d must be >= 1");
  return std::exp(log_gamma(0.5 * d + 1.0) / d) / std::sqrt(std::numbers::pi);
}

// Surface area of the unit sphere in R^d, d*pi^(d/2)/Gamma(d/2+1).
inline double sphere_area(int d) {
  if (d < 1) throw std::domain_error("sphere_area: d must be >= 1");
  return std::exp(std::log(static_cast<double>(d)) + 0.5 * d * std::log(std::numbers::pi) -
                  log_gamma(0.5 * d + 1.0));
}

struct KrasikovTerms {
  double c_dx;
  double f_dx;
  double envelope;
};

inline KrasikovTerms krasikov_terms(int d, double x) {
  if (d < 2) throw std::domain_error("krasikov_terms: d must be >= 2");
  if (!(x >= d)) throw std::domain_error("krasikov_terms: x must be >= d");
  const double dd = static_cast<double>(d);
  const double c = std::sqrt(1.0 - (dd * dd - 1.0) / (4.0 * x * x));
  const double s = std::sqrt(dd * dd - 1.0) / (2.0 * x);
  return {c, c + s * std::asin(s), std::pow(x, -1.5)};
}

// Leading-order approximation of J_{d/2}(x) for x >= d.
inline double krasikov_approx(int d, double x) {
  const KrasikovTerms t = krasikov_terms(d, x);
  return std::sqrt(2.0 / (std::numbers::pi * t.c_dx * x)) *
         std::cos(-(d + 1.0) * std::numbers::pi / 4.0 + t.f_dx * x);
}

// J_nu for a fixed order. Hankel's expansion where its truncation error is small,
// the power series near the origin, Miller's backward recurrence otherwise.
class BesselJ {
 public:
  explicit BesselJ(double nu, SpecFunConfig cfg = {}) : nu_(nu), cfg_(cfg) {
    if (!(nu >= 0.0) || !std::isfinite(nu)) throw std::domain_error("bessel_j: order must be >= 0");
    cfg_.validate();
    lg_ = log_gamma(nu + 1.0);
    mu_ = 4.0 * nu * nu;
    const double ph = (2.0 * nu + 1.0) * std::numbers::pi / 4.0;
    cph_ = std::cos(ph);
    sph_ = std::sin(ph);
    n_int_ = static_cast<int>(std::floor(nu));
    nu0_ = nu - n_int_;
    hankel_from_ = cfg_.asymptotic_switch * std::max(nu, 1.0);
    hankel_try_ = std::max(12.0, 2.0 * nu);
    for (int k = 1; k < kHankelTerms; ++k)
      hcoef_[k] = (mu_ - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k);
    fast_pow_ = nu <= 20.0 && (nu0_ == 0.0 || nu0_ == 0.5);
    inv_gamma_ = std::exp(-lg_);
  }

  double order() const { return nu_; }

  double operator()(double x) const {
    check_arg(x);
    if (x == 0.0) return nu_ == 0.0 ? 1.0 : 0.0;
    double v;
    // far field, or whenever the expansion's own truncation estimate is good enough
    if ((x >= hankel_from_ || x >= hankel_try_) && hankel(x, v)) return v;
    if (series_scaled(x, v, true)) return v * prefactor(x);
    return miller(x);
  }

  // Gamma(nu+1) (2/x)^nu J_nu(x), equal to 1 at the origin.
  double lambda(double x) const {
    check_arg(x);
    if (x == 0.0) return 1.0;
    double s;
    if (series_scaled(x, s, false)) return s;
    return (*this)(x) / prefactor(x);
  }

  // Power series alone, evaluated in long double; no cancellation guard.
  double series(double x) const {
    check_arg(x);
    if (x == 0.0) return nu_ == 0.0 ? 1.0 : 0.0;
    long double sum = 0, abs_sum = 0;
    series_sum(x, cfg_.series_terms, sum, abs_sum);
    return static_cast<double>(sum) * prefactor(x);
  }

 private:
  static void check_arg(double x) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::domain_error("bessel_j: argument must be >= 0");
  }

  // (x/2)^nu / Gamma(nu+1)
  double prefactor(double x) const {
    if (fast_pow_ && x <= 1e4) {
      const double y = 0.5 * x;
      double p = 1.0;
      for (int k = 0; k < n_int_; ++k) p *= y;
      if (nu0_ != 0.0) p *= std::sqrt(y);
      return p * inv_gamma_;
    }
    return std::exp(nu_ * std::log(0.5 * x) - lg_);
  }

  bool series_sum(double x, int terms, long double& sum, long double& abs_sum) const {
    const long double q = 0.25L * x * x;
    long double t = 1.0L;
    sum = 1.0L;
    abs_sum = 1.0L;
    for (int m = 1; m < terms; ++m) {
      t *= -q / (static_cast<long double>(m) * (nu_ + m));
      sum += t;
      abs_sum += std::fabs(t);
      if (std::fabs(t) < 1e-18L * std::fabs(sum) && m > q / (nu_ + 1.0)) return true;
    }
    return false;
  }

  // Accepts the series only when its cancellation error stays below abs_tol.
  // For J the cancellation error is scaled by the prefactor; for lambda it is not.
  bool series_scaled(double x, double& out, bool for_j) const {
    if (x > 40.0 + 2.0 * nu_) return false;
    long double sum, abs_sum;
    if (!series_sum(x, cfg_.series_terms, sum, abs_sum)) return false;
    const long double err = abs_sum * 8.0L * std::numeric_limits<long double>::epsilon();
    const double scale = for_j ? prefactor(x) : 1.0;
    if (static_cast<double>(err) * scale > 0.1 * cfg_.abs_tol) return false;
    out = static_cast<double>(sum);
    return true;
  }

  bool hankel(double x, double& out) const {
    double p = 1.0, q = 0.0, a = 1.0;
    double last = 1.0;
    const double ix = 1.0 / x;
    for (int k = 1; k < kHankelTerms; ++k) {
      const double next = a * hcoef_[k] * ix;
      if (k > 1 && std::fabs(next) > std::fabs(a)) break;
      a = next;
      switch (k & 3) {
        case 1: q += a; break;
        case 2: p -= a; break;
        case 3: q -= a; break;
        default: p += a; break;
      }
      last = std::fabs(a);
      if (last < 1e-17) break;
    }
    if (last > 0.1 * cfg_.abs_tol) return false;
    const double c = std::cos(x), s = std::sin(x);
    const double cw = c * cph_ + s * sph_;
    const double sw = s * cph_ - c * sph_;
    out = std::sqrt(2.0 / (std::numbers::pi * x)) * (p * cw - q * sw);
    return true;
  }

  double miller(double x) const {
    const double big = std::max(x, static_cast<double>(n_int_));
    int top = n_int_ + 20 + static_cast<int>(big + 15.0 * std::cbrt(big));
    if (top % 2) ++top;
    // normalisation (x/2)^nu0 = sum_k c_k J_{nu0+2k}, c_k = (nu0+2k) Gamma(nu0+k)/k!
    int kk = top / 2;
    double g = nu0_ == 0.0 ? 1.0 : std::exp(log_gamma(nu0_ + kk) - log_gamma(kk + 1.0));
    auto coef = [&](int k) {
      if (nu0_ == 0.0) return k == 0 ? 1.0 : 2.0;
      while (kk > k) {
        g *= kk / (nu0_ + kk - 1.0);
        --kk;
      }
      return (nu0_ + 2.0 * k) * g;
    };
    double f_hi = 0.0, f = 1e-30, norm = 0.0, target = 0.0;
    if (top == n_int_) target = f;
    norm += coef(top / 2) * f;
    for (int k = top; k >= 1; --k) {
      const double f_lo = 2.0 * (nu0_ + k) / x * f - f_hi;
      f_hi = f;
      f = f_lo;
      const int idx = k - 1;
      if (idx == n_int_) target = f;
      if (idx % 2 == 0) norm += coef(idx / 2) * f;
      if (std::fabs(f) > 1e200) {
        f *= 1e-200;
        f_hi *= 1e-200;
        norm *= 1e-200;
        target *= 1e-200;
      }
    }
    const double scale = std::exp(nu0_ * std::log(0.5 * x)) / norm;
    return target * scale;
  }

  static constexpr int kHankelTerms = 64;

  double nu_;
  SpecFunConfig cfg_;
  double hcoef_[kHankelTerms] = {};
  double hankel_try_ = 0;
  double lg_ = 0, mu_ = 0, cph_ = 0, sph_ = 0, nu0_ = 0, hankel_from_ = 0, inv_gamma_ = 0;
  int n_int_ = 0;
  bool fast_pow_ = false;
};

inline double bessel_j(double nu, double x, const SpecFunConfig& cfg = {}) { return BesselJ(nu, cfg)(x); }

}  // namespace depthsep
