#pragma once

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <stdexcept>

namespace depthsep {

using mp_real = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<120>>;

// Plain power series for J_nu carried out with ~120 significant digits. Slow, but
// free of the cancellation that ruins the double-precision series past x ~ 30.
inline double bessel_j_series_mp(double nu, double x) {
  if (nu < 0 || x < 0) throw std::domain_error("bessel_j_series_mp: negative argument");
  if (x == 0) return nu == 0 ? 1.0 : 0.0;
  const mp_real xm(x), num(nu);
  const mp_real q = xm * xm / 4;
  mp_real term = pow(xm / 2, num) / boost::math::tgamma(num + 1);
  mp_real sum = term;
  const mp_real stop = mp_real(1e-40) * abs(term);
  for (int m = 1; m < 100000; ++m) {
    term *= -q / (mp_real(m) * (num + m));
    sum += term;
    if (m > x && abs(term) < stop * 1e-30) break;
  }
  return static_cast<double>(sum);
}

}  // namespace depthsep
