#include "modsensor/theta.hpp"

#include <cmath>

#include "modsensor/errors.hpp"

namespace modsensor {

cplx theta_characteristic(double a, double b, cplx z, cplx tau, double log_scale) {
  if (tau.imag() <= 0.0) throw ValidationError("theta series needs Im(tau) > 0");
  const cplx i(0.0, 1.0);
  const auto exponent = [&](double u) { return log_scale + i * kPi * tau * u * u + 2.0 * kPi * i * (z + b) * u; };
  // Real part -pi Im(tau) u^2 - 2 pi Im(z) u + const peaks at u = -Im(z)/Im(tau).
  const double peak = -z.imag() / tau.imag();
  const long centre = std::lround(peak - a);
  const double top = exponent(centre + a).real();
  cplx sum = std::exp(exponent(centre + a));
  for (int dir : {-1, 1}) {
    for (long n = centre + dir;; n += dir) {
      const cplx e = exponent(n + a);
      sum += std::exp(e);
      if (e.real() < top - 40.0 && (n + a - peak) * dir > 0) break;
    }
  }
  return sum;
}

}  // namespace modsensor
