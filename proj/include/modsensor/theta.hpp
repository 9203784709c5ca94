#pragma once

#include "modsensor/fock.hpp"

namespace modsensor {

// Jacobi theta function with characteristics [a; b]:
//   sum_n exp(log_scale + i pi tau (n+a)^2 + 2 pi i (z+b)(n+a)),  Im tau > 0.
// log_scale is folded into every term so that large prefactors cancel before exponentiation.
// Terms are summed outward from the dominant index until they fall below e^-40 of the largest.
cplx theta_characteristic(double a, double b, cplx z, cplx tau, double log_scale = 0.0);

}  // namespace modsensor
