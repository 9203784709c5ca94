#include "modsensor/states.hpp"

#include <algorithm>
#include <boost/math/special_functions/airy.hpp>
#include <cmath>

#include "modsensor/errors.hpp"
#include "modsensor/theta.hpp"

namespace modsensor {

namespace {

double envelope_weight(double delta, int k) { return std::exp(-kPi * delta * delta * k * k); }

int initial_grid_cutoff(const GridSpec& spec) {
  if (spec.cutoff > 0) return spec.cutoff;
  const double mean = 0.5 / (spec.delta * spec.delta);
  return std::max(32, static_cast<int>(std::ceil(6.0 * mean + 24.0)));
}

// Unnormalized theta-product form of chi.
cplx grid_chi_unnormalized(double delta, cplx beta) {
  const double d2 = delta * delta;
  const double d4 = d2 * d2;
  const cplx i(0.0, 1.0);
  const double br = beta.real();
  const double bi = beta.imag();
  const cplx z1 = -i * br / (kSqrtPi * d2);
  const cplx tau1 = i * 2.0 * (1.0 + d4) / d2;
  const cplx z2 = i * bi / (2.0 * kSqrtPi * d2);
  const cplx tau2 = i / (2.0 * d2);
  const double scale1 = -br * br / (2.0 * d2);
  const double scale2 = -(1.0 + d4) * bi * bi / (2.0 * d2);
  return theta_characteristic(0.0, 0.0, z1, tau1, scale1) * theta_characteristic(0.0, 0.0, z2, tau2, scale2) +
         theta_characteristic(0.5, 0.0, z1, tau1, scale1) * theta_characteristic(0.0, 0.5, z2, tau2, scale2);
}

double np_mean_number(const std::vector<double>& c, int spacing, int offset) {
  double acc = 0.0;
  double norm = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    acc += c[k] * c[k] * (static_cast<double>(k) * spacing + offset);
    norm += c[k] * c[k];
  }
  return acc / norm;
}

std::vector<double> airy_amplitudes(int spacing, double mu) {
  const double step = std::cbrt(mu / (static_cast<double>(spacing) * spacing)) * spacing;
  const double z1 = airy_first_zero();
  std::vector<double> c;
  double peak = 0.0;
  for (int k = 0;; ++k) {
    const double arg = step * (k + 1) - z1;
    const double v = boost::math::airy_ai(arg);
    peak = std::max(peak, std::abs(v));
    // Past the maximum of Ai the envelope decays monotonically.
    if (arg > -1.0188 && std::abs(v) < 1e-8 * peak) break;
    c.push_back(v);
    if (k > 100000) throw NumericalError("airy envelope did not decay");
  }
  return c;
}

}  // namespace

int GridSpec::terms() const {
  if (k_range > 0) return k_range;
  return static_cast<int>(std::ceil(4.0 / (kSqrtPi * delta)));
}

double GridSpec::squeezing() const { return -std::log(delta); }

void GridSpec::validate() const {
  if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("grid delta must lie in (0, 1]");
  const int minimum = static_cast<int>(std::ceil(3.0 / (kSqrtPi * delta)));
  if (k_range > 0 && k_range < minimum) {
    throw ValidationError("grid k_range must be at least " + std::to_string(minimum));
  }
  if (cutoff < 0) throw ValidationError("cutoff must be non-negative");
}

double grid_normalization(const GridSpec& spec) {
  const int kmax = spec.terms();
  const double d2 = spec.delta * spec.delta;
  double total = 0.0;
  for (int j = -kmax; j <= kmax; ++j) {
    for (int k = -kmax; k <= kmax; ++k) {
      total += envelope_weight(spec.delta, j) * envelope_weight(spec.delta, k) *
               std::exp(-kPi * (j - k) * (j - k) / (2.0 * d2));
    }
  }
  return total;
}

GridState build_grid_state(const GridSpec& spec) {
  spec.validate();
  const int kmax = spec.terms();
  const double r = spec.squeezing();
  const double exact_norm = grid_normalization(spec);
  int cutoff = std::min(initial_grid_cutoff(spec), spec.truncation.max_cutoff);
  while (true) {
    const CVec seed = squeezed_vacuum(r, cutoff).amps();
    CVec v = envelope_weight(spec.delta, 0) * seed;
    for (int k = 1; k <= kmax; ++k) {
      const double w = envelope_weight(spec.delta, k);
      if (w < 1e-300) break;
      const CMat d = displacement_matrix(k * kSqrtPi, cutoff);
      // D(-alpha) is the transpose of the real matrix D(alpha).
      v += w * (d * seed + d.transpose() * seed);
    }
    const double lost = std::max(0.0, 1.0 - v.squaredNorm() / exact_norm);
    const double edge = v.tail(edge_band(cutoff)).squaredNorm() / exact_norm;
    if (lost <= spec.truncation.tail_tolerance && edge <= spec.truncation.tail_tolerance) {
      StateVector s(std::move(v));
      s.normalize();
      return {std::move(s), lost};
    }
    if (cutoff >= spec.truncation.max_cutoff) {
      throw TruncationError("grid state with delta " + std::to_string(spec.delta) + " needs more than " +
                            std::to_string(spec.truncation.max_cutoff) + " Fock levels (lost mass " +
                            std::to_string(lost) + ")");
    }
    cutoff = std::min(spec.truncation.max_cutoff,
                      std::max(cutoff + 1, static_cast<int>(std::ceil(cutoff * spec.truncation.growth))));
  }
}

StateVector make_grid_state(const GridSpec& spec) { return build_grid_state(spec).state; }

cplx stabilizer_x_expectation(const StateVector& state) {
  return char_function_numeric(state, cplx(0.0, kSqrtPi));
}

cplx stabilizer_p_expectation(const StateVector& state) { return char_function_numeric(state, cplx(-kSqrtPi, 0.0)); }

SqueezingPair effective_squeezing(const StateVector& state) {
  const auto from = [](cplx s) {
    const double mag2 = std::norm(s);
    if (mag2 <= 0.0) throw NumericalError("stabilizer expectation vanishes; squeezing undefined");
    return std::sqrt(std::log(1.0 / mag2) / kPi);
  };
  return {from(stabilizer_x_expectation(state)), from(stabilizer_p_expectation(state))};
}

cplx char_function_grid_analytic(const GridSpec& spec, cplx beta) {
  spec.validate();
  return grid_chi_unnormalized(spec.delta, beta) / grid_chi_unnormalized(spec.delta, 0.0);
}

cplx grid_wavefunction(const GridSpec& spec, double s, Quadrature basis) {
  spec.validate();
  const int kmax = spec.terms();
  const double d2 = spec.delta * spec.delta;
  const double d4 = d2 * d2;
  const double pref = 1.0 / std::sqrt(grid_normalization(spec) * std::sqrt(kPi * d2));
  double acc = 0.0;
  for (int k = -kmax; k <= kmax; ++k) {
    if (basis == Quadrature::position) {
      const double u = s - k * kGridLength;
      acc += envelope_weight(spec.delta, k) * std::exp(-u * u / (2.0 * d2));
    } else {
      const double u = s - k * kGridLength / (1.0 + d4);
      acc += std::exp(-kPi * d2 * k * k / (1.0 + d4)) * std::exp(-(1.0 + d4) / (2.0 * d2) * u * u);
    }
  }
  return pref * acc;
}

VisibilitySet grid_visibility(const GridSpec& spec) {
  return {char_function_grid_analytic(spec, cplx(0.0, kSqrtPi)).real(),
          char_function_grid_analytic(spec, cplx(kSqrtPi, 0.0)).real(),
          -char_function_grid_analytic(spec, cplx(kSqrtPi, -kSqrtPi)).real()};
}

VisibilitySet grid_visibility(const StateVector& state) {
  return {char_function_numeric(state, cplx(0.0, kSqrtPi)).real(),
          char_function_numeric(state, cplx(kSqrtPi, 0.0)).real(),
          -char_function_numeric(state, cplx(kSqrtPi, -kSqrtPi)).real()};
}

void NpSpec::validate() const {
  if (spacing < 2) throw ValidationError("NP spacing N must be at least 2");
  if (offset < 0 || offset >= spacing) throw ValidationError("NP offset must lie in [0, N-1]");
  if (const auto* sine = std::get_if<SineEnvelope>(&envelope); sine && sine->fock_cutoff < spacing) {
    throw ValidationError("sine envelope needs F >= N");
  }
  if (const auto* airy = std::get_if<AiryEnvelope>(&envelope); airy && !(airy->mu > 0.0)) {
    throw ValidationError("airy envelope needs mu > 0");
  }
  if (const auto* flat = std::get_if<FlatEnvelope>(&envelope); flat && flat->kmax < 0) {
    throw ValidationError("flat envelope needs kmax >= 0");
  }
  if (cutoff < 0) throw ValidationError("cutoff must be non-negative");
}

std::vector<double> np_coefficients(const NpSpec& spec) {
  spec.validate();
  const int n = spec.spacing;
  std::vector<double> c;
  if (const auto* sine = std::get_if<SineEnvelope>(&spec.envelope)) {
    const int f = sine->fock_cutoff;
    const int top = f / n;
    const double denom = f + 2.0 * n - (f % n);
    const double norm = 1.0 / std::sqrt(top / 2.0 + 1.0);
    for (int k = 0; k <= top; ++k) c.push_back(norm * std::sin(kPi * n * (k + 1) / denom));
  } else if (const auto* airy = std::get_if<AiryEnvelope>(&spec.envelope)) {
    c = airy_amplitudes(n, airy->mu);
  } else {
    const auto& flat = std::get<FlatEnvelope>(spec.envelope);
    c.assign(flat.kmax + 1, 1.0);
  }
  double norm2 = 0.0;
  for (double v : c) norm2 += v * v;
  const double scale = 1.0 / std::sqrt(norm2);
  for (double& v : c) v *= scale;
  return c;
}

StateVector make_np_state(const NpSpec& spec) {
  const auto c = np_coefficients(spec);
  const int top = static_cast<int>(c.size() - 1) * spec.spacing + spec.offset;
  int cutoff = spec.cutoff > 0 ? spec.cutoff : top + 2 * spec.spacing + 8;
  if (cutoff <= top) {
    throw TruncationError("NP state support reaches level " + std::to_string(top) + " beyond cutoff " +
                          std::to_string(cutoff));
  }
  CVec v = CVec::Zero(cutoff);
  for (std::size_t k = 0; k < c.size(); ++k) v[static_cast<int>(k) * spec.spacing + spec.offset] = c[k];
  return StateVector(std::move(v));
}

VisibilitySet np_visibility(const StateVector& state, const NpSpec& spec) {
  const int n = spec.spacing;
  const CVec& a = state.amps();
  cplx shift = 0.0;
  for (int m = 0; m + n < state.cutoff(); ++m) shift += std::conj(a[m]) * a[m + n];
  // Weight per residue class; a single occupied class is an exact eigenstate of the number stabilizer.
  std::vector<double> residue(n, 0.0);
  for (int m = 0; m < state.cutoff(); ++m) residue[m % n] += std::norm(a[m]);
  const double norm2 = state.norm_squared();
  cplx rot = 0.0;
  int occupied = 0;
  for (int j = 0; j < n; ++j) {
    rot += residue[j] * std::polar(1.0, -spec.number_length() * j);
    if (residue[j] > 0.0) ++occupied;
  }
  VisibilitySet v;
  v.eta_a = shift.real() / norm2;
  v.eta_b = occupied == 1 ? 1.0 : std::abs(rot) / norm2;
  v.eta_joint = v.eta_a * v.eta_b;
  return v;
}

double modular_phase_variance(const StateVector& state, int spacing) {
  const CVec& a = state.amps();
  cplx shift = 0.0;
  for (int m = 0; m + spacing < state.cutoff(); ++m) shift += std::conj(a[m]) * a[m + spacing];
  shift /= state.norm_squared();
  if (std::abs(shift) < 1e-15) throw NumericalError("phase visibility vanishes; modular phase variance diverges");
  return 1.0 / std::norm(shift) - 1.0;
}

double airy_first_zero() { return -boost::math::airy_ai_zero<double>(1); }

double solve_airy_mu(int spacing, int offset, double target_mean, double tolerance) {
  const auto mean_at = [&](double mu) { return np_mean_number(airy_amplitudes(spacing, mu), spacing, offset); };
  double lo = 1e-4;
  double hi = 10.0;
  const double mean_lo = mean_at(lo);
  const double mean_hi = mean_at(hi);
  if (target_mean > mean_lo || target_mean < mean_hi) {
    throw ValidationError("target mean phonon number " + std::to_string(target_mean) + " outside airy range [" +
                          std::to_string(mean_hi) + ", " + std::to_string(mean_lo) + "]");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double m = mean_at(mid);
    if (std::abs(m - target_mean) < tolerance) return mid;
    if (m > target_mean) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw NumericalError("airy mu bisection did not converge");
}

}  // namespace modsensor
