#pragma once

#include <span>
#include <variant>
#include <vector>

#include "modsensor/fock.hpp"

namespace modsensor {

// Finite-energy grid state: normalized sum_k e^{-pi Delta^2 k^2} D(k sqrt(pi)) S(-ln Delta)|0>.
struct GridSpec {
  double delta = 0.5;
  int k_range = 0;  // 0 selects ceil(4 / (sqrt(pi) delta))
  int cutoff = 0;   // starting cutoff; 0 picks one from the mean phonon number
  TruncationPolicy truncation{};

  int terms() const;
  double squeezing() const;  // r = -ln delta
  void validate() const;
};

// Contrast of the two modular measurements and of their product.
struct VisibilitySet {
  double eta_a = 1.0;
  double eta_b = 1.0;
  double eta_joint = 1.0;
};

struct GridState {
  StateVector state;
  double lost_mass = 0.0;  // weight cut off by the truncation
};

GridState build_grid_state(const GridSpec& spec);
StateVector make_grid_state(const GridSpec& spec);

// Normalization sum N_Delta of the unnormalized superposition.
double grid_normalization(const GridSpec& spec);

struct SqueezingPair {
  double delta_x = 0.0;
  double delta_p = 0.0;
};
SqueezingPair effective_squeezing(const StateVector& state);

// Position and momentum stabilizers S_x = D(-i sqrt(pi)), S_p = D(sqrt(pi)).
cplx stabilizer_x_expectation(const StateVector& state);
cplx stabilizer_p_expectation(const StateVector& state);

// Closed-form characteristic function from Jacobi theta functions, chi(0) = 1.
cplx char_function_grid_analytic(const GridSpec& spec, cplx beta);

enum class Quadrature { position, momentum };
cplx grid_wavefunction(const GridSpec& spec, double s, Quadrature basis);

// eta_x = Re chi(i sqrt(pi)), eta_p = Re chi(sqrt(pi)), eta_xp = -Re chi(sqrt(pi)(1 - i)).
VisibilitySet grid_visibility(const GridSpec& spec);
VisibilitySet grid_visibility(const StateVector& state);

// Number-phase states with support on Fock levels k N + offset.
struct SineEnvelope {
  int fock_cutoff = 0;  // F
};
struct AiryEnvelope {
  double mu = 0.1;
};
struct FlatEnvelope {
  int kmax = 0;
};
using NpEnvelope = std::variant<SineEnvelope, AiryEnvelope, FlatEnvelope>;

struct NpSpec {
  int spacing = 4;  // N
  int offset = 0;   // lambda
  NpEnvelope envelope = SineEnvelope{4};
  int cutoff = 0;  // 0 sizes the space from the support

  double number_length() const { return 2.0 * kPi / spacing; }  // l_n
  int phase_length() const { return spacing; }                    // l_phi
  void validate() const;
};

// Envelope amplitudes c_k on levels k N + offset, normalized.
std::vector<double> np_coefficients(const NpSpec& spec);
StateVector make_np_state(const NpSpec& spec);

// eta_a = <E-_N> (phase), eta_b = |<R_{l_n}>| (number).
VisibilitySet np_visibility(const StateVector& state, const NpSpec& spec);

// 1/|<E-_N>|^2 - 1. Throws NumericalError when the phase visibility vanishes.
double modular_phase_variance(const StateVector& state, int spacing);

// Airy parameter reproducing a target mean phonon number, bisection on [1e-4, 10].
double solve_airy_mu(int spacing, int offset, double target_mean, double tolerance = 1e-3);

// First zero of the Airy function, |z_1|.
double airy_first_zero();

}  // namespace modsensor
