#pragma once

#include <vector>

#include "modsensor/fock.hpp"
#include "modsensor/parallel.hpp"

namespace modsensor {

// Detuned blue sideband driven for K commensurate periods. Time in seconds, rates in rad/s.
struct PulseSpec {
  double omega_b = 2.0 * kPi * 2.74e3;
  int periods = 40;               // K
  double phi_target = kPi / 2.0;  // wanted conditional phase
  double zeta2 = 0.0;             // second-order sideband amplitude relative to omega_b
  int cutoff = 24;

  double detuning() const;  // omega_b sqrt(K pi / phi_target)
  double duration() const;  // K 2 pi / detuning
  // Omega^2 t / (2 delta); equals phi_target by construction.
  double phase() const;
  void validate() const;
};

// Scalar prefactors of the Magnus terms per unit time, i.e. Y_k = -i t c_k (operator).
struct MagnusRates {
  double y2 = 0.0;      // Omega^2 / (4 delta)
  double y3 = 0.0;      // Omega^3 / (4 delta^2)
  double y4 = 0.0;      // 3 Omega^4 / (16 delta^3), enters with the opposite sign
  double second = 0.0;  // zeta^2 Omega^2 / (16 delta), from the second-order sideband
};
MagnusRates magnus_rates(const PulseSpec& spec);

struct MagnusTerms {
  DenseOperator y2;
  DenseOperator y3;
  DenseOperator y4;
  DenseOperator y2_prime;  // y2 plus the two terms brought in by the second-order sideband
};
// Closed-form hybrid matrices at the end of the pulse. Warns when delta/Omega < 3.
MagnusTerms magnus_terms(const PulseSpec& spec);

inline constexpr int kPulseStepsPerPeriod = 2048;
inline constexpr double kPulseConvergence = 1e-8;
// Fock levels above the verified block kept free for the sideband couplings.
inline constexpr int kPulseGuardBand = 6;

// Time-ordered propagator of the sideband Hamiltonian. Each drive period is integrated with
// fourth-order Magnus steps and the period map is raised to the K-th power. Runs again at half
// the step and throws NumericalError if the two disagree by more than kPulseConvergence.
DenseOperator propagate_bsb(const PulseSpec& spec, bool include_second_order,
                            int steps_per_period = kPulseStepsPerPeriod);

// exp(+i Phi sigma_z / 4) on the ancilla, removing the residual rotation.
DenseOperator ancilla_phase_undo(double phase, int cutoff);

// Spectral norm of (U - exp(Y2)) restricted to input columns with n <= n_block.
double magnus_distance(const PulseSpec& spec, int n_block, bool include_second_order = false);

struct PauliRow {
  int n = 0;
  double sx = 0.0, sy = 0.0, sz = 0.0;              // numeric propagator
  double ideal_sx = 0.0, ideal_sy = 0.0, ideal_sz = 0.0;
};
struct PauliTable {
  std::vector<PauliRow> rows;
  double mse = 0.0;  // mean over n and the three Paulis
  bool second_order = false;
};

// Ancilla Paulis after the pulse on (|down> - i|up>)|n> / sqrt(2), n = 0..n_max, against
// exp(-i phi_t sigma_z n / 2). The second-order sideband is on when spec.zeta2 > 0.
PauliTable verify_conditional_number(const PulseSpec& spec, int n_max);

// Ideal column: the same input through exp(-i phi sigma_z n / 2).
PauliRow ideal_pauli_row(int n, double phi);

struct ZetaScan {
  std::vector<double> zeta;
  std::vector<double> mse;
  double best_zeta = 0.0;
  double best_mse = 0.0;
};
// Grid scan of zeta2 over [lo, hi] at fixed K, minimizing the Pauli-table MSE.
ZetaScan tune_zeta2(const PulseSpec& spec, int n_max, int points = 31, double lo = 0.0, double hi = 0.3,
                    Exec exec = Exec::serial);

// (U_c U_b)^{l_phi / 2} with U_b the ideal sideband exchange and U_c the carrier flip.
DenseOperator conditional_phase_sequence(int l_phi, int cutoff);
// Applies the sequence, warning if the state has weight below n = l_phi / 2.
HybridState apply_phase_sequence(const DenseOperator& sequence, int l_phi, const HybridState& state);

}  // namespace modsensor
