#pragma once

#include <array>
#include <variant>
#include <vector>

#include "modsensor/fock.hpp"
#include "modsensor/parallel.hpp"
#include "modsensor/rng.hpp"
#include "modsensor/states.hpp"

namespace modsensor {

// Ancilla basis in which a conditional stabilizer couples. Sigma-z kinds are
// sandwiched between Hadamards by the circuit.
enum class CouplingBasis { sigma_z, sigma_x };

enum class StabilizerKind { position, momentum, number, phase };

struct Stabilizer {
  StabilizerKind kind = StabilizerKind::position;
  double number_length = 0.0;  // l_n for the number kind
  int phase_length = 0;        // l_phi (even) for the phase kind

  static Stabilizer position() { return {StabilizerKind::position}; }
  static Stabilizer momentum() { return {StabilizerKind::momentum}; }
  static Stabilizer number(double length) { return {StabilizerKind::number, length, 0}; }
  static Stabilizer phase(int length) { return {StabilizerKind::phase, 0.0, length}; }

  CouplingBasis basis() const;
  void validate() const;
};

// |down><down| (x) S^{1/2} + |up><up| (x) S^{dag 1/2}, with the projectors taken in the
// coupling basis. Hybrid layout as in HybridState.
DenseOperator conditional_stabilizer(const Stabilizer& stabilizer, int cutoff);

// Finite-energy big-small-big stabilizers.
enum class BsbKind { x, p };
DenseOperator bsb_stabilizer(BsbKind kind, double delta, int cutoff);

struct GridSignal {
  double eps_x = 0.0;
  double eps_p = 0.0;
};
struct NpSignal {
  double eps_phi = 0.0;
  int eps_n = 0;
};
using SignalPair = std::variant<GridSignal, NpSignal>;

// The pair of modular measurements (a first, then b) for one sensing-state family.
struct SensorFamily {
  bool grid = true;
  int spacing = 0;  // N, NP only
  int offset = 0;   // lambda, NP only

  static SensorFamily grid_family() { return {true, 0, 0}; }
  // Throws ValidationError unless N is even and offset >= N/2.
  static SensorFamily number_phase(int spacing, int offset);

  double length_a() const;  // l_s or l_phi
  double length_b() const;  // l_s or l_n
  Stabilizer stabilizer_a() const;
  Stabilizer stabilizer_b() const;
  // Total phase theta + l eps seen by each measurement.
  double argument_a(const SignalPair& signal, double theta) const;
  double argument_b(const SignalPair& signal, double theta) const;
};

// Grid: e^{i eps_p x} e^{-i eps_x p}. NP: e^{i eps_phi n} E+_{eps_n}.
StateVector apply_signal(const StateVector& state, const SignalPair& signal);
HybridState apply_signal(const HybridState& state, const SignalPair& signal);

struct Branch {
  double probability = 0.0;
  StateVector state;  // normalized post-measurement oscillator state; empty if probability < 1e-15
};

// One QPE sub-routine: ancilla prepared in |down>, (H), controlled stabilizer,
// ancilla rotation by theta, (H), projective ancilla measurement.
class QpeCircuit {
 public:
  QpeCircuit(DenseOperator controlled, CouplingBasis basis);
  QpeCircuit(const Stabilizer& stabilizer, int cutoff);

  int cutoff() const { return controlled_.fock_cutoff(); }
  const DenseOperator& controlled() const { return controlled_; }

  // Both outcomes of the round, enumerated.
  std::array<Branch, 2> branches(const StateVector& osc, double theta) const;
  // Ancilla amplitudes before measurement, for inspection.
  HybridState evolve(const StateVector& osc, double theta) const;

 private:
  DenseOperator controlled_;
  CouplingBasis basis_;
  int vacuum_guard_ = 0;
};

struct RoundOutcome {
  int bit = 0;
  HybridState state;  // collapsed, ancilla reset to |down>
};

// Samples a round from the Born rule. The ancilla of `state` must be in |down>.
RoundOutcome run_qpe_round(const HybridState& state, const QpeCircuit& circuit, double theta, Rng& rng);
RoundOutcome run_qpe_round(const HybridState& state, const Stabilizer& stabilizer, double theta, Rng& rng);

inline constexpr int kMaxRounds = 8;

struct RoundPlan {
  int n_rounds = 1;  // N_S
  double theta_a = 0.0;
  double theta_b = 0.0;
  void validate() const;
};

struct OutcomeRecord {
  std::vector<int> bits;      // a, b, a, b, ...
  std::vector<char> which;    // 'a' or 'b'
  std::vector<double> thetas;
};

// Index of a bitstring with the first bit most significant.
int bitstring_index(const std::vector<int>& bits);

// Sequential a-then-b rounds on a single copy of the state with backaction.
OutcomeRecord sample_rounds(const StateVector& osc, const QpeCircuit& a, const QpeCircuit& b, const RoundPlan& plan,
                            Rng& rng);
// Exact distribution over the 2^{2 N_S} bitstrings by tree expansion.
std::vector<double> enumerate_rounds(const StateVector& osc, const QpeCircuit& a, const QpeCircuit& b,
                                     const RoundPlan& plan);

// P_a(0), P_b(0) = (1 + eta cos(arg)) / 2.
std::array<double, 2> prob_independent(const SensorFamily& family, const VisibilitySet& eta, const SignalPair& signal,
                                       double theta_a, double theta_b);
// Joint (m_a, m_b) over 00, 01, 10, 11 for one a-then-b round.
std::array<double, 4> prob_joint_sequential(const SensorFamily& family, const VisibilitySet& eta,
                                            const SignalPair& signal, double theta_a, double theta_b);

struct GeneralizedDistribution {
  std::vector<double> exact;    // from the characteristic-function lattice
  std::vector<double> product;  // product of independent distributions with backaction reindexing
};
GeneralizedDistribution prob_joint_generalized(const GridSpec& spec, const RoundPlan& plan, const GridSignal& signal);

// Largest |exact - product| over outcomes and over theta_a = theta_b on a grid in [0, pi], at zero signal.
double generalized_product_error(const GridSpec& spec, int n_rounds, int theta_points = 33);

// One dephasing trajectory: e^{-i phi n} with phi ~ Normal(0, sigma^2).
StateVector apply_dephasing(const StateVector& state, double sigma, Rng& rng);
HybridState apply_dephasing(const HybridState& state, double sigma, Rng& rng);

// Sweep of single-round outcome probabilities over a rectangular signal grid.
struct ProbGridConfig {
  double a_min = -1.0, a_max = 1.0;
  int a_steps = 11;
  double b_min = -1.0, b_max = 1.0;
  int b_steps = 11;
  double theta_a = 0.0;
  double theta_b = 0.0;
  int shots = 0;  // 0 selects the analytic model
  std::uint64_t seed = 0;
  void validate() const;
};

struct ProbGridRow {
  double eps_a = 0.0;
  double eps_b = 0.0;
  double p_a0 = 0.0;
  double p_b0 = 0.0;
  int shots = 0;
  bool monte_carlo = false;
};

// Analytic rows use the closed-form model with the state's visibilities. Monte-Carlo rows
// draw `shots` outcomes from the state-vector circuit probabilities. For NP the b axis is
// rounded to integer shifts.
std::vector<ProbGridRow> probability_grid(const StateVector& state, const SensorFamily& family,
                                          const ProbGridConfig& config, Exec exec);

}  // namespace modsensor
