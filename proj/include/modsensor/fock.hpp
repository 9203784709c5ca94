#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>

namespace modsensor {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline const double kSqrtPi = std::sqrt(kPi);
inline const double kGridLength = std::sqrt(2.0 * kPi);  // modular length of the grid stabilizers

// Truncation policy shared by all state constructors.
struct TruncationPolicy {
  double tail_tolerance = 1e-10;
  int max_cutoff = 1024;
  double growth = 1.25;
};

// Number of top Fock levels inspected when measuring truncation loss.
int edge_band(int cutoff);

// Pure oscillator state over Fock levels 0..cutoff-1.
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(CVec amps);

  static StateVector fock(int n, int cutoff);
  static StateVector vacuum(int cutoff) { return fock(0, cutoff); }

  int cutoff() const { return static_cast<int>(amps_.size()); }
  const CVec& amps() const { return amps_; }
  CVec& amps() { return amps_; }
  cplx operator[](int n) const { return amps_[n]; }

  double norm_squared() const { return amps_.squaredNorm(); }
  StateVector& normalize();
  // Probability weight in the top edge_band(cutoff) levels.
  double tail_mass() const;
  double mean_number() const;
  // Zero-padded or truncated copy.
  StateVector resized(int cutoff) const;

 private:
  CVec amps_;
};

// Dense matrix on the Fock space or on the hybrid (ancilla x Fock) space.
struct DenseOperator {
  CMat matrix;
  std::string label;
  bool unitary = false;
  // Top Fock levels excluded from unitarity checks.
  int guard_band = 0;
  // Acts on ancilla x Fock (dimension 2 * cutoff).
  bool hybrid = false;

  int dim() const { return static_cast<int>(matrix.rows()); }
  int fock_cutoff() const { return hybrid ? dim() / 2 : dim(); }
};

enum class Qubit { down = 0, up = 1 };

// Ancilla qubit times oscillator. Index layout: qubit * cutoff + n, with down first.
class HybridState {
 public:
  HybridState() = default;
  HybridState(CVec amps, int cutoff);

  static HybridState product(Qubit q, const StateVector& osc);

  int cutoff() const { return cutoff_; }
  const CVec& amps() const { return amps_; }
  CVec& amps() { return amps_; }

  auto block(Qubit q) { return amps_.segment(static_cast<int>(q) * cutoff_, cutoff_); }
  auto block(Qubit q) const { return amps_.segment(static_cast<int>(q) * cutoff_, cutoff_); }

  double probability(Qubit q) const { return block(q).squaredNorm(); }
  double norm_squared() const { return amps_.squaredNorm(); }
  HybridState& normalize();
  // Oscillator amplitudes conditioned on the ancilla level, normalized.
  StateVector conditional(Qubit q) const;

 private:
  CVec amps_;
  int cutoff_ = 0;
};

// Unitarity guard band for displacement-like operators of magnitude |alpha|.
int default_guard_band(double alpha_abs, int cutoff);
// Top levels whose columns leak more than 1e-10 of their norm out of the kept block,
// never less than `minimum`.
int measured_guard_band(const CMat& kept, int minimum);

DenseOperator identity(int cutoff);
DenseOperator annihilation(int cutoff);
DenseOperator creation(int cutoff);
DenseOperator number(int cutoff);
DenseOperator position(int cutoff);
DenseOperator momentum(int cutoff);

// D(alpha) = exp(alpha a^dag - conj(alpha) a), from exact matrix elements.
DenseOperator displacement(cplx alpha, int cutoff, double tail_tolerance = 1e-10);
// S(r) = exp[r (a^2 - a^dag^2) / 2]; squeezes position for r > 0.
DenseOperator squeeze(double r, int cutoff, double tail_tolerance = 1e-10);
// R(theta) = exp(-i theta n).
DenseOperator rotation(double theta, int cutoff);

enum class LadderDirection { up, down };
// up: |n> -> |n+steps>, down: |n> -> |n-steps> (|n<steps> -> 0).
DenseOperator shift_ladder(LadderDirection direction, int steps, int cutoff);

// Closed-form amplitudes of S(r)|0>.
StateVector squeezed_vacuum(double r, int cutoff);

cplx expectation(const StateVector& state, const DenseOperator& op);
cplx expectation(const HybridState& state, const DenseOperator& op);
StateVector apply(const DenseOperator& op, const StateVector& state);
HybridState apply(const DenseOperator& op, const HybridState& state);

// Norm lost when D(alpha) acts on the state inside the truncated space.
double displacement_leakage(const StateVector& state, cplx alpha);

// chi(beta) = <D(beta)^dag>. The matrix elements are exact, so only the state's own
// truncation matters: throws TruncationError if its edge-band mass exceeds tail_tolerance.
cplx char_function_numeric(const StateVector& state, cplx beta, double tail_tolerance = 1e-8);

// Largest |(U^dag U - I)_jk| over indices whose Fock level lies in [guard_low, cutoff - guard_high).
double unitarity_defect(const DenseOperator& op, int guard_high, int guard_low = 0);

// Raw matrix of D(alpha) without truncation checks.
CMat displacement_matrix(cplx alpha, int cutoff);

}  // namespace modsensor
