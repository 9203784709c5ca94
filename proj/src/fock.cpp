#include "modsensor/fock.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <unsupported/Eigen/MatrixFunctions>

#include "modsensor/errors.hpp"

namespace modsensor {

namespace {

void require_cutoff(int cutoff) {
  if (cutoff < 2) throw ValidationError("cutoff must be at least 2, got " + std::to_string(cutoff));
}

DenseOperator make_op(CMat m, std::string label, bool unitary = false, int guard = 0) {
  DenseOperator op;
  op.matrix = std::move(m);
  op.label = std::move(label);
  op.unitary = unitary;
  op.guard_band = guard;
  return op;
}

}  // namespace

int measured_guard_band(const CMat& kept, int minimum) {
  const int cutoff = static_cast<int>(kept.cols());
  int valid = 0;
  while (valid < cutoff && 1.0 - kept.col(valid).squaredNorm() < 1e-10) ++valid;
  return std::min(cutoff, std::max(minimum, cutoff - valid));
}

int edge_band(int cutoff) { return std::max(1, std::min(std::max(8, cutoff / 20), cutoff / 2)); }

StateVector::StateVector(CVec amps) : amps_(std::move(amps)) {}

StateVector StateVector::fock(int n, int cutoff) {
  require_cutoff(cutoff);
  if (n < 0 || n >= cutoff) throw ValidationError("Fock index outside truncated space");
  CVec v = CVec::Zero(cutoff);
  v[n] = 1.0;
  return StateVector(std::move(v));
}

StateVector& StateVector::normalize() {
  const double nrm = amps_.norm();
  if (nrm == 0.0) throw NumericalError("cannot normalize a zero state");
  amps_ /= nrm;
  return *this;
}

double StateVector::tail_mass() const {
  const int band = edge_band(cutoff());
  return amps_.tail(band).squaredNorm();
}

double StateVector::mean_number() const {
  double acc = 0.0;
  for (int n = 0; n < cutoff(); ++n) acc += n * std::norm(amps_[n]);
  return acc / norm_squared();
}

StateVector StateVector::resized(int cutoff) const {
  require_cutoff(cutoff);
  CVec v = CVec::Zero(cutoff);
  const int keep = std::min(cutoff, this->cutoff());
  v.head(keep) = amps_.head(keep);
  return StateVector(std::move(v));
}

HybridState::HybridState(CVec amps, int cutoff) : amps_(std::move(amps)), cutoff_(cutoff) {
  if (amps_.size() != 2 * cutoff) throw ValidationError("hybrid amplitude vector must have 2*cutoff entries");
}

HybridState HybridState::product(Qubit q, const StateVector& osc) {
  HybridState h(CVec::Zero(2 * osc.cutoff()), osc.cutoff());
  h.block(q) = osc.amps();
  return h;
}

HybridState& HybridState::normalize() {
  const double nrm = amps_.norm();
  if (nrm == 0.0) throw NumericalError("cannot normalize a zero state");
  amps_ /= nrm;
  return *this;
}

StateVector HybridState::conditional(Qubit q) const {
  StateVector s{CVec(block(q))};
  return s.normalize();
}

int default_guard_band(double alpha_abs, int cutoff) {
  return std::max(8, static_cast<int>(std::ceil(4.0 * alpha_abs * std::sqrt(static_cast<double>(cutoff)))));
}

DenseOperator identity(int cutoff) {
  require_cutoff(cutoff);
  return make_op(CMat::Identity(cutoff, cutoff), "I", true);
}

DenseOperator annihilation(int cutoff) {
  require_cutoff(cutoff);
  CMat m = CMat::Zero(cutoff, cutoff);
  for (int n = 1; n < cutoff; ++n) m(n - 1, n) = std::sqrt(static_cast<double>(n));
  return make_op(std::move(m), "a");
}

DenseOperator creation(int cutoff) {
  auto op = annihilation(cutoff);
  op.matrix.adjointInPlace();
  op.label = "a+";
  return op;
}

DenseOperator number(int cutoff) {
  require_cutoff(cutoff);
  CMat m = CMat::Zero(cutoff, cutoff);
  for (int n = 0; n < cutoff; ++n) m(n, n) = n;
  return make_op(std::move(m), "n");
}

DenseOperator position(int cutoff) {
  const CMat a = annihilation(cutoff).matrix;
  return make_op((a + a.adjoint()) / std::sqrt(2.0), "x");
}

DenseOperator momentum(int cutoff) {
  const CMat a = annihilation(cutoff).matrix;
  return make_op(cplx(0.0, 1.0) * (a.adjoint() - a) / std::sqrt(2.0), "p");
}

CMat displacement_matrix(cplx alpha, int cutoff) {
  // Along each diagonal k = |m - n| the element is a phase times
  //   f_j = sqrt(j! / (j + k)!) x^{k/2} e^{-x/2} L_j^{(k)}(x),  x = |alpha|^2, j = min(m, n),
  // and f obeys the normalized Laguerre recurrence, which stays bounded by one.
  CMat d = CMat::Zero(cutoff, cutoff);
  const double x = std::norm(alpha);
  if (x == 0.0) return CMat::Identity(cutoff, cutoff);
  const double log_x = std::log(x);
  const cplx unit = alpha / std::sqrt(x);
  const cplx lower_phase_step = unit;
  const cplx upper_phase_step = -std::conj(unit);
  cplx lower_phase = 1.0;
  cplx upper_phase = 1.0;
  std::vector<double> f(cutoff);
  for (int k = 0; k < cutoff; ++k) {
    const int len = cutoff - k;
    f[0] = std::exp(0.5 * k * log_x - 0.5 * x - 0.5 * std::lgamma(k + 1.0));
    if (len > 1) f[1] = (1.0 + k - x) * f[0] / std::sqrt(1.0 + k);
    for (int j = 1; j + 1 < len; ++j) {
      f[j + 1] = ((2.0 * j + 1.0 + k - x) * f[j] - std::sqrt(static_cast<double>(j) * (j + k)) * f[j - 1]) /
                 std::sqrt((j + 1.0) * (j + 1.0 + k));
    }
    for (int j = 0; j < len; ++j) {
      d(j + k, j) = lower_phase * f[j];
      if (k > 0) d(j, j + k) = upper_phase * f[j];
    }
    lower_phase *= lower_phase_step;
    upper_phase *= upper_phase_step;
  }
  return d;
}

DenseOperator displacement(cplx alpha, int cutoff, double tail_tolerance) {
  require_cutoff(cutoff);
  const double a2 = std::norm(alpha);
  if (a2 > 0.5 * cutoff) {
    diag::warn("displacement |alpha|^2 = " + std::to_string(a2) + " is not small against cutoff " +
               std::to_string(cutoff));
  }
  CMat d = displacement_matrix(alpha, cutoff);
  const double lost = 1.0 - d.col(0).squaredNorm();
  if (lost > tail_tolerance) {
    throw TruncationError("cutoff " + std::to_string(cutoff) + " too small for displacement |alpha| = " +
                          std::to_string(std::sqrt(a2)) + " (lost mass " + std::to_string(lost) + ")");
  }
  const int guard = measured_guard_band(d, default_guard_band(std::sqrt(a2), cutoff));
  return make_op(std::move(d), "D", true, guard);
}

StateVector squeezed_vacuum(double r, int cutoff) {
  require_cutoff(cutoff);
  CVec v = CVec::Zero(cutoff);
  const double t = -std::tanh(r);
  double c = 1.0 / std::sqrt(std::cosh(r));
  v[0] = c;
  for (int k = 1; 2 * k < cutoff; ++k) {
    c *= t * std::sqrt((2.0 * k - 1.0) / (2.0 * k));
    v[2 * k] = c;
  }
  return StateVector(std::move(v));
}

DenseOperator squeeze(double r, int cutoff, double tail_tolerance) {
  require_cutoff(cutoff);
  if (std::abs(r) > 3.0) throw ValidationError("squeeze |r| must not exceed 3");
  const double lost = 1.0 - squeezed_vacuum(r, cutoff).norm_squared();
  if (lost > tail_tolerance) {
    throw TruncationError("cutoff " + std::to_string(cutoff) + " too small for squeezing r = " + std::to_string(r));
  }
  // Exponentiate the generator in an enlarged space and crop. The padding lets the
  // geometric tanh(r)^k tails of squeezed number states decay below 1e-13.
  const double decay = -std::log(std::max(std::tanh(std::abs(r)), 1e-300));
  const int pad = std::clamp(static_cast<int>(std::ceil(2.0 * 30.0 / decay)), 32, 3000);
  const int big = cutoff + pad;
  Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(big, big);
  for (int n = 2; n < big; ++n) {
    const double e = 0.5 * r * std::sqrt(static_cast<double>(n) * (n - 1));
    gen(n - 2, n) = e;
    gen(n, n - 2) = -e;
  }
  const Eigen::MatrixXd s = gen.exp();
  // Guard band: columns whose image leaks more than 1e-10 outside the kept block.
  CMat kept = s.topLeftCorner(cutoff, cutoff).cast<cplx>();
  const int guard = measured_guard_band(kept, 0);
  return make_op(std::move(kept), "S", true, guard);
}

DenseOperator rotation(double theta, int cutoff) {
  require_cutoff(cutoff);
  CMat m = CMat::Zero(cutoff, cutoff);
  for (int n = 0; n < cutoff; ++n) m(n, n) = std::polar(1.0, -theta * n);
  return make_op(std::move(m), "R", true);
}

DenseOperator shift_ladder(LadderDirection direction, int steps, int cutoff) {
  require_cutoff(cutoff);
  if (steps < 1) throw ValidationError("ladder steps must be >= 1");
  CMat m = CMat::Zero(cutoff, cutoff);
  for (int n = 0; n + steps < cutoff; ++n) {
    if (direction == LadderDirection::up) {
      m(n + steps, n) = 1.0;
    } else {
      m(n, n + steps) = 1.0;
    }
  }
  return make_op(std::move(m), direction == LadderDirection::up ? "E+" : "E-");
}

cplx expectation(const StateVector& state, const DenseOperator& op) {
  if (op.dim() != state.cutoff()) throw ValidationError("operator and state dimensions differ");
  return state.amps().dot(op.matrix * state.amps());
}

cplx expectation(const HybridState& state, const DenseOperator& op) {
  if (op.dim() != state.amps().size()) throw ValidationError("operator and hybrid state dimensions differ");
  return state.amps().dot(op.matrix * state.amps());
}

StateVector apply(const DenseOperator& op, const StateVector& state) {
  if (op.dim() != state.cutoff()) throw ValidationError("operator and state dimensions differ");
  return StateVector(op.matrix * state.amps());
}

HybridState apply(const DenseOperator& op, const HybridState& state) {
  if (op.dim() != state.amps().size()) throw ValidationError("operator and hybrid state dimensions differ");
  return HybridState(op.matrix * state.amps(), state.cutoff());
}

double displacement_leakage(const StateVector& state, cplx alpha) {
  const CVec moved = displacement_matrix(alpha, state.cutoff()) * state.amps();
  return std::max(0.0, state.norm_squared() - moved.squaredNorm());
}

cplx char_function_numeric(const StateVector& state, cplx beta, double tail_tolerance) {
  const double norm2 = state.norm_squared();
  if (state.tail_mass() > tail_tolerance * norm2) {
    throw TruncationError("characteristic function at |beta| = " + std::to_string(std::abs(beta)) +
                          ": state reaches the cutoff " + std::to_string(state.cutoff()));
  }
  const CVec moved = displacement_matrix(-beta, state.cutoff()) * state.amps();
  return state.amps().dot(moved) / norm2;
}

double unitarity_defect(const DenseOperator& op, int guard_high, int guard_low) {
  const int c = op.fock_cutoff();
  std::vector<int> keep;
  const int blocks = op.hybrid ? 2 : 1;
  for (int q = 0; q < blocks; ++q) {
    for (int n = guard_low; n < c - guard_high; ++n) keep.push_back(q * c + n);
  }
  const CMat gram = op.matrix.adjoint() * op.matrix;
  double worst = 0.0;
  for (int j : keep) {
    for (int k : keep) {
      const cplx target = j == k ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(gram(j, k) - target));
    }
  }
  return worst;
}

}  // namespace modsensor
