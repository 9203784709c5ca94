#include "modsensor/pulses.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "modsensor/errors.hpp"

namespace modsensor {

namespace {

int index(Qubit q, int n, int cutoff) { return static_cast<int>(q) * cutoff + n; }

// sigma^+ (a^dag)^k: |down, n> -> sqrt((n+k)!/n!) |up, n+k>.
CMat raising(int k, int cutoff) {
  CMat m = CMat::Zero(2 * cutoff, 2 * cutoff);
  for (int n = 0; n + k < cutoff; ++n) {
    double amp = 1.0;
    for (int j = 1; j <= k; ++j) amp *= std::sqrt(static_cast<double>(n + j));
    m(index(Qubit::up, n + k, cutoff), index(Qubit::down, n, cutoff)) = amp;
  }
  return m;
}

// |down><down| f(n+1) - |up><up| f(n), as a diagonal.
CMat number_split(int cutoff, int power) {
  CMat m = CMat::Zero(2 * cutoff, 2 * cutoff);
  for (int n = 0; n < cutoff; ++n) {
    m(index(Qubit::down, n, cutoff), index(Qubit::down, n, cutoff)) = std::pow(n + 1.0, power);
    m(index(Qubit::up, n, cutoff), index(Qubit::up, n, cutoff)) = -std::pow(static_cast<double>(n), power);
  }
  return m;
}

DenseOperator hybrid_op(CMat m, std::string label, bool unitary = false, int guard = 0) {
  DenseOperator op;
  op.matrix = std::move(m);
  op.label = std::move(label);
  op.hybrid = true;
  op.unitary = unitary;
  op.guard_band = guard;
  return op;
}

// exp(-i G) for Hermitian G.
CMat exp_hermitian(const CMat& g) {
  Eigen::SelfAdjointEigenSolver<CMat> eig(g);
  const Eigen::VectorXcd phases = (eig.eigenvalues().cast<cplx>() * cplx(0.0, -1.0)).array().exp();
  return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

CMat matrix_power(CMat base, int k) {
  CMat out = CMat::Identity(base.rows(), base.cols());
  while (k > 0) {
    if (k & 1) out = base * out;
    base = base * base;
    k >>= 1;
  }
  return out;
}

// H(t) = sigma^+ (first a^dag e^{-i delta t} + second a^dag^2 e^{-4 i delta t}) + h.c.
class SidebandDrive {
 public:
  SidebandDrive(const PulseSpec& spec, bool second_order)
      : delta_(spec.detuning()),
        cutoff_(spec.cutoff),
        first_(0.5 * spec.omega_b * raising(1, spec.cutoff)),
        second_(second_order ? CMat(0.5 * spec.zeta2 * spec.omega_b * raising(2, spec.cutoff))
                             : CMat::Zero(2 * spec.cutoff, 2 * spec.cutoff)) {}

  double period() const { return 2.0 * kPi / delta_; }

  CMat hamiltonian(double t) const {
    CMat up = first_ * std::polar(1.0, -delta_ * t) + second_ * std::polar(1.0, -4.0 * delta_ * t);
    return up + up.adjoint();
  }

  // Diagonal of exp(i F t) with F = delta (2 |up><up| - 3 n), so that H(t) = e^{iFt} H(0) e^{-iFt}.
  Eigen::VectorXcd frame(double t) const {
    Eigen::VectorXcd d(2 * cutoff_);
    for (int n = 0; n < cutoff_; ++n) {
      d(index(Qubit::down, n, cutoff_)) = std::polar(1.0, -3.0 * n * delta_ * t);
      d(index(Qubit::up, n, cutoff_)) = std::polar(1.0, (2.0 - 3.0 * n) * delta_ * t);
    }
    return d;
  }

  // One drive period in `steps` fourth-order Magnus steps (two Gauss points each). Every step
  // map is the first one conjugated by the frame rotation, so the product telescopes to
  // frame(t_last) (S_0 frame(-h))^(steps-1) S_0.
  CMat period_map(int steps) const {
    const double h = period() / steps;
    const double offset = std::sqrt(3.0) / 6.0;
    const CMat h1 = hamiltonian(h * (0.5 - offset));
    const CMat h2 = hamiltonian(h * (0.5 + offset));
    const CMat comm = h2 * h1 - h1 * h2;
    const CMat g = 0.5 * h * (h1 + h2) + cplx(0.0, -std::sqrt(3.0) * h * h / 12.0) * comm;
    const CMat first_step = exp_hermitian(0.5 * (g + g.adjoint()));
    const CMat advance = first_step * frame(-h).asDiagonal();
    return frame((steps - 1) * h).asDiagonal() * matrix_power(advance, steps - 1) * first_step;
  }

 private:
  double delta_;
  int cutoff_;
  CMat first_;
  CMat second_;
};

double paulis_mse(const std::vector<PauliRow>& rows) {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) {
    sum += std::pow(r.sx - r.ideal_sx, 2) + std::pow(r.sy - r.ideal_sy, 2) + std::pow(r.sz - r.ideal_sz, 2);
  }
  return sum / (3.0 * rows.size());
}

}  // namespace

double PulseSpec::detuning() const { return omega_b * std::sqrt(periods * kPi / phi_target); }
double PulseSpec::duration() const { return periods * 2.0 * kPi / detuning(); }
double PulseSpec::phase() const {
  const double d = detuning();
  return omega_b * omega_b * duration() / (2.0 * d);
}

void PulseSpec::validate() const {
  if (!(omega_b >= 0.0) || !std::isfinite(omega_b)) throw ValidationError("sideband Rabi rate must be non-negative");
  if (periods < 1) throw ValidationError("period count K must be a positive integer");
  if (!(phi_target > 0.0) || !std::isfinite(phi_target)) throw ValidationError("target phase must be positive");
  if (!(zeta2 >= 0.0 && zeta2 <= 0.5)) throw ValidationError("second-order ratio must lie in [0, 0.5]");
  if (cutoff < 2) throw ValidationError("pulse cutoff must be at least 2");
}

MagnusRates magnus_rates(const PulseSpec& spec) {
  spec.validate();
  if (spec.omega_b == 0.0) return {};
  const double w = spec.omega_b;
  const double d = spec.detuning();
  return {w * w / (4.0 * d), std::pow(w, 3) / (4.0 * d * d), 3.0 * std::pow(w, 4) / (16.0 * std::pow(d, 3)),
          spec.zeta2 * spec.zeta2 * w * w / (16.0 * d)};
}

MagnusTerms magnus_terms(const PulseSpec& spec) {
  const MagnusRates r = magnus_rates(spec);
  const int c = spec.cutoff;
  if (spec.omega_b == 0.0) {
    const CMat zero = CMat::Zero(2 * c, 2 * c);
    return {hybrid_op(zero, "Y2"), hybrid_op(zero, "Y3"), hybrid_op(zero, "Y4"), hybrid_op(zero, "Y2'")};
  }
  if (spec.detuning() < 3.0 * spec.omega_b) {
    diag::warn("sideband detuning is less than three Rabi rates; the Magnus series converges slowly");
  }
  const double t = spec.duration();
  const cplx minus_i(0.0, -1.0);
  const CMat split1 = number_split(c, 1);
  const CMat split2 = number_split(c, 2);

  // |down><up| a a^dag a + |up><down| a^dag a a^dag, i.e. sigma^+ a^dag weighted by (n+1).
  CMat hop = CMat::Zero(2 * c, 2 * c);
  for (int n = 0; n + 1 < c; ++n) {
    const double w = std::pow(n + 1.0, 1.5);
    hop(index(Qubit::up, n + 1, c), index(Qubit::down, n, c)) = w;
    hop(index(Qubit::down, n, c), index(Qubit::up, n + 1, c)) = w;
  }

  MagnusTerms out;
  out.y2 = hybrid_op(minus_i * t * r.y2 * split1, "Y2");
  out.y3 = hybrid_op(minus_i * t * r.y3 * hop, "Y3");
  out.y4 = hybrid_op(-minus_i * t * r.y4 * split2, "Y4");
  out.y2_prime = hybrid_op(out.y2.matrix + minus_i * t * r.second * (split1 + split2), "Y2'");
  return out;
}

DenseOperator propagate_bsb(const PulseSpec& spec, bool include_second_order, int steps_per_period) {
  spec.validate();
  if (steps_per_period < 64) throw ValidationError("integration needs at least 64 steps per drive period");
  if (spec.omega_b == 0.0) return hybrid_op(CMat::Identity(2 * spec.cutoff, 2 * spec.cutoff), "U_bsb", true);
  const SidebandDrive drive(spec, include_second_order);
  const CMat coarse = matrix_power(drive.period_map(steps_per_period), spec.periods);
  const CMat fine = matrix_power(drive.period_map(2 * steps_per_period), spec.periods);
  const double change = (fine - coarse).cwiseAbs().maxCoeff();
  if (change > kPulseConvergence) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "sideband propagator not converged at %d steps per period (change %.3e)",
                  steps_per_period, change);
    throw NumericalError(buf);
  }
  return hybrid_op(fine, include_second_order ? "U_bsb2" : "U_bsb", true, include_second_order ? kPulseGuardBand : 1);
}

DenseOperator ancilla_phase_undo(double phase, int cutoff) {
  CMat m = CMat::Zero(2 * cutoff, 2 * cutoff);
  for (int n = 0; n < cutoff; ++n) {
    m(index(Qubit::down, n, cutoff), index(Qubit::down, n, cutoff)) = std::polar(1.0, phase / 4.0);
    m(index(Qubit::up, n, cutoff), index(Qubit::up, n, cutoff)) = std::polar(1.0, -phase / 4.0);
  }
  return hybrid_op(std::move(m), "R_undo", true);
}

double magnus_distance(const PulseSpec& spec, int n_block, bool include_second_order) {
  if (n_block < 0 || n_block + kPulseGuardBand >= spec.cutoff) {
    throw ValidationError("verified block plus guard band must fit below the cutoff");
  }
  const int c = spec.cutoff;
  const CMat u = propagate_bsb(spec, include_second_order).matrix;
  const CMat ideal = magnus_terms(spec).y2.matrix.diagonal().array().exp().matrix().asDiagonal();
  const CMat diff = u - ideal;
  CMat cols(2 * c, 2 * (n_block + 1));
  for (int n = 0; n <= n_block; ++n) {
    cols.col(2 * n) = diff.col(index(Qubit::down, n, c));
    cols.col(2 * n + 1) = diff.col(index(Qubit::up, n, c));
  }
  return Eigen::JacobiSVD<CMat>(cols).singularValues()(0);
}

PauliRow ideal_pauli_row(int n, double phi) {
  PauliRow r;
  r.n = n;
  r.ideal_sx = std::sin(phi * n);
  r.ideal_sy = -std::cos(phi * n);
  r.ideal_sz = 0.0;
  return r;
}

PauliTable verify_conditional_number(const PulseSpec& spec, int n_max) {
  spec.validate();
  if (n_max < 0 || n_max + kPulseGuardBand >= spec.cutoff) {
    throw ValidationError("n_max plus guard band must fit below the cutoff");
  }
  const int c = spec.cutoff;
  PauliTable table;
  table.second_order = spec.zeta2 > 0.0;
  const double residual = spec.omega_b == 0.0 ? 0.0 : spec.phase();
  const CMat u = ancilla_phase_undo(residual, c).matrix * propagate_bsb(spec, table.second_order).matrix;
  const cplx minus_i(0.0, -1.0);
  for (int n = 0; n <= n_max; ++n) {
    const CVec out = (u.col(index(Qubit::down, n, c)) + minus_i * u.col(index(Qubit::up, n, c))) / std::sqrt(2.0);
    const auto down = out.head(c);
    const auto up = out.tail(c);
    const cplx coherence = down.dot(up);  // sum conj(down) up
    PauliRow row = ideal_pauli_row(n, spec.phi_target);
    row.sx = 2.0 * coherence.real();
    row.sy = 2.0 * coherence.imag();
    row.sz = down.squaredNorm() - up.squaredNorm();
    table.rows.push_back(row);
  }
  table.mse = paulis_mse(table.rows);
  return table;
}

ZetaScan tune_zeta2(const PulseSpec& spec, int n_max, int points, double lo, double hi, Exec exec) {
  if (points < 2 || !(lo >= 0.0) || !(hi > lo) || hi > 0.5) throw ValidationError("bad zeta2 scan range");
  ZetaScan scan;
  scan.zeta.resize(points);
  scan.mse.resize(points);
  for (int k = 0; k < points; ++k) scan.zeta[k] = lo + (hi - lo) * k / (points - 1);
  for_each_index(points, exec, [&](int k) {
    PulseSpec s = spec;
    s.zeta2 = scan.zeta[k];
    scan.mse[k] = verify_conditional_number(s, n_max).mse;
  });
  const auto best = std::min_element(scan.mse.begin(), scan.mse.end()) - scan.mse.begin();
  scan.best_zeta = scan.zeta[best];
  scan.best_mse = scan.mse[best];
  return scan;
}

DenseOperator conditional_phase_sequence(int l_phi, int cutoff) {
  if (l_phi < 2 || l_phi % 2 != 0) throw ValidationError("l_phi must be a positive even integer");
  if (cutoff < 2) throw ValidationError("cutoff must be at least 2");
  const int c = cutoff;
  CMat exchange = CMat::Zero(2 * c, 2 * c);
  for (int n = 0; n + 1 < c; ++n) {
    exchange(index(Qubit::up, n + 1, c), index(Qubit::down, n, c)) = 1.0;
    exchange(index(Qubit::down, n, c), index(Qubit::up, n + 1, c)) = 1.0;
  }
  exchange(index(Qubit::up, 0, c), index(Qubit::up, 0, c)) = 1.0;
  // top level has no partner inside the space; leave it in place so the matrix stays a permutation
  exchange(index(Qubit::down, c - 1, c), index(Qubit::down, c - 1, c)) = 1.0;

  CMat carrier = CMat::Zero(2 * c, 2 * c);
  for (int n = 0; n < c; ++n) {
    carrier(index(Qubit::up, n, c), index(Qubit::down, n, c)) = 1.0;
    carrier(index(Qubit::down, n, c), index(Qubit::up, n, c)) = 1.0;
  }
  return hybrid_op(matrix_power(carrier * exchange, l_phi / 2), "U_phase_seq", true, l_phi / 2);
}

HybridState apply_phase_sequence(const DenseOperator& sequence, int l_phi, const HybridState& state) {
  if (sequence.dim() != 2 * state.cutoff()) throw ValidationError("sequence and state dimensions differ");
  const int low = l_phi / 2;
  double weight = 0.0;
  for (Qubit q : {Qubit::down, Qubit::up}) weight += state.block(q).head(std::min(low, state.cutoff())).squaredNorm();
  if (weight > 1e-12) {
    diag::warn("phase sequence acts on Fock levels below l_phi/2; the vacuum term breaks the conditional shift");
  }
  return apply(sequence, state);
}

}  // namespace modsensor
