#include "modsensor/circuit.hpp"

#include <cmath>
#include <string>

#include "modsensor/errors.hpp"

namespace modsensor {

namespace {

using Gate = Eigen::Matrix2cd;

const cplx kI(0.0, 1.0);

Gate hadamard() {
  Gate g;
  g << 1.0, 1.0, 1.0, -1.0;
  return g / std::sqrt(2.0);
}

Gate z_rotation(double theta) {
  Gate g = Gate::Zero();
  g(0, 0) = std::polar(1.0, -theta / 2);
  g(1, 1) = std::polar(1.0, theta / 2);
  return g;
}

Gate x_rotation(double theta) {
  const double c = std::cos(theta / 2);
  const double s = std::sin(theta / 2);
  Gate g;
  g << c, -kI * s, -kI * s, c;
  return g;
}

void apply_gate(const Gate& g, HybridState& h) {
  const CVec d = h.block(Qubit::down);
  const CVec u = h.block(Qubit::up);
  h.block(Qubit::down) = g(0, 0) * d + g(0, 1) * u;
  h.block(Qubit::up) = g(1, 0) * d + g(1, 1) * u;
}

// kron(projector, op) summed over the two eigen-projectors of a Pauli matrix.
CMat controlled_pair(const Gate& plus, const CMat& on_plus, const CMat& on_minus) {
  const int c = static_cast<int>(on_plus.rows());
  const Gate minus = Gate::Identity() - plus;
  CMat m(2 * c, 2 * c);
  for (int r = 0; r < 2; ++r) {
    for (int s = 0; s < 2; ++s) m.block(r * c, s * c, c, c) = plus(r, s) * on_plus + minus(r, s) * on_minus;
  }
  return m;
}

Gate sigma_x_plus() {
  Gate g;
  g << 0.5, 0.5, 0.5, 0.5;
  return g;
}

Gate sigma_y_plus() {
  Gate g;
  g << 0.5, -0.5 * kI, 0.5 * kI, 0.5;
  return g;
}

// Top levels of a hybrid matrix whose columns leak out of the kept block.
int hybrid_guard_band(const CMat& kept) {
  const int c = static_cast<int>(kept.cols()) / 2;
  int good = 0;
  while (good < c && 1.0 - kept.col(good).squaredNorm() < 1e-10 && 1.0 - kept.col(c + good).squaredNorm() < 1e-10) {
    ++good;
  }
  return c - good;
}

CMat crop_hybrid(const CMat& big, int big_cutoff, int cutoff) {
  CMat out(2 * cutoff, 2 * cutoff);
  for (int r = 0; r < 2; ++r) {
    for (int s = 0; s < 2; ++s) {
      out.block(r * cutoff, s * cutoff, cutoff, cutoff) = big.block(r * big_cutoff, s * big_cutoff, cutoff, cutoff);
    }
  }
  return out;
}

double signed_unit(int bit) { return bit == 0 ? 1.0 : -1.0; }

}  // namespace

CouplingBasis Stabilizer::basis() const {
  return kind == StabilizerKind::position || kind == StabilizerKind::momentum ? CouplingBasis::sigma_x
                                                                              : CouplingBasis::sigma_z;
}

void Stabilizer::validate() const {
  if (kind == StabilizerKind::number && !(number_length > 0.0)) {
    throw ValidationError("number stabilizer needs a positive modular length");
  }
  if (kind == StabilizerKind::phase && (phase_length < 2 || phase_length % 2 != 0)) {
    throw ValidationError("phase stabilizer needs an even modular length >= 2");
  }
}

DenseOperator conditional_stabilizer(const Stabilizer& stabilizer, int cutoff) {
  stabilizer.validate();
  if (cutoff < 2) throw ValidationError("cutoff must be at least 2");
  DenseOperator down;
  DenseOperator up;
  std::string name;
  switch (stabilizer.kind) {
    case StabilizerKind::position:
      down = displacement(cplx(0.0, -kSqrtPi / 2), cutoff);
      up = displacement(cplx(0.0, kSqrtPi / 2), cutoff);
      name = "CSx";
      break;
    case StabilizerKind::momentum:
      down = displacement(kSqrtPi / 2, cutoff);
      up = displacement(-kSqrtPi / 2, cutoff);
      name = "CSp";
      break;
    case StabilizerKind::number:
      down = rotation(stabilizer.number_length / 2, cutoff);
      up = rotation(-stabilizer.number_length / 2, cutoff);
      name = "CSn";
      break;
    case StabilizerKind::phase:
      down = shift_ladder(LadderDirection::up, stabilizer.phase_length / 2, cutoff);
      up = shift_ladder(LadderDirection::down, stabilizer.phase_length / 2, cutoff);
      down.guard_band = stabilizer.phase_length / 2;
      name = "CSphi";
      break;
  }
  DenseOperator op;
  op.hybrid = true;
  op.unitary = true;
  op.label = name;
  op.guard_band = std::max(down.guard_band, up.guard_band);
  if (stabilizer.basis() == CouplingBasis::sigma_z) {
    op.matrix = CMat::Zero(2 * cutoff, 2 * cutoff);
    op.matrix.topLeftCorner(cutoff, cutoff) = down.matrix;
    op.matrix.bottomRightCorner(cutoff, cutoff) = up.matrix;
  } else {
    op.matrix = controlled_pair(sigma_x_plus(), down.matrix, up.matrix);
  }
  return op;
}

DenseOperator bsb_stabilizer(BsbKind kind, double delta, int cutoff) {
  if (!(delta > 0.0)) throw ValidationError("BsB stabilizer needs delta > 0");
  if (cutoff < 2) throw ValidationError("cutoff must be at least 2");
  const double big = kGridLength * std::cosh(delta * delta) / 2;  // generator weight of the outer factors
  const double small = kGridLength * delta * delta;
  const double reach = (2 * big + small) / std::sqrt(2.0);
  const int pad = 16 + static_cast<int>(std::ceil(6.0 * reach * std::sqrt(static_cast<double>(cutoff))));
  const int n = cutoff + pad;
  const double root2 = std::sqrt(2.0);
  CMat outer;
  CMat inner;
  if (kind == BsbKind::x) {
    // exp(-i big sigma_x x) and exp(-i small sigma_y p)
    outer = controlled_pair(sigma_x_plus(), displacement_matrix(cplx(0.0, -big / root2), n),
                            displacement_matrix(cplx(0.0, big / root2), n));
    inner = controlled_pair(sigma_y_plus(), displacement_matrix(small / root2, n), displacement_matrix(-small / root2, n));
  } else {
    // exp(+i big sigma_x p) and exp(+i small sigma_y x)
    outer = controlled_pair(sigma_x_plus(), displacement_matrix(-big / root2, n), displacement_matrix(big / root2, n));
    inner = controlled_pair(sigma_y_plus(), displacement_matrix(cplx(0.0, small / root2), n),
                            displacement_matrix(cplx(0.0, -small / root2), n));
  }
  const CMat full = outer * inner * outer;
  DenseOperator op;
  op.hybrid = true;
  op.unitary = true;
  op.label = kind == BsbKind::x ? "CSx_bsb" : "CSp_bsb";
  op.matrix = crop_hybrid(full, n, cutoff);
  op.guard_band = hybrid_guard_band(op.matrix);
  return op;
}

SensorFamily SensorFamily::number_phase(int spacing, int offset) {
  if (spacing < 2 || spacing % 2 != 0) throw ValidationError("NP sensing needs an even spacing N >= 2");
  if (offset < spacing / 2 || offset >= spacing) {
    throw ValidationError("NP sensing needs N/2 <= offset < N so the phase stabilizer never reaches vacuum");
  }
  return {false, spacing, offset};
}

double SensorFamily::length_a() const { return grid ? kGridLength : static_cast<double>(spacing); }
double SensorFamily::length_b() const { return grid ? kGridLength : 2.0 * kPi / spacing; }

Stabilizer SensorFamily::stabilizer_a() const {
  return grid ? Stabilizer::position() : Stabilizer::phase(spacing);
}
Stabilizer SensorFamily::stabilizer_b() const {
  return grid ? Stabilizer::momentum() : Stabilizer::number(length_b());
}

double SensorFamily::argument_a(const SignalPair& signal, double theta) const {
  if (grid) return theta + length_a() * std::get<GridSignal>(signal).eps_x;
  return theta + length_a() * std::get<NpSignal>(signal).eps_phi;
}

double SensorFamily::argument_b(const SignalPair& signal, double theta) const {
  if (grid) return theta + length_b() * std::get<GridSignal>(signal).eps_p;
  return theta + length_b() * (std::get<NpSignal>(signal).eps_n + offset);
}

StateVector apply_signal(const StateVector& state, const SignalPair& signal) {
  const int c = state.cutoff();
  if (const auto* g = std::get_if<GridSignal>(&signal)) {
    if (std::abs(g->eps_x) >= kGridLength || std::abs(g->eps_p) >= kGridLength) {
      diag::warn("grid signal outside the unambiguous range |eps| < sqrt(2 pi)");
    }
    CVec v = state.amps();
    if (g->eps_x != 0.0) v = displacement(g->eps_x / std::sqrt(2.0), c).matrix * v;
    if (g->eps_p != 0.0) v = displacement(cplx(0.0, g->eps_p / std::sqrt(2.0)), c).matrix * v;
    return StateVector(std::move(v));
  }
  const auto& np = std::get<NpSignal>(signal);
  CVec v = CVec::Zero(c);
  const CVec& a = state.amps();
  const int shift = np.eps_n;
  if (shift > 0 && a.tail(std::min(shift, c)).squaredNorm() > 1e-14) {
    throw TruncationError("phonon shift by " + std::to_string(shift) + " pushes the state past cutoff " +
                          std::to_string(c));
  }
  if (shift < 0 && a.head(std::min(-shift, c)).squaredNorm() > 1e-14) {
    throw ValidationError("negative phonon shift would annihilate low Fock levels");
  }
  for (int n = 0; n < c; ++n) {
    const int m = n + shift;
    if (m >= 0 && m < c) v[m] = a[n] * std::polar(1.0, np.eps_phi * m);
  }
  return StateVector(std::move(v));
}

HybridState apply_signal(const HybridState& state, const SignalPair& signal) {
  HybridState out = state;
  for (Qubit q : {Qubit::down, Qubit::up}) {
    out.block(q) = apply_signal(StateVector(CVec(state.block(q))), signal).amps();
  }
  return out;
}

QpeCircuit::QpeCircuit(DenseOperator controlled, CouplingBasis basis)
    : controlled_(std::move(controlled)), basis_(basis) {
  if (!controlled_.hybrid) throw ValidationError("QPE circuit needs a hybrid controlled operator");
}

QpeCircuit::QpeCircuit(const Stabilizer& stabilizer, int cutoff)
    : controlled_(conditional_stabilizer(stabilizer, cutoff)), basis_(stabilizer.basis()) {
  if (stabilizer.kind == StabilizerKind::phase) vacuum_guard_ = stabilizer.phase_length / 2;
}

HybridState QpeCircuit::evolve(const StateVector& osc, double theta) const {
  if (osc.cutoff() > cutoff()) {
    throw ValidationError("state cutoff " + std::to_string(osc.cutoff()) + " exceeds circuit cutoff " +
                          std::to_string(cutoff()));
  }
  const StateVector fitted = osc.cutoff() == cutoff() ? osc : osc.resized(cutoff());
  if (vacuum_guard_ > 0 && fitted.amps().head(vacuum_guard_).squaredNorm() > 1e-12) {
    diag::warn("phase stabilizer acts on Fock levels below l_phi/2; lowering past vacuum is not unitary");
  }
  HybridState h = HybridState::product(Qubit::down, fitted);
  if (basis_ == CouplingBasis::sigma_z) {
    apply_gate(hadamard(), h);
    h.amps() = controlled_.matrix * h.amps();
    apply_gate(z_rotation(theta), h);
    apply_gate(hadamard(), h);
  } else {
    h.amps() = controlled_.matrix * h.amps();
    apply_gate(x_rotation(theta), h);
  }
  return h;
}

std::array<Branch, 2> QpeCircuit::branches(const StateVector& osc, double theta) const {
  const HybridState h = evolve(osc, theta);
  const double total = h.norm_squared();
  std::array<Branch, 2> out;
  for (Qubit q : {Qubit::down, Qubit::up}) {
    auto& b = out[static_cast<int>(q)];
    b.probability = h.probability(q) / total;
    if (b.probability >= 1e-15) {
      b.state = StateVector(CVec(h.block(q)));
      b.state.normalize();
    }
  }
  return out;
}

RoundOutcome run_qpe_round(const HybridState& state, const QpeCircuit& circuit, double theta, Rng& rng) {
  if (state.probability(Qubit::up) > 1e-12 * state.norm_squared()) {
    throw ValidationError("QPE round expects the ancilla reset to |down>");
  }
  StateVector osc(CVec(state.block(Qubit::down)));
  osc.normalize();
  auto br = circuit.branches(osc, theta);
  const int bit = uniform01(rng) < br[0].probability ? 0 : 1;
  if (br[bit].probability < 1e-15) throw NumericalError("sampled a measurement branch with vanishing probability");
  return {bit, HybridState::product(Qubit::down, br[bit].state)};
}

RoundOutcome run_qpe_round(const HybridState& state, const Stabilizer& stabilizer, double theta, Rng& rng) {
  return run_qpe_round(state, QpeCircuit(stabilizer, state.cutoff()), theta, rng);
}

void RoundPlan::validate() const {
  if (n_rounds < 1 || n_rounds > kMaxRounds) {
    throw ValidationError("number of sequential rounds must lie in [1, " + std::to_string(kMaxRounds) + "]");
  }
}

int bitstring_index(const std::vector<int>& bits) {
  int index = 0;
  for (int b : bits) index = 2 * index + b;
  return index;
}

OutcomeRecord sample_rounds(const StateVector& osc, const QpeCircuit& a, const QpeCircuit& b, const RoundPlan& plan,
                            Rng& rng) {
  plan.validate();
  OutcomeRecord rec;
  HybridState h = HybridState::product(Qubit::down, osc.resized(a.cutoff()));
  for (int n = 0; n < plan.n_rounds; ++n) {
    for (int which = 0; which < 2; ++which) {
      const double theta = which == 0 ? plan.theta_a : plan.theta_b;
      auto out = run_qpe_round(h, which == 0 ? a : b, theta, rng);
      rec.bits.push_back(out.bit);
      rec.which.push_back(which == 0 ? 'a' : 'b');
      rec.thetas.push_back(theta);
      h = std::move(out.state);
    }
  }
  return rec;
}

std::vector<double> enumerate_rounds(const StateVector& osc, const QpeCircuit& a, const QpeCircuit& b,
                                     const RoundPlan& plan) {
  plan.validate();
  const int steps = 2 * plan.n_rounds;
  std::vector<double> dist(std::size_t{1} << steps, 0.0);
  struct Node {
    double probability;
    StateVector state;
    int index;
  };
  std::vector<Node> frontier{{1.0, osc.resized(a.cutoff()), 0}};
  for (int step = 0; step < steps; ++step) {
    const bool first = step % 2 == 0;
    std::vector<Node> next;
    for (const auto& node : frontier) {
      auto br = (first ? a : b).branches(node.state, first ? plan.theta_a : plan.theta_b);
      for (int bit = 0; bit < 2; ++bit) {
        if (br[bit].probability < 1e-15) continue;
        next.push_back({node.probability * br[bit].probability, std::move(br[bit].state), 2 * node.index + bit});
      }
    }
    frontier = std::move(next);
  }
  for (const auto& node : frontier) dist[node.index] = node.probability;
  return dist;
}

std::array<double, 2> prob_independent(const SensorFamily& family, const VisibilitySet& eta, const SignalPair& signal,
                                       double theta_a, double theta_b) {
  return {0.5 * (1.0 + eta.eta_a * std::cos(family.argument_a(signal, theta_a))),
          0.5 * (1.0 + eta.eta_b * std::cos(family.argument_b(signal, theta_b)))};
}

std::array<double, 4> prob_joint_sequential(const SensorFamily& family, const VisibilitySet& eta,
                                            const SignalPair& signal, double theta_a, double theta_b) {
  const double ca = std::cos(family.argument_a(signal, theta_a));
  const double cb = std::cos(family.argument_b(signal, theta_b));
  std::array<double, 4> p{};
  for (int ma = 0; ma < 2; ++ma) {
    for (int mb = 0; mb < 2; ++mb) {
      const double sa = signed_unit(ma);
      const double sb = signed_unit(mb);
      const double v = 0.25 * (1.0 + sa * eta.eta_a * ca - sb * eta.eta_b * cb - sa * sb * eta.eta_joint * ca * cb);
      p[2 * ma + mb] = std::max(0.0, v);
    }
  }
  return p;
}

GeneralizedDistribution prob_joint_generalized(const GridSpec& spec, const RoundPlan& plan, const GridSignal& signal) {
  plan.validate();
  spec.validate();
  const int rounds = plan.n_rounds;
  const int span = 2 * rounds + 1;
  const double arg_a = plan.theta_a + kGridLength * signal.eps_x;
  const double arg_b = plan.theta_b + kGridLength * signal.eps_p;

  // <S_x^u S_p^v> on the unsignalled state.
  CMat moments(span, span);
  for (int u = -rounds; u <= rounds; ++u) {
    for (int v = -rounds; v <= rounds; ++v) {
      const double sign = ((u * v) % 2 == 0) ? 1.0 : -1.0;
      moments(u + rounds, v + rounds) = sign * char_function_grid_analytic(spec, kSqrtPi * cplx(-v, u));
    }
  }

  // Laurent coefficients of prod_n (1 + s_n O) for every pattern of the n bits of one quadrature.
  const auto expand = [&](double arg, bool momentum) {
    const int patterns = 1 << rounds;
    CMat coeffs = CMat::Zero(span, patterns);
    for (int pat = 0; pat < patterns; ++pat) {
      CVec poly = CVec::Zero(span);
      poly[rounds] = 1.0;
      for (int n = 0; n < rounds; ++n) {
        const int bit = (pat >> (rounds - 1 - n)) & 1;
        const int flips = momentum ? n + 1 : n;
        const double s = signed_unit((bit + flips) % 2);
        CVec next = poly;
        for (int k = 0; k < span; ++k) {
          if (poly[k] == cplx(0.0)) continue;
          if (k > 0) next[k - 1] += 0.5 * s * std::polar(1.0, arg) * poly[k];
          if (k + 1 < span) next[k + 1] += 0.5 * s * std::polar(1.0, -arg) * poly[k];
        }
        poly = next;
      }
      coeffs.col(pat) = poly;
    }
    return coeffs;
  };
  const CMat cx = expand(arg_a, false);
  const CMat cp = expand(arg_b, true);
  const CMat table = cx.transpose() * moments * cp;

  VisibilitySet eta = grid_visibility(spec);
  const auto marginal = [](double e, double arg, int bit) { return 0.5 * (1.0 + signed_unit(bit) * e * std::cos(arg)); };

  const int total = 1 << (2 * rounds);
  GeneralizedDistribution out;
  out.exact.resize(total);
  out.product.resize(total);
  const double scale = std::pow(0.25, rounds);
  for (int idx = 0; idx < total; ++idx) {
    int xpat = 0;
    int ppat = 0;
    double prod = 1.0;
    for (int n = 0; n < rounds; ++n) {
      const int mx = (idx >> (2 * rounds - 1 - 2 * n)) & 1;
      const int mp = (idx >> (2 * rounds - 2 - 2 * n)) & 1;
      xpat = 2 * xpat + mx;
      ppat = 2 * ppat + mp;
      prod *= marginal(eta.eta_a, arg_a, (mx + n) % 2) * marginal(eta.eta_b, arg_b, (mp + n + 1) % 2);
    }
    const double v = scale * table(xpat, ppat).real();
    out.exact[idx] = v < 0.0 ? 0.0 : v;
    out.product[idx] = prod;
  }
  return out;
}

double generalized_product_error(const GridSpec& spec, int n_rounds, int theta_points) {
  if (theta_points < 2) throw ValidationError("need at least two theta points");
  double worst = 0.0;
  for (int j = 0; j < theta_points; ++j) {
    const double theta = kPi * j / (theta_points - 1);
    RoundPlan plan{n_rounds, theta, theta};
    const auto d = prob_joint_generalized(spec, plan, GridSignal{});
    for (std::size_t i = 0; i < d.exact.size(); ++i) worst = std::max(worst, std::abs(d.exact[i] - d.product[i]));
  }
  return worst;
}

StateVector apply_dephasing(const StateVector& state, double sigma, Rng& rng) {
  if (sigma < 0.0) throw ValidationError("dephasing strength must be non-negative");
  if (sigma == 0.0) return state;
  const double phi = std::normal_distribution<double>(0.0, sigma)(rng);
  CVec v = state.amps();
  for (int n = 0; n < v.size(); ++n) v[n] *= std::polar(1.0, -phi * n);
  return StateVector(std::move(v));
}

HybridState apply_dephasing(const HybridState& state, double sigma, Rng& rng) {
  if (sigma < 0.0) throw ValidationError("dephasing strength must be non-negative");
  if (sigma == 0.0) return state;
  const double phi = std::normal_distribution<double>(0.0, sigma)(rng);
  HybridState out = state;
  for (Qubit q : {Qubit::down, Qubit::up}) {
    auto blk = out.block(q);
    for (int n = 0; n < out.cutoff(); ++n) blk[n] *= std::polar(1.0, -phi * n);
  }
  return out;
}

void ProbGridConfig::validate() const {
  if (a_steps < 1 || b_steps < 1) throw ValidationError("grid steps must be positive");
  if (a_max < a_min || b_max < b_min) throw ValidationError("grid range max must not be below min");
  if (shots < 0) throw ValidationError("shots must be non-negative");
}

namespace {

double axis_value(double lo, double hi, int steps, int i) {
  return steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
}

}  // namespace

std::vector<ProbGridRow> probability_grid(const StateVector& state, const SensorFamily& family,
                                          const ProbGridConfig& config, Exec exec) {
  config.validate();
  const int points = config.a_steps * config.b_steps;
  std::vector<ProbGridRow> rows(points);
  const bool mc = config.shots > 0;

  VisibilitySet eta;
  if (family.grid) {
    eta = grid_visibility(state);
  } else {
    NpSpec np;
    np.spacing = family.spacing;
    np.offset = family.offset;
    eta = np_visibility(state, np);
  }
  const QpeCircuit circuit_a(family.stabilizer_a(), state.cutoff());
  const QpeCircuit circuit_b(family.stabilizer_b(), state.cutoff());

  const auto cell = [&](int idx) {
    const int i = idx / config.b_steps;
    const int j = idx % config.b_steps;
    ProbGridRow row;
    row.eps_a = axis_value(config.a_min, config.a_max, config.a_steps, i);
    row.eps_b = axis_value(config.b_min, config.b_max, config.b_steps, j);
    SignalPair signal;
    if (family.grid) {
      signal = GridSignal{row.eps_a, row.eps_b};
    } else {
      const int shift = static_cast<int>(std::lround(row.eps_b));
      row.eps_b = shift;
      signal = NpSignal{row.eps_a, shift};
    }
    row.shots = config.shots;
    row.monte_carlo = mc;
    if (!mc) {
      const auto p = prob_independent(family, eta, signal, config.theta_a, config.theta_b);
      row.p_a0 = p[0];
      row.p_b0 = p[1];
    } else {
      const StateVector moved = apply_signal(state, signal);
      const double pa = circuit_a.branches(moved, config.theta_a)[0].probability;
      const double pb = circuit_b.branches(moved, config.theta_b)[0].probability;
      Rng ra = make_stream(config.seed, static_cast<std::uint64_t>(idx), 0);
      Rng rb = make_stream(config.seed, static_cast<std::uint64_t>(idx), 1);
      row.p_a0 = static_cast<double>(std::binomial_distribution<int>(config.shots, pa)(ra)) / config.shots;
      row.p_b0 = static_cast<double>(std::binomial_distribution<int>(config.shots, pb)(rb)) / config.shots;
    }
    rows[idx] = row;
  };

  for_each_index(points, exec, cell);
  return rows;
}

}  // namespace modsensor
