#include "modsensor/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "modsensor/errors.hpp"

namespace modsensor {

namespace {

constexpr int kThetaScan = 256;
constexpr double kFlatObjective = 1e-12;

double wrap_phase(double phi) {
  double w = std::remainder(phi, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

cplx lookup(const CVec& c, int k) {
  const int order = static_cast<int>(c.size() / 2);
  if (k < -order || k > order) return 0.0;
  return c[k + order];
}

double golden_max(const std::function<double(double)>& f, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo);
  double x2 = lo + g * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    }
  }
  return 0.5 * (lo + hi);
}

// b-measurement phase offset carried by the family (lambda for the number branch).
double offset_b(const SensorFamily& family) { return family.grid ? 0.0 : family.length_b() * family.offset; }

double true_value_a(const SignalPair& s) {
  if (const auto* g = std::get_if<GridSignal>(&s)) return g->eps_x;
  return std::get<NpSignal>(s).eps_phi;
}
double true_value_b(const SignalPair& s) {
  if (const auto* g = std::get_if<GridSignal>(&s)) return g->eps_p;
  return std::get<NpSignal>(s).eps_n;
}

// Signal applied once per trial; the circuit sampler reuses the displaced state.
struct PreparedSampler {
  const EstimationConfig& config;
  SignalPair signal;
  StateVector moved;

  PreparedSampler(const EstimationConfig& cfg, const SignalPair& s) : config(cfg), signal(s) {
    if (const auto* c = std::get_if<CircuitSampler>(&cfg.sampler)) moved = apply_signal(c->state, s);
  }

  std::vector<int> draw(double theta_a, double theta_b, Rng& rng) const {
    const int rounds = config.rounds;
    if (const auto* m = std::get_if<ModelSampler>(&config.sampler)) {
      const auto& fam = config.family;
      const double ca = std::cos(fam.argument_a(signal, theta_a));
      const double cb = std::cos(fam.argument_b(signal, theta_b));
      std::vector<int> bits;
      bits.reserve(2 * rounds);
      for (int n = 0; n < rounds; ++n) {
        const int ma = uniform01(rng) < 0.5 * (1.0 + m->truth.eta_a(n) * ca) ? 0 : 1;
        const int mb = uniform01(rng) < 0.5 * (1.0 + m->truth.eta_b(n) * cb) ? 0 : 1;
        bits.push_back(ma ^ (n % 2));
        bits.push_back(mb ^ ((n + 1) % 2));
      }
      return bits;
    }
    const auto& c = std::get<CircuitSampler>(config.sampler);
    const StateVector start = c.dephasing_sigma > 0.0 ? apply_dephasing(moved, c.dephasing_sigma, rng) : moved;
    return sample_rounds(start, *c.circuit_a, *c.circuit_b, RoundPlan{rounds, theta_a, theta_b}, rng).bits;
  }
};

}  // namespace

Posterior::Posterior(double length) : length_(length), coeffs_(CVec::Ones(1)) {
  if (!(length > 0.0) || !std::isfinite(length)) throw ValidationError("posterior length must be positive");
}

Posterior::Posterior(double length, CVec coeffs) : length_(length), coeffs_(std::move(coeffs)) {
  if (!(length > 0.0) || !std::isfinite(length)) throw ValidationError("posterior length must be positive");
  if (coeffs_.size() % 2 == 0) throw ValidationError("posterior coefficients need odd length");
  const cplx a0 = coeffs_[coeffs_.size() / 2];
  if (!(a0.real() > 0.0)) throw ValidationError("posterior needs positive mass");
  coeffs_ /= a0.real();
}

cplx Posterior::coefficient(int k) const { return lookup(coeffs_, k); }

void Posterior::update(int bit, double theta, double eta) {
  if (bit != 0 && bit != 1) throw ValidationError("outcome bit must be 0 or 1");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("visibility must lie in [0, 1]");
  const double sign = bit == 0 ? 1.0 : -1.0;
  const cplx up = sign * eta / 4.0 * std::polar(1.0, theta);
  const cplx down = sign * eta / 4.0 * std::polar(1.0, -theta);
  const int order = this->order() + 1;
  CVec next(2 * order + 1);
  for (int k = -order; k <= order; ++k) {
    next[k + order] = 0.5 * lookup(coeffs_, k) + up * lookup(coeffs_, k - 1) + down * lookup(coeffs_, k + 1);
  }
  const double mass = next[order].real();
  if (!(mass > 1e-300)) throw NumericalError("outcome has zero probability under the posterior");
  coeffs_ = next / mass;
}

double Posterior::density(double phi) const {
  const int order = this->order();
  double sum = 0.0;
  for (int k = -order; k <= order; ++k) sum += (coeffs_[k + order] * std::polar(1.0, k * phi)).real();
  return sum / (2.0 * kPi);
}

Posterior posterior_update(const Posterior& post, int bit, double theta, double eta) {
  Posterior next = post;
  next.update(bit, theta, eta);
  return next;
}

double point_estimate(const Posterior& post) {
  const cplx a = post.coefficient(-1);
  if (std::abs(a) <= 1e-12) throw NumericalError("posterior carries no phase information");
  double phi = std::arg(a);
  if (phi <= -kPi) phi = kPi;
  return phi / post.length();
}

double sharpness(const Posterior& post, double theta, double eta) {
  const cplx a0 = post.coefficient(0);
  const cplx am1 = post.coefficient(-1);
  const cplx am2 = post.coefficient(-2);
  const cplx mix = eta / 4.0 * (std::polar(1.0, -theta) * a0 + std::polar(1.0, theta) * am2);
  return std::abs(0.5 * am1 + mix) + std::abs(0.5 * am1 - mix);
}

double choose_theta(const Posterior& post, ScheduleMode mode, int iteration, int iterations, double eta) {
  if (iterations < 1) throw ValidationError("iteration count must be positive");
  if (mode == ScheduleMode::non_adaptive) return iteration * kPi / iterations;
  const double h = kPi / kThetaScan;
  int best = 0;
  double best_value = -1.0;
  double worst_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kThetaScan; ++i) {
    const double v = sharpness(post, i * h, eta);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
    worst_value = std::min(worst_value, v);
  }
  if (best_value - worst_value < kFlatObjective) return 0.0;
  const auto objective = [&](double t) { return sharpness(post, t, eta); };
  const double refined = golden_max(objective, (best - 1) * h, (best + 1) * h);
  // The objective has period pi; fold back to [0, pi).
  double folded = std::fmod(refined, kPi);
  if (folded < 0.0) folded += kPi;
  return objective(folded) >= best_value ? folded : best * h;
}

double DecayModel::eta_a(int round) const { return eta_a0 * std::exp(-2.0 * round * zeta); }
double DecayModel::eta_b(int round) const { return eta_b0 * std::exp(-(2.0 * round + 1.0) * zeta); }

void DecayModel::validate() const {
  const auto ok = [](double e) { return e >= 0.0 && e <= 1.0; };
  if (!ok(eta_a0) || !ok(eta_b0)) throw ValidationError("initial visibilities must lie in [0, 1]");
  if (!(zeta >= 0.0) || !std::isfinite(zeta)) throw ValidationError("decay rate must be finite and non-negative");
}

double holevo_variance(std::span<const double> phase_errors) {
  if (phase_errors.empty()) throw ValidationError("Holevo variance needs at least one estimate");
  cplx mean = 0.0;
  for (double e : phase_errors) mean += std::polar(1.0, e);
  mean /= static_cast<double>(phase_errors.size());
  const double r = std::abs(mean);
  if (r < 1e-12) return std::numeric_limits<double>::infinity();
  return 1.0 / (r * r) - 1.0;
}

double holevo_variance(std::span<const double> estimates, double truth, double length) {
  std::vector<double> errors(estimates.size());
  std::transform(estimates.begin(), estimates.end(), errors.begin(),
                 [&](double e) { return wrap_phase(length * (e - truth)); });
  return holevo_variance(errors);
}

double holevo_variance(const Posterior& post) {
  const double r = std::abs(post.coefficient(-1));
  if (r < 1e-12) return std::numeric_limits<double>::infinity();
  return 1.0 / (r * r) - 1.0;
}

double holevo_variance_error(std::span<const double> phase_errors) {
  const auto n = static_cast<double>(phase_errors.size());
  if (phase_errors.size() < 2) throw ValidationError("standard error needs at least two estimates");
  cplx mean = 0.0;
  for (double e : phase_errors) mean += std::polar(1.0, e);
  mean /= n;
  const double r = std::abs(mean);
  if (r < 1e-12) return std::numeric_limits<double>::infinity();
  const double axis = std::arg(mean);
  double var = 0.0;
  for (double e : phase_errors) {
    const double proj = std::cos(e - axis) - r;
    var += proj * proj;
  }
  var /= (n - 1.0);
  return 2.0 / (r * r * r) * std::sqrt(var / n);
}

CircuitSampler CircuitSampler::make(const SensorFamily& family, StateVector state, double dephasing_sigma) {
  const int c = state.cutoff();
  return {std::move(state), std::make_shared<const QpeCircuit>(family.stabilizer_a(), c),
          std::make_shared<const QpeCircuit>(family.stabilizer_b(), c), dephasing_sigma};
}

void EstimationConfig::validate() const {
  if (iterations < 1) throw ValidationError("iteration count M must be at least 1");
  RoundPlan{rounds, 0.0, 0.0}.validate();
  decay.validate();
  if (!family.grid) SensorFamily::number_phase(family.spacing, family.offset);
  if (const auto* m = std::get_if<ModelSampler>(&sampler)) m->truth.validate();
  if (const auto* c = std::get_if<CircuitSampler>(&sampler)) {
    if (!c->circuit_a || !c->circuit_b) throw ValidationError("circuit sampler needs both circuits");
    if (c->state.cutoff() == 0) throw ValidationError("circuit sampler needs a state");
    if (c->dephasing_sigma < 0.0) throw ValidationError("dephasing width must be non-negative");
  }
}

void absorb(Posterior& post_a, Posterior& post_b, const EstimationConfig& config, const IterationRecord& record) {
  if (record.bits.size() != static_cast<std::size_t>(2 * config.rounds)) {
    throw ValidationError("record length does not match 2 N_S");
  }
  const double theta_b = record.theta_b + offset_b(config.family);
  for (int n = 0; n < config.rounds; ++n) {
    post_a.update(record.bits[2 * n] ^ (n % 2), record.theta_a, config.decay.eta_a(n));
    post_b.update(record.bits[2 * n + 1] ^ ((n + 1) % 2), theta_b, config.decay.eta_b(n));
  }
}

TrialResult run_estimation(const EstimationConfig& config, const SignalPair& signal, std::uint64_t seed,
                           std::uint64_t trial) {
  config.validate();
  if (config.family.grid != std::holds_alternative<GridSignal>(signal)) {
    throw ValidationError("signal type does not match the sensor family");
  }
  const PreparedSampler sampler(config, signal);
  Posterior post_a(config.family.length_a());
  Posterior post_b(config.family.length_b());
  TrialResult out;
  out.signal = signal;
  out.log.reserve(config.iterations);
  const double offset = offset_b(config.family);
  for (int j = 0; j < config.iterations; ++j) {
    IterationRecord rec;
    rec.theta_a = choose_theta(post_a, config.mode, j, config.iterations, config.decay.eta_a(0));
    // The b posterior sees theta + offset; choose that, then remove the offset.
    rec.theta_b = config.mode == ScheduleMode::adaptive
                      ? choose_theta(post_b, config.mode, j, config.iterations, config.decay.eta_b(0)) - offset
                      : choose_theta(post_b, config.mode, j, config.iterations, config.decay.eta_b(0));
    Rng rng = make_stream(seed, trial, static_cast<std::uint64_t>(j) + 1);
    rec.bits = sampler.draw(rec.theta_a, rec.theta_b, rng);
    absorb(post_a, post_b, config, rec);
    out.bits_used += static_cast<int>(rec.bits.size());
    out.log.push_back(std::move(rec));
  }
  out.posterior_variance_a = holevo_variance(post_a);
  out.posterior_variance_b = holevo_variance(post_b);
  out.estimate_a = point_estimate(post_a);
  out.estimate_b = point_estimate(post_b);
  out.error_a = wrap_phase(post_a.length() * (out.estimate_a - true_value_a(signal)));
  out.error_b = wrap_phase(post_b.length() * (out.estimate_b - true_value_b(signal)));
  return out;
}

SignalPair random_signal(const SensorFamily& family, Rng& rng) {
  if (family.grid) {
    const double half = kGridLength / 2.0;
    const double x = -half + 2.0 * half * uniform01(rng);
    const double p = -half + 2.0 * half * uniform01(rng);
    return GridSignal{x, p};
  }
  const double phi = (-1.0 + 2.0 * uniform01(rng)) * kPi / family.spacing;
  const int n = static_cast<int>(std::floor(uniform01(rng) * family.spacing));
  return NpSignal{phi, std::min(n, family.spacing - 1)};
}

BatchSummary summarize(std::span<const TrialResult> trials, int iterations) {
  std::vector<double> ea, eb;
  ea.reserve(trials.size());
  eb.reserve(trials.size());
  for (const auto& t : trials) {
    ea.push_back(t.error_a);
    eb.push_back(t.error_b);
  }
  BatchSummary s;
  s.vh_a = holevo_variance(ea);
  s.vh_b = holevo_variance(eb);
  s.vh_total = s.vh_a + s.vh_b;
  s.sql_star = 2.0 / iterations;
  s.gain_db = 10.0 * std::log10(s.sql_star / s.vh_total);
  return s;
}

BatchResult run_batch(const BatchConfig& config, Exec exec) {
  config.estimation.validate();
  if (config.trials < 1) throw ValidationError("trial count must be positive");
  BatchResult out;
  out.trials.resize(config.trials);
  for_each_index(config.trials, exec, [&](int i) {
    SignalPair signal;
    if (config.fixed_signal) {
      signal = *config.fixed_signal;
    } else {
      Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(i), 0);
      signal = random_signal(config.estimation.family, rng);
    }
    out.trials[i] = run_estimation(config.estimation, signal, config.seed, static_cast<std::uint64_t>(i));
  });
  out.summary = summarize(out.trials, config.estimation.iterations);
  return out;
}

void OutcomeBank::validate() const {
  if (pools.empty()) throw ValidationError("outcome bank has no iterations");
  if (theta_a.size() != pools.size() || theta_b.size() != pools.size()) {
    throw ValidationError("outcome bank angles do not match its pools");
  }
  for (const auto& pool : pools) {
    if (pool.empty()) throw ValidationError("outcome bank has an empty pool");
    for (const auto& bits : pool) {
      if (bits.size() != static_cast<std::size_t>(2 * rounds)) throw ValidationError("bank record has wrong length");
    }
  }
}

OutcomeBank collect_bank(const EstimationConfig& config, const SignalPair& signal, int pool_size, std::uint64_t seed) {
  config.validate();
  if (pool_size < 1) throw ValidationError("pool size must be positive");
  const PreparedSampler sampler(config, signal);
  OutcomeBank bank;
  bank.rounds = config.rounds;
  for (int j = 0; j < config.iterations; ++j) {
    const double theta = choose_theta(Posterior(1.0), ScheduleMode::non_adaptive, j, config.iterations, 1.0);
    bank.theta_a.push_back(theta);
    bank.theta_b.push_back(theta);
    auto& pool = bank.pools.emplace_back();
    for (int r = 0; r < pool_size; ++r) {
      Rng rng = make_stream(seed, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(r));
      pool.push_back(sampler.draw(theta, theta, rng));
    }
  }
  return bank;
}

std::vector<int> subsample_indices(int pools, int iterations) {
  if (iterations < 1 || iterations > pools || pools % iterations != 0) {
    throw ValidationError("sub-sampled iteration count must divide the bank size");
  }
  std::vector<int> idx(iterations);
  const int step = pools / iterations;
  for (int j = 0; j < iterations; ++j) idx[j] = j * step;
  return idx;
}

std::vector<std::vector<IterationRecord>> bootstrap_resample(const OutcomeBank& bank, int n_samples, int iterations,
                                                             Rng& rng) {
  bank.validate();
  if (n_samples < 1) throw ValidationError("sample count must be positive");
  const auto idx = subsample_indices(static_cast<int>(bank.pools.size()), iterations);
  std::vector<std::vector<IterationRecord>> out(n_samples);
  for (auto& trial : out) {
    trial.reserve(idx.size());
    for (int j : idx) {
      const auto& pool = bank.pools[j];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      trial.push_back({bank.theta_a[j], bank.theta_b[j], pool[pick(rng)]});
    }
  }
  return out;
}

std::pair<double, double> estimate_from_records(const EstimationConfig& config,
                                                std::span<const IterationRecord> records) {
  Posterior post_a(config.family.length_a());
  Posterior post_b(config.family.length_b());
  for (const auto& rec : records) absorb(post_a, post_b, config, rec);
  return {point_estimate(post_a), point_estimate(post_b)};
}

}  // namespace modsensor
