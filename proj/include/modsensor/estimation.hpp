#pragma once

#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "modsensor/circuit.hpp"
#include "modsensor/parallel.hpp"
#include "modsensor/rng.hpp"

namespace modsensor {

// Periodic posterior over phi = l * eps in (-pi, pi], kept as Fourier coefficients
// a_{-K..K} of the density sum_k a_k e^{i k phi} / (2 pi), normalized so a_0 = 1.
class Posterior {
 public:
  explicit Posterior(double length);
  // From coefficients a_{-K..K}, odd length; rescaled so a_0 = 1.
  Posterior(double length, CVec coeffs);

  double length() const { return length_; }
  int order() const { return static_cast<int>(coeffs_.size() / 2); }
  const CVec& coeffs() const { return coeffs_; }
  cplx coefficient(int k) const;

  // Bayes update with likelihood (1 + (-1)^bit eta cos(theta + phi)) / 2.
  void update(int bit, double theta, double eta);
  double density(double phi) const;

 private:
  double length_;
  CVec coeffs_;
};

Posterior posterior_update(const Posterior& post, int bit, double theta, double eta);

// arg(a_{-1}) / l, in (-pi/l, pi/l]. Throws NumericalError when |a_{-1}| <= 1e-12.
double point_estimate(const Posterior& post);

// Sum over both hypothetical outcomes of |a'_{-1}| before renormalization; lies in [0, 1].
double sharpness(const Posterior& post, double theta, double eta);

enum class ScheduleMode { non_adaptive, adaptive };

// Non-adaptive: iteration * pi / M. Adaptive: argmax of sharpness over [0, pi] from a
// 256-point scan refined by golden-section search; a flat objective returns 0.
double choose_theta(const Posterior& post, ScheduleMode mode, int iteration, int iterations, double eta);

// Visibility of the n-th sequential round: eta_a0 e^{-2 n zeta}, eta_b0 e^{-(2n+1) zeta}.
struct DecayModel {
  double eta_a0 = 1.0;
  double eta_b0 = 1.0;
  double zeta = 0.0;

  static DecayModel uniform(double eta0, double zeta = 0.0) { return {eta0, eta0, zeta}; }
  double eta_a(int round) const;
  double eta_b(int round) const;
  void validate() const;
};

// 1/|<e^{i err}>|^2 - 1 over phase errors; +infinity when the resultant vanishes.
double holevo_variance(std::span<const double> phase_errors);
// Same, on estimates of a single true value with modular length l.
double holevo_variance(std::span<const double> estimates, double truth, double length);
// 1/|a_{-1}|^2 - 1 for the posterior itself; +infinity when a_{-1} vanishes.
double holevo_variance(const Posterior& post);
// Delta-method standard error of the Holevo variance.
double holevo_variance_error(std::span<const double> phase_errors);

// Outcomes drawn from the product model with backaction flips, visibilities from `truth`.
struct ModelSampler {
  DecayModel truth;
};

// Outcomes from state-vector simulation of the sequential rounds.
struct CircuitSampler {
  StateVector state;
  std::shared_ptr<const QpeCircuit> circuit_a;
  std::shared_ptr<const QpeCircuit> circuit_b;
  double dephasing_sigma = 0.0;  // one trajectory per iteration

  static CircuitSampler make(const SensorFamily& family, StateVector state, double dephasing_sigma = 0.0);
};

using OutcomeSampler = std::variant<ModelSampler, CircuitSampler>;

struct EstimationConfig {
  SensorFamily family = SensorFamily::grid_family();
  int iterations = 32;  // M
  int rounds = 1;       // N_S
  ScheduleMode mode = ScheduleMode::non_adaptive;
  DecayModel decay{};  // visibilities assumed by the likelihood
  OutcomeSampler sampler = ModelSampler{};
  void validate() const;
};

// One circuit repetition: ancilla angles and raw bits a, b, a, b, ...
struct IterationRecord {
  double theta_a = 0.0;
  double theta_b = 0.0;
  std::vector<int> bits;
};

// Feeds one repetition into both posteriors with backaction reindexing.
void absorb(Posterior& post_a, Posterior& post_b, const EstimationConfig& config, const IterationRecord& record);

struct TrialResult {
  SignalPair signal;
  double estimate_a = 0.0;
  double estimate_b = 0.0;
  double error_a = 0.0;  // circular phase error l_a (est - true)
  double error_b = 0.0;
  double posterior_variance_a = 0.0;  // Holevo variance of the final posterior
  double posterior_variance_b = 0.0;
  int bits_used = 0;
  std::vector<IterationRecord> log;
};

// Streams: iteration j draws from make_stream(seed, trial, j + 1).
TrialResult run_estimation(const EstimationConfig& config, const SignalPair& signal, std::uint64_t seed,
                           std::uint64_t trial);

// Uniform signal over one unambiguous cell of the family.
SignalPair random_signal(const SensorFamily& family, Rng& rng);

struct BatchConfig {
  EstimationConfig estimation;
  int trials = 100;
  std::optional<SignalPair> fixed_signal;  // random per trial from make_stream(seed, trial, 0) otherwise
  std::uint64_t seed = 0;
};

struct BatchSummary {
  double vh_a = 0.0;
  double vh_b = 0.0;
  double vh_total = 0.0;
  double sql_star = 0.0;  // 2 / M
  double gain_db = 0.0;
};

struct BatchResult {
  std::vector<TrialResult> trials;
  BatchSummary summary;
};

BatchResult run_batch(const BatchConfig& config, Exec exec);
BatchSummary summarize(std::span<const TrialResult> trials, int iterations);

// Per-iteration pools of raw bitstrings recorded at fixed non-adaptive angles.
struct OutcomeBank {
  int rounds = 1;
  std::vector<double> theta_a;
  std::vector<double> theta_b;
  std::vector<std::vector<std::vector<int>>> pools;
  void validate() const;
};

OutcomeBank collect_bank(const EstimationConfig& config, const SignalPair& signal, int pool_size, std::uint64_t seed);

// n_samples synthetic trials, one uniformly drawn bitstring per selected pool. Sub-sampling to
// `iterations` < pools keeps every (pools / iterations)-th pool starting at 0.
std::vector<std::vector<IterationRecord>> bootstrap_resample(const OutcomeBank& bank, int n_samples, int iterations,
                                                             Rng& rng);

// Indices of the pools kept when sub-sampling a bank of `pools` iterations to `iterations`.
std::vector<int> subsample_indices(int pools, int iterations);

// Estimates from a fixed record sequence.
std::pair<double, double> estimate_from_records(const EstimationConfig& config,
                                                std::span<const IterationRecord> records);

}  // namespace modsensor
