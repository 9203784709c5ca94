#include "modsensor/estimation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "modsensor/errors.hpp"
#include "oracles.hpp"

using namespace modsensor;

namespace {

// Bayes on a dense periodic grid, the reference for the Fourier path.
struct GridBayes {
  std::vector<double> phi;
  std::vector<double> density;

  explicit GridBayes(int points) : phi(points), density(points, 1.0 / (2.0 * kPi)) {
    for (int i = 0; i < points; ++i) phi[i] = -kPi + 2.0 * kPi * i / points;
  }
  void update(int bit, double theta, double eta) {
    const double sign = bit == 0 ? 1.0 : -1.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      density[i] *= 0.5 * (1.0 + sign * eta * std::cos(theta + phi[i]));
      mass += density[i];
    }
    mass *= 2.0 * kPi / phi.size();
    for (double& d : density) d /= mass;
  }
};

double wrapped(double x) {
  double w = std::remainder(x, 2.0 * kPi);
  return w <= -kPi ? w + 2.0 * kPi : w;
}

EstimationConfig model_config(int iterations, int rounds, ScheduleMode mode, DecayModel decay) {
  EstimationConfig c;
  c.iterations = iterations;
  c.rounds = rounds;
  c.mode = mode;
  c.decay = decay;
  c.sampler = ModelSampler{decay};
  return c;
}

std::vector<double> errors_a(const BatchResult& r) {
  std::vector<double> e;
  for (const auto& t : r.trials) e.push_back(t.error_a);
  return e;
}
std::vector<double> errors_b(const BatchResult& r) {
  std::vector<double> e;
  for (const auto& t : r.trials) e.push_back(t.error_b);
  return e;
}

double combined_error(const BatchResult& r) {
  return std::hypot(holevo_variance_error(errors_a(r)), holevo_variance_error(errors_b(r)));
}

}  // namespace

// ---- posterior ----

TEST(Posterior, FirstUpdateHalvesSideCoefficients) {
  const auto post = posterior_update(Posterior(kGridLength), 0, 0.0, 1.0);
  EXPECT_EQ(post.order(), 1);
  EXPECT_NEAR(std::abs(post.coefficient(1) / post.coefficient(0) - 0.5), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(post.coefficient(-1) / post.coefficient(0) - 0.5), 0.0, 1e-15);
}

TEST(Posterior, ZeroVisibilityLeavesDensityUnchanged) {
  Posterior post(kGridLength);
  post.update(1, 0.4, 0.7);
  post.update(0, 1.1, 0.9);
  const auto after = posterior_update(post, 1, 2.0, 0.0);
  EXPECT_EQ(after.order(), post.order() + 1);
  for (int i = 0; i < 256; ++i) {
    const double phi = -kPi + 2.0 * kPi * i / 256;
    EXPECT_NEAR(after.density(phi), post.density(phi), 1e-12);
  }
}

TEST(Posterior, FourierMatchesGridBayesOver64Updates) {
  auto rng = oracle::seeded(11);
  Posterior post(1.0);
  GridBayes grid(4096);
  for (int j = 0; j < 64; ++j) {
    const int bit = oracle::uniform(rng, 0, 1) < 0.5 ? 0 : 1;
    const double theta = oracle::uniform(rng, 0, kPi);
    const double eta = oracle::uniform(rng, 0.3, 1.0);
    post.update(bit, theta, eta);
    grid.update(bit, theta, eta);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.phi.size(); ++i) {
    worst = std::max(worst, std::abs(post.density(grid.phi[i]) - grid.density[i]));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Posterior, RejectsBadInputs) {
  Posterior post(1.0);
  EXPECT_THROW(post.update(2, 0.0, 1.0), ValidationError);
  EXPECT_THROW(post.update(0, 0.0, 1.5), ValidationError);
  EXPECT_THROW(Posterior(0.0), ValidationError);
  EXPECT_THROW(Posterior(1.0, CVec::Ones(2)), ValidationError);
}

TEST(PointEstimate, PeakedCosineDensity) {
  CVec c = CVec::Zero(3);
  c[0] = 0.5 * std::polar(1.0, 0.7);  // a_{-1}
  c[1] = 1.0;
  c[2] = 0.5 * std::polar(1.0, -0.7);
  const Posterior post(kGridLength, c);
  EXPECT_NEAR(point_estimate(post), 0.7 / kGridLength, 1e-10);
}

TEST(PointEstimate, UniformHasNoInformation) {
  EXPECT_THROW(point_estimate(Posterior(kGridLength)), NumericalError);
}

TEST(PointEstimate, IdealRunLandsWithinThreePosteriorSigma) {
  const double truth = 1.0 / kGridLength;
  auto cfg = model_config(128, 1, ScheduleMode::non_adaptive, DecayModel::uniform(1.0));
  const auto result = run_estimation(cfg, GridSignal{truth, 0.0}, 5, 0);
  Posterior post(kGridLength), other(kGridLength);
  for (const auto& rec : result.log) absorb(post, other, cfg, rec);
  const double spread = std::sqrt(holevo_variance(post));
  EXPECT_DOUBLE_EQ(holevo_variance(post), result.posterior_variance_a);
  EXPECT_LE(std::abs(wrapped(kGridLength * point_estimate(post) - 1.0)), 3.0 * spread);
}

// ---- sharpness and control ----

TEST(Sharpness, UniformPriorIsFlat) {
  const Posterior post(1.0);
  const double ref = sharpness(post, 0.0, 0.8);
  for (int i = 1; i < 64; ++i) EXPECT_NEAR(sharpness(post, i * kPi / 64, 0.8), ref, 1e-12);
}

TEST(Sharpness, ArgmaxMatchesDenseScan) {
  CVec c = CVec::Zero(3);
  c[0] = 0.5;
  c[1] = 1.0;
  c[2] = 0.5;
  const Posterior post(1.0, c);
  double best = 0.0, best_value = -1.0;
  for (int i = 0; i < 1024; ++i) {
    const double t = i * kPi / 1024;
    const double v = sharpness(post, t, 1.0);
    if (v > best_value) {
      best_value = v;
      best = t;
    }
  }
  const double chosen = choose_theta(post, ScheduleMode::adaptive, 0, 1, 1.0);
  EXPECT_NEAR(chosen, best, kPi / 1024);
  EXPECT_GE(sharpness(post, chosen, 1.0), best_value - 1e-12);
}

TEST(ChooseTheta, Schedules) {
  EXPECT_DOUBLE_EQ(choose_theta(Posterior(1.0), ScheduleMode::non_adaptive, 64, 128, 1.0), kPi / 2);
  EXPECT_EQ(choose_theta(Posterior(1.0), ScheduleMode::adaptive, 3, 128, 1.0), 0.0);
  EXPECT_THROW(choose_theta(Posterior(1.0), ScheduleMode::non_adaptive, 0, 0, 1.0), ValidationError);
}

TEST(ChooseTheta, AdaptiveBeatsNonAdaptive) {
  for (double eta : {1.0, 0.72}) {
    BatchConfig base;
    base.trials = 200;
    base.seed = 2024;
    base.estimation = model_config(128, 1, ScheduleMode::non_adaptive, DecayModel::uniform(eta));
    const auto fixed = run_batch(base, Exec::parallel);
    base.estimation.mode = ScheduleMode::adaptive;
    const auto adaptive = run_batch(base, Exec::parallel);
    // Per-trial final posterior variance, averaged; pairs share signal and seed.
    double mean_fixed = 0.0, mean_adaptive = 0.0;
    for (int i = 0; i < base.trials; ++i) {
      mean_fixed += fixed.trials[i].posterior_variance_a + fixed.trials[i].posterior_variance_b;
      mean_adaptive += adaptive.trials[i].posterior_variance_a + adaptive.trials[i].posterior_variance_b;
    }
    EXPECT_LE(mean_adaptive, mean_fixed) << "eta " << eta;
    // Ensemble spread too, where rare pi slips at eta = 1 do not dominate.
    if (eta < 1.0) EXPECT_LE(adaptive.summary.vh_total, fixed.summary.vh_total);
  }
}

// ---- decay ----

TEST(Decay, RoundVisibilities) {
  const DecayModel d{0.72, 0.6, 0.33};
  EXPECT_DOUBLE_EQ(d.eta_a(0), 0.72);
  EXPECT_NEAR(d.eta_b(0), 0.6 * std::exp(-0.33), 1e-15);
  EXPECT_NEAR(d.eta_a(2), 0.72 * std::exp(-1.32), 1e-15);
  EXPECT_NEAR(d.eta_b(1), 0.6 * std::exp(-0.99), 1e-15);
  EXPECT_THROW((DecayModel{1.2, 1.0, 0.0}.validate()), ValidationError);
  EXPECT_THROW((DecayModel{1.0, 1.0, -0.1}.validate()), ValidationError);
}

// ---- end to end ----

TEST(RunEstimation, SingleIterationAtZeroSignal) {
  const auto cfg = model_config(1, 1, ScheduleMode::non_adaptive, DecayModel::uniform(1.0));
  const auto r = run_estimation(cfg, GridSignal{0.0, 0.0}, 1, 0);
  EXPECT_NEAR(r.estimate_a, 0.0, 1e-15);
  EXPECT_NEAR(r.estimate_b, 0.0, 1e-15);
  EXPECT_EQ(r.bits_used, 2);
}

TEST(RunEstimation, SecondRoundPairGainsUnderDecay) {
  // 15 signal points with 100 trials each.
  auto combined = [](int rounds) {
    const DecayModel decay = DecayModel::uniform(0.72, 0.33);
    std::vector<TrialResult> all;
    for (int s = 0; s < 15; ++s) {
      BatchConfig b;
      b.trials = 100;
      b.seed = 900 + s;
      const double eps = -1.0 + 2.0 * s / 14.0;
      b.fixed_signal = GridSignal{eps, -eps / 2};
      b.estimation = model_config(32, rounds, ScheduleMode::non_adaptive, decay);
      auto r = run_batch(b, Exec::parallel);
      all.insert(all.end(), r.trials.begin(), r.trials.end());
    }
    return summarize(all, 32).vh_total;
  };
  const double one = combined(1);
  const double two = combined(2);
  EXPECT_GE(10.0 * std::log10(one / two), 0.8) << one << " -> " << two;
}

TEST(RunEstimation, IdealNonAdaptiveNearSqlStar) {
  BatchConfig b;
  b.trials = 500;
  b.seed = 77;
  b.estimation = model_config(128, 1, ScheduleMode::non_adaptive, DecayModel::uniform(1.0));
  const auto r = run_batch(b, Exec::parallel);
  EXPECT_LE(r.summary.vh_total, 2.0 / 128 * 1.3);
  EXPECT_DOUBLE_EQ(r.summary.sql_star, 2.0 / 128);
}

TEST(RunEstimation, SerialAndParallelBatchesAgree) {
  BatchConfig b;
  b.trials = 24;
  b.seed = 3;
  b.estimation = model_config(16, 2, ScheduleMode::adaptive, DecayModel{0.9, 0.8, 0.1});
  const auto s = run_batch(b, Exec::serial);
  const auto p = run_batch(b, Exec::parallel);
  for (int i = 0; i < b.trials; ++i) {
    EXPECT_EQ(s.trials[i].estimate_a, p.trials[i].estimate_a);
    EXPECT_EQ(s.trials[i].estimate_b, p.trials[i].estimate_b);
  }
}

TEST(RunEstimation, MismatchedSignalRejected) {
  const auto cfg = model_config(4, 1, ScheduleMode::non_adaptive, DecayModel::uniform(1.0));
  EXPECT_THROW(run_estimation(cfg, NpSignal{0.0, 1}, 1, 0), ValidationError);
  auto bad = cfg;
  bad.iterations = 0;
  EXPECT_THROW(run_estimation(bad, GridSignal{}, 1, 0), ValidationError);
  bad = cfg;
  bad.rounds = kMaxRounds + 1;
  EXPECT_THROW(run_estimation(bad, GridSignal{}, 1, 0), ValidationError);
}

TEST(RunEstimation, CircuitSamplerAgreesWithModelOnGridState) {
  const GridSpec spec{0.3};
  const auto state = make_grid_state(spec);
  const auto eta = grid_visibility(spec);
  BatchConfig b;
  b.trials = 150;
  b.seed = 41;
  b.estimation.iterations = 16;
  b.estimation.decay = DecayModel{eta.eta_a, eta.eta_b, 0.0};
  b.estimation.sampler = CircuitSampler::make(b.estimation.family, state);
  const auto circuit = run_batch(b, Exec::parallel);
  b.estimation.sampler = ModelSampler{b.estimation.decay};
  const auto model = run_batch(b, Exec::parallel);
  const double sigma = std::hypot(combined_error(circuit), combined_error(model));
  EXPECT_NEAR(circuit.summary.vh_total, model.summary.vh_total, 3.0 * sigma);
}

TEST(RunEstimation, CircuitSamplerOnNumberPhaseState) {
  const NpSpec spec{4, 2, SineEnvelope{12}};
  const auto state = make_np_state(spec);
  const auto eta = np_visibility(state, spec);
  BatchConfig b;
  b.trials = 150;
  b.seed = 8;
  b.estimation.family = SensorFamily::number_phase(4, 2);
  b.estimation.iterations = 16;
  b.estimation.decay = DecayModel{eta.eta_a, eta.eta_b, 0.0};
  b.estimation.sampler = CircuitSampler::make(b.estimation.family, state);
  const auto circuit = run_batch(b, Exec::parallel);
  b.estimation.sampler = ModelSampler{b.estimation.decay};
  const auto model = run_batch(b, Exec::parallel);
  const double sigma = std::hypot(combined_error(circuit), combined_error(model));
  EXPECT_NEAR(circuit.summary.vh_total, model.summary.vh_total, 3.0 * sigma);
}

// ---- Holevo variance ----

TEST(Holevo, ExactEstimatesGiveZero) {
  const std::vector<double> est(10, 0.3);
  EXPECT_NEAR(holevo_variance(est, 0.3, kGridLength), 0.0, 1e-15);
}

TEST(Holevo, UniformCircleDiverges) {
  std::vector<double> err(12);
  for (int i = 0; i < 12; ++i) err[i] = -kPi + 2.0 * kPi * i / 12;
  EXPECT_TRUE(std::isinf(holevo_variance(err)));
  EXPECT_THROW(holevo_variance(std::vector<double>{}), ValidationError);
}

TEST(Holevo, GaussianPhases) {
  auto rng = oracle::seeded(99);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<double> err(100000);
  for (double& e : err) e = g(rng);
  EXPECT_NEAR(holevo_variance(err), std::expm1(0.01), 0.05 * std::expm1(0.01));
}

TEST(Holevo, StandardErrorTracksSpread) {
  auto rng = oracle::seeded(5);
  std::normal_distribution<double> g(0.0, 0.2);
  std::vector<double> vals;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> err(400);
    for (double& e : err) e = g(rng);
    vals.push_back(holevo_variance(err));
  }
  std::vector<double> err(400);
  for (double& e : err) e = g(rng);
  const double se = holevo_variance_error(err);
  const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (vals.size() - 1));
  EXPECT_NEAR(se, sd, 0.25 * sd);
}

// ---- bootstrap ----

TEST(Bootstrap, SingletonPoolsRepeat) {
  const auto cfg = model_config(8, 1, ScheduleMode::non_adaptive, DecayModel::uniform(0.9));
  const auto bank = collect_bank(cfg, GridSignal{0.2, -0.4}, 1, 12);
  Rng rng(4);
  const auto trials = bootstrap_resample(bank, 5, 8, rng);
  for (const auto& t : trials) {
    for (std::size_t j = 0; j < t.size(); ++j) EXPECT_EQ(t[j].bits, trials[0][j].bits);
  }
}

TEST(Bootstrap, SubsamplingKeepsEverySecondPool) {
  const auto idx = subsample_indices(128, 64);
  ASSERT_EQ(idx.size(), 64u);
  for (int j = 0; j < 64; ++j) EXPECT_EQ(idx[j], 2 * j);
  EXPECT_THROW(subsample_indices(128, 48), ValidationError);
  const auto cfg = model_config(128, 1, ScheduleMode::non_adaptive, DecayModel::uniform(1.0));
  const auto bank = collect_bank(cfg, GridSignal{}, 2, 1);
  Rng rng(2);
  const auto trials = bootstrap_resample(bank, 1, 64, rng);
  for (int j = 0; j < 64; ++j) EXPECT_DOUBLE_EQ(trials[0][j].theta_a, 2 * j * kPi / 128);
}

TEST(Bootstrap, EmptyPoolRejected) {
  OutcomeBank bank;
  bank.theta_a = {0.0};
  bank.theta_b = {0.0};
  bank.pools = {{}};
  Rng rng(1);
  EXPECT_THROW(bootstrap_resample(bank, 1, 1, rng), ValidationError);
}

TEST(Bootstrap, ResampledVarianceMatchesDirectSimulation) {
  const GridSignal signal{0.4, -0.3};
  const auto cfg = model_config(32, 1, ScheduleMode::non_adaptive, DecayModel::uniform(0.8));
  const auto bank = collect_bank(cfg, signal, 400, 6);
  Rng rng(31);
  const auto resampled = bootstrap_resample(bank, 600, 32, rng);
  std::vector<double> ea, eb;
  for (const auto& trial : resampled) {
    const auto [a, b] = estimate_from_records(cfg, trial);
    ea.push_back(wrapped(kGridLength * (a - signal.eps_x)));
    eb.push_back(wrapped(kGridLength * (b - signal.eps_p)));
  }
  BatchConfig direct;
  direct.trials = 600;
  direct.seed = 123;
  direct.fixed_signal = signal;
  direct.estimation = cfg;
  const auto sim = run_batch(direct, Exec::parallel);
  const double boot = holevo_variance(ea) + holevo_variance(eb);
  const double sigma = std::hypot(std::hypot(holevo_variance_error(ea), holevo_variance_error(eb)), combined_error(sim));
  EXPECT_NEAR(boot, sim.summary.vh_total, 2.0 * sigma);
}

// ---- properties ----

TEST(PosteriorProperty, StaysAValidDensity) {
  for (int seed = 0; seed < oracle::kPropertySeeds; ++seed) {
    auto rng = oracle::seeded(seed);
    Posterior post(1.0);
    const int updates = 1 + static_cast<int>(oracle::uniform(rng, 0, 40));
    for (int j = 0; j < updates; ++j) {
      post.update(oracle::uniform(rng, 0, 1) < 0.5 ? 0 : 1, oracle::uniform(rng, 0, 2 * kPi),
                  oracle::uniform(rng, 0, 1));
    }
    const int points = 512;
    double mass = 0.0, lowest = 1.0;
    for (int i = 0; i < points; ++i) {
      const double d = post.density(-kPi + 2 * kPi * i / points);
      mass += d;
      lowest = std::min(lowest, d);
    }
    mass *= 2.0 * kPi / points;
    ASSERT_GE(lowest, -1e-9) << "seed " << seed;
    ASSERT_NEAR(mass, 1.0, 1e-9) << "seed " << seed;
  }
}

TEST(PosteriorProperty, FourierEqualsGridBayes) {
  for (int seed = 0; seed < oracle::kPropertySeeds; ++seed) {
    auto rng = oracle::seeded(1000 + seed);
    Posterior post(1.0);
    GridBayes grid(1024);
    const int updates = 1 + static_cast<int>(oracle::uniform(rng, 0, 30));
    for (int j = 0; j < updates; ++j) {
      const int bit = oracle::uniform(rng, 0, 1) < 0.5 ? 0 : 1;
      const double theta = oracle::uniform(rng, 0, 2 * kPi);
      const double eta = oracle::uniform(rng, 0, 1);
      post.update(bit, theta, eta);
      grid.update(bit, theta, eta);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.phi.size(); ++i) {
      worst = std::max(worst, std::abs(post.density(grid.phi[i]) - grid.density[i]));
    }
    ASSERT_LT(worst, 1e-9) << "seed " << seed;
  }
}

TEST(PosteriorProperty, SharpnessInUnitInterval) {
  for (int seed = 0; seed < oracle::kPropertySeeds; ++seed) {
    auto rng = oracle::seeded(2000 + seed);
    Posterior post(1.0);
    for (int j = 0; j < 10; ++j) {
      post.update(oracle::uniform(rng, 0, 1) < 0.5 ? 0 : 1, oracle::uniform(rng, 0, kPi), oracle::uniform(rng, 0, 1));
    }
    const double s = sharpness(post, oracle::uniform(rng, 0, kPi), oracle::uniform(rng, 0, 1));
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0 + 1e-12);
  }
}

TEST(EstimationProperty, NonAdaptiveVarianceFallsWithIterations) {
  double previous = std::numeric_limits<double>::infinity();
  double previous_err = 0.0;
  for (int m : {8, 16, 32, 64, 128}) {
    BatchConfig b;
    b.trials = 500;
    b.seed = 10 + m;
    b.estimation = model_config(m, 1, ScheduleMode::non_adaptive, DecayModel::uniform(0.9));
    const auto r = run_batch(b, Exec::parallel);
    const double err = combined_error(r);
    EXPECT_LE(r.summary.vh_total, previous + 2.0 * std::hypot(err, previous_err)) << "M " << m;
    previous = r.summary.vh_total;
    previous_err = err;
  }
}

TEST(EstimationProperty, EstimatesAreEquivariant) {
  const auto cfg = model_config(32, 1, ScheduleMode::non_adaptive, DecayModel::uniform(0.9));
  for (double shift : {-0.8, -0.3, 0.0, 0.45, 0.9}) {
    BatchConfig b;
    b.trials = 300;
    b.seed = 500;
    b.fixed_signal = GridSignal{shift, -shift};
    b.estimation = cfg;
    const auto r = run_batch(b, Exec::parallel);
    for (const auto& errors : {errors_a(r), errors_b(r)}) {
      cplx mean = 0.0;
      for (double e : errors) mean += std::polar(1.0, e);
      const double bias = std::arg(mean);
      double spread = 0.0;
      for (double e : errors) spread += std::pow(wrapped(e - bias), 2);
      spread = std::sqrt(spread / errors.size() / errors.size());
      EXPECT_NEAR(bias, 0.0, 4.0 * spread) << "shift " << shift;
    }
  }
}
