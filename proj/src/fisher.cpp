#include "modsensor/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "modsensor/errors.hpp"
#include "modsensor/rng.hpp"

namespace modsensor {

namespace {

double axis_value(double lo, double hi, int steps, int i) {
  return steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
}

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

// Central difference inside, one-sided at the two ends.
double slope(const std::vector<double>& axis, int i, const std::function<double(int)>& value) {
  const int n = static_cast<int>(axis.size());
  const int lo = i == 0 ? 0 : i - 1;
  const int hi = i == n - 1 ? n - 1 : i + 1;
  return (value(hi) - value(lo)) / (axis[hi] - axis[lo]);
}

Eigen::Matrix2d cell_fisher(const ProbGrid& g, const Eigen::MatrixXd& pa, const Eigen::MatrixXd& pb, int i, int j) {
  Eigen::Matrix2d f = Eigen::Matrix2d::Zero();
  for (const Eigen::MatrixXd* p : {&pa, &pb}) {
    const Eigen::MatrixXd& m = *p;
    Eigen::Vector2d grad;
    grad[0] = slope(g.axis_a, i, [&](int k) { return m(k, j); });
    grad[1] = slope(g.axis_b, j, [&](int k) { return m(i, k); });
    const double q = m(i, j);
    f += grad * grad.transpose() / (q * (1.0 - q));
  }
  return f;
}

bool invertible(const Eigen::Matrix2d& f) { return f.determinant() > kDetThreshold; }

void check_uniform(const std::vector<double>& axis, const char* name) {
  if (axis.size() < 3) throw ValidationError(std::string("FIM needs at least 3 points along ") + name);
  const double h = axis[1] - axis[0];
  if (!(h > 0.0)) throw ValidationError(std::string(name) + " axis must be increasing");
  for (std::size_t k = 1; k < axis.size(); ++k) {
    if (std::abs(axis[k] - axis[k - 1] - h) > 1e-9 * std::max(1.0, std::abs(h) * axis.size())) {
      throw ValidationError(std::string(name) + " axis is not uniformly spaced");
    }
  }
}

}  // namespace

ProbGrid ProbGrid::from_rows(const std::vector<ProbGridRow>& rows) {
  if (rows.empty()) throw ValidationError("probability grid has no rows");
  std::map<double, int> ia, ib;
  for (const auto& r : rows) {
    ia.emplace(r.eps_a, 0);
    ib.emplace(r.eps_b, 0);
  }
  ProbGrid g;
  for (auto& [v, idx] : ia) {
    idx = static_cast<int>(g.axis_a.size());
    g.axis_a.push_back(v);
  }
  for (auto& [v, idx] : ib) {
    idx = static_cast<int>(g.axis_b.size());
    g.axis_b.push_back(v);
  }
  const auto na = static_cast<Eigen::Index>(g.axis_a.size());
  const auto nb = static_cast<Eigen::Index>(g.axis_b.size());
  if (static_cast<std::size_t>(na * nb) != rows.size()) {
    throw ValidationError("probability grid is not a complete rectangular lattice");
  }
  g.p_a0 = Eigen::MatrixXd::Constant(na, nb, std::numeric_limits<double>::quiet_NaN());
  g.p_b0 = g.p_a0;
  g.shots = rows.front().shots;
  for (const auto& r : rows) {
    const int i = ia.at(r.eps_a);
    const int j = ib.at(r.eps_b);
    if (!std::isnan(g.p_a0(i, j))) throw ValidationError("probability grid has a duplicated cell");
    if (r.shots != g.shots) throw ValidationError("probability grid mixes shot counts");
    g.p_a0(i, j) = r.p_a0;
    g.p_b0(i, j) = r.p_b0;
  }
  g.validate();
  return g;
}

std::vector<ProbGridRow> ProbGrid::to_rows() const {
  std::vector<ProbGridRow> rows;
  for (std::size_t i = 0; i < axis_a.size(); ++i) {
    for (std::size_t j = 0; j < axis_b.size(); ++j) {
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(j);
      rows.push_back({axis_a[i], axis_b[j], p_a0(a, b), p_b0(a, b), shots, shots > 0});
    }
  }
  return rows;
}

void ProbGrid::validate() const {
  const auto na = static_cast<Eigen::Index>(axis_a.size());
  const auto nb = static_cast<Eigen::Index>(axis_b.size());
  if (p_a0.rows() != na || p_a0.cols() != nb || p_b0.rows() != na || p_b0.cols() != nb) {
    throw ValidationError("probability arrays do not match the axes");
  }
  if (shots < 0) throw ValidationError("shot count must be non-negative");
  for (const Eigen::MatrixXd* p : {&p_a0, &p_b0}) {
    if (!p->allFinite() || p->minCoeff() < 0.0 || p->maxCoeff() > 1.0) {
      throw ValidationError("probabilities must lie in [0, 1]");
    }
  }
}

ProbGrid analytic_grid(const SensorFamily& family, const VisibilitySet& eta, const ProbGridConfig& config) {
  config.validate();
  ProbGrid g;
  for (int i = 0; i < config.a_steps; ++i) g.axis_a.push_back(axis_value(config.a_min, config.a_max, config.a_steps, i));
  for (int j = 0; j < config.b_steps; ++j) g.axis_b.push_back(axis_value(config.b_min, config.b_max, config.b_steps, j));
  g.p_a0.resize(config.a_steps, config.b_steps);
  g.p_b0.resize(config.a_steps, config.b_steps);
  const double la = family.length_a();
  const double lb = family.length_b();
  const double shift_b = family.grid ? 0.0 : family.offset;
  for (int i = 0; i < config.a_steps; ++i) {
    for (int j = 0; j < config.b_steps; ++j) {
      g.p_a0(i, j) = 0.5 * (1.0 + eta.eta_a * std::cos(config.theta_a + la * g.axis_a[i]));
      g.p_b0(i, j) = 0.5 * (1.0 + eta.eta_b * std::cos(config.theta_b + lb * (g.axis_b[j] + shift_b)));
    }
  }
  return g;
}

ProbGrid sample_grid(const ProbGrid& exact, int shots, std::uint64_t seed) {
  exact.validate();
  if (shots < 1) throw ValidationError("shot count must be positive");
  ProbGrid g = exact;
  g.shots = shots;
  const auto nb = g.p_a0.cols();
  for (Eigen::Index i = 0; i < g.p_a0.rows(); ++i) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      const auto idx = static_cast<std::uint64_t>(i * nb + j);
      Rng ra = make_stream(seed, idx, 0);
      Rng rb = make_stream(seed, idx, 1);
      g.p_a0(i, j) = std::binomial_distribution<int>(shots, exact.p_a0(i, j))(ra) / static_cast<double>(shots);
      g.p_b0(i, j) = std::binomial_distribution<int>(shots, exact.p_b0(i, j))(rb) / static_cast<double>(shots);
    }
  }
  return g;
}

FimResult fim_from_grid(const ProbGrid& grid, Exec exec) {
  grid.validate();
  check_uniform(grid.axis_a, "eps_a");
  check_uniform(grid.axis_b, "eps_b");
  const int na = static_cast<int>(grid.axis_a.size());
  const int nb = static_cast<int>(grid.axis_b.size());
  const Eigen::MatrixXd pa = grid.p_a0.unaryExpr(&clamp_probability);
  const Eigen::MatrixXd pb = grid.p_b0.unaryExpr(&clamp_probability);

  FimResult out;
  out.rows = na;
  out.cols = nb;
  out.fisher.assign(na * nb, Eigen::Matrix2d::Zero());
  out.covariance.assign(na * nb, Eigen::Matrix2d::Zero());
  out.usable.assign(na * nb, 0);
  std::vector<char> clamped(na * nb, 0);

  for_each_index(na * nb, exec, [&](int idx) {
    const int i = idx / nb;
    const int j = idx % nb;
    const Eigen::Matrix2d f = cell_fisher(grid, pa, pb, i, j);
    out.fisher[idx] = f;
    clamped[idx] = pa(i, j) != grid.p_a0(i, j) || pb(i, j) != grid.p_b0(i, j);
    if (invertible(f)) {
      out.covariance[idx] = f.inverse();
      out.usable[idx] = !clamped[idx];
    }
  });

  out.trace_min = std::numeric_limits<double>::infinity();
  for (int idx = 0; idx < na * nb; ++idx) {
    out.clamped_cells += clamped[idx];
    if (!out.usable[idx]) {
      ++out.excluded_cells;
      continue;
    }
    const double t = out.covariance[idx].trace();
    if (t < out.trace_min) {
      out.trace_min = t;
      out.argmin_index = {idx / nb, idx % nb};
    }
  }
  if (out.excluded_cells == na * nb) {
    throw NumericalError("Fisher matrix is singular or clamped in every cell (" + std::to_string(out.clamped_cells) +
                         " clamped)");
  }
  const auto [ia, ib] = out.argmin_index;
  out.argmin = {grid.axis_a[ia], grid.axis_b[ib]};
  out.sigma_at_min = out.covariance[ia * nb + ib];

  // First-order projection noise through every probability the winning cell depends on.
  if (grid.shots > 0) {
    double variance = 0.0;
    const double step = 1e-7;
    for (int which = 0; which < 2; ++which) {
      const Eigen::MatrixXd& base = which == 0 ? pa : pb;
      for (auto [di, dj] : {std::pair{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
        const int i = ia + di;
        const int j = ib + dj;
        if (i < 0 || i >= na || j < 0 || j >= nb) continue;
        const double q = base(i, j);
        const double sigma = std::sqrt(q * (1.0 - q) / grid.shots);
        Eigen::MatrixXd bumped = base;
        bumped(i, j) = q + step;
        const Eigen::Matrix2d f =
            which == 0 ? cell_fisher(grid, bumped, pb, ia, ib) : cell_fisher(grid, pa, bumped, ia, ib);
        if (!invertible(f)) continue;
        const double derivative = (f.inverse().trace() - out.trace_min) / step;
        variance += derivative * derivative * sigma * sigma;
      }
    }
    out.uncertainty = std::sqrt(variance);
  }
  return out;
}

double single_fisher(double length, double eta, double argument) {
  const double c = std::cos(argument);
  const double s = std::sin(argument);
  const double denom = 1.0 - eta * eta * c * c;
  if (denom <= 0.0) return 0.0;
  return length * length * eta * eta * s * s / denom;
}

double theoretical_variance_bound(const SensorFamily& family, const VisibilitySet& eta) {
  if (!(eta.eta_a > 0.0) || !(eta.eta_b > 0.0)) throw ValidationError("visibilities must be positive");
  const double a = family.length_a() * eta.eta_a;
  const double b = family.length_b() * eta.eta_b;
  return 1.0 / (a * a) + 1.0 / (b * b);
}

SqlBaselines sql_baselines(const SensorFamily& family, double mean_n) {
  if (!(mean_n >= 0.0) || !std::isfinite(mean_n)) throw ValidationError("mean phonon number must be non-negative");
  SqlBaselines out;
  if (family.grid) {
    out.sql_star = 2.0;
    out.lower_bound = 1.0 / (2.0 * mean_n + 1.0);
    out.squeezed_het = 2.0 * (1.0 + mean_n);
    return out;
  }
  if (mean_n == 0.0) throw ValidationError("phase SQL is undefined at zero mean phonon number");
  out.sql_number = 2.0 * mean_n + 1.0;
  out.sql_phase = 1.0 / (2.0 * mean_n) + 3.0 / (8.0 * mean_n * mean_n);
  out.sql_star = 2.0 + 5.0 / (4.0 * mean_n);
  return out;
}

double gain_db(double variance, double baseline) {
  if (!(variance > 0.0) || !(baseline > 0.0)) throw ValidationError("gain needs positive variance and baseline");
  return 10.0 * std::log10(baseline / variance);
}

double rescaled_np_trace(const Eigen::Matrix2d& sigma, double mean_n) {
  if (!(mean_n > 0.0)) throw ValidationError("rescaling needs a positive mean phonon number");
  return 2.0 * mean_n * sigma(0, 0) + sigma(1, 1) / (2.0 * mean_n);
}

double sequential_gain_model(double eta0, double zeta, int n_rounds, double length) {
  if (n_rounds < 1) throw ValidationError("round count must be at least 1");
  if (!(eta0 > 0.0)) throw ValidationError("visibility must be positive");
  if (!(zeta >= 0.0)) throw ValidationError("decay rate must be non-negative");
  double sum_a = 0.0, sum_b = 0.0;
  for (int n = 0; n < n_rounds; ++n) {
    sum_a += std::exp(-2.0 * n * zeta);
    sum_b += std::exp(-(2.0 * n + 1.0) * zeta);
  }
  return (1.0 / sum_a + 1.0 / sum_b) / (length * length * eta0 * eta0);
}

double sequential_gain_db(double eta0, double zeta, int from_rounds, int to_rounds) {
  return gain_db(sequential_gain_model(eta0, zeta, to_rounds), sequential_gain_model(eta0, zeta, from_rounds));
}

double powers_fisher_model(const std::vector<double>& etas, int k, double length) {
  if (k < 1 || static_cast<std::size_t>(k) > etas.size()) throw ValidationError("power index out of range");
  const double v = k * length * etas[k - 1];
  return v * v;
}

double grid_power_visibility(const GridSpec& spec, int k) {
  if (k < 1) throw ValidationError("power index must be positive");
  return char_function_grid_analytic(spec, cplx(0.0, k * kSqrtPi)).real();
}

void ForceContext::validate() const {
  if (!(z0 > 0.0) || !(omega_x > 0.0) || !(t_f > 0.0) || !(t_exp > 0.0) || iterations < 1 || !(charge > 0.0)) {
    throw ValidationError("force context values must all be positive");
  }
}

ForceSensitivity force_chain(const ForceContext& ctx, double delta_gamma) {
  ctx.validate();
  if (!(delta_gamma >= 0.0)) throw ValidationError("phase uncertainty must be non-negative");
  ForceSensitivity out;
  out.tau = ctx.iterations * ctx.t_exp;
  out.bandwidth = 1.0 / out.tau;
  const double root_tau = std::sqrt(out.tau);
  out.sigma_gamma = delta_gamma * root_tau;
  out.delta_z = 2.0 * ctx.z0 * delta_gamma;
  out.sigma_z = out.delta_z * root_tau;
  const double per_phase = 2.0 * phys::hbar / (ctx.z0 * ctx.t_f);
  out.delta_f = per_phase * delta_gamma;
  out.sigma_f = per_phase * out.sigma_gamma;
  out.sigma_e = out.sigma_f / ctx.charge;
  return out;
}

}  // namespace modsensor
