#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "modsensor/circuit.hpp"
#include "modsensor/parallel.hpp"
#include "modsensor/states.hpp"

namespace modsensor {

// Sampled outcome-0 probabilities over a uniform (eps_a, eps_b) lattice, indexed (i_a, i_b).
struct ProbGrid {
  std::vector<double> axis_a;
  std::vector<double> axis_b;
  Eigen::MatrixXd p_a0;
  Eigen::MatrixXd p_b0;
  int shots = 0;  // per cell; 0 for analytic

  // Rows in any order; throws ValidationError unless they fill a rectangular lattice.
  static ProbGrid from_rows(const std::vector<ProbGridRow>& rows);
  std::vector<ProbGridRow> to_rows() const;
  void validate() const;
};

// Closed-form single-round probabilities with continuous shifts on both axes.
ProbGrid analytic_grid(const SensorFamily& family, const VisibilitySet& eta, const ProbGridConfig& config);

// Binomial resampling of every cell with `shots` draws; stream per cell index.
ProbGrid sample_grid(const ProbGrid& exact, int shots, std::uint64_t seed);

inline constexpr double kProbabilityClamp = 1e-6;
inline constexpr double kDetThreshold = 1e-12;

struct FimResult {
  int rows = 0;
  int cols = 0;
  std::vector<Eigen::Matrix2d> fisher;      // row-major over (i_a, i_b)
  std::vector<Eigen::Matrix2d> covariance;  // zero where not invertible
  std::vector<char> usable;                 // invertible and unclamped
  double trace_min = 0.0;
  std::array<double, 2> argmin{};
  std::array<int, 2> argmin_index{};
  Eigen::Matrix2d sigma_at_min = Eigen::Matrix2d::Zero();
  double uncertainty = 0.0;  // projection noise on trace_min, 0 for analytic grids
  int excluded_cells = 0;
  int clamped_cells = 0;

  const Eigen::Matrix2d& fisher_at(int i, int j) const { return fisher[i * cols + j]; }
};

// Binomial FIM per cell from finite differences of both marginals.
FimResult fim_from_grid(const ProbGrid& grid, Exec exec = Exec::serial);

// Fisher information of a single (1 + eta cos(arg)) / 2 outcome in eps, with modular length l.
double single_fisher(double length, double eta, double argument);

// 1/(l_a eta_a)^2 + 1/(l_b eta_b)^2.
double theoretical_variance_bound(const SensorFamily& family, const VisibilitySet& eta);

struct SqlBaselines {
  double sql_star = 2.0;
  std::optional<double> lower_bound;        // 1/(2<n> + 1), grid only
  std::optional<double> squeezed_het;       // 2(1 + <n>), grid only
  std::optional<double> sql_number;         // 2<n> + 1, NP only
  std::optional<double> sql_phase;          // 1/(2<n>) + 3/(8<n>^2), NP only
};
SqlBaselines sql_baselines(const SensorFamily& family, double mean_n);

// 10 log10(baseline / variance).
double gain_db(double variance, double baseline);

// Phase/number covariance put on a common footing: diag(2<n>, 1/(2<n>)) Sigma, traced.
double rescaled_np_trace(const Eigen::Matrix2d& sigma, double mean_n);

// Combined variance after NS sequential round pairs with visibilities decaying per round:
// (1/(l eta0)^2) (1/sum_n e^{-2 n zeta} + 1/sum_n e^{-(2n+1) zeta}).
double sequential_gain_model(double eta0, double zeta, int n_rounds, double length = kGridLength);
double sequential_gain_db(double eta0, double zeta, int from_rounds, int to_rounds);

// Peak Fisher information (k l eta_k)^2 when measuring the k-th stabilizer power.
double powers_fisher_model(const std::vector<double>& etas, int k, double length);
// eta_k = Re chi(k i sqrt(pi)) from the theta-function formula.
double grid_power_visibility(const GridSpec& spec, int k);

namespace phys {
inline constexpr double hbar = 1.054571817e-34;
inline constexpr double elementary_charge = 1.602176634e-19;
}  // namespace phys

struct ForceContext {
  double z0 = 4.7e-9;          // ground-state extent (m)
  double omega_x = 2.0 * kPi * 1.33e6;  // trap frequency (rad/s), informational
  double t_f = 122e-6;         // force duration (s)
  double t_exp = 14.8e-3;      // one experimental cycle (s)
  int iterations = 128;        // M
  double charge = phys::elementary_charge;
  void validate() const;
};

struct ForceSensitivity {
  double tau = 0.0;          // M t_exp
  double bandwidth = 0.0;    // 1/tau
  double sigma_gamma = 0.0;  // 1/sqrt(Hz)
  double delta_z = 0.0;      // m
  double sigma_z = 0.0;      // m/sqrt(Hz)
  double delta_f = 0.0;      // N
  double sigma_f = 0.0;      // N/sqrt(Hz)
  double sigma_e = 0.0;      // V/m/sqrt(Hz)
};

ForceSensitivity force_chain(const ForceContext& ctx, double delta_gamma);

}  // namespace modsensor
