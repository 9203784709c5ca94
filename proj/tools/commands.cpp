#include "commands.hpp"

#include <cmath>

#include "modsensor/circuit.hpp"
#include "modsensor/errors.hpp"
#include "modsensor/estimation.hpp"
#include "modsensor/fisher.hpp"
#include "modsensor/pulses.hpp"
#include "modsensor/states.hpp"

namespace modsensor::cli {

namespace {

Json header(const std::string& name, const Json& config) {
  Json j;
  j["tool_version"] = tool_version();
  j["subcommand"] = name;
  j["seed"] = config.at("seed");
  j["config_echo"] = config;
  return j;
}

int as_int(const Json& c, const char* key) {
  const double v = c.at(key).get<double>();
  if (v != std::floor(v) || std::abs(v) > 2e9) {
    throw ValidationError(std::string("config key '") + key + "' must be an integer");
  }
  return static_cast<int>(v);
}

std::uint64_t seed_of(const Json& c) { return c.at("seed").get<std::uint64_t>(); }

// ---- state ----

Json state_defaults() {
  return {{"family", "grid"}, {"delta", 0.37},      {"cutoff", 0},      {"spacing", 4},
          {"offset", 2},      {"envelope", "sine"}, {"fock_cutoff", 18}, {"mu", 0.1},
          {"seed", 0}};
}

bool is_grid(const Json& c) {
  const auto f = c.at("family").get<std::string>();
  if (f != "grid" && f != "np") throw ValidationError("family must be 'grid' or 'np', got '" + f + "'");
  return f == "grid";
}

NpSpec np_spec(const Json& c) {
  NpSpec spec;
  spec.spacing = as_int(c, "spacing");
  spec.offset = as_int(c, "offset");
  const auto env = c.at("envelope").get<std::string>();
  if (env == "sine") {
    spec.envelope = SineEnvelope{as_int(c, "fock_cutoff")};
  } else if (env == "airy") {
    spec.envelope = AiryEnvelope{c.at("mu").get<double>()};
  } else {
    throw ValidationError("envelope must be 'sine' or 'airy', got '" + env + "'");
  }
  spec.cutoff = as_int(c, "cutoff");
  spec.validate();
  return spec;
}

GridSpec grid_spec(const Json& c) {
  GridSpec spec;
  spec.delta = c.at("delta").get<double>();
  spec.cutoff = as_int(c, "cutoff");
  spec.validate();
  return spec;
}

struct BuiltState {
  StateVector state;
  VisibilitySet eta;
  Json info = Json::object();
};

BuiltState build_state(const Json& c) {
  BuiltState b;
  if (is_grid(c)) {
    const GridSpec spec = grid_spec(c);
    GridState g = build_grid_state(spec);
    b.state = std::move(g.state);
    b.eta = grid_visibility(spec);
    const SqueezingPair sq = effective_squeezing(b.state);
    b.info["lost_mass"] = rounded(g.lost_mass);
    b.info["delta_x"] = rounded(sq.delta_x);
    b.info["delta_p"] = rounded(sq.delta_p);
  } else {
    const NpSpec spec = np_spec(c);
    b.state = make_np_state(spec);
    b.eta = np_visibility(b.state, spec);
    b.info["phase_variance"] = rounded(modular_phase_variance(b.state, spec.spacing));
  }
  b.info["cutoff"] = b.state.cutoff();
  b.info["mean_n"] = rounded(b.state.mean_number());
  b.info["eta_a"] = rounded(b.eta.eta_a);
  b.info["eta_b"] = rounded(b.eta.eta_b);
  b.info["eta_joint"] = rounded(b.eta.eta_joint);
  return b;
}

SensorFamily family_of(const Json& c) {
  return is_grid(c) ? SensorFamily::grid_family() : SensorFamily::number_phase(as_int(c, "spacing"), as_int(c, "offset"));
}

CommandOutput run_state(const Json& c) {
  CommandOutput out;
  out.summary = header("state", c);
  const BuiltState b = build_state(c);
  out.summary.update(b.info);
  return out;
}

// ---- probgrid ----

Json probgrid_defaults() {
  Json j = state_defaults();
  j.update(Json{{"a_min", -1.0}, {"a_max", 1.0}, {"a_steps", 11}, {"b_min", -1.0}, {"b_max", 1.0}, {"b_steps", 11},
                {"theta_a", 0.0}, {"theta_b", 0.0}, {"shots", 0}});
  return j;
}

CommandOutput run_probgrid(const Json& c) {
  const BuiltState b = build_state(c);
  ProbGridConfig cfg;
  cfg.a_min = c.at("a_min").get<double>();
  cfg.a_max = c.at("a_max").get<double>();
  cfg.a_steps = as_int(c, "a_steps");
  cfg.b_min = c.at("b_min").get<double>();
  cfg.b_max = c.at("b_max").get<double>();
  cfg.b_steps = as_int(c, "b_steps");
  cfg.theta_a = c.at("theta_a").get<double>();
  cfg.theta_b = c.at("theta_b").get<double>();
  cfg.shots = as_int(c, "shots");
  cfg.seed = seed_of(c);
  const auto rows = probability_grid(b.state, family_of(c), cfg, Exec::parallel);

  CommandOutput out;
  out.summary = header("probgrid", c);
  out.summary["cells"] = rows.size();
  CsvTable t;
  t.header = {"eps_a", "eps_b", "p_a0", "p_b0", "shots", "monte_carlo"};
  for (const auto& r : rows) {
    t.rows.push_back({format_number(r.eps_a), format_number(r.eps_b), format_number(r.p_a0), format_number(r.p_b0),
                      std::to_string(r.shots), r.monte_carlo ? "1" : "0"});
  }
  out.table = std::move(t);
  return out;
}

// ---- fisher ----

Json fisher_defaults() { return {{"input", ""}, {"seed", 0}}; }

CommandOutput run_fisher(const Json& c) {
  const auto path = c.at("input").get<std::string>();
  if (path.empty()) throw ValidationError("fisher needs --input pointing at a probability-grid CSV");
  const CsvTable t = CsvTable::parse(read_text(path));
  const std::size_t ka = t.column("eps_a"), kb = t.column("eps_b"), pa = t.column("p_a0"), pb = t.column("p_b0"),
                    ks = t.column("shots");
  std::vector<ProbGridRow> rows;
  for (const auto& r : t.rows) {
    ProbGridRow row;
    row.eps_a = parse_number(r[ka], "eps_a");
    row.eps_b = parse_number(r[kb], "eps_b");
    row.p_a0 = parse_number(r[pa], "p_a0");
    row.p_b0 = parse_number(r[pb], "p_b0");
    const double shots = parse_number(r[ks], "shots");
    if (shots != std::floor(shots) || shots < 0) throw ValidationError("shots must be a non-negative integer");
    row.shots = static_cast<int>(shots);
    row.monte_carlo = row.shots > 0;
    rows.push_back(row);
  }
  const ProbGrid grid = ProbGrid::from_rows(rows);
  const FimResult fim = fim_from_grid(grid, Exec::parallel);

  CommandOutput out;
  out.summary = header("fisher", c);
  out.summary["rows"] = fim.rows;
  out.summary["cols"] = fim.cols;
  out.summary["trace_min"] = rounded(fim.trace_min);
  out.summary["uncertainty"] = rounded(fim.uncertainty);
  out.summary["argmin"] = {rounded(fim.argmin[0]), rounded(fim.argmin[1])};
  out.summary["argmin_index"] = {fim.argmin_index[0], fim.argmin_index[1]};
  const auto& s = fim.sigma_at_min;
  out.summary["sigma_at_min"] = {{rounded(s(0, 0)), rounded(s(0, 1))}, {rounded(s(1, 0)), rounded(s(1, 1))}};
  out.summary["excluded_cells"] = fim.excluded_cells;
  out.summary["clamped_cells"] = fim.clamped_cells;
  return out;
}

// ---- qpe ----

Json qpe_defaults() {
  Json j = state_defaults();
  j.update(Json{{"iterations", 32},
                {"rounds", 1},
                {"mode", "non_adaptive"},
                {"sampler", "model"},
                {"eta_a0", 1.0},
                {"eta_b0", 1.0},
                {"zeta", 0.0},
                {"dephasing_sigma", 0.0},
                {"trials", 100},
                {"signal", Json::array()}});
  return j;
}

SignalPair signal_from(const SensorFamily& family, const Json& v) {
  if (v.size() != 2) throw ValidationError("signal needs exactly two values (eps_a eps_b)");
  const double a = v[0].get<double>();
  const double bv = v[1].get<double>();
  if (family.grid) return GridSignal{a, bv};
  if (bv != std::floor(bv)) throw ValidationError("number-phase signal eps_n must be an integer");
  return NpSignal{a, static_cast<int>(bv)};
}

std::pair<double, double> signal_values(const SignalPair& s) {
  if (const auto* g = std::get_if<GridSignal>(&s)) return {g->eps_x, g->eps_p};
  const auto& n = std::get<NpSignal>(s);
  return {n.eps_phi, static_cast<double>(n.eps_n)};
}

CommandOutput run_qpe(const Json& c) {
  BatchConfig batch;
  EstimationConfig& e = batch.estimation;
  e.family = family_of(c);
  e.iterations = as_int(c, "iterations");
  e.rounds = as_int(c, "rounds");
  const auto mode = c.at("mode").get<std::string>();
  if (mode == "adaptive") {
    e.mode = ScheduleMode::adaptive;
  } else if (mode == "non_adaptive") {
    e.mode = ScheduleMode::non_adaptive;
  } else {
    throw ValidationError("mode must be 'adaptive' or 'non_adaptive', got '" + mode + "'");
  }
  e.decay = {c.at("eta_a0").get<double>(), c.at("eta_b0").get<double>(), c.at("zeta").get<double>()};
  const auto sampler = c.at("sampler").get<std::string>();
  if (sampler == "model") {
    e.sampler = ModelSampler{e.decay};
  } else if (sampler == "circuit") {
    BuiltState b = build_state(c);
    // the likelihood assumes the state's own contrast
    e.decay = {b.eta.eta_a, b.eta.eta_b, 0.0};
    e.sampler = CircuitSampler::make(e.family, std::move(b.state), c.at("dephasing_sigma").get<double>());
  } else {
    throw ValidationError("sampler must be 'model' or 'circuit', got '" + sampler + "'");
  }
  batch.trials = as_int(c, "trials");
  batch.seed = seed_of(c);
  if (!c.at("signal").empty()) batch.fixed_signal = signal_from(e.family, c.at("signal"));

  const BatchResult result = run_batch(batch, Exec::parallel);
  CommandOutput out;
  out.summary = header("qpe", c);
  const BatchSummary& s = result.summary;
  out.summary["vh_a"] = rounded(s.vh_a);
  out.summary["vh_b"] = rounded(s.vh_b);
  out.summary["vh_total"] = rounded(s.vh_total);
  out.summary["sql_star"] = rounded(s.sql_star);
  out.summary["gain_db"] = rounded(s.gain_db);
  double mean_post = 0.0;
  for (const auto& t : result.trials) mean_post += t.posterior_variance_a + t.posterior_variance_b;
  out.summary["mean_posterior_variance"] = rounded(mean_post / result.trials.size());

  CsvTable t;
  t.header = {"trial", "eps_a", "eps_b", "estimate_a", "estimate_b", "error_a", "error_b",
              "posterior_variance_a", "posterior_variance_b"};
  for (std::size_t k = 0; k < result.trials.size(); ++k) {
    const auto& r = result.trials[k];
    const auto [sa, sb] = signal_values(r.signal);
    t.rows.push_back({std::to_string(k), format_number(sa), format_number(sb), format_number(r.estimate_a),
                      format_number(r.estimate_b), format_number(r.error_a), format_number(r.error_b),
                      format_number(r.posterior_variance_a), format_number(r.posterior_variance_b)});
  }
  out.table = std::move(t);
  return out;
}

// ---- magnus ----

Json magnus_defaults() {
  const PulseSpec d;
  return {{"K", d.periods},  {"phi_target", d.phi_target}, {"omega_b", d.omega_b}, {"zeta2", d.zeta2},
          {"nmax", 10},      {"cutoff", 0},                {"tune_zeta2", false},  {"seed", 0}};
}

CommandOutput run_magnus(const Json& c) {
  PulseSpec spec;
  spec.periods = as_int(c, "K");
  spec.phi_target = c.at("phi_target").get<double>();
  spec.omega_b = c.at("omega_b").get<double>();
  spec.zeta2 = c.at("zeta2").get<double>();
  const int nmax = as_int(c, "nmax");
  const int cutoff = as_int(c, "cutoff");
  spec.cutoff = cutoff > 0 ? cutoff : nmax + kPulseGuardBand + 8;
  spec.validate();

  CommandOutput out;
  out.summary = header("magnus", c);
  if (c.at("tune_zeta2").get<bool>()) {
    const ZetaScan scan = tune_zeta2(spec, nmax, 31, 0.0, 0.3, Exec::parallel);
    spec.zeta2 = scan.best_zeta;
    out.summary["tuned_zeta2"] = rounded(scan.best_zeta);
    out.summary["untuned_mse"] = rounded(scan.mse.front());
  }
  const PauliTable table = verify_conditional_number(spec, nmax);
  out.summary["mse"] = rounded(table.mse);
  out.summary["distance"] = rounded(magnus_distance(spec, nmax, spec.zeta2 > 0.0));
  out.summary["converged"] = true;  // propagate_bsb throws otherwise
  out.summary["cutoff"] = spec.cutoff;

  CsvTable t;
  t.header = {"n", "sx", "sy", "sz", "ideal_sx", "ideal_sy", "ideal_sz"};
  for (const auto& r : table.rows) {
    t.rows.push_back({std::to_string(r.n), format_number(r.sx), format_number(r.sy), format_number(r.sz),
                      format_number(r.ideal_sx), format_number(r.ideal_sy), format_number(r.ideal_sz)});
  }
  out.table = std::move(t);
  return out;
}

// ---- force ----

Json force_defaults() {
  const ForceContext d;
  return {{"delta_gamma", 0.052}, {"iterations", d.iterations}, {"t_exp", d.t_exp}, {"t_f", d.t_f},
          {"z0", d.z0},           {"charge", d.charge},         {"seed", 0}};
}

CommandOutput run_force(const Json& c) {
  ForceContext ctx;
  ctx.iterations = as_int(c, "iterations");
  ctx.t_exp = c.at("t_exp").get<double>();
  ctx.t_f = c.at("t_f").get<double>();
  ctx.z0 = c.at("z0").get<double>();
  ctx.charge = c.at("charge").get<double>();
  const ForceSensitivity f = force_chain(ctx, c.at("delta_gamma").get<double>());
  CommandOutput out;
  out.summary = header("force", c);
  out.summary["tau"] = rounded(f.tau);
  out.summary["bandwidth"] = rounded(f.bandwidth);
  out.summary["sigma_gamma"] = rounded(f.sigma_gamma);
  out.summary["delta_z"] = rounded(f.delta_z);
  out.summary["sigma_z"] = rounded(f.sigma_z);
  out.summary["delta_f"] = rounded(f.delta_f);
  out.summary["sigma_f"] = rounded(f.sigma_f);
  out.summary["sigma_e"] = rounded(f.sigma_e);
  return out;
}

const char* type_name(const Json& v) {
  if (v.is_boolean()) return "a boolean";
  if (v.is_number()) return "a number";
  if (v.is_string()) return "a string";
  if (v.is_array()) return "a list";
  return "an object";
}

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

}  // namespace

const std::vector<Command>& commands() {
  static const std::vector<Command> all = {
      {"state", "Build a sensing state and report its mean phonon number and visibilities", state_defaults(),
       &run_state},
      {"probgrid", "Sweep single-round outcome probabilities over a signal lattice", probgrid_defaults(),
       &run_probgrid},
      {"fisher", "Fisher-information analysis of a probability-grid CSV", fisher_defaults(), &run_fisher},
      {"qpe", "Bayesian phase estimation over many trials", qpe_defaults(), &run_qpe},
      {"magnus", "Numerical check of the detuned-sideband conditional number operator", magnus_defaults(),
       &run_magnus},
      {"force", "Convert a phase uncertainty into displacement, force and field sensitivity", force_defaults(),
       &run_force},
  };
  return all;
}

const Command& find_command(const std::string& name) {
  for (const auto& c : commands()) {
    if (c.name == name) return c;
  }
  throw ValidationError("unknown subcommand '" + name + "'");
}

void merge_config(Json& base, const Json& patch, const std::string& source) {
  if (!patch.is_object()) throw ValidationError(source + " must be a JSON object");
  for (const auto& [key, value] : patch.items()) {
    if (!base.contains(key)) throw ValidationError(source + " has unknown key '" + key + "'");
    if (!same_kind(base[key], value)) {
      throw ValidationError(source + " key '" + key + "' must be " + type_name(base[key]));
    }
    base[key] = value;
  }
}

}  // namespace modsensor::cli
