#include "pearle/scenarios.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <sstream>

#include "pearle/block_dynamics.hpp"
#include "pearle/csv.hpp"
#include "pearle/epr.hpp"
#include "pearle/fokker_planck.hpp"
#include "pearle/proximity.hpp"
#include "pearle/rng.hpp"
#include "pearle/stochastic_reduction.hpp"

namespace pearle {

namespace {

namespace fs = std::filesystem;

const std::vector<ParamSpec> kCommon = {
    {"seed", "42", "master seed of all random streams"},
    {"threads", "0", "worker threads for trajectory batches (0: all cores)", true},
};

std::vector<ParamSpec> with_common(std::vector<ParamSpec> specific, bool random = true) {
  specific.insert(specific.end(), kCommon.begin(), kCommon.end());
  if (!random) {
    specific[specific.size() - 2].help = "recorded in the manifest; this scenario draws no random numbers";
    specific[specific.size() - 2].inert = true;
  }
  return specific;
}

const std::map<std::string, std::vector<ParamSpec>, std::less<>>& parameter_table() {
  static const std::map<std::string, std::vector<ParamSpec>, std::less<>> table = {
      {"blocks",
       with_common({
           {"dim", "2", "apparatus dimension d of each block"},
           {"t_final", "10", "integration time"},
           {"dt", "0.001", "maximum RK4 step"},
           {"stride", "10", "keep every stride-th step in blocks.csv"},
           {"energy_scale", "1", "spectral norm of H1 and H2"},
           {"coupling", "0.2", "spectral norm of H12 before proximity suppression"},
           {"xi", "0", "pointer separation used to suppress H12 by the spectator overlap"},
           {"n_prime", "1", "spectator atoms for the overlap factor"},
           {"delta", "1", "lattice spread for the overlap factor"},
           {"c1", "0.6", "amplitude of channel 1 (re or re,im)"},
           {"c2", "0.8", "amplitude of channel 2 (re or re,im)"},
       })},
      {"proximity",
       with_common({
           {"n_prime", "100", "spectator atoms N'"},
           {"delta", "1", "lattice spread"},
           {"xi_max", "1", "largest separation in the sweep"},
           {"points", "101", "sweep points"},
           {"t_re", "1", "real part of the bare matrix element"},
           {"t_im", "0", "imaginary part of the bare matrix element"},
           {"cluster_n", "10", "atoms in the jumping cluster"},
           {"pointer_total", "1000", "atoms in the pointer"},
           {"threshold", "0.5", "overlap threshold defining the proximity window"},
           {"delta_p", "0.02", "local probability change to spread"},
       }, false)},
      {"pearle",
       with_common({
           {"p0", "0.5,0.5", "initial channel probabilities"},
           {"lambda", "1", "fluctuation intensity per source"},
           {"sources", "1", "independent noise sources (1 or 2)"},
           {"dt", "0.0001", "Euler-Maruyama step"},
           {"runs", "10000", "trajectories"},
           {"max_steps", "1000000", "step budget per trajectory"},
           {"path", "automatic", "increment kernel: automatic, general or two_channel"},
       })},
      {"fokker-planck",
       with_common({
           {"p0", "0.3,0.7", "initial channel probabilities (two channels)"},
           {"lambda", "1", "fluctuation intensity per source"},
           {"sources", "1", "independent noise sources (1 or 2)"},
           {"cells", "200", "grid cells on [0, 1]"},
           {"cfl", "0.9", "fraction of the stability bound used as step"},
           {"interior_tol", "0.0001", "stop once the interior mass is below this"},
           {"t_max", "100", "time limit"},
           {"history_every", "0.1", "time between rows of fp_history.csv"},
       }, false)},
      {"epr",
       with_common({
           {"c_hv", "0.7071067811865476", "amplitude of H'V'' (re or re,im)"},
           {"c_vh", "-0.7071067811865476", "amplitude of V'H'' (re or re,im)"},
           {"lambda_a", "1", "intensity of the first apparatus"},
           {"lambda_b", "1", "intensity of the second apparatus"},
           {"dt", "0.0001", "Euler-Maruyama step"},
           {"runs", "10000", "trajectories"},
           {"max_steps", "1000000", "step budget per trajectory"},
           {"samples", "10000", "increment samples for the independence check (0: skip)"},
       })},
      {"crosscheck",
       with_common({
           {"p0", "0.3,0.7", "initial channel probabilities (two channels)"},
           {"lambda", "1", "fluctuation intensity per source"},
           {"sources", "1", "independent noise sources (1 or 2)"},
           {"dt", "0.0001", "Euler-Maruyama step"},
           {"runs", "10000", "trajectories"},
           {"max_steps", "1000000", "step budget per trajectory"},
           {"cells", "200", "coarse grid cells (the fine grid has twice as many)"},
           {"cfl", "0.9", "fraction of the stability bound used as step"},
           {"interior_tol", "0.0001", "PDE stop criterion on interior mass"},
           {"t_max", "100", "PDE time limit"},
       })},
  };
  return table;
}

// ---------------------------------------------------------------------------
// Typed value access. Parse failures raise ConfigError carrying the key.

class Params {
 public:
  explicit Params(const ResolvedConfig& c) : c_(c) {}

  const std::string& text(const std::string& key) const {
    const auto it = c_.values.find(key);
    if (it == c_.values.end()) throw ConfigError(0, key, "missing value");
    return it->second;
  }

  bool has(const std::string& key) const { return c_.values.contains(key); }

  double real(const std::string& key) const { return parse_real(key, text(key)); }

  long integer(const std::string& key) const {
    const std::string& s = text(key);
    long v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && end == s.data() + s.size()) return v;
    // Accept integral reals such as 1e5.
    const double d = parse_real(key, s);
    if (d == std::floor(d) && std::abs(d) < 9.2e18) return static_cast<long>(d);
    throw ConfigError(line(key), key, "expected an integer, got '" + s + "'");
  }

  std::uint64_t u64(const std::string& key) const {
    const std::string& s = text(key);
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
      throw ConfigError(line(key), key, "expected an unsigned 64-bit integer, got '" + s + "'");
    }
    return v;
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(text(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trimmed(item)));
    if (out.empty()) throw ConfigError(line(key), key, "expected a comma-separated list of reals");
    return out;
  }

  std::complex<double> complex(const std::string& key) const {
    const auto v = reals(key);
    if (v.size() > 2) throw ConfigError(line(key), key, "expected 're' or 're,im'");
    return {v[0], v.size() == 2 ? v[1] : 0.0};
  }

  int line(const std::string& key) const {
    const auto it = c_.lines.find(key);
    return it == c_.lines.end() ? 0 : it->second;
  }

 private:
  static std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }

  double parse_real(const std::string& key, const std::string& s) const {
    double v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
      throw ConfigError(line(key), key, "expected a real number, got '" + s + "'");
    }
    return v;
  }

  const ResolvedConfig& c_;
};

// "DiffusionSpec.intensity must be > 0" -> "DiffusionSpec.intensity".
std::string invariant_of(const std::string& message, const std::string& fallback) {
  const auto end = message.find_first_of(" :[");
  const std::string head = message.substr(0, end);
  return head.find('.') != std::string::npos ? head : fallback;
}

class Checker {
 public:
  Checker(const ResolvedConfig& c, std::vector<Diagnostic>& out) : c_(c), p_(c), out_(out) {}

  const Params& params() const { return p_; }

  void add(const std::string& key, const std::string& invariant, const std::string& message) {
    out_.push_back({p_.line(key), c_.scenario, key, invariant, message});
  }

  /// Runs fn; a ConfigError or std::invalid_argument becomes a diagnostic on key.
  template <typename Fn>
  bool check(const std::string& key, const std::string& invariant, Fn&& fn) {
    try {
      fn();
      return true;
    } catch (const ConfigError& e) {
      add(e.key().empty() ? key : e.key(), "type", e.what());
    } catch (const std::invalid_argument& e) {
      add(key, invariant_of(e.what(), invariant), e.what());
    } catch (const InvariantViolation& e) {
      add(key, e.invariant(), e.what());
    }
    return false;
  }

  void require(const std::string& key, bool ok, const std::string& invariant, const std::string& message) {
    if (!ok) add(key, invariant, message);
  }

 private:
  const ResolvedConfig& c_;
  Params p_;
  std::vector<Diagnostic>& out_;
};

void check_diffusion(Checker& ck, bool with_dt) {
  const auto& p = ck.params();
  double lambda = 1, dt = 1;
  long sources = 1;
  if (!ck.check("lambda", "type", [&] { lambda = p.real("lambda"); })) return;
  if (!ck.check("sources", "type", [&] { sources = p.integer("sources"); })) return;
  if (with_dt && !ck.check("dt", "type", [&] { dt = p.real("dt"); })) return;
  const DiffusionSpec spec{lambda, static_cast<int>(sources), dt};
  if (!(lambda > 0)) ck.add("lambda", "DiffusionSpec.intensity", "intensity must be > 0");
  if (sources != 1 && sources != 2) ck.add("sources", "DiffusionSpec.num_sources", "must be 1 or 2");
  if (!(dt > 0)) ck.add("dt", "DiffusionSpec.dt", "time step must be > 0");
  (void)spec;
}

void check_p0(Checker& ck, bool two_channels) {
  ck.check("p0", "ChannelState", [&] {
    const auto v = ck.params().reals("p0");
    const auto state = make_channel_state(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
    if (two_channels && state.size() != 2) {
      throw std::invalid_argument("FpGrid.K: the Fokker-Planck solver supports exactly two channels");
    }
  });
}

void check_positive_integer(Checker& ck, const std::string& key, long min, const std::string& invariant) {
  long v = 0;
  if (ck.check(key, "type", [&] { v = ck.params().integer(key); })) {
    ck.require(key, v >= min, invariant, "must be >= " + std::to_string(min));
  }
}

void check_real(Checker& ck, const std::string& key, const std::function<bool(double)>& ok,
                const std::string& invariant, const std::string& message) {
  double v = 0;
  if (ck.check(key, "type", [&] { v = ck.params().real(key); })) ck.require(key, ok(v), invariant, message);
}

void check_fp_grid(Checker& ck) {
  check_positive_integer(ck, "cells", FpGrid::kMinCells, "FpGrid.num_cells");
  check_real(ck, "cfl", [](double v) { return v > 0 && v <= 1; }, "FpGrid.stability",
             "must lie in (0, 1]");
  check_real(ck, "interior_tol", [](double v) { return v > 0; }, "FpGrid.interior_tol", "must be > 0");
  check_real(ck, "t_max", [](double v) { return v > 0; }, "FpGrid.t_max", "must be > 0");
}

ProximityParams<double> proximity_params(const Params& p, bool full) {
  ProximityParams<double> params;
  params.n_prime = p.integer("n_prime");
  params.delta = p.real("delta");
  if (full) {
    params.cluster_n = p.integer("cluster_n");
    params.pointer_total = p.integer("pointer_total");
    params.t_element = {p.real("t_re"), p.real("t_im")};
  } else {
    params.xi = p.real("xi");
  }
  return params;
}

EprConfig epr_config(const Params& p) {
  EprConfig c;
  c.c_hv = p.complex("c_hv");
  c.c_vh = p.complex("c_vh");
  c.lambda_a = p.real("lambda_a");
  c.lambda_b = p.real("lambda_b");
  c.dt = p.real("dt");
  c.max_steps = p.integer("max_steps");
  c.num_runs = p.integer("runs");
  c.seed = p.u64("seed");
  return c;
}

void check_scenario(const ResolvedConfig& rc, std::vector<Diagnostic>& out) {
  Checker ck(rc, out);
  const auto& p = ck.params();
  ck.check("seed", "type", [&] { p.u64("seed"); });
  check_positive_integer(ck, "threads", 0, "threads");

  const std::string& s = rc.scenario;
  if (s == "pearle" || s == "crosscheck") {
    check_p0(ck, s == "crosscheck");
    check_diffusion(ck, true);
    check_positive_integer(ck, "runs", 100, "born_statistics.num_runs");
    check_positive_integer(ck, "max_steps", 1, "run_trajectory.max_steps");
  }
  if (s == "pearle") {
    const std::string& path = p.text("path");
    ck.require("path", path == "automatic" || path == "general" || path == "two_channel", "StepPath",
               "expected automatic, general or two_channel");
    if (path == "two_channel") {
      ck.check("p0", "StepPath", [&] {
        if (p.reals("p0").size() != 2) throw std::invalid_argument("two_channel path needs exactly two channels");
      });
    }
  }
  if (s == "fokker-planck" || s == "crosscheck") {
    if (s == "fokker-planck") {
      check_p0(ck, true);
      check_diffusion(ck, false);
      check_real(ck, "history_every", [](double v) { return v > 0; }, "history_every", "must be > 0");
    }
    check_fp_grid(ck);
  }
  if (s == "blocks") {
    check_positive_integer(ck, "dim", 1, "BlockDensityMatrix.dim");
    check_positive_integer(ck, "stride", 1, "EvolveOptions.stride");
    check_real(ck, "t_final", [](double v) { return v >= 0; }, "evolve_blocks.t_final", "must be >= 0");
    check_real(ck, "dt", [](double v) { return v > 0; }, "evolve_blocks.dt", "must be > 0");
    check_real(ck, "energy_scale", [](double v) { return v >= 0; }, "HamiltonianBlocks.scale", "must be >= 0");
    check_real(ck, "coupling", [](double v) { return v >= 0; }, "HamiltonianBlocks.coupling", "must be >= 0");
    ck.check("xi", "ProximityParams", [&] { proximity_params(p, false).validate(); });
    ck.check("c1", "BlockDensityMatrix.trace", [&] {
      const double n = std::norm(p.complex("c1")) + std::norm(p.complex("c2"));
      if (!(std::abs(n - 1.0) <= tolerance::kInputSum)) {
        throw std::invalid_argument("BlockDensityMatrix.trace: |c1|^2 + |c2|^2 = " + format_real(n));
      }
    });
  }
  if (s == "proximity") {
    ck.check("n_prime", "ProximityParams", [&] { proximity_params(p, true).validate(); });
    check_real(ck, "xi_max", [](double v) { return v >= 0; }, "ProximityParams.xi", "must be >= 0");
    check_positive_integer(ck, "points", 2, "proximity_sweep.points");
    check_real(ck, "threshold", [](double v) { return v > 0 && v < 1; }, "proximity_window.threshold",
               "must lie in (0, 1)");
    check_real(ck, "delta_p", [](double) { return true; }, "", "");
  }
  if (s == "epr") {
    ck.check("c_hv", "EprConfig", [&] { epr_config(p).validate(); });
    long samples = 0;
    if (ck.check("samples", "type", [&] { samples = p.integer("samples"); })) {
      ck.require("samples", samples == 0 || samples >= 10000, "independence_check.num_samples",
                 "must be 0 (skip) or >= 10000");
    }
  }
}

// ---------------------------------------------------------------------------
// Scenario execution.

using Summary = std::vector<std::pair<std::string, std::string>>;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Output {
 public:
  explicit Output(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  template <typename Fn>
  void write(const std::string& name, Fn&& fn) {
    const fs::path path = dir_ / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.imbue(std::locale::classic());
    fn(os);
    os.flush();
    if (!os) throw IoError("failed writing " + path.string());
    files_.push_back(path);
  }

  std::vector<fs::path>& files() { return files_; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
};

std::string yes_no(bool b) { return b ? "true" : "false"; }

ChannelState p0_state(const Params& p) {
  const auto v = p.reals("p0");
  return make_channel_state(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
}

unsigned thread_count(const Params& p) { return static_cast<unsigned>(p.integer("threads")); }

ComplexMatrix<double> random_complex(Index d, Rng& rng) {
  ComplexMatrix<double> m(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      const double re = rng.normal();
      m(i, j) = {re, rng.normal()};
    }
  }
  return m;
}

// Random Hermitian matrix with spectral norm `scale`.
ComplexMatrix<double> random_hermitian(Index d, double scale, Rng& rng) {
  const ComplexMatrix<double> g = random_complex(d, rng);
  ComplexMatrix<double> h = (g + g.adjoint()) / 2.0;
  const Eigen::SelfAdjointEigenSolver<ComplexMatrix<double>> es(h, Eigen::EigenvaluesOnly);
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  h *= norm > 0 ? scale / norm : 0.0;
  h = (h + h.adjoint()).eval() / 2.0;
  return h;
}

void run_blocks(const Params& p, Output& out, Summary& summary) {
  const Index d = p.integer("dim");
  Rng rng(derive_seed(p.u64("seed"), 0));
  const double scale = p.real("energy_scale");
  ComplexMatrix<double> h1 = random_hermitian(d, scale, rng);
  ComplexMatrix<double> h2 = random_hermitian(d, scale, rng);
  ComplexMatrix<double> g = random_complex(d, rng);
  const Eigen::JacobiSVD<ComplexMatrix<double>> svd(g);
  const double suppression = overlap(proximity_params(p, false));
  g *= p.real("coupling") * suppression / svd.singularValues()[0];
  const HamiltonianBlocks<double> h(std::move(h1), std::move(h2), std::move(g));

  ComplexVector<double> r1 = random_complex(d, rng).col(0);
  ComplexVector<double> r2 = random_complex(d, rng).col(0);
  const auto rho0 = BlockDensityMatrix<double>::from_pure(p.complex("c1"), r1, p.complex("c2"), r2);

  EvolveOptions<double> options;
  options.stride = p.integer("stride");
  const auto series = evolve_blocks(h, rho0, p.real("t_final"), p.real("dt"), options);
  out.write("blocks.csv", [&](std::ostream& os) { write_blocks_csv(os, series); });

  double max_herm = 0, max_trace = 0, min_eig = 1;
  for (const auto& s : series) {
    max_herm = std::max(max_herm, s.rho.hermitian_defect());
    max_trace = std::max(max_trace, s.rho.trace_defect());
    const auto [e1, e2] = min_block_eigenvalues(s.rho);
    min_eig = std::min({min_eig, e1, e2});
  }
  summary.emplace_back("overlap_factor", format_real(suppression));
  summary.emplace_back("p1_initial", format_real(series.front().rho.p1()));
  summary.emplace_back("p1_final", format_real(series.back().rho.p1()));
  summary.emplace_back("dp1_dt_initial", format_real(dp1_dt(h, rho0)));
  summary.emplace_back("max_herm_defect", format_real(max_herm));
  summary.emplace_back("max_trace_defect", format_real(max_trace));
  summary.emplace_back("min_block_eigenvalue", format_real(min_eig));
}

void run_proximity(const Params& p, Output& out, Summary& summary) {
  const auto params = proximity_params(p, true);
  const auto sweep = proximity_sweep(params, p.real("xi_max"), p.integer("points"));
  out.write("proximity.csv", [&](std::ostream& os) { write_proximity_csv(os, sweep); });
  const double threshold = p.real("threshold");
  const double window = proximity_window(params, threshold);
  summary.emplace_back("proximity_window", format_real(window));
  summary.emplace_back("overlap_at_window", format_real(overlap(params.with_xi(window))));
  summary.emplace_back("threshold", format_real(threshold));
  summary.emplace_back("spread_fluctuation", format_real(spread_fluctuation(p.real("delta_p"), params)));
}

StepPath step_path(const std::string& s) {
  if (s == "general") return StepPath::general;
  if (s == "two_channel") return StepPath::two_channel;
  return StepPath::automatic;
}

DiffusionSpec diffusion_spec(const Params& p, bool with_dt) {
  return DiffusionSpec{p.real("lambda"), static_cast<int>(p.integer("sources")), with_dt ? p.real("dt") : 1.0};
}

BornStatistics run_born(const Params& p, bool keep_records) {
  BatchOptions batch;
  batch.max_steps = p.integer("max_steps");
  batch.threads = thread_count(p);
  batch.keep_records = keep_records;
  if (p.has("path")) batch.path = step_path(p.text("path"));
  return born_statistics(p0_state(p), diffusion_spec(p, true), p.integer("runs"), p.u64("seed"), batch);
}

void born_summary(const BornStatistics& stats, Summary& summary) {
  summary.emplace_back("runs", std::to_string(stats.num_runs));
  summary.emplace_back("unabsorbed", std::to_string(stats.unabsorbed));
  summary.emplace_back("mean_absorption_time", format_real(stats.mean_absorption_time));
  for (Index j = 0; j < stats.frequency.size(); ++j) {
    const std::string k = std::to_string(j);
    const double dev = std::abs(stats.frequency[j] - stats.expected[j]);
    const double sigma = std::sqrt(stats.expected[j] * (1 - stats.expected[j]) / static_cast<double>(stats.num_runs));
    summary.emplace_back("frequency_" + k, format_real(stats.frequency[j]));
    summary.emplace_back("stderr_" + k, format_real(stats.standard_error[j]));
    summary.emplace_back("expected_" + k, format_real(stats.expected[j]));
    summary.emplace_back("deviation_" + k, format_real(dev));
    summary.emplace_back("three_sigma_" + k, format_real(3 * sigma));
    summary.emplace_back("within_3sigma_" + k, yes_no(dev <= 3 * sigma));
  }
}

void run_pearle(const Params& p, Output& out, Summary& summary) {
  const BornStatistics stats = run_born(p, true);
  out.write("trajectories.csv", [&](std::ostream& os) { write_trajectories_csv(os, stats.records); });
  out.write("born_summary.csv", [&](std::ostream& os) { write_born_summary_csv(os, stats); });
  born_summary(stats, summary);
}

struct FpOutcome {
  FpGrid grid;
  bool converged;
  double initial_moment;
};

FpOutcome run_fp_grid(const Params& p, const DiffusionSpec& spec, Index cells,
                      std::vector<std::array<double, 5>>* history, double history_every) {
  const ChannelState p0 = p0_state(p);
  FpGrid grid = FpGrid::point_mass(p0.prob(0), cells);
  const double dt = p.real("cfl") * fp_stable_dt(cells, spec);
  FpSolver solver(spec, cells, dt);
  const double m0 = grid.first_moment();
  const double tol = p.real("interior_tol");
  const double t_max = p.real("t_max");
  bool converged = false;
  if (history) {
    const auto record = [&] {
      const auto f = absorbed_fractions(grid);
      history->push_back({grid.time(), f.at_zero, f.at_one, f.interior, grid.first_moment()});
    };
    record();
    while (!(converged = grid.interior_mass() < tol) && grid.time() < t_max) {
      solver.advance_to(grid, std::min(t_max, grid.time() + history_every));
      record();
    }
  } else {
    converged = solver.absorb(grid, tol, t_max);
  }
  return {std::move(grid), converged, m0};
}

void run_fokker_planck(const Params& p, Output& out, Summary& summary) {
  const DiffusionSpec spec = diffusion_spec(p, false);
  std::vector<std::array<double, 5>> history;
  const Index cells = p.integer("cells");
  auto [grid, converged, m0] = run_fp_grid(p, spec, cells, &history, p.real("history_every"));
  out.write("fp_snapshot.csv", [&](std::ostream& os) { write_fp_snapshot_csv(os, grid); });
  out.write("fp_history.csv", [&](std::ostream& os) {
    CsvWriter csv(os, {"time", "absorbed_0", "absorbed_1", "interior", "first_moment"});
    for (const auto& h : history) csv.row(h[0], h[1], h[2], h[3], h[4]);
  });
  const auto f = absorbed_fractions(grid);
  summary.emplace_back("cells", std::to_string(cells));
  summary.emplace_back("dt", format_real(p.real("cfl") * fp_stable_dt(cells, spec)));
  summary.emplace_back("time", format_real(grid.time()));
  summary.emplace_back("absorbed_0", format_real(f.at_zero));
  summary.emplace_back("absorbed_1", format_real(f.at_one));
  summary.emplace_back("interior", format_real(f.interior));
  summary.emplace_back("mass_defect", format_real(std::abs(grid.total_mass() - 1.0)));
  summary.emplace_back("first_moment_drift", format_real(std::abs(grid.first_moment() - m0)));
  summary.emplace_back("converged", yes_no(converged));
}

void run_epr(const Params& p, Output& out, Summary& summary) {
  const EprConfig config = epr_config(p);
  BatchOptions batch;
  batch.threads = thread_count(p);
  batch.keep_records = true;
  const EprResult result = epr_run(config, batch);
  out.write("epr.csv", [&](std::ostream& os) { write_epr_csv(os, result); });
  out.write("epr_contingency.csv", [&](std::ostream& os) {
    CsvWriter csv(os, {"first", "second_H", "second_V"});
    csv.row("H", result.contingency(0, 0), result.contingency(0, 1));
    csv.row("V", result.contingency(1, 0), result.contingency(1, 1));
  });
  summary.emplace_back("runs", std::to_string(result.num_runs));
  summary.emplace_back("unabsorbed", std::to_string(result.unabsorbed));
  const char* names[] = {"HV", "VH", "HH", "VV"};
  const Eigen::Vector4d expected = config.initial_state().probs();
  for (Index j = 0; j < kJointChannels; ++j) {
    summary.emplace_back(std::string("count_") + names[j], std::to_string(result.counts[static_cast<std::size_t>(j)]));
    summary.emplace_back(std::string("frequency_") + names[j], format_real(result.frequency[j]));
    summary.emplace_back(std::string("expected_") + names[j], format_real(expected[j]));
  }
  summary.emplace_back("contingency_H_H", std::to_string(result.contingency(0, 0)));
  summary.emplace_back("contingency_H_V", std::to_string(result.contingency(0, 1)));
  summary.emplace_back("contingency_V_H", std::to_string(result.contingency(1, 0)));
  summary.emplace_back("contingency_V_V", std::to_string(result.contingency(1, 1)));
  if (const long samples = p.integer("samples"); samples > 0) {
    const IndependenceReport rep = independence_check(config, samples);
    summary.emplace_back("independence_samples", std::to_string(samples));
    summary.emplace_back("independence_bound", format_real(4.0 / std::sqrt(static_cast<double>(samples))));
    for (Index j = 0; j < kJointChannels; ++j) {
      summary.emplace_back(std::string("correlation_") + names[j], format_real(rep.correlation[j]));
    }
  }
}

void run_crosscheck(const Params& p, Output& out, Summary& summary) {
  const BornStatistics stats = run_born(p, true);
  out.write("trajectories.csv", [&](std::ostream& os) { write_trajectories_csv(os, stats.records); });
  const DiffusionSpec spec = diffusion_spec(p, true);
  const Index cells = p.integer("cells");
  const auto coarse = run_fp_grid(p, spec, cells, nullptr, 0);
  const auto fine = run_fp_grid(p, spec, 2 * cells, nullptr, 0);

  // Absorption at p1 = 1 is outcome channel 0.
  const double mc = stats.frequency[0];
  const double mc_err = stats.standard_error[0];
  const double pde = fine.grid.absorbed_mass()[1];
  const double pde_err =
      std::abs(coarse.grid.absorbed_mass()[1] - pde) + fine.grid.interior_mass();
  const double combined = 3.0 * std::hypot(mc_err, pde_err);
  const double diff = std::abs(mc - pde);
  const bool pass = diff <= combined && coarse.converged && fine.converged;

  out.write("crosscheck.csv", [&](std::ostream& os) {
    CsvWriter csv(os, {"method", "cells", "estimate", "error"});
    csv.row("monte_carlo", 0L, mc, mc_err);
    csv.row("fokker_planck", static_cast<long>(cells), coarse.grid.absorbed_mass()[1],
            coarse.grid.interior_mass());
    csv.row("fokker_planck", static_cast<long>(2 * cells), pde, pde_err);
  });
  born_summary(stats, summary);
  summary.emplace_back("pde_absorbed_1_coarse", format_real(coarse.grid.absorbed_mass()[1]));
  summary.emplace_back("pde_absorbed_1_fine", format_real(pde));
  summary.emplace_back("pde_error", format_real(pde_err));
  summary.emplace_back("mc_frequency_0", format_real(mc));
  summary.emplace_back("difference", format_real(diff));
  summary.emplace_back("combined_error", format_real(combined));
  summary.emplace_back("pass", yes_no(pass));
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"blocks", "proximity", "pearle",
                                                 "fokker-planck", "epr", "crosscheck"};
  return names;
}

bool is_scenario(std::string_view name) { return parameter_table().contains(name); }

const std::vector<ParamSpec>& scenario_parameters(std::string_view scenario) {
  const auto it = parameter_table().find(scenario);
  if (it == parameter_table().end()) throw std::invalid_argument("unknown scenario '" + std::string(scenario) + "'");
  return it->second;
}

ResolvedConfig resolve_config(std::string_view scenario, const Config* file, const ParamMap& overrides,
                              std::vector<Diagnostic>& diags) {
  const auto& specs = scenario_parameters(scenario);
  ResolvedConfig rc;
  rc.scenario = std::string(scenario);
  for (const auto& s : specs) rc.values[s.name] = s.default_value;
  const auto known = [&](const std::string& key) { return rc.values.contains(key); };

  if (file) {
    if (const auto* top = file->section("")) {
      for (const auto& [key, v] : *top) {
        if (key != "seed" && key != "threads") {
          diags.push_back({v.line, "", key, "unknown_key", "only seed and threads may appear before a section"});
          continue;
        }
        rc.values[key] = v.value;
        rc.lines[key] = v.line;
      }
    }
    if (const auto* sec = file->section(rc.scenario)) {
      for (const auto& [key, v] : *sec) {
        if (!known(key)) {
          diags.push_back({v.line, rc.scenario, key, "unknown_key", "not a parameter of this scenario"});
          continue;
        }
        rc.values[key] = v.value;
        rc.lines[key] = v.line;
      }
    }
  }
  for (const auto& [raw_key, value] : overrides) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '-', '_');
    if (!known(key)) {
      diags.push_back({0, rc.scenario, key, "unknown_key", "not a parameter of this scenario"});
      continue;
    }
    rc.values[key] = value;
    rc.lines[key] = 0;
  }
  return rc;
}

std::vector<Diagnostic> check_config(const ResolvedConfig& config) {
  std::vector<Diagnostic> out;
  check_scenario(config, out);
  return out;
}

std::vector<Diagnostic> validate_config(const Config& config) {
  std::vector<Diagnostic> diags;
  // Top-level keys once; resolve_config reports them again per section.
  if (const auto* top = config.section("")) {
    for (const auto& [key, v] : *top) {
      if (key != "seed" && key != "threads") {
        diags.push_back({v.line, "", key, "unknown_key", "only seed and threads may appear before a section"});
      }
    }
  }
  const auto checked = [&](const std::string& scenario) {
    std::vector<Diagnostic> local;
    const ResolvedConfig rc = resolve_config(scenario, &config, {}, local);
    std::erase_if(local, [](const Diagnostic& d) { return d.section.empty(); });
    auto more = check_config(rc);
    local.insert(local.end(), more.begin(), more.end());
    return local;
  };

  bool any_section = false;
  for (const auto& [name, section] : config.sections()) {
    if (name.empty()) continue;
    any_section = true;
    if (!is_scenario(name)) {
      diags.push_back({config.section_line(name), name, "", "unknown_scenario", "no scenario of this name"});
      continue;
    }
    auto local = checked(name);
    diags.insert(diags.end(), local.begin(), local.end());
  }
  if (!any_section) {
    // Only common keys; they are checked by any scenario without scenario keys.
    auto local = checked("proximity");
    std::erase_if(local, [](const Diagnostic& d) { return d.key != "seed" && d.key != "threads"; });
    for (auto& d : local) d.section.clear();
    diags.insert(diags.end(), local.begin(), local.end());
  }
  return diags;
}

std::vector<Diagnostic> validate_config(const fs::path& path) {
  Config cfg;
  try {
    cfg = Config::load(path);
  } catch (const ConfigError& e) {
    return {{e.line(), "", e.key(), "syntax", e.what()}};
  }
  return validate_config(cfg);
}

std::string manifest_text(const ResolvedConfig& config) {
  std::ostringstream os;
  os << "# pearlelab run manifest\n";
  os << "# artifact_version = " << PEARLELAB_VERSION << '\n';
  os << "# rng = " << kRngAlgorithm << '\n';
  os << "# scenario = " << config.scenario << '\n';
  os << "# master_seed = " << config.values.at("seed") << '\n';
  os << '[' << config.scenario << "]\n";
  for (const auto& [k, v] : config.values) os << k << " = " << v << '\n';
  return os.str();
}

RunOutcome run_scenario(const RunRequest& request) {
  RunOutcome outcome;
  if (!is_scenario(request.scenario)) {
    outcome.code = ExitCode::unknown_scenario;
    std::string list;
    for (const auto& n : scenario_names()) list += (list.empty() ? "" : ", ") + n;
    outcome.message = "unknown scenario '" + request.scenario + "' (expected one of: " + list + ")";
    return outcome;
  }

  std::optional<Config> file;
  if (request.config_path) {
    try {
      file = Config::load(*request.config_path);
    } catch (const ConfigError& e) {
      outcome.code = ExitCode::config_error;
      outcome.diagnostics.push_back({e.line(), "", e.key(), "syntax", e.what()});
      outcome.message = request.config_path->string() + ": " + e.what();
      return outcome;
    } catch (const std::exception& e) {
      outcome.code = ExitCode::config_error;
      outcome.message = e.what();
      return outcome;
    }
  }

  ParamMap overrides = request.overrides;
  if (request.seed) overrides["seed"] = std::to_string(*request.seed);
  ResolvedConfig rc = resolve_config(request.scenario, file ? &*file : nullptr, overrides, outcome.diagnostics);
  auto checks = check_config(rc);
  outcome.diagnostics.insert(outcome.diagnostics.end(), checks.begin(), checks.end());
  if (!outcome.diagnostics.empty()) {
    outcome.code = ExitCode::config_error;
    outcome.message = "configuration has " + std::to_string(outcome.diagnostics.size()) + " problem(s)";
    return outcome;
  }

  const Params params(rc);
  Summary& summary = outcome.summary;
  summary.emplace_back("scenario", rc.scenario);
  summary.emplace_back("seed", rc.values.at("seed"));
  try {
    Output out(request.out_dir);
    const std::string& s = rc.scenario;
    if (s == "blocks") run_blocks(params, out, summary);
    else if (s == "proximity") run_proximity(params, out, summary);
    else if (s == "pearle") run_pearle(params, out, summary);
    else if (s == "fokker-planck") run_fokker_planck(params, out, summary);
    else if (s == "epr") run_epr(params, out, summary);
    else if (s == "crosscheck") run_crosscheck(params, out, summary);

    out.write("manifest.txt", [&](std::ostream& os) { os << manifest_text(rc); });
    out.write("summary.txt", [&](std::ostream& os) {
      for (const auto& [k, v] : summary) os << k << " = " << v << '\n';
    });
    outcome.files = std::move(out.files());
  } catch (const InvariantViolation& e) {
    outcome.code = ExitCode::invariant_violation;
    outcome.message = e.what();
  } catch (const IoError& e) {
    outcome.code = ExitCode::io_error;
    outcome.message = e.what();
  } catch (const std::invalid_argument& e) {
    outcome.code = ExitCode::config_error;
    outcome.message = e.what();
  }
  return outcome;
}

}  // namespace pearle
