// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "block_oracle.hpp"
#include "pearle/block_dynamics.hpp"
#include "pearle/epr.hpp"
#include "pearle/fokker_planck.hpp"
#include "pearle/proximity.hpp"
#include "pearle/stochastic_reduction.hpp"
#include "zero_pipelines.hpp"

namespace {

using namespace pearle;

struct Check {
  bool ok = true;
  void expect(bool cond, const char* fmt, auto... args) {
    std::printf("    %s ", cond ? "ok  " : "FAIL");
    std::printf(fmt, args...);
    std::printf("\n");
    ok = ok && cond;
  }
};

DiffusionSpec spec_of(double lambda, double dt) {
  DiffusionSpec s;
  s.intensity = lambda;
  s.dt = dt;
  return s;
}

// 1. Absorption frequencies equal the initial probabilities.
bool born_rule() {
  Check c;
  const long runs = 100000;
  BatchOptions options;
  options.max_steps = 1000000;
  std::uint64_t seed = 1001;
  for (const double p : {0.5, 0.36, 0.1}) {
    const auto s = born_statistics(make_channel_state({p, 1 - p}), spec_of(1.0, 1e-4), runs, seed++, options);
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(runs));
    for (Index j = 0; j < 2; ++j) {
      const double expected = j == 0 ? p : 1 - p;
      c.expect(std::abs(s.frequency[j] - expected) <= 3 * sigma,
               "p0=(%.2f,%.2f) freq[%ld]=%.5f expected %.2f |dev|=%.2e 3sigma=%.2e unabsorbed=%ld", p, 1 - p,
               static_cast<long>(j), s.frequency[j], expected, std::abs(s.frequency[j] - expected), 3 * sigma,
               s.unabsorbed);
    }
  }
  // step-size insensitivity
  const double p = 0.36;
  const auto fine = born_statistics(make_channel_state({p, 1 - p}), spec_of(1.0, 1e-4), runs, 2001, options);
  const auto coarse = born_statistics(make_channel_state({p, 1 - p}), spec_of(1.0, 2e-4), runs, 2002, options);
  const double sigma2 = std::sqrt(2 * p * (1 - p) / static_cast<double>(runs));
  c.expect(std::abs(fine.frequency[0] - coarse.frequency[0]) <= 3 * sigma2,
           "dt 1e-4 vs 2e-4 from p0=0.36: %.5f vs %.5f, 3sigma=%.2e", fine.frequency[0], coarse.frequency[0],
           3 * sigma2);
  return c.ok;
}

struct PdeRun {
  double absorbed_1 = 0;
  double interior = 0;
  double max_drift = 0;
  double max_mass_defect = 0;
  bool converged = false;
};

PdeRun solve_pde(double p0, Index cells) {
  const DiffusionSpec spec = spec_of(1.0, 1e-4);
  FpGrid grid = FpGrid::point_mass(p0, cells);
  FpSolver solver(spec, cells, 0.9 * fp_stable_dt(cells, spec));
  PdeRun r;
  while (grid.interior_mass() >= 1e-4 && grid.time() < 100) {
    for (int i = 0; i < 64; ++i) solver.step(grid);
    r.max_drift = std::max(r.max_drift, std::abs(grid.first_moment() - p0));
    r.max_mass_defect = std::max(r.max_mass_defect, std::abs(grid.total_mass() - 1.0));
  }
  r.converged = grid.interior_mass() < 1e-4;
  r.absorbed_1 = grid.absorbed_mass()[1];
  r.interior = grid.interior_mass();
  return r;
}

// 2. Fokker-Planck absorbed mass against Monte Carlo.
bool pde_sde() {
  Check c;
  const double p0 = 0.3;
  const long runs = 400000;
  BatchOptions options;
  options.max_steps = 1000000;
  const auto mc = born_statistics(make_channel_state({p0, 1 - p0}), spec_of(1.0, 1e-4), runs, 3003, options);
  // channel 0 is p1; absorbed mass at vertex 1 means p1 = 1
  const double f = mc.frequency[0];
  c.expect(mc.unabsorbed == 0, "Monte Carlo %ld runs, unabsorbed %ld, freq %.5f +- %.1e", runs, mc.unabsorbed, f,
           mc.standard_error[0]);
  const auto coarse = solve_pde(p0, 200);
  const auto fine = solve_pde(p0, 400);
  for (const auto* r : {&coarse, &fine}) {
    c.expect(r->converged, "PDE %s grid: interior %.2e < 1e-4", r == &coarse ? "M=200" : "M=400", r->interior);
    c.expect(std::abs(r->absorbed_1 - f) <= 3e-3, "PDE %s absorbed_1=%.6f vs MC %.5f |diff|=%.2e <= 3e-3",
             r == &coarse ? "M=200" : "M=400", r->absorbed_1, f, std::abs(r->absorbed_1 - f));
  }
  c.expect(std::abs(coarse.absorbed_1 - fine.absorbed_1) <= 3e-3,
           "Richardson: |PDE(M) - PDE(2M)| = %.2e, extrapolated %.6f", std::abs(coarse.absorbed_1 - fine.absorbed_1),
           2 * fine.absorbed_1 - coarse.absorbed_1);
  return c.ok;
}

// 3. The mean of p1 is conserved by both engines.
bool mean_conservation() {
  Check c;
  const double p0 = 0.3;
  for (const Index cells : {200, 400}) {
    const auto r = solve_pde(p0, cells);
    c.expect(r.max_drift < 1e-6, "PDE M=%ld first-moment drift %.2e < 1e-6 (mass defect %.1e)",
             static_cast<long>(cells), r.max_drift, r.max_mass_defect);
  }
  const auto m = ensemble_moments(make_channel_state({p0, 1 - p0}), spec_of(1.0, 1e-4), 20000, {500, 2000, 5000, 10000},
                                  4004);
  for (Index k = 0; k < m.mean.cols(); ++k) {
    const double dev = std::abs(m.mean(0, k) - p0);
    c.expect(dev <= 4 * m.standard_error(0, k), "MC mean p1 after %ld steps = %.5f, |dev|=%.2e, 4se=%.2e",
             m.checkpoints[static_cast<std::size_t>(k)], m.mean(0, k), dev, 4 * m.standard_error(0, k));
  }
  return c.ok;
}

// 4. RK4 blocks against the exact unitary evolution.
bool block_oracle() {
  Check c;
  std::mt19937_64 gen(5005);
  for (Index d = 1; d <= 4; ++d) {
    for (int trial = 0; trial < 3; ++trial) {
      const HamiltonianBlocks<double> h(testing::random_hermitian(d, 1.0, gen),
                                        testing::random_hermitian(d, 1.0, gen),
                                        testing::random_matrix(d, gen) * (0.5 / static_cast<double>(d)));
      const double a = std::uniform_real_distribution<double>(0.1, 0.9)(gen);
      const auto rho0 = BlockDensityMatrix<double>::from_pure(std::sqrt(a), testing::random_vector(d, gen),
                                                              std::sqrt(1 - a), testing::random_vector(d, gen));
      const auto series = evolve_blocks(h, rho0, 10.0, 1e-3, {.stride = 1000});
      double err = 0, rate_sum = 0;
      for (const auto& s : series) {
        err = std::max(err, (s.rho.full() - testing::exact_evolution(h, rho0.full(), s.t)).norm());
        rate_sum = std::max(rate_sum, std::abs(dp1_dt(h, s.rho) + dp2_dt(h, s.rho)));
      }
      c.expect(err <= 1e-6 && rate_sum <= 1e-14, "d=%ld trial %d: Frobenius error %.2e <= 1e-6, |dp1+dp2| %.1e",
               static_cast<long>(d), trial, err, rate_sum);
    }
  }
  return c.ok;
}

// 5. Without coupling the channel probabilities do not move.
bool decoupled_constancy() {
  Check c;
  std::mt19937_64 gen(6006);
  for (Index d = 1; d <= 4; ++d) {
    const auto h = HamiltonianBlocks<double>::uncoupled(testing::random_hermitian(d, 2.0, gen),
                                                        testing::random_hermitian(d, 2.0, gen));
    const auto rho0 = BlockDensityMatrix<double>::from_pure(std::sqrt(0.3), testing::random_vector(d, gen),
                                                            std::sqrt(0.7), testing::random_vector(d, gen));
    const auto series = evolve_blocks(h, rho0, 10.0, 1e-3);
    double worst = 0;
    for (const auto& s : series) worst = std::max(worst, std::abs(s.rho.p1() - rho0.p1()));
    c.expect(series.size() == 10001 && worst < 1e-10, "d=%ld: %zu states, max |p1(t)-p1(0)| = %.1e",
             static_cast<long>(d), series.size(), worst);
  }
  return c.ok;
}

// 6. Overlap and window are mutually inverse.
bool proximity_closed_form() {
  Check c;
  std::mt19937_64 gen(7007);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int i = 0; i < 100000; ++i) {
    ProximityParams<double> p;
    p.n_prime = 1 + static_cast<long>(gen() % 1000000);
    p.delta = std::exp(-5 + 10 * u(gen));
    const double thr = 1e-9 + (1 - 2e-9) * u(gen);
    const double w = proximity_window(p, thr);
    worst = std::max(worst, std::abs(overlap(p.with_xi(w)) - thr));
  }
  c.expect(worst <= 1e-12, "overlap(window(thr)) round trip, 1e5 draws: max error %.1e", worst);
  ProximityParams<double> p;
  p.n_prime = 1;
  p.delta = 1;
  p.xi = 2;
  const double o = overlap(p);
  const double e = std::exp(-1.0);
  c.expect(std::abs(o - e) <= std::numeric_limits<double>::epsilon() * e,
           "overlap(N'=1, delta=1, xi=2) = %.17g, exp(-1) = %.17g", o, e);
  return c.ok;
}

// 7. Entangled pair: forbidden joint outcomes never occur.
bool epr_forbidden() {
  Check c;
  EprConfig config;
  config.num_runs = 10000;
  config.seed = 8008;
  try {
    const auto r = epr_run(config);
    c.expect(r.counts[kHH] == 0 && r.counts[kVV] == 0, "H'H'' hits %ld, V'V'' hits %ld", r.counts[kHH],
             r.counts[kVV]);
    const double sigma = std::sqrt(0.25 / static_cast<double>(config.num_runs));
    for (const Index j : {kHV, kVH}) {
      c.expect(std::abs(r.frequency[j] - 0.5) <= 3 * sigma, "freq[%ld] = %.4f, |dev| %.2e <= 3sigma %.2e",
               static_cast<long>(j), r.frequency[j], std::abs(r.frequency[j] - 0.5), 3 * sigma);
    }
    c.expect(r.unabsorbed == 0, "unabsorbed %ld", r.unabsorbed);
  } catch (const InvariantViolation& e) {
    c.expect(false, "%s", e.what());
  }
  const long n = 1000000;
  const auto rep = independence_check(config, n);
  const double bound = 4.0 / std::sqrt(static_cast<double>(n));
  c.expect(rep.correlation.cwiseAbs().maxCoeff() < bound, "source correlation max |corr| = %.2e < %.1e at N=%ld",
           rep.correlation.cwiseAbs().maxCoeff(), bound, n);
  return c.ok;
}

// 8. Exact zeros survive every module.
bool zero_preservation() {
  Check c;
  const auto r = testing::run_zero_pipelines(9009, 300);
  c.expect(r.ok(), "%ld pipelines, %ld zero checks%s%s", r.pipelines, r.checks, r.ok() ? "" : ": ",
           r.failure.c_str());
  return c.ok;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<bool()>>> criteria = {
      {"1 Born rule", born_rule},
      {"2 PDE/SDE cross-validation", pde_sde},
      {"3 mean conservation", mean_conservation},
      {"4 block oracle equivalence", block_oracle},
      {"5 decoupled constancy", decoupled_constancy},
      {"6 proximity closed form", proximity_closed_form},
      {"7 EPR forbidden channels", epr_forbidden},
      {"8 zero preservation", zero_preservation},
  };
  int failed = 0;
  std::vector<std::string> lines;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::printf("[%s]\n", name);
    std::fflush(stdout);
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      std::printf("    exception: %s\n", e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %s  (%.1f s)\n", ok ? "PASS" : "FAIL", name, secs);
    std::fflush(stdout);
    lines.push_back(std::string(ok ? "PASS  " : "FAIL  ") + name);
    failed += ok ? 0 : 1;
  }
  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
