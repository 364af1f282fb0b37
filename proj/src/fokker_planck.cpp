#include "pearle/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pearle/csv.hpp"

namespace pearle {

namespace {

void require_cells(Index num_cells) {
  if (num_cells < FpGrid::kMinCells) {
    throw std::invalid_argument("FpGrid.num_cells must be >= " + std::to_string(FpGrid::kMinCells));
  }
}

double diffusion_scale(const DiffusionSpec& spec) {
  spec.validate();
  return static_cast<double>(spec.num_sources) * spec.intensity;
}

Vector diffusivity_at_centers(double nu, Index m) {
  Vector a(m);
  const double h = 1.0 / static_cast<double>(m);
  for (Index i = 0; i < m; ++i) {
    const double x = (static_cast<double>(i) + 0.5) * h;
    a[i] = nu * x * (1.0 - x);
  }
  return a;
}

double stable_dt(const Vector& a) {
  const Index m = a.size();
  const double h = 1.0 / static_cast<double>(m);
  double worst = std::max(3.0 * a[0], 3.0 * a[m - 1]);
  for (Index i = 1; i + 1 < m; ++i) worst = std::max(worst, 2.0 * a[i]);
  return h * h / worst;
}

}  // namespace

FpGrid::FpGrid(Vector density, std::array<double, 2> absorbed_mass, double time)
    : density_(std::move(density)), absorbed_(absorbed_mass), time_(time) {
  require_cells(density_.size());
  if ((density_.array() < 0.0).any() || !density_.allFinite()) {
    throw InvariantViolation("FpGrid.density_nonnegative", density_.minCoeff());
  }
  if (absorbed_[0] < 0.0 || absorbed_[1] < 0.0) {
    throw InvariantViolation("FpGrid.absorbed_nonnegative", std::min(absorbed_[0], absorbed_[1]));
  }
  if (const double defect = std::abs(total_mass() - 1.0); defect > 1e-8) {
    throw InvariantViolation("FpGrid.mass", defect);
  }
}

FpGrid FpGrid::point_mass(double p0, Index num_cells) {
  require_cells(num_cells);
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("point mass location must lie in [0, 1]");
  const double h = 1.0 / static_cast<double>(num_cells);
  Vector density = Vector::Zero(num_cells);
  std::array<double, 2> absorbed{0.0, 0.0};

  // Node positions: 0, centers (i + 1/2) h, 1. Mass w at node a and 1 - w at
  // node b with w a + (1 - w) b = p0.
  const double s = p0 / h - 0.5;  // fractional center index
  if (s < 0.0) {
    const double w = p0 / (0.5 * h);  // weight on center 0
    absorbed[0] = 1.0 - w;
    density[0] = w / h;
  } else if (s > static_cast<double>(num_cells - 1)) {
    const double w = (1.0 - p0) / (0.5 * h);  // weight on the last center
    absorbed[1] = 1.0 - w;
    density[num_cells - 1] = w / h;
  } else {
    const auto lo = std::min<Index>(static_cast<Index>(std::floor(s)), num_cells - 1);
    const double frac = s - static_cast<double>(lo);
    density[lo] += (1.0 - frac) / h;
    if (frac > 0.0) density[lo + 1] += frac / h;
  }
  return FpGrid(std::move(density), absorbed, 0.0);
}

double FpGrid::interior_mass() const { return density_.sum() * cell_width(); }

double FpGrid::first_moment() const {
  double m = 0.0;
  for (Index i = 0; i < num_cells(); ++i) m += center(i) * density_[i];
  return m * cell_width() + absorbed_[1];
}

double fp_stable_dt(Index num_cells, const DiffusionSpec& spec) {
  require_cells(num_cells);
  return stable_dt(diffusivity_at_centers(diffusion_scale(spec), num_cells));
}

FpSolver::FpSolver(const DiffusionSpec& spec, Index num_cells, double dt)
    : nu_(diffusion_scale(spec)), dt_(dt), diffusivity_(diffusivity_at_centers(nu_, num_cells)) {
  require_cells(num_cells);
  const double bound = stable_dt(diffusivity_);
  if (!(dt > 0.0)) throw std::invalid_argument("Fokker-Planck dt must be positive");
  if (dt > bound * (1.0 + 1e-12)) {
    throw std::invalid_argument("Fokker-Planck dt " + format_real(dt) + " exceeds stability bound " +
                                format_real(bound));
  }
  flux_.resize(num_cells);
}

void FpSolver::step(FpGrid& grid) { step_with(grid, dt_); }

void FpSolver::step_with(FpGrid& grid, double dt) {
  Vector& p = grid.density_;
  const Index m = p.size();
  if (m != diffusivity_.size()) throw std::invalid_argument("grid size does not match solver");
  const double h = 1.0 / static_cast<double>(m);
  const double r = dt / (h * h);

  flux_ = diffusivity_.cwiseProduct(p);
  // Face fluxes J_{i+1/2} = -(u_{i+1} - u_i) / h inside; the half-cell gradient
  // to u = 0 at the vertices gives outflow 2 u / h at each boundary.
  const double out_left = 2.0 * flux_[0] * r;
  const double out_right = 2.0 * flux_[m - 1] * r;

  double prev = flux_[0];
  p[0] += r * (flux_[1] - flux_[0]) - out_left;
  for (Index i = 1; i + 1 < m; ++i) {
    const double u = flux_[i];
    p[i] += r * (flux_[i + 1] - 2.0 * u + prev);
    prev = u;
  }
  p[m - 1] += r * (prev - flux_[m - 1]) - out_right;

  grid.absorbed_[0] += out_left * h;
  grid.absorbed_[1] += out_right * h;
  grid.time_ += dt;

  // Non-negative coefficients keep the density non-negative up to rounding.
  for (Index i = 0; i < m; ++i) {
    if (p[i] < 0.0) {
      if (p[i] < -1e-14) throw InvariantViolation("FpGrid.density_nonnegative", p[i]);
      p[i] = 0.0;
    }
  }
}

void FpSolver::advance_to(FpGrid& grid, double t_final) {
  while (grid.time() < t_final) {
    const double remaining = t_final - grid.time();
    if (remaining <= dt_ * 1e-9) break;
    step_with(grid, std::min(dt_, remaining));
  }
}

bool FpSolver::absorb(FpGrid& grid, double interior_tolerance, double t_max) {
  // Checking the interior mass is O(M); do it every few steps.
  constexpr int kCheckEvery = 16;
  int since = kCheckEvery;
  while (grid.time() < t_max) {
    if (++since >= kCheckEvery) {
      since = 0;
      if (grid.interior_mass() < interior_tolerance) return true;
    }
    step_with(grid, std::min(dt_, t_max - grid.time()));
  }
  return grid.interior_mass() < interior_tolerance;
}

FpGrid fp_step(const FpGrid& grid, const DiffusionSpec& spec, double dt) {
  FpSolver solver(spec, grid.num_cells(), dt);
  FpGrid next = grid;
  solver.step(next);
  if (const double defect = std::abs(next.total_mass() - grid.total_mass()); defect > 1e-10) {
    throw InvariantViolation("FpGrid.mass_conservation", defect);
  }
  return next;
}

AbsorbedFractions absorbed_fractions(const FpGrid& grid) {
  return {grid.absorbed_mass()[0], grid.absorbed_mass()[1], grid.interior_mass()};
}

void write_fp_snapshot_csv(std::ostream& os, const FpGrid& grid) {
  CsvWriter csv(os, {"p1_center", "density"});
  for (Index i = 0; i < grid.num_cells(); ++i) csv.row(grid.center(i), grid.density()[i]);
  csv.row("absorbed_0", grid.absorbed_mass()[0]);
  csv.row("absorbed_1", grid.absorbed_mass()[1]);
  csv.row("time", grid.time());
}

}  // namespace pearle
