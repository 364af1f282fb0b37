#pragma once

#include <array>
#include <ostream>

#include "pearle/types.hpp"

namespace pearle {

/// Two-channel probability density on cell centers of [0, 1] (coordinate p1,
/// with p2 = 1 - p1 eliminated) plus the point masses absorbed at p1 = 0 and
/// p1 = 1.
class FpGrid {
 public:
  static constexpr Index kMinCells = 64;

  /// Unit mass at p1 = p0, split between the two nearest nodes (cell centers
  /// and the vertices) so that the first moment equals p0 exactly.
  static FpGrid point_mass(double p0, Index num_cells);

  FpGrid(Vector density, std::array<double, 2> absorbed_mass, double time);

  Index num_cells() const noexcept { return density_.size(); }
  double cell_width() const noexcept { return 1.0 / static_cast<double>(density_.size()); }
  double center(Index i) const noexcept { return (static_cast<double>(i) + 0.5) * cell_width(); }
  const Vector& density() const noexcept { return density_; }
  const std::array<double, 2>& absorbed_mass() const noexcept { return absorbed_; }
  double time() const noexcept { return time_; }

  double interior_mass() const;
  double total_mass() const { return interior_mass() + absorbed_[0] + absorbed_[1]; }
  /// int p1 P dp1 + 1 * absorbed_mass[1]; constant in time for the exact dynamics.
  double first_moment() const;

 private:
  friend FpGrid fp_step(const FpGrid&, const DiffusionSpec&, double);
  friend class FpSolver;

  Vector density_;
  std::array<double, 2> absorbed_{0.0, 0.0};
  double time_ = 0.0;
};

/// Largest explicit step keeping every update coefficient non-negative:
/// dt <= h^2 / max_i(k_i A(p_i)), k_i = 2 in the interior and 3 in the two
/// boundary cells, A(p) = nu p (1 - p), nu = num_sources * intensity.
double fp_stable_dt(Index num_cells, const DiffusionSpec& spec);

/// One explicit step of dP/dt = d^2 [A(p) P] / dp^2 in flux form. The flux
/// leaving through p = 0 and p = 1 (where A vanishes) is added to the point
/// masses. Throws std::invalid_argument if dt exceeds fp_stable_dt.
FpGrid fp_step(const FpGrid& grid, const DiffusionSpec& spec, double dt);

/// Repeated stepping with reused buffers.
class FpSolver {
 public:
  FpSolver(const DiffusionSpec& spec, Index num_cells, double dt);

  void step(FpGrid& grid);
  /// Steps until time reaches t_final (last step shortened).
  void advance_to(FpGrid& grid, double t_final);
  /// Steps until the interior mass drops below interior_tolerance or time
  /// reaches t_max. Returns whether the tolerance was met.
  bool absorb(FpGrid& grid, double interior_tolerance, double t_max);

  double dt() const noexcept { return dt_; }

 private:
  void step_with(FpGrid& grid, double dt);

  double nu_;
  double dt_;
  Vector diffusivity_;  // A at cell centers
  Vector flux_;         // product A P at cell centers
};

struct AbsorbedFractions {
  double at_zero;
  double at_one;
  double interior;
};

AbsorbedFractions absorbed_fractions(const FpGrid& grid);

/// Columns p1_center, density; followed by footer rows absorbed_0, absorbed_1
/// and time in the same two-column layout.
void write_fp_snapshot_csv(std::ostream& os, const FpGrid& grid);

}  // namespace pearle
