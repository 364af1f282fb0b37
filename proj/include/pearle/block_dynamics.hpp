#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "pearle/blocks.hpp"
#include "pearle/csv.hpp"

namespace pearle {

namespace detail {

template <typename Real>
void require_same_dim(const HamiltonianBlocks<Real>& h, const BlockDensityMatrix<Real>& rho) {
  if (h.dim() != rho.dim()) {
    throw std::invalid_argument("Hamiltonian dimension " + std::to_string(h.dim()) +
                                " does not match density dimension " + std::to_string(rho.dim()));
  }
}

// Tr(A B) without forming the product.
template <typename A, typename B>
auto trace_of_product(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.cwiseProduct(b.transpose()).sum();
}

}  // namespace detail

/// Rate of change of the channel-1 probability, 2 Im Tr(H12 rho21).
template <typename Real>
Real dp1_dt(const HamiltonianBlocks<Real>& h, const BlockDensityMatrix<Real>& rho) {
  detail::require_same_dim(h, rho);
  return Real(2) * detail::trace_of_product(h.h12(), rho.rho21()).imag();
}

/// Rate of change of the channel-2 probability, 2 Im Tr(H21 rho12). Equals
/// -dp1_dt up to rounding.
template <typename Real>
Real dp2_dt(const HamiltonianBlocks<Real>& h, const BlockDensityMatrix<Real>& rho) {
  detail::require_same_dim(h, rho);
  return Real(2) * detail::trace_of_product(h.h21(), rho.rho12()).imag();
}

/// [[h1, h12], [h21, h2]].
template <typename Real>
ComplexMatrix<Real> assemble_full(const HamiltonianBlocks<Real>& h) {
  const Index d = h.dim();
  ComplexMatrix<Real> m(2 * d, 2 * d);
  m << h.h1(), h.h12(), h.h21(), h.h2();
  return m;
}

template <typename Real>
struct BlockSnapshot {
  Real t;
  BlockDensityMatrix<Real> rho;
};

template <typename Real>
struct EvolveOptions {
  /// Keep every stride-th step (the initial and final states are always kept).
  Index stride = 1;
  Real hermitian_tolerance = Real(tolerance::kHermitian);
  Real trace_tolerance = Real(tolerance::kTrace);
};

/// Classical fourth-order Runge-Kutta stepper for the coupled block equations
///   i drho1/dt  = [H1, rho1] + H12 rho21 - rho12 H21
///   i drho2/dt  = [H2, rho2] + H21 rho12 - rho21 H12
///   i drho12/dt = H1 rho12 - rho12 H2 + H12 rho2 - rho1 H12
template <typename Real>
class BlockStepper {
 public:
  using Matrix = ComplexMatrix<Real>;

  explicit BlockStepper(const HamiltonianBlocks<Real>& h) : h_(h) {}

  BlockDensityMatrix<Real> step(const BlockDensityMatrix<Real>& rho, Real dt) const {
    Blocks y{rho.rho1(), rho.rho2(), rho.rho12()};
    const Blocks k1 = rhs(y);
    const Blocks k2 = rhs(axpy(y, dt / 2, k1));
    const Blocks k3 = rhs(axpy(y, dt / 2, k2));
    const Blocks k4 = rhs(axpy(y, dt, k3));
    const Real w = dt / 6;
    y.r1 += w * (k1.r1 + 2 * k2.r1 + 2 * k3.r1 + k4.r1);
    y.r2 += w * (k1.r2 + 2 * k2.r2 + 2 * k3.r2 + k4.r2);
    y.r12 += w * (k1.r12 + 2 * k2.r12 + 2 * k3.r12 + k4.r12);
    return BlockDensityMatrix<Real>(typename BlockDensityMatrix<Real>::Unchecked{}, std::move(y.r1),
                                    std::move(y.r2), std::move(y.r12));
  }

 private:
  struct Blocks {
    Matrix r1, r2, r12;
  };

  static Blocks axpy(const Blocks& y, Real a, const Blocks& k) {
    return {y.r1 + a * k.r1, y.r2 + a * k.r2, y.r12 + a * k.r12};
  }

  Blocks rhs(const Blocks& y) const {
    const Complex<Real> minus_i(0, -1);
    const auto& h1 = h_.h1();
    const auto& h2 = h_.h2();
    const auto& h12 = h_.h12();
    const Matrix r21 = y.r12.adjoint();
    const Matrix h21 = h12.adjoint();
    Blocks d;
    d.r1.noalias() = h1 * y.r1 - y.r1 * h1 + h12 * r21 - y.r12 * h21;
    d.r2.noalias() = h2 * y.r2 - y.r2 * h2 + h21 * y.r12 - r21 * h12;
    d.r12.noalias() = h1 * y.r12 - y.r12 * h2 + h12 * y.r2 - y.r1 * h12;
    d.r1 *= minus_i;
    d.r2 *= minus_i;
    d.r12 *= minus_i;
    return d;
  }

  const HamiltonianBlocks<Real>& h_;
};

/// Integrates the block equations from rho0 up to t_final with steps of at
/// most dt (the step is shortened uniformly so the grid lands on t_final).
///
/// Throws InvariantViolation, carrying the step index, as soon as a state leaves
/// the Hermiticity or trace tolerances.
template <typename Real>
std::vector<BlockSnapshot<Real>> evolve_blocks(const HamiltonianBlocks<Real>& h,
                                               const BlockDensityMatrix<Real>& rho0, Real t_final,
                                               Real dt, const EvolveOptions<Real>& options = {}) {
  detail::require_same_dim(h, rho0);
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (!(t_final >= 0)) throw std::invalid_argument("t_final must be non-negative");
  if (options.stride < 1) throw std::invalid_argument("stride must be at least 1");

  const auto num_steps = static_cast<long>(std::ceil(t_final / dt * (1 - 1e-12)));
  const Real step = num_steps > 0 ? t_final / static_cast<Real>(num_steps) : Real(0);

  std::vector<BlockSnapshot<Real>> series;
  series.reserve(static_cast<std::size_t>(num_steps / options.stride + 2));
  series.push_back({Real(0), rho0});

  const BlockStepper<Real> stepper(h);
  BlockDensityMatrix<Real> rho = rho0;
  for (long n = 1; n <= num_steps; ++n) {
    rho = stepper.step(rho, step);

    if (const Real d = rho.hermitian_defect(); !(d <= options.hermitian_tolerance)) {
      throw InvariantViolation("BlockDensityMatrix.hermitian", static_cast<double>(d), n);
    }
    if (const Real d = rho.trace_defect(); !(d <= options.trace_tolerance)) {
      throw InvariantViolation("BlockDensityMatrix.trace", static_cast<double>(d), n);
    }
    for (const Real p : {rho.p1(), rho.p2()}) {
      if (p < -options.trace_tolerance || p > 1 + options.trace_tolerance) {
        throw InvariantViolation("BlockDensityMatrix.block_trace_range", static_cast<double>(p), n);
      }
    }

    if (n % options.stride == 0 || n == num_steps) {
      series.push_back({step * static_cast<Real>(n), rho});
    }
  }
  return series;
}

/// Smallest eigenvalues of rho1 and rho2; positivity is monitored, not enforced.
template <typename Real>
std::pair<Real, Real> min_block_eigenvalues(const BlockDensityMatrix<Real>& rho) {
  using Matrix = ComplexMatrix<Real>;
  const Eigen::SelfAdjointEigenSolver<Matrix> e1(rho.rho1(), Eigen::EigenvaluesOnly);
  const Eigen::SelfAdjointEigenSolver<Matrix> e2(rho.rho2(), Eigen::EigenvaluesOnly);
  return {e1.eigenvalues().minCoeff(), e2.eigenvalues().minCoeff()};
}

/// Columns: t, p1, p2, herm_defect, trace_defect.
template <typename Real>
void write_blocks_csv(std::ostream& os, const std::vector<BlockSnapshot<Real>>& series) {
  CsvWriter csv(os, {"t", "p1", "p2", "herm_defect", "trace_defect"});
  for (const auto& s : series) {
    csv.row(static_cast<double>(s.t), static_cast<double>(s.rho.p1()), static_cast<double>(s.rho.p2()),
            static_cast<double>(s.rho.hermitian_defect()), static_cast<double>(s.rho.trace_defect()));
  }
}

}  // namespace pearle
