#pragma once

#include <stdexcept>
#include <string>

#include "pearle/types.hpp"

namespace pearle {

namespace detail {

template <typename Derived>
typename Derived::RealScalar hermitian_defect(const Eigen::MatrixBase<Derived>& m) {
  using Real = typename Derived::RealScalar;
  if (m.size() == 0) return Real(0);
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline void require_square(Index rows, Index cols, const char* name) {
  if (rows != cols || rows == 0) {
    throw std::invalid_argument(std::string(name) + " must be a non-empty square matrix");
  }
}

}  // namespace detail

/// The blocks rho1, rho2, rho12 of a system+apparatus density matrix written in
/// the measured basis {|1>, |2>}. rho21 is the adjoint of rho12 and is not stored.
template <typename Real = double>
class BlockDensityMatrix {
 public:
  using Matrix = ComplexMatrix<Real>;

  BlockDensityMatrix(Matrix rho1, Matrix rho2, Matrix rho12)
      : rho1_(std::move(rho1)), rho2_(std::move(rho2)), rho12_(std::move(rho12)) {
    check_shapes();
    if (const Real d = hermitian_defect(); d > Real(tolerance::kHermitian)) {
      throw InvariantViolation("BlockDensityMatrix.hermitian", static_cast<double>(d));
    }
    if (const Real d = trace_defect(); d > Real(tolerance::kTrace)) {
      throw InvariantViolation("BlockDensityMatrix.trace", static_cast<double>(d));
    }
    for (const auto& tr : {rho1_.trace(), rho2_.trace()}) {
      const Real lo = -Real(tolerance::kTrace), hi = Real(1) + Real(tolerance::kTrace);
      if (tr.real() < lo || tr.real() > hi) {
        throw InvariantViolation("BlockDensityMatrix.block_trace_range", static_cast<double>(tr.real()));
      }
    }
  }

  /// Partitions a full 2d x 2d density matrix.
  static BlockDensityMatrix from_full(const Matrix& full) {
    detail::require_square(full.rows(), full.cols(), "full density matrix");
    if (full.rows() % 2 != 0) throw std::invalid_argument("full density matrix must have even dimension");
    const Index d = full.rows() / 2;
    return BlockDensityMatrix(full.topLeftCorner(d, d), full.bottomRightCorner(d, d),
                              full.topRightCorner(d, d));
  }

  /// Pure state c1 |1>|r1> + c2 |2>|r2> with normalized apparatus vectors r1, r2.
  static BlockDensityMatrix from_pure(Complex<Real> c1, const ComplexVector<Real>& r1,
                                      Complex<Real> c2, const ComplexVector<Real>& r2) {
    if (r1.size() != r2.size() || r1.size() == 0) {
      throw std::invalid_argument("apparatus vectors must have equal non-zero dimension");
    }
    ComplexVector<Real> psi(2 * r1.size());
    psi << c1 * r1.normalized(), c2 * r2.normalized();
    return from_full(psi * psi.adjoint());
  }

  Index dim() const noexcept { return rho1_.rows(); }
  const Matrix& rho1() const noexcept { return rho1_; }
  const Matrix& rho2() const noexcept { return rho2_; }
  const Matrix& rho12() const noexcept { return rho12_; }
  auto rho21() const { return rho12_.adjoint(); }

  Real p1() const { return rho1_.trace().real(); }
  Real p2() const { return rho2_.trace().real(); }

  Matrix full() const {
    const Index d = dim();
    Matrix m(2 * d, 2 * d);
    m << rho1_, rho12_, rho12_.adjoint(), rho2_;
    return m;
  }

  Real hermitian_defect() const {
    return std::max(detail::hermitian_defect(rho1_), detail::hermitian_defect(rho2_));
  }

  /// |tr(rho1) + tr(rho2) - 1|, including any imaginary part of the traces.
  Real trace_defect() const { return std::abs(rho1_.trace() + rho2_.trace() - Complex<Real>(1)); }

 private:
  template <typename>
  friend class BlockStepper;

  struct Unchecked {};
  BlockDensityMatrix(Unchecked, Matrix rho1, Matrix rho2, Matrix rho12)
      : rho1_(std::move(rho1)), rho2_(std::move(rho2)), rho12_(std::move(rho12)) {}

  void check_shapes() const {
    detail::require_square(rho1_.rows(), rho1_.cols(), "rho1");
    const Index d = rho1_.rows();
    if (rho2_.rows() != d || rho2_.cols() != d || rho12_.rows() != d || rho12_.cols() != d) {
      throw std::invalid_argument("density blocks must share one dimension");
    }
  }

  Matrix rho1_, rho2_, rho12_;
};

/// Hamiltonian blocks H1 = F1 H F1, H2 = F2 H F2 and H12 = F1 H F2 (hbar = 1).
template <typename Real = double>
class HamiltonianBlocks {
 public:
  using Matrix = ComplexMatrix<Real>;

  HamiltonianBlocks(Matrix h1, Matrix h2, Matrix h12)
      : h1_(std::move(h1)), h2_(std::move(h2)), h12_(std::move(h12)) {
    detail::require_square(h1_.rows(), h1_.cols(), "h1");
    const Index d = h1_.rows();
    if (h2_.rows() != d || h2_.cols() != d || h12_.rows() != d || h12_.cols() != d) {
      throw std::invalid_argument("Hamiltonian blocks must share one dimension");
    }
    const Real defect = std::max(detail::hermitian_defect(h1_), detail::hermitian_defect(h2_));
    if (defect > Real(tolerance::kHermitian)) {
      throw InvariantViolation("HamiltonianBlocks.hermitian", static_cast<double>(defect));
    }
  }

  /// Uncoupled blocks plus zero coupling.
  static HamiltonianBlocks uncoupled(Matrix h1, Matrix h2) {
    Matrix h12 = Matrix::Zero(h1.rows(), h1.cols());
    return HamiltonianBlocks(std::move(h1), std::move(h2), std::move(h12));
  }

  Index dim() const noexcept { return h1_.rows(); }
  const Matrix& h1() const noexcept { return h1_; }
  const Matrix& h2() const noexcept { return h2_; }
  const Matrix& h12() const noexcept { return h12_; }
  auto h21() const { return h12_.adjoint(); }

  HamiltonianBlocks with_coupling(Matrix h12) const { return HamiltonianBlocks(h1_, h2_, std::move(h12)); }

 private:
  Matrix h1_, h2_, h12_;
};

}  // namespace pearle
