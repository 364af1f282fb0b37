#pragma once

#include <cmath>
#include <complex>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "pearle/csv.hpp"
#include "pearle/types.hpp"

namespace pearle {

/// Parameters of a cluster jump between two superposed pointer lattices.
///
/// n_prime spectator atoms in the correlation sphere, pointer separation xi,
/// lattice spread delta (same length unit as xi), cluster_n atoms in the jumping
/// cluster out of pointer_total, and the bare matrix element <C beta|T|C alpha>.
template <typename Real = double>
struct ProximityParams {
  long n_prime = 1;
  Real xi = 0;
  Real delta = 1;
  long cluster_n = 1;
  long pointer_total = 1;
  Complex<Real> t_element{1, 0};

  void validate() const {
    if (n_prime < 1) throw std::invalid_argument("ProximityParams.n_prime must be >= 1");
    if (!(xi >= 0)) throw std::invalid_argument("ProximityParams.xi must be >= 0");
    if (!(delta > 0)) throw std::invalid_argument("ProximityParams.delta must be > 0");
    if (cluster_n < 1) throw std::invalid_argument("ProximityParams.cluster_n must be >= 1");
    if (pointer_total < 1) throw std::invalid_argument("ProximityParams.pointer_total must be >= 1");
    if (cluster_n > pointer_total) {
      throw std::invalid_argument("ProximityParams.cluster_n must not exceed pointer_total");
    }
  }

  ProximityParams with_xi(Real new_xi) const {
    ProximityParams p = *this;
    p.xi = new_xi;
    return p;
  }
};

/// Scalar product of two spectator states translated by xi:
/// exp(-N' xi^2 / (4 delta^2)).
template <typename Real>
Real overlap(const ProximityParams<Real>& params) {
  params.validate();
  if (params.xi == 0) return Real(1);
  const Real ratio = params.xi / params.delta;
  return std::exp(-static_cast<Real>(params.n_prime) * ratio * ratio / Real(4));
}

/// Cluster-jump amplitude: the bare element suppressed by the spectator overlap.
template <typename Real>
Complex<Real> jump_amplitude(const ProximityParams<Real>& params) {
  return params.t_element * overlap(params);
}

/// Global change of the pointer probability when a local change delta_p_local
/// of a cluster spreads over the pointer: (n / N) * delta_p_local.
template <typename Real>
Real spread_fluctuation(Real delta_p_local, const ProximityParams<Real>& params) {
  params.validate();
  return static_cast<Real>(params.cluster_n) / static_cast<Real>(params.pointer_total) * delta_p_local;
}

/// Largest separation xi at which the overlap is still >= threshold,
/// 2 delta sqrt(ln(1/threshold) / N').
template <typename Real>
Real proximity_window(const ProximityParams<Real>& params, Real threshold) {
  params.validate();
  if (!(threshold > 0 && threshold < 1)) {
    throw std::invalid_argument("proximity threshold must lie in (0, 1)");
  }
  return Real(2) * params.delta *
         std::sqrt(-std::log(threshold) / static_cast<Real>(params.n_prime));
}

template <typename Real>
struct ProximitySample {
  Real xi;
  Real overlap;
  Complex<Real> amplitude;
};

/// Evaluates overlap and amplitude on num_points evenly spaced separations in
/// [0, xi_max].
template <typename Real>
std::vector<ProximitySample<Real>> proximity_sweep(const ProximityParams<Real>& params, Real xi_max,
                                                   Index num_points) {
  if (num_points < 2) throw std::invalid_argument("proximity sweep needs at least 2 points");
  if (!(xi_max >= 0)) throw std::invalid_argument("xi_max must be >= 0");
  std::vector<ProximitySample<Real>> out;
  out.reserve(static_cast<std::size_t>(num_points));
  for (Index i = 0; i < num_points; ++i) {
    const Real xi = xi_max * static_cast<Real>(i) / static_cast<Real>(num_points - 1);
    const auto p = params.with_xi(xi);
    out.push_back({xi, overlap(p), jump_amplitude(p)});
  }
  return out;
}

/// Columns: xi, overlap, amp_re, amp_im.
template <typename Real>
void write_proximity_csv(std::ostream& os, const std::vector<ProximitySample<Real>>& sweep) {
  CsvWriter csv(os, {"xi", "overlap", "amp_re", "amp_im"});
  for (const auto& s : sweep) {
    csv.row(static_cast<double>(s.xi), static_cast<double>(s.overlap),
            static_cast<double>(s.amplitude.real()), static_cast<double>(s.amplitude.imag()));
  }
}

}  // namespace pearle
