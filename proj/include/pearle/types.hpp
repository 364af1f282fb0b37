#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pearle/error.hpp"

namespace pearle {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;

template <typename Real>
using Complex = std::complex<Real>;

template <typename Real>
using ComplexMatrix = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
using ComplexVector = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, 1>;

/// Tolerances attached to the domain types.
namespace tolerance {
inline constexpr double kSimplexSum = 1e-12;     // stored sum(probs) vs 1
inline constexpr double kInputSum = 1e-9;        // accepted input sum deviation
inline constexpr double kInputNegative = 1e-12;  // values in [-1e-12, 0] clamp to 0
inline constexpr double kHermitian = 1e-12;
inline constexpr double kTrace = 1e-10;
}  // namespace tolerance

/// Channel probabilities on the simplex, the state of the reduction process.
///
/// A component that is bitwise 0.0 is a dead channel. Once absorbed on channel j,
/// probs[j] == 1.0 and every other entry is 0.0 exactly. Values are immutable.
class ChannelState {
 public:
  const Vector& probs() const noexcept { return probs_; }
  double prob(Index j) const { return probs_[j]; }
  Index size() const noexcept { return probs_.size(); }
  std::optional<Index> absorbed() const noexcept { return absorbed_; }
  double time() const noexcept { return time_; }

  bool is_dead(Index j) const { return probs_[j] == 0.0; }
  Index live_count() const;

  ChannelState at_time(double t) const;

 private:
  friend ChannelState make_channel_state(const Eigen::Ref<const Vector>&, double);

  ChannelState(Vector probs, std::optional<Index> absorbed, double time)
      : probs_(std::move(probs)), absorbed_(absorbed), time_(time) {}

  Vector probs_;
  std::optional<Index> absorbed_;
  double time_ = 0.0;
};

/// Validates, clamps and renormalizes a probability vector.
///
/// Entries in [-1e-12, 0] become exact zeros; the deficit is distributed
/// proportionally over the nonzero entries only. Throws std::invalid_argument on
/// an empty vector, an entry below -1e-12, or a sum more than 1e-9 away from 1.
ChannelState make_channel_state(const Eigen::Ref<const Vector>& probs, double time = 0.0);

inline ChannelState make_channel_state(std::initializer_list<double> probs) {
  const std::vector<double> v(probs);
  return make_channel_state(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
}

/// Born probabilities |c_j|^2 of an amplitude vector.
ChannelState born_init(const Eigen::Ref<const Eigen::VectorXcd>& amplitudes);

/// Intensity and step of the probability-level Brownian process.
///
/// Each of num_sources independent sources contributes an increment with
/// covariance 2 * A(p) * dt, where A(p) = intensity * (diag(p) - p p^T); the
/// factor 2 makes dP/dt = sum_jk d_j d_k (A_jk P) the exact forward equation.
struct DiffusionSpec {
  double intensity = 1.0;
  int num_sources = 1;
  double dt = 1e-4;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  std::vector<double> source_intensities() const;
};

/// Independent noise sources acting on one probability vector. Generalizes
/// DiffusionSpec to unequal intensities (two apparatuses).
struct NoiseSources {
  std::vector<double> intensities;
  double dt = 1e-4;

  static NoiseSources from(const DiffusionSpec& spec);
  void validate() const;
  double total_intensity() const;
};

}  // namespace pearle
