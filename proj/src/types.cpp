#include "pearle/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pearle {

InvariantViolation::InvariantViolation(std::string invariant, double magnitude,
                                       std::optional<long> step, std::string detail)
    : std::runtime_error([&] {
        std::string msg = "invariant violated: " + invariant + " (magnitude " + std::to_string(magnitude);
        if (step) msg += ", step " + std::to_string(*step);
        msg += ")";
        if (!detail.empty()) msg += ": " + detail;
        return msg;
      }()),
      invariant_(std::move(invariant)),
      magnitude_(magnitude),
      step_(step) {}

Index ChannelState::live_count() const {
  return (probs_.array() != 0.0).count();
}

ChannelState ChannelState::at_time(double t) const {
  if (!(t >= 0)) throw std::invalid_argument("ChannelState.time must be >= 0");
  return ChannelState(probs_, absorbed_, t);
}

ChannelState make_channel_state(const Eigen::Ref<const Vector>& input, double time) {
  if (input.size() == 0) throw std::invalid_argument("ChannelState.probs must not be empty");
  if (!(time >= 0)) throw std::invalid_argument("ChannelState.time must be >= 0");

  Vector probs = input;
  for (Index j = 0; j < probs.size(); ++j) {
    const double v = probs[j];
    if (!std::isfinite(v)) {
      throw std::invalid_argument("ChannelState.probs[" + std::to_string(j) + "] is not finite");
    }
    if (v < -tolerance::kInputNegative) {
      throw std::invalid_argument("ChannelState.non_negative: probs[" + std::to_string(j) +
                                  "] = " + std::to_string(v));
    }
    if (v <= 0.0) probs[j] = 0.0;  // also maps -0.0 to +0.0
  }

  const double sum = probs.sum();
  if (!(std::abs(sum - 1.0) <= tolerance::kInputSum)) {
    throw std::invalid_argument("ChannelState.normalization: probabilities sum to " +
                                std::to_string(sum));
  }

  // Skip renormalization for sums already at rounding level so that
  // re-constructing from a valid state is the identity.
  const double renorm_threshold =
      std::max(1e-13, 4.0 * static_cast<double>(probs.size()) * std::numeric_limits<double>::epsilon());
  if (std::abs(sum - 1.0) > renorm_threshold) probs /= sum;

  std::optional<Index> absorbed;
  Index max_index = 0;
  const double max_value = probs.maxCoeff(&max_index);
  if (max_value >= 1.0 || (probs.array() != 0.0).count() == 1) {
    absorbed = max_index;
    probs.setZero();
    probs[max_index] = 1.0;
  }
  return ChannelState(std::move(probs), absorbed, time);
}

ChannelState born_init(const Eigen::Ref<const Eigen::VectorXcd>& amplitudes) {
  if (amplitudes.size() == 0) throw std::invalid_argument("amplitude vector must not be empty");
  Vector probs(amplitudes.size());
  for (Index j = 0; j < amplitudes.size(); ++j) probs[j] = std::norm(amplitudes[j]);
  const double sum = probs.sum();
  if (!(std::abs(sum - 1.0) <= tolerance::kInputSum)) {
    throw std::invalid_argument("amplitudes are not normalized: sum |c_j|^2 = " + std::to_string(sum));
  }
  return make_channel_state(probs);
}

void DiffusionSpec::validate() const {
  if (!(intensity > 0) || !std::isfinite(intensity)) {
    throw std::invalid_argument("DiffusionSpec.intensity must be > 0");
  }
  if (num_sources != 1 && num_sources != 2) {
    throw std::invalid_argument("DiffusionSpec.num_sources must be 1 or 2");
  }
  if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("DiffusionSpec.dt must be > 0");
}

std::vector<double> DiffusionSpec::source_intensities() const {
  return std::vector<double>(static_cast<std::size_t>(num_sources), intensity);
}

NoiseSources NoiseSources::from(const DiffusionSpec& spec) {
  spec.validate();
  return NoiseSources{spec.source_intensities(), spec.dt};
}

void NoiseSources::validate() const {
  if (intensities.empty()) throw std::invalid_argument("NoiseSources needs at least one source");
  for (const double l : intensities) {
    if (!(l >= 0) || !std::isfinite(l)) throw std::invalid_argument("source intensity must be >= 0");
  }
  if (!(total_intensity() > 0)) throw std::invalid_argument("at least one source intensity must be > 0");
  if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("time step must be > 0");
}

double NoiseSources::total_intensity() const {
  return std::accumulate(intensities.begin(), intensities.end(), 0.0);
}

}  // namespace pearle
