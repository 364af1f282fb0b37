#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <vector>

#include "pearle/stochastic_reduction.hpp"

namespace pearle {

/// Joint channels of the two apparatuses, in storage order.
enum JointChannel : Index { kHV = 0, kVH = 1, kHH = 2, kVV = 3 };
inline constexpr Index kJointChannels = 4;

/// Two apparatuses measuring the pair c_hv |H'>|V''> + c_vh |V'>|H''>.
struct EprConfig {
  std::complex<double> c_hv{std::numbers::sqrt2 / 2, 0.0};
  std::complex<double> c_vh{-std::numbers::sqrt2 / 2, 0.0};
  double lambda_a = 1.0;  // first apparatus
  double lambda_b = 1.0;  // second apparatus
  double dt = 1e-4;
  long max_steps = 1'000'000;
  long num_runs = 10'000;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  /// (|c_hv|^2, |c_vh|^2, 0, 0) with the forbidden channels exactly zero.
  ChannelState initial_state() const;
  NoiseSources sources() const;
};

struct EprResult {
  std::array<long, kJointChannels> counts{};
  Eigen::Vector4d frequency = Eigen::Vector4d::Zero();
  Eigen::Vector4d standard_error = Eigen::Vector4d::Zero();
  long num_runs = 0;
  long unabsorbed = 0;
  /// Rows H', V' of the first apparatus; columns H'', V'' of the second.
  Eigen::Matrix<long, 2, 2> contingency = Eigen::Matrix<long, 2, 2>::Zero();
  std::vector<TrajectoryRecord> records;
};

/// Runs the two-source reduction on the four joint channels. A run absorbed on
/// H'H'' or V'V'' throws InvariantViolation naming the trajectory seed.
EprResult epr_run(const EprConfig& config, const BatchOptions& options = {});

struct IndependenceReport {
  long num_samples = 0;
  Eigen::Vector4d correlation = Eigen::Vector4d::Zero();  // corr(dp', dp'') per channel
  Eigen::Vector4d variance_a = Eigen::Vector4d::Zero();
  Eigen::Vector4d variance_b = Eigen::Vector4d::Zero();
  Eigen::Vector4d variance_sum = Eigen::Vector4d::Zero();
};

/// Samples the two sources' increments at the configured initial state, each
/// from its own stream, and reports their per-channel sample correlation. A
/// channel where either increment has zero variance reports correlation 0.
IndependenceReport independence_check(const EprConfig& config, long num_samples);

/// Columns: run, outcome_channel, absorption_time. Unabsorbed runs have
/// outcome_channel -1.
void write_epr_csv(std::ostream& os, const EprResult& result);

}  // namespace pearle
