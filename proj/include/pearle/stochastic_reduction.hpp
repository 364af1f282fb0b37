#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "pearle/rng.hpp"
#include "pearle/types.hpp"

namespace pearle {

/// Which increment kernel pearle_step uses. `automatic` takes the closed-form
/// two-channel kernel when the state has exactly two components.
enum class StepPath { automatic, general, two_channel };

/// Correlation matrix A_jk = intensity * (delta_jk p_j - p_j p_k) of one source.
/// Symmetric, zero row sums, PSD on the simplex, and row/column j vanishes for a
/// dead channel j.
Eigen::MatrixXd correlation_matrix(const ChannelState& p, double intensity);
Eigen::MatrixXd correlation_matrix(const ChannelState& p, const DiffusionSpec& spec);

/// Independent random streams of one trajectory, one per noise source.
class NoiseStreams {
 public:
  NoiseStreams(std::uint64_t trajectory_seed, std::size_t num_sources);

  Rng& operator[](std::size_t source) { return streams_[source]; }
  std::size_t size() const noexcept { return streams_.size(); }

 private:
  std::vector<Rng> streams_;
};

/// In-place Euler-Maruyama kernel for the zero-drift process on the simplex.
///
/// Each source s draws g ~ N(0, I) over the live channels and contributes
///   dp_j = sqrt(2 lambda_s dt) * (sqrt(p_j) g_j - p_j sum_k sqrt(p_k) g_k),
/// whose covariance is 2 lambda_s dt (diag p - p p^T). The summed increment is
/// projected onto the zero-sum hyperplane of the live channels, components that
/// end at or below zero become exact zeros, and the live part is renormalized.
class PearleStepper {
 public:
  explicit PearleStepper(NoiseSources sources, StepPath path = StepPath::automatic);

  /// Advances p by one step. Returns the absorbing channel if p reached a vertex.
  /// p must be a valid, unabsorbed simplex point.
  std::optional<Index> step(Vector& p, NoiseStreams& streams);

  /// Raw increment of one source at p (no projection or clamping).
  void source_increment(const Vector& p, double intensity, Rng& rng, Vector& out);

  const NoiseSources& sources() const noexcept { return sources_; }
  double dt() const noexcept { return sources_.dt; }

 private:
  std::optional<Index> step_two_channel(Vector& p, NoiseStreams& streams);
  std::optional<Index> step_general(Vector& p, NoiseStreams& streams);

  NoiseSources sources_;
  StepPath path_;
  std::vector<double> scales_;  // sqrt(2 lambda_s dt)
  std::vector<Index> live_;
  Vector sqrt_p_, increment_, draws_;
};

/// One step of the process from an immutable state. Absorbed states are
/// returned unchanged.
ChannelState pearle_step(const ChannelState& p, const DiffusionSpec& spec, NoiseStreams& streams,
                         StepPath path = StepPath::automatic);

/// Resumable single trajectory. The process is Markov in p, so a trajectory may
/// be paused and continued, optionally with new source intensities.
class Trajectory {
 public:
  Trajectory(const ChannelState& start, NoiseSources sources, std::uint64_t seed,
             StepPath path = StepPath::automatic);

  /// Runs until absorption or max_steps further steps. When record is non-null,
  /// appends the state every record_stride steps and at the end.
  long advance(long max_steps, long record_stride = 0, std::vector<ChannelState>* record = nullptr);

  void set_sources(NoiseSources sources);

  ChannelState state() const;
  const Vector& probs() const noexcept { return probs_; }
  std::optional<Index> outcome() const noexcept { return outcome_; }
  bool absorbed() const noexcept { return outcome_.has_value(); }
  long steps() const noexcept { return steps_; }
  double time() const noexcept {
    return start_time_ + static_cast<double>(steps_ - base_steps_) * stepper_.dt();
  }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  PearleStepper stepper_;
  NoiseStreams streams_;
  Vector probs_;
  std::optional<Index> outcome_;
  std::uint64_t seed_;
  StepPath path_;
  double start_time_;
  long steps_ = 0;
  long base_steps_ = 0;  // step count when start_time_ was last set
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::optional<std::vector<ChannelState>> path;
  /// Unset when the trajectory was not absorbed within max_steps.
  std::optional<Index> outcome;
  /// Absorption time, or the time reached when unabsorbed.
  double absorption_time = 0.0;
  long steps = 0;

  bool absorbed() const noexcept { return outcome.has_value(); }
};

struct TrajectoryOptions {
  long record_stride = 0;  // 0: no path
  StepPath path = StepPath::automatic;
};

TrajectoryRecord run_trajectory(const ChannelState& p0, const DiffusionSpec& spec, long max_steps,
                                std::uint64_t seed, const TrajectoryOptions& options = {});
TrajectoryRecord run_trajectory(const ChannelState& p0, const NoiseSources& sources, long max_steps,
                                std::uint64_t seed, const TrajectoryOptions& options = {});

/// Seed of trajectory `index` in a batch with the given master seed.
inline std::uint64_t trajectory_seed(std::uint64_t master, long index) {
  return derive_seed(master, static_cast<std::uint64_t>(index));
}

struct BatchOptions {
  long max_steps = 1'000'000;
  unsigned threads = 0;  // 0: hardware concurrency
  StepPath path = StepPath::automatic;
  bool keep_records = false;
};

struct BornStatistics {
  Vector expected;        // p0
  Vector frequency;       // absorbed on j / num_runs
  Vector standard_error;  // sqrt(f (1 - f) / num_runs)
  std::vector<long> counts;
  long num_runs = 0;
  long unabsorbed = 0;
  double mean_absorption_time = 0.0;  // over absorbed runs
  std::vector<TrajectoryRecord> records;
};

/// Absorption frequencies of num_runs independent trajectories from p0.
/// Trajectory i uses trajectory_seed(seed, i); results do not depend on the
/// number of threads.
BornStatistics born_statistics(const ChannelState& p0, const DiffusionSpec& spec, long num_runs,
                               std::uint64_t seed, const BatchOptions& options = {});
BornStatistics born_statistics(const ChannelState& p0, const NoiseSources& sources, long num_runs,
                               std::uint64_t seed, const BatchOptions& options = {});

/// Ensemble mean and standard error of p after each checkpoint step count
/// (absorbed trajectories keep their vertex value). Columns follow checkpoints.
struct EnsembleMoments {
  std::vector<long> checkpoints;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd standard_error;
};

EnsembleMoments ensemble_moments(const ChannelState& p0, const DiffusionSpec& spec, long num_runs,
                                 std::vector<long> checkpoints, std::uint64_t seed,
                                 const BatchOptions& options = {});

/// Columns: seed, outcome, absorption_time, steps. Unabsorbed runs have outcome -1.
void write_trajectories_csv(std::ostream& os, const std::vector<TrajectoryRecord>& records);

/// Columns: channel, frequency, stderr, expected.
void write_born_summary_csv(std::ostream& os, const BornStatistics& stats);

}  // namespace pearle
