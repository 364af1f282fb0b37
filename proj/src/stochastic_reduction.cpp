#include "pearle/stochastic_reduction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "parallel.hpp"
#include "pearle/csv.hpp"

namespace pearle {

Eigen::MatrixXd correlation_matrix(const ChannelState& p, double intensity) {
  const Vector& probs = p.probs();
  Eigen::MatrixXd a = probs * probs.transpose();
  a *= -intensity;
  a.diagonal() += intensity * probs;
  return a;
}

Eigen::MatrixXd correlation_matrix(const ChannelState& p, const DiffusionSpec& spec) {
  spec.validate();
  return correlation_matrix(p, spec.intensity);
}

NoiseStreams::NoiseStreams(std::uint64_t trajectory_seed, std::size_t num_sources) {
  streams_.reserve(num_sources);
  for (std::size_t s = 0; s < num_sources; ++s) streams_.emplace_back(derive_seed(trajectory_seed, s));
}

PearleStepper::PearleStepper(NoiseSources sources, StepPath path)
    : sources_(std::move(sources)), path_(path) {
  sources_.validate();
  scales_.reserve(sources_.intensities.size());
  for (const double l : sources_.intensities) scales_.push_back(std::sqrt(2.0 * l * sources_.dt));
}

std::optional<Index> PearleStepper::step(Vector& p, NoiseStreams& streams) {
  if (streams.size() < scales_.size()) throw std::invalid_argument("fewer noise streams than sources");
  const bool two = p.size() == 2;
  if (path_ == StepPath::two_channel && !two) {
    throw std::invalid_argument("two-channel kernel requires exactly two channels");
  }
  const auto absorbed = (two && path_ != StepPath::general) ? step_two_channel(p, streams)
                                                            : step_general(p, streams);
  if (const double defect = std::abs(p.sum() - 1.0); !(defect <= tolerance::kSimplexSum)) {
    throw InvariantViolation("ChannelState.normalization", defect);
  }
  return absorbed;
}

std::optional<Index> PearleStepper::step_two_channel(Vector& p, NoiseStreams& streams) {
  double a = p[0];
  double b = p[1];
  const double root = std::sqrt(a * b);
  double d = 0.0;
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    if (scales_[s] != 0.0) d += scales_[s] * root * streams[s].normal();
  }
  a += d;
  b -= d;
  if (a <= 0.0) {
    p[0] = 0.0;
    p[1] = 1.0;
    return 1;
  }
  if (b <= 0.0) {
    p[0] = 1.0;
    p[1] = 0.0;
    return 0;
  }
  const double inv = 1.0 / (a + b);
  p[0] = a * inv;
  p[1] = b * inv;
  return std::nullopt;
}

std::optional<Index> PearleStepper::step_general(Vector& p, NoiseStreams& streams) {
  const Index k = p.size();
  live_.clear();
  for (Index j = 0; j < k; ++j) {
    if (p[j] != 0.0) live_.push_back(j);
  }
  if (live_.size() == 1) {
    p[live_.front()] = 1.0;
    return live_.front();
  }

  sqrt_p_.resize(k);
  increment_.setZero(k);
  draws_.resize(k);
  for (const Index j : live_) sqrt_p_[j] = std::sqrt(p[j]);

  for (std::size_t s = 0; s < scales_.size(); ++s) {
    if (scales_[s] == 0.0) continue;
    Rng& rng = streams[s];
    double projection = 0.0;
    for (const Index j : live_) {
      draws_[j] = rng.normal();
      projection += sqrt_p_[j] * draws_[j];
    }
    for (const Index j : live_) increment_[j] += scales_[s] * (sqrt_p_[j] * draws_[j] - p[j] * projection);
  }

  // Remove the rounding residue of sum(increment) on the live channels.
  double residue = 0.0;
  for (const Index j : live_) residue += increment_[j];
  residue /= static_cast<double>(live_.size());

  double sum = 0.0;
  for (const Index j : live_) {
    const double v = p[j] + (increment_[j] - residue);
    p[j] = v > 0.0 ? v : 0.0;
    sum += p[j];
  }

  std::optional<Index> survivor;
  Index survivors = 0;
  for (const Index j : live_) {
    p[j] /= sum;
    if (p[j] != 0.0) {
      ++survivors;
      survivor = j;
    }
  }
  if (survivors == 1) {
    p[*survivor] = 1.0;
    return survivor;
  }
  for (const Index j : live_) {
    if (p[j] >= 1.0) {
      p.setZero();
      p[j] = 1.0;
      return j;
    }
  }
  return std::nullopt;
}

void PearleStepper::source_increment(const Vector& p, double intensity, Rng& rng, Vector& out) {
  const double scale = std::sqrt(2.0 * intensity * sources_.dt);
  out.setZero(p.size());
  if (scale == 0.0) return;
  double projection = 0.0;
  Vector draws = Vector::Zero(p.size());
  for (Index j = 0; j < p.size(); ++j) {
    if (p[j] == 0.0) continue;
    draws[j] = rng.normal();
    projection += std::sqrt(p[j]) * draws[j];
  }
  for (Index j = 0; j < p.size(); ++j) {
    if (p[j] != 0.0) out[j] = scale * (std::sqrt(p[j]) * draws[j] - p[j] * projection);
  }
}

ChannelState pearle_step(const ChannelState& p, const DiffusionSpec& spec, NoiseStreams& streams,
                         StepPath path) {
  PearleStepper stepper(NoiseSources::from(spec), path);
  if (p.absorbed()) return p.at_time(p.time() + spec.dt);
  Vector probs = p.probs();
  stepper.step(probs, streams);
  return make_channel_state(probs, p.time() + spec.dt);
}

Trajectory::Trajectory(const ChannelState& start, NoiseSources sources, std::uint64_t seed, StepPath path)
    : stepper_(std::move(sources), path),
      streams_(seed, stepper_.sources().intensities.size()),
      probs_(start.probs()),
      outcome_(start.absorbed()),
      seed_(seed),
      path_(path),
      start_time_(start.time()) {}

void Trajectory::set_sources(NoiseSources sources) {
  const double t = time();
  const auto num_streams = streams_.size();
  PearleStepper next(std::move(sources), path_);
  if (next.sources().intensities.size() > num_streams) {
    throw std::invalid_argument("cannot add noise sources to a running trajectory");
  }
  stepper_ = std::move(next);
  start_time_ = t;
  base_steps_ = steps_;
}

long Trajectory::advance(long max_steps, long record_stride, std::vector<ChannelState>* record) {
  const auto snapshot = [&] {
    if (record) record->push_back(state());
  };
  const bool recording = record != nullptr && record_stride > 0;
  if (recording) snapshot();

  long taken = 0;
  while (!outcome_ && taken < max_steps) {
    try {
      outcome_ = stepper_.step(probs_, streams_);
    } catch (const InvariantViolation& e) {
      throw InvariantViolation(e.invariant(), e.magnitude(), steps_ + 1,
                               "trajectory seed " + std::to_string(seed_));
    }
    ++taken;
    ++steps_;
    if (recording && taken % record_stride == 0 && !outcome_ && taken < max_steps) snapshot();
  }
  if (recording && (taken > 0)) snapshot();
  return taken;
}

ChannelState Trajectory::state() const {
  return make_channel_state(probs_, time());
}

TrajectoryRecord run_trajectory(const ChannelState& p0, const NoiseSources& sources, long max_steps,
                                std::uint64_t seed, const TrajectoryOptions& options) {
  if (max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
  Trajectory traj(p0, sources, seed, options.path);
  TrajectoryRecord rec;
  rec.seed = seed;
  if (options.record_stride > 0) {
    rec.path.emplace();
    traj.advance(max_steps, options.record_stride, &*rec.path);
  } else {
    traj.advance(max_steps);
  }
  rec.outcome = traj.outcome();
  rec.absorption_time = traj.time();
  rec.steps = traj.steps();
  return rec;
}

TrajectoryRecord run_trajectory(const ChannelState& p0, const DiffusionSpec& spec, long max_steps,
                                std::uint64_t seed, const TrajectoryOptions& options) {
  return run_trajectory(p0, NoiseSources::from(spec), max_steps, seed, options);
}

BornStatistics born_statistics(const ChannelState& p0, const NoiseSources& sources, long num_runs,
                               std::uint64_t seed, const BatchOptions& options) {
  if (num_runs < 1) throw std::invalid_argument("num_runs must be positive");
  if (options.max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
  sources.validate();

  std::vector<TrajectoryRecord> records(static_cast<std::size_t>(num_runs));
  detail::parallel_chunks(num_runs, options.threads, [&](long begin, long end) {
    for (long i = begin; i < end; ++i) {
      const std::uint64_t s = trajectory_seed(seed, i);
      Trajectory traj(p0, sources, s, options.path);
      traj.advance(options.max_steps);
      auto& rec = records[static_cast<std::size_t>(i)];
      rec.seed = s;
      rec.outcome = traj.outcome();
      rec.absorption_time = traj.time();
      rec.steps = traj.steps();
    }
  });

  BornStatistics stats;
  const Index k = p0.size();
  stats.expected = p0.probs();
  stats.counts.assign(static_cast<std::size_t>(k), 0);
  stats.num_runs = num_runs;
  double time_sum = 0.0;
  for (const auto& rec : records) {
    if (rec.outcome) {
      ++stats.counts[static_cast<std::size_t>(*rec.outcome)];
      time_sum += rec.absorption_time - p0.time();
    } else {
      ++stats.unabsorbed;
    }
  }
  const long absorbed = num_runs - stats.unabsorbed;
  stats.mean_absorption_time = absorbed > 0 ? time_sum / static_cast<double>(absorbed) : 0.0;
  stats.frequency.resize(k);
  stats.standard_error.resize(k);
  const auto n = static_cast<double>(num_runs);
  for (Index j = 0; j < k; ++j) {
    const double f = static_cast<double>(stats.counts[static_cast<std::size_t>(j)]) / n;
    stats.frequency[j] = f;
    stats.standard_error[j] = std::sqrt(f * (1.0 - f) / n);
  }
  if (options.keep_records) stats.records = std::move(records);
  return stats;
}

BornStatistics born_statistics(const ChannelState& p0, const DiffusionSpec& spec, long num_runs,
                               std::uint64_t seed, const BatchOptions& options) {
  return born_statistics(p0, NoiseSources::from(spec), num_runs, seed, options);
}

EnsembleMoments ensemble_moments(const ChannelState& p0, const DiffusionSpec& spec, long num_runs,
                                 std::vector<long> checkpoints, std::uint64_t seed,
                                 const BatchOptions& options) {
  if (num_runs < 2) throw std::invalid_argument("num_runs must be at least 2");
  std::sort(checkpoints.begin(), checkpoints.end());
  if (checkpoints.empty() || checkpoints.front() < 0) {
    throw std::invalid_argument("checkpoints must be non-empty and non-negative");
  }
  const auto sources = NoiseSources::from(spec);
  const Index k = p0.size();
  const auto c = static_cast<Index>(checkpoints.size());

  // values(j, r * c + m): p_j of run r at checkpoint m.
  Eigen::MatrixXd values(k, num_runs * c);
  detail::parallel_chunks(num_runs, options.threads, [&](long begin, long end) {
    for (long r = begin; r < end; ++r) {
      Trajectory traj(p0, sources, trajectory_seed(seed, r), options.path);
      for (Index m = 0; m < c; ++m) {
        traj.advance(checkpoints[static_cast<std::size_t>(m)] - traj.steps());
        values.col(r * c + m) = traj.probs();
      }
    }
  });

  EnsembleMoments out;
  out.checkpoints = std::move(checkpoints);
  out.mean.setZero(k, c);
  out.standard_error.setZero(k, c);
  const auto n = static_cast<double>(num_runs);
  for (Index m = 0; m < c; ++m) {
    Vector sum = Vector::Zero(k);
    for (long r = 0; r < num_runs; ++r) sum += values.col(r * c + m);
    const Vector mean = sum / n;
    Vector ss = Vector::Zero(k);
    for (long r = 0; r < num_runs; ++r) ss += (values.col(r * c + m) - mean).cwiseAbs2();
    out.mean.col(m) = mean;
    out.standard_error.col(m) = (ss / (n - 1.0) / n).cwiseSqrt();
  }
  return out;
}

void write_trajectories_csv(std::ostream& os, const std::vector<TrajectoryRecord>& records) {
  CsvWriter csv(os, {"seed", "outcome", "absorption_time", "steps"});
  for (const auto& r : records) {
    csv.row(r.seed, r.outcome ? static_cast<long>(*r.outcome) : -1L, r.absorption_time, r.steps);
  }
}

void write_born_summary_csv(std::ostream& os, const BornStatistics& stats) {
  CsvWriter csv(os, {"channel", "frequency", "stderr", "expected"});
  for (Index j = 0; j < stats.frequency.size(); ++j) {
    csv.row(static_cast<long>(j), stats.frequency[j], stats.standard_error[j], stats.expected[j]);
  }
}

}  // namespace pearle
