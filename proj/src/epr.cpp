#include "pearle/epr.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pearle/csv.hpp"

namespace pearle {

void EprConfig::validate() const {
  const double norm = std::norm(c_hv) + std::norm(c_vh);
  if (!(std::abs(norm - 1.0) <= tolerance::kInputSum)) {
    throw std::invalid_argument("EprConfig.amplitudes: |c_hv|^2 + |c_vh|^2 = " + std::to_string(norm));
  }
  if (!(lambda_a >= 0.0) || !(lambda_b >= 0.0) || !(lambda_a + lambda_b > 0.0)) {
    throw std::invalid_argument("EprConfig.intensities must be >= 0 with a positive sum");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("EprConfig.dt must be > 0");
  if (max_steps <= 0) throw std::invalid_argument("EprConfig.max_steps must be > 0");
  if (num_runs <= 0) throw std::invalid_argument("EprConfig.num_runs must be > 0");
}

ChannelState EprConfig::initial_state() const {
  validate();
  Eigen::VectorXcd amplitudes(kJointChannels);
  amplitudes << c_hv, c_vh, 0.0, 0.0;
  return born_init(amplitudes);
}

NoiseSources EprConfig::sources() const { return NoiseSources{{lambda_a, lambda_b}, dt}; }

EprResult epr_run(const EprConfig& config, const BatchOptions& options) {
  const ChannelState p0 = config.initial_state();
  BatchOptions batch = options;
  batch.max_steps = config.max_steps;
  batch.keep_records = true;
  BornStatistics stats = born_statistics(p0, config.sources(), config.num_runs, config.seed, batch);

  for (const auto& rec : stats.records) {
    if (rec.outcome && (*rec.outcome == kHH || *rec.outcome == kVV)) {
      throw InvariantViolation("ChannelState.dead_channel_revived", 1.0, rec.steps,
                               "EPR run absorbed on forbidden channel " + std::to_string(*rec.outcome) +
                                   ", seed " + std::to_string(rec.seed));
    }
  }

  EprResult result;
  result.num_runs = stats.num_runs;
  result.unabsorbed = stats.unabsorbed;
  for (Index j = 0; j < kJointChannels; ++j) {
    result.counts[static_cast<std::size_t>(j)] = stats.counts[static_cast<std::size_t>(j)];
    result.frequency[j] = stats.frequency[j];
    result.standard_error[j] = stats.standard_error[j];
  }
  // H'V'' -> (H', V''), V'H'' -> (V', H''), H'H'' -> (H', H''), V'V'' -> (V', V'').
  result.contingency(0, 1) = result.counts[kHV];
  result.contingency(1, 0) = result.counts[kVH];
  result.contingency(0, 0) = result.counts[kHH];
  result.contingency(1, 1) = result.counts[kVV];
  if (options.keep_records) result.records = std::move(stats.records);
  return result;
}

IndependenceReport independence_check(const EprConfig& config, long num_samples) {
  if (num_samples < 2) throw std::invalid_argument("independence_check needs at least 2 samples");
  const ChannelState p0 = config.initial_state();
  const NoiseSources sources = config.sources();
  PearleStepper stepper(sources, StepPath::general);
  NoiseStreams streams(config.seed, 2);

  Eigen::Vector4d sa = Eigen::Vector4d::Zero(), sb = sa, saa = sa, sbb = sa, sab = sa;
  Vector da, db;
  for (long n = 0; n < num_samples; ++n) {
    stepper.source_increment(p0.probs(), config.lambda_a, streams[0], da);
    stepper.source_increment(p0.probs(), config.lambda_b, streams[1], db);
    for (Index j = 0; j < kJointChannels; ++j) {
      sa[j] += da[j];
      sb[j] += db[j];
      saa[j] += da[j] * da[j];
      sbb[j] += db[j] * db[j];
      sab[j] += da[j] * db[j];
    }
  }

  IndependenceReport report;
  report.num_samples = num_samples;
  const auto n = static_cast<double>(num_samples);
  for (Index j = 0; j < kJointChannels; ++j) {
    const double ma = sa[j] / n, mb = sb[j] / n;
    const double va = saa[j] / n - ma * ma;
    const double vb = sbb[j] / n - mb * mb;
    const double cov = sab[j] / n - ma * mb;
    report.variance_a[j] = va;
    report.variance_b[j] = vb;
    report.variance_sum[j] = va + vb + 2.0 * cov;
    report.correlation[j] = (va > 0.0 && vb > 0.0) ? cov / std::sqrt(va * vb) : 0.0;
  }
  return report;
}

void write_epr_csv(std::ostream& os, const EprResult& result) {
  CsvWriter csv(os, {"run", "outcome_channel", "absorption_time"});
  long run = 0;
  for (const auto& rec : result.records) {
    csv.row(run++, rec.outcome ? static_cast<long>(*rec.outcome) : -1L, rec.absorption_time);
  }
}

}  // namespace pearle
