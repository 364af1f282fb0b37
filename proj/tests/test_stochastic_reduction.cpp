#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pearle/stochastic_reduction.hpp"

namespace pearle {
namespace {

// Random point on the simplex with some exact zeros.
Vector random_simplex(Index k, std::mt19937_64& gen, double zero_chance = 0.25) {
  std::exponential_distribution<double> e;
  std::uniform_real_distribution<double> u;
  Vector p(k);
  for (Index j = 0; j < k; ++j) p[j] = u(gen) < zero_chance ? 0.0 : e(gen);
  if (p.sum() == 0.0) p[static_cast<Index>(gen() % static_cast<unsigned long>(k))] = 1.0;
  return p / p.sum();
}

DiffusionSpec spec_of(double lambda, int sources, double dt) {
  DiffusionSpec s;
  s.intensity = lambda;
  s.num_sources = sources;
  s.dt = dt;
  return s;
}

TEST(CorrelationMatrix, Examples) {
  EXPECT_TRUE(correlation_matrix(make_channel_state({1.0, 0.0}), 1.0).isZero(0.0));
  Eigen::Matrix2d expected;
  expected << 0.25, -0.25, -0.25, 0.25;
  EXPECT_TRUE(correlation_matrix(make_channel_state({0.5, 0.5}), 1.0).isApprox(expected, 1e-15));
  EXPECT_THROW(correlation_matrix(make_channel_state({0.5, 0.5}), spec_of(-1, 1, 1e-4)), std::invalid_argument);
}

TEST(CorrelationMatrix, Properties) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 2000; ++trial) {
    const Index k = 2 + static_cast<Index>(gen() % 7);
    const auto p = make_channel_state(random_simplex(k, gen));
    const double lambda = 0.1 + 5.0 * std::uniform_real_distribution<double>()(gen);
    const auto a = correlation_matrix(p, lambda);
    EXPECT_TRUE(a.isApprox(a.transpose(), 0.0));
    EXPECT_LT(a.rowwise().sum().cwiseAbs().maxCoeff(), 1e-15 * lambda * 4);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-14 * lambda);
    for (Index j = 0; j < k; ++j) {
      if (p.is_dead(j)) {
        EXPECT_TRUE(a.row(j).isZero(0.0));
        EXPECT_TRUE(a.col(j).isZero(0.0));
      }
    }
  }
}

struct StepSample {
  double mean, variance, standard_error;
};

StepSample single_step_sample(const DiffusionSpec& spec, StepPath path, int n) {
  const auto p0 = make_channel_state({0.5, 0.5});
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    NoiseStreams streams(trajectory_seed(77, i), static_cast<std::size_t>(spec.num_sources));
    const double d = pearle_step(p0, spec, streams, path).prob(0) - 0.5;
    s1 += d;
    s2 += d * d;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  return {mean, var, std::sqrt(var / n)};
}

TEST(PearleStep, SingleStepMomentsOneSource) {
  for (const auto path : {StepPath::two_channel, StepPath::general}) {
    const auto s = single_step_sample(spec_of(1.0, 1, 1e-4), path, 100000);
    EXPECT_LT(std::abs(s.mean), 4 * s.standard_error);
    EXPECT_NEAR(s.variance, 2 * 0.25 * 1e-4, 0.05 * 2 * 0.25 * 1e-4);
  }
}

TEST(PearleStep, SingleStepMomentsTwoSources) {
  for (const auto path : {StepPath::two_channel, StepPath::general}) {
    const auto s = single_step_sample(spec_of(1.0, 2, 1e-4), path, 100000);
    EXPECT_LT(std::abs(s.mean), 4 * s.standard_error);
    EXPECT_NEAR(s.variance, 2 * 2 * 0.25 * 1e-4, 0.05 * 2 * 2 * 0.25 * 1e-4);
  }
}

TEST(PearleStep, GeneralCovarianceThreeChannels) {
  const auto p0 = make_channel_state({0.2, 0.3, 0.5});
  const auto spec = spec_of(1.5, 1, 1e-4);
  const Eigen::MatrixXd target = 2.0 * spec.dt * correlation_matrix(p0, spec);
  const int n = 200000;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n; ++i) {
    NoiseStreams streams(trajectory_seed(5, i), 1);
    const Vector d = pearle_step(p0, spec, streams).probs() - p0.probs();
    cov += d * d.transpose();
  }
  cov /= n;
  const double scale = target.cwiseAbs().maxCoeff();
  EXPECT_LT((cov - target).cwiseAbs().maxCoeff(), 0.05 * scale) << cov << "\n\n" << target;
}

TEST(PearleStep, AbsorbedStateUnchanged) {
  NoiseStreams streams(1, 1);
  const auto p = make_channel_state({1.0, 0.0});
  const auto q = pearle_step(p, DiffusionSpec{}, streams);
  EXPECT_EQ(q.probs(), p.probs());
  EXPECT_EQ(q.absorbed(), std::optional<Index>(0));
}

TEST(PearleStep, TwoChannelPathNeedsTwoChannels) {
  NoiseStreams streams(1, 1);
  EXPECT_THROW(pearle_step(make_channel_state({0.2, 0.3, 0.5}), DiffusionSpec{}, streams, StepPath::two_channel),
               std::invalid_argument);
}

TEST(PearleStep, DeadThirdChannelStaysZero) {
  const auto p0 = make_channel_state({0.3, 0.7, 0.0});
  for (int run = 0; run < 200; ++run) {
    Trajectory traj(p0, NoiseSources::from(spec_of(1.0, 1, 1e-3)), trajectory_seed(8, run));
    while (!traj.absorbed()) {
      traj.advance(1);
      ASSERT_EQ(traj.probs()[2], 0.0);
    }
    EXPECT_NE(*traj.outcome(), 2);
  }
}

TEST(PearleStep, DeadChannelsNeverRevive) {
  std::mt19937_64 gen(13);
  for (int run = 0; run < 300; ++run) {
    const Index k = 3 + static_cast<Index>(gen() % 6);
    const auto p0 = make_channel_state(random_simplex(k, gen, 0.3));
    const int sources = 1 + static_cast<int>(gen() % 2);
    Trajectory traj(p0, NoiseSources::from(spec_of(0.5 + gen() % 4, sources, 1e-3)), gen());
    std::vector<bool> dead(static_cast<std::size_t>(k));
    while (!traj.absorbed() && traj.steps() < 100000) {
      for (Index j = 0; j < k; ++j) {
        if (dead[static_cast<std::size_t>(j)]) ASSERT_EQ(traj.probs()[j], 0.0) << "channel " << j;
        dead[static_cast<std::size_t>(j)] = traj.probs()[j] == 0.0;
      }
      traj.advance(1);
    }
  }
}

TEST(PearleStep, SumStaysOneOverMillionSteps) {
  const auto sources = NoiseSources::from(spec_of(1.0, 2, 1e-4));
  PearleStepper stepper(sources, StepPath::general);
  std::mt19937_64 gen(21);
  Vector p = random_simplex(5, gen, 0.0);
  NoiseStreams streams(gen(), 2);
  double worst = 0;
  for (long n = 0; n < 1000000; ++n) {
    if (stepper.step(p, streams)) p = random_simplex(5, gen, 0.0);
    worst = std::max(worst, std::abs(p.sum() - 1.0));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(PearleStep, SourceIncrementSumsToZero) {
  PearleStepper stepper(NoiseSources::from(DiffusionSpec{}));
  std::mt19937_64 gen(4);
  Rng rng(4);
  Vector out;
  for (int i = 0; i < 1000; ++i) {
    const Vector p = random_simplex(6, gen);
    stepper.source_increment(p, 1.0, rng, out);
    EXPECT_LT(std::abs(out.sum()), 1e-15);
    for (Index j = 0; j < 6; ++j)
      if (p[j] == 0.0) EXPECT_EQ(out[j], 0.0);
  }
}

TEST(RunTrajectory, VertexStart) {
  const auto rec = run_trajectory(make_channel_state({1.0, 0.0}), DiffusionSpec{}, 10, 3);
  EXPECT_EQ(rec.outcome, std::optional<Index>(0));
  EXPECT_EQ(rec.absorption_time, 0.0);
  EXPECT_EQ(rec.steps, 0);
}

TEST(RunTrajectory, IdenticalSeedsBitwise) {
  const auto p0 = make_channel_state({0.2, 0.3, 0.5});
  const auto spec = spec_of(1.0, 2, 1e-3);
  const auto a = run_trajectory(p0, spec, 1000000, 99, {.record_stride = 1});
  const auto b = run_trajectory(p0, spec, 1000000, 99, {.record_stride = 1});
  ASSERT_TRUE(a.path && b.path);
  ASSERT_EQ(a.path->size(), b.path->size());
  for (std::size_t i = 0; i < a.path->size(); ++i) {
    EXPECT_EQ((*a.path)[i].probs(), (*b.path)[i].probs());
  }
  EXPECT_EQ(a.outcome, b.outcome);
  EXPECT_EQ(a.absorption_time, b.absorption_time);
  EXPECT_EQ(a.steps, b.steps);
  const auto c = run_trajectory(p0, spec, 1000000, 100);
  EXPECT_TRUE(c.steps != a.steps || c.outcome != a.outcome);
}

TEST(RunTrajectory, MaxStepsExhaustionIsData) {
  const auto rec = run_trajectory(make_channel_state({0.5, 0.5}), spec_of(1.0, 1, 1e-6), 10, 1);
  EXPECT_FALSE(rec.absorbed());
  EXPECT_EQ(rec.steps, 10);
  EXPECT_NEAR(rec.absorption_time, 1e-5, 1e-18);
  EXPECT_THROW(run_trajectory(make_channel_state({0.5, 0.5}), DiffusionSpec{}, 0, 1), std::invalid_argument);
}

TEST(Trajectory, PauseAndResumeMatchesUninterrupted) {
  const auto p0 = make_channel_state({0.4, 0.6});
  const auto sources = NoiseSources::from(spec_of(1.0, 2, 1e-4));
  Trajectory whole(p0, sources, 31);
  whole.advance(2500);
  Trajectory pieces(p0, sources, 31);
  pieces.advance(1000);
  const auto mid = pieces.state();
  EXPECT_NEAR(mid.time(), 0.1, 1e-15);
  pieces.set_sources(sources);
  pieces.advance(1500);
  EXPECT_EQ(whole.probs(), pieces.probs());
  EXPECT_EQ(whole.steps(), pieces.steps());
  EXPECT_NEAR(whole.time(), pieces.time(), 1e-15);
}

TEST(Trajectory, ResumeWithNewSources) {
  auto sources = NoiseSources::from(spec_of(1.0, 2, 1e-4));
  Trajectory traj(make_channel_state({0.5, 0.5}), sources, 3);
  traj.advance(100);
  sources.intensities = {0.0, 1.0};
  sources.dt = 2e-4;
  traj.set_sources(sources);
  traj.advance(100);
  EXPECT_NEAR(traj.time(), 100 * 1e-4 + 100 * 2e-4, 1e-15);
  sources.intensities = {1.0, 1.0, 1.0};
  EXPECT_THROW(traj.set_sources(sources), std::invalid_argument);
}

TEST(BornStatistics, VertexIsExact) {
  const auto s = born_statistics(make_channel_state({1.0, 0.0}), DiffusionSpec{}, 100, 1);
  EXPECT_EQ(s.frequency[0], 1.0);
  EXPECT_EQ(s.frequency[1], 0.0);
  EXPECT_EQ(s.unabsorbed, 0);
  EXPECT_THROW(born_statistics(make_channel_state({1.0, 0.0}), DiffusionSpec{}, 0, 1), std::invalid_argument);
}

TEST(BornStatistics, BinomialExample) {
  const auto s = born_statistics(make_channel_state({0.36, 0.64}), spec_of(1.0, 1, 1e-3), 100000, 2024);
  EXPECT_EQ(s.unabsorbed, 0);
  EXPECT_LE(std::abs(s.frequency[0] - 0.36), 3 * std::sqrt(0.36 * 0.64 / 1e5));
  EXPECT_NEAR(s.standard_error[0], std::sqrt(s.frequency[0] * (1 - s.frequency[0]) / 1e5), 1e-15);
  EXPECT_EQ(s.counts[0] + s.counts[1], 100000);
}

TEST(BornStatistics, SymmetricThreeChannels) {
  const double third = 1.0 / 3.0;
  const auto s = born_statistics(make_channel_state({third, third, third}), spec_of(1.0, 1, 1e-3), 30000, 7);
  EXPECT_EQ(s.unabsorbed, 0);
  for (Index j = 0; j < 3; ++j) {
    EXPECT_LE(std::abs(s.frequency[j] - third), 3 * std::sqrt(third * (1 - third) / 30000)) << j;
  }
}

TEST(BornStatistics, AbsorptionCompleteness) {
  BatchOptions options;
  options.max_steps = 1000000;
  const auto s = born_statistics(make_channel_state({0.5, 0.5}), spec_of(1.0, 1, 1e-4), 1000, 11, options);
  EXPECT_LT(static_cast<double>(s.unabsorbed) / 1000.0, 0.01);
  // mean absorption time -(p ln p + q ln q) / lambda = ln 2 for one source
  EXPECT_NEAR(s.mean_absorption_time, std::log(2.0), 0.1);
}

TEST(BornStatistics, FastAndGeneralPathsAgree) {
  const auto p0 = make_channel_state({0.3, 0.7});
  const auto spec = spec_of(1.0, 1, 1e-3);
  BatchOptions fast, general;
  fast.path = StepPath::two_channel;
  general.path = StepPath::general;
  const auto a = born_statistics(p0, spec, 10000, 100, fast);
  const auto b = born_statistics(p0, spec, 10000, 200, general);
  const double pooled = (a.frequency[0] + b.frequency[0]) / 2;
  const double se = std::sqrt(2 * pooled * (1 - pooled) / 10000);
  EXPECT_LT(std::abs(a.frequency[0] - b.frequency[0]), 3 * se);
}

TEST(BornStatistics, IndependentOfThreadCount) {
  const auto p0 = make_channel_state({0.25, 0.25, 0.5});
  BatchOptions one, four;
  one.threads = 1;
  four.threads = 4;
  one.keep_records = four.keep_records = true;
  const auto a = born_statistics(p0, spec_of(1.0, 1, 1e-3), 500, 9, one);
  const auto b = born_statistics(p0, spec_of(1.0, 1, 1e-3), 500, 9, four);
  EXPECT_EQ(a.counts, b.counts);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].seed, b.records[i].seed);
    EXPECT_EQ(a.records[i].steps, b.records[i].steps);
    EXPECT_EQ(a.records[i].absorption_time, b.records[i].absorption_time);
  }
}

TEST(EnsembleMoments, MeanIsMartingale) {
  std::mt19937_64 gen(71);
  for (int trial = 0; trial < 3; ++trial) {
    const auto p0 = make_channel_state(random_simplex(2 + trial, gen, 0.0));
    const auto m = ensemble_moments(p0, spec_of(1.0, 1, 1e-4), 10000, {10, 500, 3000}, gen());
    for (Index c = 0; c < m.mean.cols(); ++c) {
      for (Index j = 0; j < p0.size(); ++j) {
        EXPECT_LE(std::abs(m.mean(j, c) - p0.prob(j)), 4 * m.standard_error(j, c))
            << "channel " << j << " checkpoint " << m.checkpoints[static_cast<std::size_t>(c)];
      }
    }
  }
}

TEST(Csv, TrajectoryAndSummaryColumns) {
  BatchOptions options;
  options.keep_records = true;
  options.max_steps = 5;
  const auto s = born_statistics(make_channel_state({0.5, 0.5}), spec_of(1.0, 1, 1e-6), 100, 1, options);
  std::ostringstream traj, summary;
  write_trajectories_csv(traj, s.records);
  write_born_summary_csv(summary, s);
  EXPECT_EQ(traj.str().rfind("seed,outcome,absorption_time,steps\n", 0), 0u);
  EXPECT_NE(traj.str().find(",-1,"), std::string::npos);
  EXPECT_EQ(summary.str(), "channel,frequency,stderr,expected\n0,0,0,0.5\n1,0,0,0.5\n");
}

}  // namespace
}  // namespace pearle
