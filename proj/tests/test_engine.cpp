#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "coherency/engine.hpp"
#include "coherency/error.hpp"
#include "coherency/signal_gen.hpp"
#include "oracle.hpp"

using namespace coherency;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDt = 1.0 / 60.0;

std::vector<MeasurementFrame> random_stream(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::normal_distribution<double> g(0.0, 0.02);
  std::vector<MeasurementFrame> frames(k);
  for (std::size_t j = 0; j < k; ++j) {
    frames[j].timestamp = static_cast<double>(j) * kDt;
    for (std::size_t b = 0; b < n; ++b) frames[j].values.push_back(60.0 + g(rng));
  }
  return frames;
}

// Group A swings against group B at 0.6 Hz with a little noise.
std::vector<MeasurementFrame> two_group_stream(std::size_t n, double seconds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1e-3);
  const auto k = static_cast<std::size_t>(seconds / kDt);
  std::vector<MeasurementFrame> frames(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double t = static_cast<double>(j) * kDt;
    frames[j].timestamp = t;
    const double s = 0.05 * std::sin(2.0 * std::numbers::pi * 0.6 * t);
    for (std::size_t b = 0; b < n; ++b) {
      const double w = 1.0 - 0.1 * static_cast<double>(b % (n / 2));
      frames[j].values.push_back(60.0 + (b < n / 2 ? w : -w) * s + g(rng));
    }
  }
  return frames;
}

HistoryEntry entry(double t, std::vector<std::vector<std::size_t>> m, std::vector<double> v) {
  HistoryEntry e;
  e.timestamp = t;
  e.membership = std::move(m);
  e.variances = std::move(v);
  return e;
}

std::vector<HistoryEntry> flat_history(double span, double step, double var) {
  std::vector<HistoryEntry> h;
  for (double t = 0.0; t <= span + 1e-9; t += step) h.push_back(entry(t, {{0, 1}, {2}}, {var, 0.0}));
  return h;
}

Trajectories raw_prefix(const std::vector<MeasurementFrame>& frames, std::size_t k) {
  Trajectories raw(frames.front().values.size());
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t b = 0; b < raw.size(); ++b) raw[b].push_back(frames[j].values[b]);
  }
  return raw;
}

std::vector<std::vector<std::size_t>> memberships(const ClusterSet& cs) {
  std::vector<std::vector<std::size_t>> m;
  for (const auto& c : cs.clusters) m.push_back(c.members);
  return m;
}

}  // namespace

TEST(EngineConfig, Validation) {
  EngineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.convergence.lambda_s = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.convergence.var_rel_tol = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.convergence.max_window_s = 0.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.refresh_interval = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.preprocess.median_window = 4;
  EXPECT_THROW(CoherencyEngine(3, cfg), ConfigError);
}

TEST(EngineStatus, StringRoundTrip) {
  for (auto s : {EngineStatus::warming_up, EngineStatus::running, EngineStatus::converged,
                 EngineStatus::aborted}) {
    EXPECT_EQ(engine_status_from_string(to_string(s)), s);
  }
  EXPECT_THROW(engine_status_from_string("done"), ConfigError);
}

TEST(Horizon, NewestEntryAtLeastLambdaOld) {
  const auto h = flat_history(0.6, 0.1, 1.0);
  EXPECT_EQ(horizon_start(h, 0.5), std::optional<std::size_t>(1));
  EXPECT_EQ(horizon_start(h, 0.6), std::optional<std::size_t>(0));
  EXPECT_EQ(horizon_start(h, 0.7), std::nullopt);
  EXPECT_EQ(horizon_start(std::span<const HistoryEntry>(h.data(), 1), 0.5), std::nullopt);
  EXPECT_EQ(horizon_start(std::span<const HistoryEntry>{}, 0.5), std::nullopt);
}

TEST(CheckConvergence, ConstantVarianceAndMembership) {
  ConvergenceConfig cfg;
  const auto h = flat_history(0.5, kDt, 0.02);
  EXPECT_EQ(variance_drift(h, cfg), 0.0);
  EXPECT_TRUE(check_convergence(h, cfg));
}

TEST(CheckConvergence, ShortHistoryNeverConverges) {
  ConvergenceConfig cfg;
  const auto h = flat_history(0.4, kDt, 0.02);
  EXPECT_EQ(variance_drift(h, cfg), kInf);
  EXPECT_FALSE(check_convergence(h, cfg));
}

TEST(CheckConvergence, MembershipFlipInsideHorizon) {
  ConvergenceConfig cfg;
  auto h = flat_history(0.5, 0.1, 0.02);
  h[3].membership = {{0}, {1, 2}};
  EXPECT_FALSE(check_convergence(h, cfg));
  cfg.require_stable_membership = false;
  EXPECT_TRUE(check_convergence(h, cfg));
}

TEST(CheckConvergence, ClusterCountChangeAlwaysBlocks) {
  ConvergenceConfig cfg;
  cfg.require_stable_membership = false;
  auto h = flat_history(0.5, 0.1, 0.02);
  h[2] = entry(h[2].timestamp, {{0, 1, 2}}, {0.02});
  EXPECT_EQ(variance_drift(h, cfg), kInf);
}

TEST(CheckConvergence, RelativeDriftAgainstHorizonStart) {
  ConvergenceConfig cfg;
  auto h = flat_history(0.5, 0.1, 0.02);
  h.back().variances[0] = 0.0201;
  EXPECT_NEAR(variance_drift(h, cfg), 0.005, 1e-12);
  EXPECT_TRUE(check_convergence(h, cfg));
  h.back().variances[0] = 0.021;
  EXPECT_NEAR(variance_drift(h, cfg), 0.05, 1e-12);
  EXPECT_FALSE(check_convergence(h, cfg));
}

TEST(CheckConvergence, ZeroReferenceUsesFloor) {
  ConvergenceConfig cfg;
  auto h = flat_history(0.5, 0.1, 0.02);
  h.back().variances[1] = 1e-14;
  EXPECT_NEAR(variance_drift(h, cfg), 1e-2, 1e-12);
}

TEST(CheckConvergence, MonotoneInTolerance) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.9, 1.1);
  for (int trial = 0; trial < 200; ++trial) {
    auto h = flat_history(0.6, 0.05, 0.01);
    for (auto& e : h) e.variances[0] *= u(rng);
    ConvergenceConfig tight;
    tight.var_rel_tol = 0.05;
    ConvergenceConfig loose = tight;
    loose.var_rel_tol = 0.2;
    if (check_convergence(h, tight)) EXPECT_TRUE(check_convergence(h, loose));
  }
}

TEST(Engine, WarmUpEmitsNothingForFourFrames) {
  std::mt19937_64 rng(10);
  const auto frames = random_stream(rng, 4, 6);
  CoherencyEngine eng(4, EngineConfig{});
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_FALSE(eng.step(frames[j]).has_value());
    EXPECT_EQ(eng.status(), EngineStatus::warming_up);
  }
  const auto cs = eng.step(frames[4]);
  ASSERT_TRUE(cs.has_value());
  EXPECT_EQ(cs->iteration_k, 5u);
  EXPECT_EQ(eng.status(), EngineStatus::running);
  EXPECT_EQ(eng.trace().size(), 1u);
}

TEST(Engine, QuiescentStreamIsDegenerate) {
  std::vector<MeasurementFrame> frames;
  for (std::size_t j = 0; j < 120; ++j) {
    frames.push_back(MeasurementFrame{static_cast<double>(j) * kDt, std::vector<double>(5, 60.0)});
  }
  const auto r = run(frames, EngineConfig{});
  EXPECT_TRUE(r.degenerate);
  ASSERT_EQ(r.groups.clusters.size(), 1u);
  EXPECT_EQ(r.groups.clusters[0].members, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  for (double t : r.trace.back().tau) EXPECT_DOUBLE_EQ(t, 0.2);
  EXPECT_TRUE(r.converged);
}

TEST(Engine, RejectedFramesLeaveStateUnchanged) {
  std::mt19937_64 rng(11);
  const auto frames = random_stream(rng, 3, 10);
  CoherencyEngine eng(3, EngineConfig{});
  for (std::size_t j = 0; j < 6; ++j) eng.step(frames[j]);
  const auto trace = eng.trace();
  const auto traj = eng.trajectories();
  const auto clusters = eng.clusters();

  auto wide = frames[6];
  wide.values.push_back(60.0);
  EXPECT_THROW(eng.step(wide), StreamShapeError);
  auto nan = frames[6];
  nan.values[1] = std::nan("");
  try {
    eng.step(nan);
    FAIL() << "expected InputQualityError";
  } catch (const InputQualityError& e) {
    EXPECT_EQ(e.bus(), 1u);
    EXPECT_EQ(e.sample(), 6u);
  }
  auto back = frames[6];
  back.timestamp = frames[5].timestamp;
  EXPECT_THROW(eng.step(back), InputQualityError);
  auto skew = frames[6];
  skew.timestamp += 0.3 * kDt;
  EXPECT_THROW(eng.step(skew), InputQualityError);

  EXPECT_EQ(eng.samples(), 6u);
  EXPECT_EQ(eng.trace(), trace);
  EXPECT_EQ(eng.trajectories(), traj);
  EXPECT_EQ(eng.clusters(), clusters);
  EXPECT_TRUE(eng.step(frames[6]).has_value());
  EXPECT_EQ(eng.samples(), 7u);
}

TEST(Engine, FinishedEngineRefusesFrames) {
  EngineConfig cfg;
  cfg.convergence.max_window_s = 0.6;
  cfg.convergence.lambda_s = 0.5;
  std::mt19937_64 rng(12);
  const auto frames = random_stream(rng, 4, 60);
  CoherencyEngine eng(4, cfg);
  std::size_t j = 0;
  while (!eng.finished()) eng.step(frames[j++]);
  EXPECT_THROW(eng.step(frames[j]), std::logic_error);
}

TEST(Engine, OnlineMatchesBatchAtEveryLength) {
  std::mt19937_64 rng(13);
  EngineConfig cfg;
  cfg.refresh_interval = 16;
  cfg.convergence.var_rel_tol = 1e-12;
  for (std::size_t trial = 0; trial < 4; ++trial) {
    const std::size_t n = 3 + 3 * trial;
    const auto frames = random_stream(rng, n, 200);
    CoherencyEngine eng(n, cfg);
    for (std::size_t k = 1; k <= frames.size() && !eng.finished(); ++k) {
      const auto cs = eng.step(frames[k - 1]);
      if (!cs) continue;
      const auto traj = preprocess_batch(raw_prefix(frames, k), cfg.preprocess, kDt);
      ASSERT_EQ(eng.trajectories(), traj) << "K=" << k;
      const auto q = oracle::proximity(traj);
      const auto tau = oracle::typicality_from_q(q);
      for (std::size_t b = 0; b < n; ++b) {
        ASSERT_LE(oracle::rel_err(eng.properties().tau[b], tau[b]), 1e-9) << "K=" << k;
        ASSERT_LE(oracle::rel_err(eng.properties().q[b], q[b]), 1e-9) << "K=" << k;
      }
      const auto d2 = batch_distance_state(traj);
      const auto ref = cluster_buses(tda_properties(cumulative_proximity_batch(d2)), d2);
      ASSERT_EQ(memberships(*cs), memberships(ref)) << "K=" << k;
    }
  }
}

TEST(Engine, TwoGroupStreamSplitsAndReportsCenters) {
  const auto frames = two_group_stream(8, 8.0, 1);
  EngineConfig cfg;
  const auto r = run(frames, cfg, 0.0);
  ASSERT_TRUE(r.converged);
  ASSERT_EQ(r.groups.clusters.size(), 2u);
  std::vector<std::vector<std::size_t>> groups = memberships(r.groups);
  std::sort(groups.begin(), groups.end());
  EXPECT_EQ(groups[0], (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(groups[1], (std::vector<std::size_t>{4, 5, 6, 7}));
  ASSERT_EQ(r.center_buses.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& m = r.groups.clusters[i].members;
    EXPECT_NE(std::find(m.begin(), m.end(), r.center_buses[i]), m.end());
  }
  EXPECT_GE(r.window_length_s, cfg.convergence.lambda_s);
  EXPECT_NEAR(r.window_length_s, static_cast<double>(r.samples) * kDt, 1e-12);
  ASSERT_TRUE(r.window_from_event_s.has_value());
  EXPECT_NEAR(*r.window_from_event_s, static_cast<double>(r.samples - 1) * kDt, 1e-9);
}

TEST(Engine, WindowNeverShrinksAsLambdaGrows) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto sc = generate(kundur_preset(seed));
    double prev = 0.0;
    for (double lambda : {0.25, 0.5, 0.75, 1.0}) {
      EngineConfig cfg;
      cfg.convergence.lambda_s = lambda;
      const auto r = run(sc.frames, cfg);
      EXPECT_GE(r.window_length_s, prev) << "seed " << seed << " lambda " << lambda;
      prev = r.window_length_s;
    }
  }
}

TEST(Engine, LooserToleranceNeverConvergesLater) {
  const auto sc = generate(kundur_preset(4));
  double prev = std::numeric_limits<double>::infinity();
  for (double tol : {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}) {
    EngineConfig cfg;
    cfg.convergence.var_rel_tol = tol;
    const auto r = run(sc.frames, cfg);
    EXPECT_LE(r.window_length_s, prev) << "tol " << tol;
    prev = r.window_length_s;
  }
}

TEST(Engine, AbortsAtMaxWindow) {
  std::mt19937_64 rng(14);
  const auto frames = random_stream(rng, 6, 200);
  EngineConfig cfg;
  cfg.convergence.var_rel_tol = 1e-9;
  cfg.convergence.max_window_s = 1.0;
  const auto r = run(frames, cfg);
  EXPECT_EQ(r.status, EngineStatus::aborted);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.samples, 60u);
  EXPECT_FALSE(r.groups.clusters.empty());
}

TEST(Engine, ExhaustedStreamIsRunning) {
  std::mt19937_64 rng(15);
  const auto frames = random_stream(rng, 6, 20);
  EngineConfig cfg;
  cfg.convergence.var_rel_tol = 1e-9;
  const auto r = run(frames, cfg);
  EXPECT_EQ(r.status, EngineStatus::running);
  EXPECT_FALSE(r.converged);
}

TEST(Engine, InsufficientData) {
  std::mt19937_64 rng(16);
  const auto frames = random_stream(rng, 3, 4);
  EXPECT_THROW(run(frames, EngineConfig{}), InsufficientDataError);
  EXPECT_THROW(run(std::span<const MeasurementFrame>{}, EngineConfig{}), InsufficientDataError);
  try {
    run(frames, EngineConfig{});
  } catch (const InsufficientDataError& e) {
    EXPECT_STREQ(e.what(), "insufficient data");
  }
}

TEST(Engine, AnomalousBusesFollowChebyshevBound) {
  const auto frames = two_group_stream(8, 3.0, 2);
  EngineConfig cfg;
  cfg.convergence.var_rel_tol = 1e-12;
  const auto r = run(frames, cfg);
  CoherencyEngine eng(8, cfg);
  for (const auto& f : frames) {
    if (eng.finished()) break;
    eng.step(f);
  }
  std::vector<std::size_t> expected;
  for (std::size_t b = 0; b < 8; ++b) {
    if (eng.properties().eps[b] > cfg.chebyshev.n() * cfg.chebyshev.n() + 1.0) expected.push_back(b);
  }
  EXPECT_EQ(r.anomalous_buses, expected);
}
