#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "coherency/error.hpp"
#include "coherency/signal_gen.hpp"

using namespace coherency;

namespace {

ScenarioConfig two_bus(double a, double b) {
  ScenarioConfig cfg;
  cfg.n_buses = 2;
  cfg.duration_s = 6.0;
  cfg.event_time_s = 0.5;
  cfg.modes = {ModeSpec{0.8, 0.02, {a, b}, 0.0}};
  return cfg;
}

std::vector<double> channel(const Scenario& sc, std::size_t bus) {
  std::vector<double> x;
  for (const auto& f : sc.frames) x.push_back(f.values[bus]);
  return x;
}

// Hann-windowed DFT power at frequency f (Hz).
double dft_power(const std::vector<double>& x, double fs, double f) {
  double re = 0.0, im = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / (n - 1.0));
    const double ph = 2.0 * std::numbers::pi * f * static_cast<double>(k) / fs;
    re += w * x[k] * std::cos(ph);
    im -= w * x[k] * std::sin(ph);
  }
  return re * re + im * im;
}

}  // namespace

TEST(ScenarioConfig, Validation) {
  auto cfg = two_bus(1.0, -1.0);
  EXPECT_NO_THROW(cfg.validate());
  cfg.event_time_s = cfg.duration_s;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = two_bus(1.0, -1.0);
  cfg.modes[0].freq_hz = 31.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = two_bus(1.0, -1.0);
  cfg.modes[0].damping_ratio = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = two_bus(1.0, -1.0);
  cfg.modes[0].shape = {1.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = two_bus(1.0, -1.0);
  cfg.trend = {0.1};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = two_bus(1.0, -1.0);
  cfg.noise_std_hz = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Generate, NoModesNoNoiseIsConstant) {
  ScenarioConfig cfg;
  cfg.n_buses = 4;
  const auto sc = generate(cfg);
  ASSERT_EQ(sc.frames.size(), 600u);
  for (const auto& f : sc.frames) {
    for (double v : f.values) EXPECT_EQ(v, 60.0);
  }
  ASSERT_EQ(sc.truth.groups.size(), 1u);
  EXPECT_EQ(sc.truth.groups[0], (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Generate, OppositeShapesAreAntiPhase) {
  const auto sc = generate(two_bus(0.05, -0.05));
  for (const auto& f : sc.frames) EXPECT_DOUBLE_EQ(f.values[0] - 60.0, -(f.values[1] - 60.0));
  EXPECT_EQ(sc.truth.groups, (std::vector<std::vector<std::size_t>>{{0}, {1}}));
  EXPECT_EQ(sc.truth.center_buses, (std::vector<std::size_t>{0, 1}));
}

TEST(Generate, MatchesModalFormula) {
  auto cfg = two_bus(0.05, -0.03);
  cfg.modes[0].phase = 0.4;
  cfg.trend = {0.02, 0.01};
  cfg.trend_time_constant_s = 2.0;
  const auto sc = generate(cfg);
  for (std::size_t k = 0; k < sc.frames.size(); ++k) {
    const double t = static_cast<double>(k) / 60.0;
    EXPECT_DOUBLE_EQ(sc.frames[k].timestamp, t);
    for (std::size_t b = 0; b < 2; ++b) {
      double expected = 60.0;
      if (t >= 0.5) {
        const double s = t - 0.5;
        const auto& m = cfg.modes[0];
        expected += m.shape[b] * std::exp(-2.0 * std::numbers::pi * 0.8 * 0.02 * s) *
                    std::cos(2.0 * std::numbers::pi * 0.8 * s + 0.4);
        expected -= cfg.trend[b] * (1.0 - std::exp(-s / 2.0));
      }
      EXPECT_NEAR(sc.frames[k].values[b], expected, 1e-12);
    }
  }
}

TEST(Generate, SameSeedIsBitIdentical) {
  const auto a = generate(kundur_preset(21));
  const auto b = generate(kundur_preset(21));
  const auto c = generate(kundur_preset(22));
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t k = 0; k < a.frames.size(); ++k) {
    EXPECT_EQ(a.frames[k].values, b.frames[k].values);
    EXPECT_EQ(a.frames[k].timestamp, b.frames[k].timestamp);
  }
  EXPECT_NE(a.frames[100].values, c.frames[100].values);
}

TEST(Generate, NoiselessSignalIsBandLimited) {
  ScenarioConfig cfg;
  cfg.n_buses = 3;
  cfg.duration_s = 40.0;
  cfg.event_time_s = 0.0;
  cfg.modes = {ModeSpec{0.5, 0.0, {1.0, -0.5, 0.2}, 0.3}, ModeSpec{1.25, 0.0, {0.3, 0.4, -1.0}, 1.0}};
  const auto sc = generate(cfg);
  const double fs = cfg.sample_rate_hz;
  for (std::size_t b = 0; b < 3; ++b) {
    auto x = channel(sc, b);
    for (auto& v : x) v -= 60.0;
    double inside = 0.0, total = 0.0;
    for (double f = 0.0; f < fs / 2.0; f += 1.0 / cfg.duration_s) {
      const double p = dft_power(x, fs, f);
      total += p;
      if (std::abs(f - 0.5) <= 0.1 || std::abs(f - 1.25) <= 0.1) inside += p;
    }
    EXPECT_LT(1.0 - inside / total, 0.01) << "bus " << b;
  }
}

TEST(GroundTruth, InvariantToPositiveScaling) {
  auto cfg = kundur_preset(0);
  const auto base = ground_truth(cfg);
  for (auto& m : cfg.modes) {
    for (auto& s : m.shape) s *= 3.7;
  }
  const auto scaled = ground_truth(cfg);
  EXPECT_EQ(scaled.groups, base.groups);
  EXPECT_EQ(scaled.center_buses, base.center_buses);
}

TEST(GroundTruth, ZeroShapeEntriesFormTheirOwnGroup) {
  ScenarioConfig cfg;
  cfg.n_buses = 4;
  cfg.modes = {ModeSpec{0.5, 0.05, {1.0, 0.0, -1.0, 0.5}, 0.0},
               ModeSpec{0.2, 0.05, {0.2, 0.0, -0.3, 0.1}, 0.0}};
  const auto gt = ground_truth(cfg);
  EXPECT_EQ(gt.groups, (std::vector<std::vector<std::size_t>>{{0, 3}, {1}, {2}}));
}

TEST(KundurPreset, Shape) {
  const auto cfg = kundur_preset();
  EXPECT_EQ(cfg.n_buses, 11u);
  EXPECT_EQ(cfg.nominal_hz, 60.0);
  EXPECT_EQ(cfg.sample_rate_hz, 60.0);
  EXPECT_EQ(cfg.duration_s, 12.0);
  EXPECT_EQ(cfg.event_time_s, 1.0);
  EXPECT_EQ(cfg.noise_std_hz, 1e-3);
  EXPECT_EQ(cfg.frame_count(), 720u);
  ASSERT_EQ(cfg.modes.size(), 3u);
  EXPECT_EQ(cfg.modes[0].freq_hz, 0.545);
  EXPECT_EQ(cfg.modes[0].damping_ratio, 0.05);
  EXPECT_NEAR(1.0 / cfg.modes[0].freq_hz, 1.835, 5e-4);
  for (std::size_t m = 1; m < 3; ++m) EXPECT_EQ(cfg.modes[m].freq_hz, 1.1);
}

TEST(KundurPreset, LocalModesStayInsideTheirArea) {
  const auto cfg = kundur_preset();
  const std::vector<std::size_t> area1{0, 1, 4, 5, 6, 7};
  for (std::size_t b = 0; b < 11; ++b) {
    const bool in1 = std::find(area1.begin(), area1.end(), b) != area1.end();
    if (in1) {
      EXPECT_EQ(cfg.modes[2].shape[b], 0.0);
    } else {
      EXPECT_EQ(cfg.modes[1].shape[b], 0.0);
    }
  }
}

TEST(KundurPreset, GroundTruthIsTwoAreaSplit) {
  const auto gt = ground_truth(kundur_preset());
  // Zero-based: buses 1,2,5,6,7,8 and 3,4,9,10,11.
  EXPECT_EQ(gt.groups, (std::vector<std::vector<std::size_t>>{{0, 1, 4, 5, 6, 7}, {2, 3, 8, 9, 10}}));
  EXPECT_EQ(gt.center_buses, (std::vector<std::size_t>{4, 9}));
}
