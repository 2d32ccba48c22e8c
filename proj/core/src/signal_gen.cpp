#include "coherency/signal_gen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "coherency/error.hpp"

namespace coherency {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double mode_value(const ModeSpec& m, double tau) {
  return std::exp(-kTwoPi * m.freq_hz * m.damping_ratio * tau) *
         std::cos(kTwoPi * m.freq_hz * tau + m.phase);
}

double sample_time(const ScenarioConfig& cfg, std::size_t k) {
  return static_cast<double>(k) / cfg.sample_rate_hz;
}

}  // namespace

void ModeSpec::validate(std::size_t buses) const {
  if (!std::isfinite(freq_hz) || !(freq_hz > 0.0)) throw ConfigError("mode frequency must be positive");
  if (!(damping_ratio >= 0.0 && damping_ratio < 1.0)) {
    throw ConfigError("damping ratio must be in [0, 1)");
  }
  if (shape.size() != buses) {
    throw ConfigError("mode shape has " + std::to_string(shape.size()) + " entries, expected " +
                      std::to_string(buses));
  }
  for (double s : shape) {
    if (!std::isfinite(s)) throw ConfigError("non-finite mode shape entry");
  }
  if (!std::isfinite(phase)) throw ConfigError("non-finite mode phase");
}

void ScenarioConfig::validate() const {
  if (n_buses < 2) throw ConfigError("scenario needs at least two buses");
  if (!std::isfinite(nominal_hz) || !(nominal_hz > 0.0)) throw ConfigError("nominal must be positive");
  if (!std::isfinite(sample_rate_hz) || !(sample_rate_hz > 0.0)) {
    throw ConfigError("sample rate must be positive");
  }
  if (!std::isfinite(duration_s) || !(duration_s > 0.0)) throw ConfigError("duration must be positive");
  if (!(event_time_s >= 0.0 && event_time_s < duration_s)) {
    throw ConfigError("event time must lie in [0, duration)");
  }
  for (const auto& m : modes) {
    m.validate(n_buses);
    if (!(sample_rate_hz > 2.0 * m.freq_hz)) {
      throw ConfigError("sample rate must exceed twice every mode frequency");
    }
  }
  if (!trend.empty() && trend.size() != n_buses) throw ConfigError("trend needs one entry per bus");
  if (!trend.empty() && !(trend_time_constant_s > 0.0)) {
    throw ConfigError("trend time constant must be positive");
  }
  if (!std::isfinite(noise_std_hz) || noise_std_hz < 0.0) throw ConfigError("noise std must be >= 0");
}

std::size_t ScenarioConfig::frame_count() const {
  return static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
}

double modal_response(const ScenarioConfig& cfg, std::size_t bus, double t) {
  if (t < cfg.event_time_s) return 0.0;
  const double tau = t - cfg.event_time_s;
  double v = 0.0;
  for (const auto& m : cfg.modes) v += m.shape[bus] * mode_value(m, tau);
  return v;
}

GroundTruth ground_truth(const ScenarioConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_buses;
  GroundTruth gt;
  if (cfg.modes.empty()) {
    std::vector<std::size_t> all(n);
    for (std::size_t b = 0; b < n; ++b) all[b] = b;
    gt.groups.push_back(all);
  } else {
    const auto slowest = std::min_element(
        cfg.modes.begin(), cfg.modes.end(),
        [](const ModeSpec& a, const ModeSpec& b) { return a.freq_hz < b.freq_hz; });
    std::array<std::vector<std::size_t>, 3> by_sign;
    for (std::size_t b = 0; b < n; ++b) {
      const double s = slowest->shape[b];
      by_sign[s > 0.0 ? 0 : (s < 0.0 ? 1 : 2)].push_back(b);
    }
    for (auto& g : by_sign) {
      if (!g.empty()) gt.groups.push_back(std::move(g));
    }
    std::sort(gt.groups.begin(), gt.groups.end());
  }

  // Noiseless modal trajectories after the event.
  const std::size_t frames = cfg.frame_count();
  std::vector<std::vector<double>> x(n);
  for (std::size_t k = 0; k < frames; ++k) {
    const double t = sample_time(cfg, k);
    if (t < cfg.event_time_s) continue;
    for (std::size_t b = 0; b < n; ++b) x[b].push_back(modal_response(cfg, b, t));
  }
  for (const auto& g : gt.groups) {
    std::size_t best = g.front();
    double best_sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double sum = 0.0;
      for (auto j : g) {
        for (std::size_t k = 0; k < x[g[i]].size(); ++k) {
          const double d = x[g[i]][k] - x[j][k];
          sum += d * d;
        }
      }
      if (i == 0 || sum < best_sum) {
        best_sum = sum;
        best = g[i];
      }
    }
    gt.center_buses.push_back(best);
  }
  return gt;
}

Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  Scenario sc;
  sc.truth = ground_truth(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t frames = cfg.frame_count();
  sc.frames.reserve(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    MeasurementFrame f;
    f.timestamp = sample_time(cfg, k);
    f.nominal = cfg.nominal_hz;
    f.values.resize(cfg.n_buses);
    const double tau = f.timestamp - cfg.event_time_s;
    for (std::size_t b = 0; b < cfg.n_buses; ++b) {
      double v = cfg.nominal_hz + modal_response(cfg, b, f.timestamp);
      if (!cfg.trend.empty() && tau >= 0.0) {
        v -= cfg.trend[b] * (1.0 - std::exp(-tau / cfg.trend_time_constant_s));
      }
      if (cfg.noise_std_hz > 0.0) v += cfg.noise_std_hz * noise(rng);
      f.values[b] = v;
    }
    sc.frames.push_back(std::move(f));
  }
  return sc;
}

ScenarioConfig kundur_preset(std::uint64_t seed) {
  // Mode-shape coordinates per bus: (inter-area, local). Each area's outer
  // buses ring its center bus in the (inter-area, local) plane.
  struct Placement {
    std::size_t bus;  // one-based
    double inter;
    double local;
    int area;
  };
  constexpr double kRing = 0.3;
  constexpr double kCenter = 0.7;
  auto on_ring = [](std::size_t bus, double center, double deg, int area) {
    const double a = deg * std::numbers::pi / 180.0;
    return Placement{bus, center + kRing * std::cos(a), kRing * std::sin(a), area};
  };
  const std::array<Placement, 11> layout = {
      Placement{5, kCenter, 0.0, 1},   on_ring(8, kCenter, 180.0, 1),
      on_ring(7, kCenter, 108.0, 1),   on_ring(1, kCenter, 36.0, 1),
      on_ring(2, kCenter, -36.0, 1),   on_ring(6, kCenter, -108.0, 1),
      Placement{10, -kCenter, 0.0, 2}, on_ring(9, -kCenter, 0.0, 2),
      on_ring(11, -kCenter, 90.0, 2),  on_ring(3, -kCenter, 180.0, 2),
      on_ring(4, -kCenter, -90.0, 2),
  };

  constexpr double kAmplitude = 0.1;  // Hz per unit shape
  constexpr double kLocalScale = 1.0;
  constexpr double kLocalDamping = 0.05;

  ScenarioConfig cfg;
  cfg.n_buses = 11;
  cfg.nominal_hz = 60.0;
  cfg.sample_rate_hz = 60.0;
  cfg.duration_s = 12.0;
  cfg.event_time_s = 1.0;
  cfg.noise_std_hz = 1e-3;
  cfg.seed = seed;

  ModeSpec inter{0.545, 0.05, std::vector<double>(11, 0.0), -std::numbers::pi / 2};
  ModeSpec local1{1.1, kLocalDamping, std::vector<double>(11, 0.0), -std::numbers::pi / 2};
  ModeSpec local2{1.1, kLocalDamping, std::vector<double>(11, 0.0), -std::numbers::pi / 2};
  for (const auto& p : layout) {
    const std::size_t i = p.bus - 1;
    inter.shape[i] = kAmplitude * p.inter;
    (p.area == 1 ? local1 : local2).shape[i] = kAmplitude * kLocalScale * p.local;
  }
  cfg.modes = {inter, local1, local2};

  cfg.trend.resize(11);
  for (std::size_t i = 0; i < 11; ++i) cfg.trend[i] = 0.05 * (1.0 + 0.1 * std::sin(static_cast<double>(i)));
  cfg.trend_time_constant_s = 3.0;
  return cfg;
}

}  // namespace coherency
