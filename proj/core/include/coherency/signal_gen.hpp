#pragma once

// Synthetic ringdown generator: damped sinusoidal modes with signed per-bus
// shapes, a slow per-bus recovery trend and Gaussian measurement noise.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "coherency/tda.hpp"

namespace coherency {

struct ModeSpec {
  double freq_hz = 1.0;
  double damping_ratio = 0.0;
  std::vector<double> shape;  // signed participation per bus, Hz
  double phase = 0.0;         // radians

  void validate(std::size_t buses) const;
};

struct ScenarioConfig {
  std::size_t n_buses = 2;
  double nominal_hz = 60.0;
  double sample_rate_hz = 60.0;
  double duration_s = 10.0;
  double event_time_s = 1.0;
  std::vector<ModeSpec> modes;
  // Per-bus amplitude (Hz) of a -a * (1 - exp(-(t - t0) / T)) term after the
  // event; empty means no trend.
  std::vector<double> trend;
  double trend_time_constant_s = 3.0;
  double noise_std_hz = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t frame_count() const;
};

// Bus indices are zero-based.
struct GroundTruth {
  std::vector<std::vector<std::size_t>> groups;  // ordered by smallest member
  std::vector<std::size_t> center_buses;         // one per group
};

struct Scenario {
  std::vector<MeasurementFrame> frames;
  GroundTruth truth;
};

// Partition by the sign of the slowest mode's shape; zero entries form their
// own group. Centers are the members nearest their group's mean on the
// noiseless, trend-free modal signals. With no modes every bus is one group.
GroundTruth ground_truth(const ScenarioConfig& cfg);

// Noise-free modal component of bus `bus` at time t.
double modal_response(const ScenarioConfig& cfg, std::size_t bus, double t);

Scenario generate(const ScenarioConfig& cfg);

// Two-area, eleven-bus ringdown: 0.545 Hz inter-area mode splitting buses
// {1,2,5,6,7,8} from {3,4,9,10,11} (one-based), plus one 1.1 Hz local mode
// per area. Buses 5 and 10 sit at the middle of their areas.
ScenarioConfig kundur_preset(std::uint64_t seed = 0);

}  // namespace coherency
