#pragma once

// Per-channel conditioning of raw frequency samples into deviation
// trajectories: moving-median despike, offset removal against the warm-up
// baseline, and centered moving-average detrending. Both filters use a
// centered window clipped at the signal boundaries.

#include <cstddef>
#include <span>
#include <vector>

#include "coherency/tda.hpp"

namespace coherency {

struct PreprocessConfig {
  std::size_t median_window = 5;       // samples, odd
  double nominal_hz = 60.0;
  double detrend_window_s = 2.0;       // width of the centered trend estimate
  std::size_t warmup_min_samples = 5;  // per channel, before anything is emitted

  // Throws ConfigError.
  void validate() const;

  bool operator==(const PreprocessConfig&) const = default;
};

std::vector<double> moving_median(std::span<const double> signal, std::size_t window);

// (signal - nominal) minus the mean of the first `warmup` values of it.
std::vector<double> remove_offset(std::span<const double> signal, double nominal_hz,
                                  std::size_t warmup);

// Half width, in samples, of the detrend window at a given sample interval.
std::size_t detrend_half_width(double window_s, double sample_interval_s);

// signal minus its centered moving average of 2*half_width+1 samples.
std::vector<double> detrend_dynamics(std::span<const double> signal, std::size_t half_width);

std::vector<double> detrend_dynamics(std::span<const double> signal, const PreprocessConfig& cfg,
                                     double sample_interval_s);

// Full batch pipeline for one channel: median -> offset -> detrend.
std::vector<double> preprocess_channel(std::span<const double> raw, const PreprocessConfig& cfg,
                                       double sample_interval_s);

// Batch pipeline over a channel-major raw matrix.
Trajectories preprocess_batch(const Trajectories& raw, const PreprocessConfig& cfg,
                              double sample_interval_s);

// Incremental form of preprocess_batch.
//
// A sample becomes final ("committed") once enough later samples exist that
// neither filter window nor the warm-up baseline can change it; that lag is
// group_delay() samples. The remaining tail is recomputed on request with the
// same clipped-window kernels, so committed + provisional always equals
// preprocess_batch over the samples seen so far.
class StreamPreprocessor {
 public:
  StreamPreprocessor(std::size_t channels, PreprocessConfig cfg);

  // Must be set before the third sample is pushed.
  void set_sample_interval(double sample_interval_s);
  bool has_sample_interval() const { return half_detrend_ != 0; }

  void push(std::span<const double> raw);

  std::size_t channels() const { return raw_.size(); }
  std::size_t samples() const { return raw_.empty() ? 0 : raw_.front().size(); }
  std::size_t committed() const { return committed_.empty() ? 0 : committed_.front().size(); }
  std::size_t group_delay() const;

  // Sample-major copy of committed sample k (one value per channel).
  std::vector<double> committed_sample(std::size_t k) const;

  // Channel-major committed trajectories.
  const Trajectories& committed_trajectories() const { return committed_; }

  // Sample-major provisional values for samples [committed(), samples()).
  std::vector<std::vector<double>> provisional_samples() const;

  const PreprocessConfig& config() const { return cfg_; }

 private:
  void advance(std::size_t ch);
  std::vector<double> provisional_channel(std::size_t ch) const;

  PreprocessConfig cfg_;
  std::size_t half_median_ = 0;
  std::size_t half_detrend_ = 0;
  Trajectories raw_;
  Trajectories median_final_;
  std::vector<double> baseline_;
  bool baseline_final_ = false;
  Trajectories committed_;
};

}  // namespace coherency
