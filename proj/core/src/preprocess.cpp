#include "coherency/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "coherency/error.hpp"

namespace coherency {

namespace {

// Median over [k-h, k+h] clipped to the signal; even counts average the two
// middle values.
double median_at(std::span<const double> x, std::size_t k, std::size_t h,
                 std::vector<double>& scratch) {
  const std::size_t lo = k >= h ? k - h : 0;
  const std::size_t hi = std::min(x.size() - 1, k + h);
  scratch.assign(x.begin() + static_cast<std::ptrdiff_t>(lo),
                 x.begin() + static_cast<std::ptrdiff_t>(hi + 1));
  std::sort(scratch.begin(), scratch.end());
  const std::size_t c = scratch.size();
  if (c % 2 == 1) return scratch[c / 2];
  return 0.5 * (scratch[c / 2 - 1] + scratch[c / 2]);
}

// Mean over [k-h, k+h] clipped to [0, n-1], summed in index order.
template <typename Value>
double mean_at(std::size_t n, std::size_t k, std::size_t h, Value value) {
  const std::size_t lo = k >= h ? k - h : 0;
  const std::size_t hi = std::min(n - 1, k + h);
  double sum = 0.0;
  for (std::size_t j = lo; j <= hi; ++j) sum += value(j);
  return sum / static_cast<double>(hi - lo + 1);
}

double baseline_of(std::span<const double> medians, double nominal, std::size_t warmup) {
  const std::size_t count = std::min(warmup, medians.size());
  if (count == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < count; ++j) sum += medians[j] - nominal;
  return sum / static_cast<double>(count);
}

void check_window(std::size_t window) {
  if (window == 0 || window % 2 == 0) {
    throw ConfigError("median window must be odd and positive, got " + std::to_string(window));
  }
}

}  // namespace

void PreprocessConfig::validate() const {
  if (median_window % 2 == 0 || median_window < 3) {
    throw ConfigError("median_window must be odd and >= 3, got " + std::to_string(median_window));
  }
  if (!(detrend_window_s > 0.0) || !std::isfinite(detrend_window_s)) {
    throw ConfigError("detrend_window must be positive");
  }
  if (!std::isfinite(nominal_hz) || !(nominal_hz > 0.0)) {
    throw ConfigError("nominal frequency must be positive");
  }
  if (warmup_min_samples < median_window) {
    throw ConfigError("warmup_min_samples must be >= median_window");
  }
}

std::vector<double> moving_median(std::span<const double> signal, std::size_t window) {
  check_window(window);
  std::vector<double> out(signal.size());
  std::vector<double> scratch;
  for (std::size_t k = 0; k < signal.size(); ++k) out[k] = median_at(signal, k, window / 2, scratch);
  return out;
}

std::vector<double> remove_offset(std::span<const double> signal, double nominal_hz,
                                  std::size_t warmup) {
  const double base = baseline_of(signal, nominal_hz, warmup);
  std::vector<double> out(signal.size());
  for (std::size_t k = 0; k < signal.size(); ++k) out[k] = (signal[k] - nominal_hz) - base;
  return out;
}

std::size_t detrend_half_width(double window_s, double sample_interval_s) {
  if (!(sample_interval_s > 0.0)) throw ConfigError("sample interval must be positive");
  const auto h = std::lround(window_s / sample_interval_s / 2.0);
  return static_cast<std::size_t>(std::max<long>(1, h));
}

std::vector<double> detrend_dynamics(std::span<const double> signal, std::size_t half_width) {
  const std::size_t n = signal.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = signal[k] - mean_at(n, k, half_width, [&](std::size_t j) { return signal[j]; });
  }
  return out;
}

std::vector<double> detrend_dynamics(std::span<const double> signal, const PreprocessConfig& cfg,
                                     double sample_interval_s) {
  return detrend_dynamics(signal, detrend_half_width(cfg.detrend_window_s, sample_interval_s));
}

std::vector<double> preprocess_channel(std::span<const double> raw, const PreprocessConfig& cfg,
                                       double sample_interval_s) {
  const auto median = moving_median(raw, cfg.median_window);
  const auto offset = remove_offset(median, cfg.nominal_hz, cfg.warmup_min_samples);
  return detrend_dynamics(offset, cfg, sample_interval_s);
}

Trajectories preprocess_batch(const Trajectories& raw, const PreprocessConfig& cfg,
                              double sample_interval_s) {
  Trajectories out;
  out.reserve(raw.size());
  for (const auto& ch : raw) out.push_back(preprocess_channel(ch, cfg, sample_interval_s));
  return out;
}

StreamPreprocessor::StreamPreprocessor(std::size_t channels, PreprocessConfig cfg)
    : cfg_(cfg),
      half_median_(cfg.median_window / 2),
      raw_(channels),
      median_final_(channels),
      baseline_(channels, 0.0),
      committed_(channels) {
  cfg_.validate();
}

void StreamPreprocessor::set_sample_interval(double sample_interval_s) {
  half_detrend_ = detrend_half_width(cfg_.detrend_window_s, sample_interval_s);
}

std::size_t StreamPreprocessor::group_delay() const { return half_median_ + half_detrend_; }

void StreamPreprocessor::push(std::span<const double> raw) {
  if (raw.size() != raw_.size()) {
    throw StreamShapeError("preprocessor expects " + std::to_string(raw_.size()) +
                           " channels, got " + std::to_string(raw.size()));
  }
  if (samples() >= 2 && !has_sample_interval()) {
    throw std::logic_error("preprocessor: sample interval unset");
  }
  for (std::size_t ch = 0; ch < raw_.size(); ++ch) raw_[ch].push_back(raw[ch]);
  for (std::size_t ch = 0; ch < raw_.size(); ++ch) advance(ch);
  if (!raw_.empty() && median_final_.front().size() >= cfg_.warmup_min_samples) {
    baseline_final_ = true;
  }
}

void StreamPreprocessor::advance(std::size_t ch) {
  const auto& raw = raw_[ch];
  auto& med = median_final_[ch];
  const std::size_t n = raw.size();
  const std::size_t final_medians = n > half_median_ ? n - half_median_ : 0;
  std::vector<double> scratch;
  while (med.size() < final_medians) med.push_back(median_at(raw, med.size(), half_median_, scratch));

  if (med.size() < cfg_.warmup_min_samples || !has_sample_interval()) return;
  if (!baseline_final_) baseline_[ch] = baseline_of(med, cfg_.nominal_hz, cfg_.warmup_min_samples);

  const std::size_t lag = half_median_ + half_detrend_;
  const std::size_t target = n > lag ? n - lag : 0;
  auto& out = committed_[ch];
  const double nominal = cfg_.nominal_hz;
  const double base = baseline_[ch];
  auto offset = [&](std::size_t j) { return (med[j] - nominal) - base; };
  while (out.size() < target) {
    const std::size_t k = out.size();
    out.push_back(offset(k) - mean_at(n, k, half_detrend_, offset));
  }
}

std::vector<double> StreamPreprocessor::provisional_channel(std::size_t ch) const {
  const auto& raw = raw_[ch];
  const auto& med = median_final_[ch];
  const std::size_t n = raw.size();
  const std::size_t c = committed_[ch].size();
  if (c == n) return {};
  if (!has_sample_interval() && n > 1) throw std::logic_error("preprocessor: sample interval unset");
  const std::size_t h = half_detrend_;
  const std::size_t lo = c >= h ? c - h : 0;

  std::vector<double> scratch;
  std::vector<double> m(n - lo);
  for (std::size_t j = lo; j < n; ++j) {
    m[j - lo] = j < med.size() ? med[j] : median_at(raw, j, half_median_, scratch);
  }
  const double nominal = cfg_.nominal_hz;
  const double base = baseline_final_ ? baseline_[ch]
                                      : baseline_of(m, nominal, cfg_.warmup_min_samples);
  auto offset = [&](std::size_t j) { return (m[j - lo] - nominal) - base; };
  std::vector<double> y;
  y.reserve(n - c);
  for (std::size_t k = c; k < n; ++k) y.push_back(offset(k) - mean_at(n, k, h, offset));
  return y;
}

std::vector<double> StreamPreprocessor::committed_sample(std::size_t k) const {
  std::vector<double> s(committed_.size());
  for (std::size_t ch = 0; ch < committed_.size(); ++ch) s[ch] = committed_[ch].at(k);
  return s;
}

std::vector<std::vector<double>> StreamPreprocessor::provisional_samples() const {
  const std::size_t c = committed();
  const std::size_t n = samples();
  std::vector<std::vector<double>> out(n - c, std::vector<double>(raw_.size()));
  for (std::size_t ch = 0; ch < raw_.size(); ++ch) {
    const auto y = provisional_channel(ch);
    for (std::size_t k = 0; k < y.size(); ++k) out[k][ch] = y[k];
  }
  return out;
}

}  // namespace coherency
