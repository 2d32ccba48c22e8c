#include "coherency/tda.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "coherency/error.hpp"

namespace coherency {

namespace {

constexpr double kSigmaClampRel = 1e-12;

void check_sample(std::span<const double> deviations, std::size_t buses, std::size_t k) {
  if (deviations.size() != buses) {
    throw StreamShapeError("sample has " + std::to_string(deviations.size()) +
                           " values, stream has " + std::to_string(buses) + " buses");
  }
  for (std::size_t i = 0; i < deviations.size(); ++i) {
    if (!std::isfinite(deviations[i])) {
      throw InputQualityError("non-finite sample at bus index " + std::to_string(i) +
                                  ", sample " + std::to_string(k),
                              i, k);
    }
  }
}

void check_rectangular(const Trajectories& trajectories) {
  for (const auto& t : trajectories) {
    if (t.size() != trajectories.front().size()) {
      throw StreamShapeError("trajectories differ in length");
    }
  }
}

}  // namespace

DistanceState::DistanceState(std::size_t buses) : n_(buses), d2_(buses * buses, 0.0) {}

void DistanceState::add_sample(std::span<const double> deviations) {
  check_sample(deviations, n_, k_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      const double diff = deviations[i] - deviations[j];
      const double v = d2_[i * n_ + j] + diff * diff;
      d2_[i * n_ + j] = v;
      d2_[j * n_ + i] = v;
    }
  }
  ++k_;
}

DistanceState update_distance_state(DistanceState state, std::span<const double> deviations) {
  state.add_sample(deviations);
  return state;
}

DistanceState batch_distance_state(const Trajectories& trajectories) {
  check_rectangular(trajectories);
  const std::size_t n = trajectories.size();
  DistanceState state(n);
  if (n == 0) return state;
  const std::size_t k = trajectories.front().size();
  std::vector<double> sample(n);
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t i = 0; i < n; ++i) sample[i] = trajectories[i][s];
    state.add_sample(sample);
  }
  return state;
}

RunningMoments::RunningMoments(std::size_t buses) : n_(buses), dev2_(buses, 0.0) {}

void RunningMoments::add_sample(std::span<const double> deviations) {
  check_sample(deviations, n_, mu_.size());
  // Cross-bus running means in the (i-1)/i form.
  double mean = 0.0;
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double w = 1.0 / static_cast<double>(i + 1);
    const double prev = static_cast<double>(i) * w;
    mean = prev * mean + w * deviations[i];
    mean_sq = prev * mean_sq + w * deviations[i] * deviations[i];
  }
  for (std::size_t i = 0; i < n_; ++i) {
    const double d = deviations[i] - mean;
    dev2_[i] += d * d;
  }
  mu_.push_back(mean);
  mu_norm2_ += mean * mean;
  x_ += mean_sq;
}

double RunningMoments::sigma2() const {
  const double s = x_ - mu_norm2_;
  if (s >= 0.0) return s;
  if (-s <= kSigmaClampRel * x_) return 0.0;
  throw std::logic_error("running moments: negative variance " + std::to_string(s));
}

bool RunningMoments::degenerate() const {
  return x_ <= 0.0 || sigma2() <= kSigmaClampRel * x_;
}

std::vector<double> RunningMoments::proximities() const {
  std::vector<double> q(n_, 0.0);
  if (degenerate()) return q;
  const double s2 = sigma2();
  const double scale = static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) q[i] = scale * (dev2_[i] + s2);
  return q;
}

RunningMoments::Checkpoint RunningMoments::checkpoint() const {
  return Checkpoint{mu_.size(), x_, mu_norm2_, dev2_};
}

void RunningMoments::restore(const Checkpoint& cp) {
  if (cp.samples > mu_.size() || cp.dev2.size() != n_) {
    throw std::logic_error("running moments: checkpoint does not belong to this history");
  }
  mu_.resize(cp.samples);
  x_ = cp.x;
  mu_norm2_ = cp.mu_norm2;
  dev2_ = cp.dev2;
}

RunningMoments update_running_moments(RunningMoments moments, std::span<const double> deviations) {
  moments.add_sample(deviations);
  return moments;
}

RunningMoments batch_running_moments(const Trajectories& trajectories) {
  check_rectangular(trajectories);
  const std::size_t n = trajectories.size();
  RunningMoments m(n);
  if (n == 0) return m;
  const std::size_t k = trajectories.front().size();
  // Plain sums over buses, then over samples, as opposed to the per-sample
  // running-mean recursion in add_sample.
  m.mu_.assign(k, 0.0);
  for (std::size_t s = 0; s < k; ++s) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += trajectories[i][s];
    m.mu_[s] = sum / static_cast<double>(n);
  }
  double x = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double norm2 = 0.0;
    double dev = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      const double v = trajectories[i][s];
      norm2 += v * v;
      dev += (v - m.mu_[s]) * (v - m.mu_[s]);
    }
    x += norm2;
    m.dev2_[i] = dev;
  }
  m.x_ = x / static_cast<double>(n);
  m.mu_norm2_ = std::inner_product(m.mu_.begin(), m.mu_.end(), m.mu_.begin(), 0.0);
  return m;
}

std::vector<double> cumulative_proximity_batch(const DistanceState& distances) {
  const std::size_t n = distances.buses();
  std::vector<double> q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += distances(i, j);
    q[i] = sum;
  }
  return q;
}

double cumulative_proximity_recursive(const RunningMoments& moments, const BusPoint& point) {
  const auto& mu = moments.mu();
  if (point.bus >= moments.buses()) {
    throw StreamShapeError("bus " + std::to_string(point.bus) + " out of range");
  }
  if (point.trajectory.size() != mu.size()) {
    throw StreamShapeError("bus point has " + std::to_string(point.trajectory.size()) +
                           " samples, moments have " + std::to_string(mu.size()));
  }
  double dist2 = 0.0;
  for (std::size_t s = 0; s < mu.size(); ++s) {
    const double d = point.trajectory[s] - mu[s];
    dist2 += d * d;
  }
  const double n = static_cast<double>(moments.buses());
  return n * (dist2 + moments.sigma2());
}

Eccentricity eccentricity(std::span<const double> q) {
  Eccentricity out;
  const std::size_t n = q.size();
  const double total = std::accumulate(q.begin(), q.end(), 0.0);
  if (n == 0) return out;
  if (!(total > 0.0)) {
    out.eps.assign(n, 2.0);
    out.degenerate = true;
    return out;
  }
  const double mean = total / static_cast<double>(n);
  out.eps.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.eps[i] = 2.0 * q[i] / mean;
  return out;
}

Eccentricity eccentricity_closed_form(const RunningMoments& moments) {
  Eccentricity out;
  const std::size_t n = moments.buses();
  if (moments.degenerate()) {
    out.eps.assign(n, 2.0);
    out.degenerate = true;
    return out;
  }
  const double s2 = moments.sigma2();
  out.eps.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.eps[i] = 1.0 + moments.dev2(i) / s2;
  return out;
}

std::vector<double> density(std::span<const double> eps) {
  std::vector<double> d(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) {
      throw std::logic_error("density: non-positive eccentricity at bus index " +
                             std::to_string(i));
    }
    d[i] = 1.0 / eps[i];
  }
  return d;
}

std::vector<double> typicality(std::span<const double> dens) {
  const double total = std::accumulate(dens.begin(), dens.end(), 0.0);
  if (!(total > 0.0)) throw std::logic_error("typicality: non-positive total density");
  std::vector<double> tau(dens.size());
  for (std::size_t i = 0; i < dens.size(); ++i) tau[i] = dens[i] / total;
  return tau;
}

TdaProperties tda_properties(std::span<const double> q) {
  TdaProperties p;
  p.q.assign(q.begin(), q.end());
  auto e = eccentricity(q);
  p.eps = std::move(e.eps);
  p.degenerate = e.degenerate;
  p.dens = density(p.eps);
  p.tau = typicality(p.dens);
  return p;
}

ChebyshevParams::ChebyshevParams(double n) : n_(n) {
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ConfigError("chebyshev: n must be positive, got " + std::to_string(n));
  }
}

}  // namespace coherency
