#pragma once

// Typicality data analysis over a set of bus trajectories.
//
// Points are the N buses. Each point is the bus's deviation trajectory
// (length K, one entry per accepted sample), so distances, the running mean
// trajectory and the cumulative proximities all grow by one coordinate per
// frame. Two computation routes are provided and must agree to ~1e-9:
//
//   batch:     q_i = sum_j |b_i - b_j|^2 from the pairwise distance matrix
//   recursive: q_i = N * (|b_i - mu|^2 + X - |mu|^2) from running moments

#include <cstddef>
#include <span>
#include <vector>

namespace coherency {

// Per-bus trajectories, outer index = bus.
using Trajectories = std::vector<std::vector<double>>;

struct MeasurementFrame {
  double timestamp = 0.0;       // seconds since stream start
  std::vector<double> values;   // Hz, indexed by bus
  double nominal = 60.0;        // Hz
};

struct BusPoint {
  std::size_t bus = 0;
  std::vector<double> trajectory;  // preprocessed deviations, Hz
};

// Running pairwise squared Euclidean distances between bus trajectories.
class DistanceState {
 public:
  DistanceState() = default;
  explicit DistanceState(std::size_t buses);

  // Appends one sample (one deviation per bus). Throws StreamShapeError on a
  // length mismatch and InputQualityError on a non-finite value; the state is
  // left untouched in both cases.
  void add_sample(std::span<const double> deviations);

  std::size_t buses() const { return n_; }
  std::size_t samples() const { return k_; }

  double operator()(std::size_t i, std::size_t j) const { return d2_[i * n_ + j]; }

  // Row-major N x N view.
  std::span<const double> matrix() const { return d2_; }

  bool operator==(const DistanceState&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<double> d2_;
};

DistanceState update_distance_state(DistanceState state, std::span<const double> deviations);

// Recomputes distances from stored trajectories, summing samples in order.
DistanceState batch_distance_state(const Trajectories& trajectories);

// Cross-bus running moments: mu is the mean trajectory over buses, X the
// mean squared trajectory norm. dev2(i) accumulates |b_i - mu|^2, which is
// exact per sample because mu gains one fixed coordinate per frame.
class RunningMoments {
 public:
  RunningMoments() = default;
  explicit RunningMoments(std::size_t buses);

  void add_sample(std::span<const double> deviations);

  std::size_t buses() const { return n_; }
  std::size_t samples() const { return mu_.size(); }

  const std::vector<double>& mu() const { return mu_; }
  double mean_square_norm() const { return x_; }  // X_K
  double mu_norm2() const { return mu_norm2_; }
  double dev2(std::size_t bus) const { return dev2_[bus]; }

  // X - |mu|^2, clamped to zero when the cancellation error is within
  // 1e-12 of X below zero.
  double sigma2() const;

  // True when all trajectories coincide (to 1e-12 of X).
  bool degenerate() const;

  // q_i = N (|b_i - mu|^2 + sigma^2); all zero when degenerate().
  std::vector<double> proximities() const;

  // Accumulators needed to roll back to an earlier sample count.
  struct Checkpoint {
    std::size_t samples = 0;
    double x = 0.0;
    double mu_norm2 = 0.0;
    std::vector<double> dev2;
  };
  Checkpoint checkpoint() const;
  void restore(const Checkpoint& cp);

  bool operator==(const RunningMoments&) const = default;

 private:
  friend RunningMoments batch_running_moments(const Trajectories& trajectories);

  std::size_t n_ = 0;
  std::vector<double> mu_;
  double x_ = 0.0;
  double mu_norm2_ = 0.0;
  std::vector<double> dev2_;
};

RunningMoments update_running_moments(RunningMoments moments, std::span<const double> deviations);

RunningMoments batch_running_moments(const Trajectories& trajectories);

// q_i = sum_j d2(i, j).
std::vector<double> cumulative_proximity_batch(const DistanceState& distances);

// q_i from running moments and the bus's own trajectory. O(K).
double cumulative_proximity_recursive(const RunningMoments& moments, const BusPoint& point);

struct TdaProperties {
  std::vector<double> q;     // cumulative proximity, Hz^2
  std::vector<double> eps;   // normalized eccentricity, mean 2
  std::vector<double> dens;  // 1 / eps
  std::vector<double> tau;   // dens / sum(dens)
  bool degenerate = false;   // all points coincident

  bool operator==(const TdaProperties&) const = default;
};

struct Eccentricity {
  std::vector<double> eps;
  bool degenerate = false;
};

// eps_i = 2 q_i / mean(q). A zero total proximity yields eps = 2 everywhere
// and the degenerate flag.
Eccentricity eccentricity(std::span<const double> q);

// eps_i = 1 + |b_i - mu|^2 / sigma^2 straight from the moments.
Eccentricity eccentricity_closed_form(const RunningMoments& moments);

std::vector<double> density(std::span<const double> eps);
std::vector<double> typicality(std::span<const double> dens);

// q -> eps -> D -> tau.
TdaProperties tda_properties(std::span<const double> q);

inline TdaProperties tda_properties(const RunningMoments& moments) {
  return tda_properties(moments.proximities());
}

// Distribution-free tail test: eps > n^2 + 1 happens with probability < 1/n^2.
class ChebyshevParams {
 public:
  ChebyshevParams() = default;
  explicit ChebyshevParams(double n);  // throws ConfigError unless n > 0

  double n() const { return n_; }
  double threshold() const { return n_ * n_ + 1.0; }

  bool operator==(const ChebyshevParams&) const = default;

 private:
  double n_ = 3.0;
};

inline bool chebyshev_is_anomalous(double eps, const ChebyshevParams& params = {}) {
  return eps > params.threshold();
}

}  // namespace coherency
