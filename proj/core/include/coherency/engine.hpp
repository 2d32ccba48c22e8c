#pragma once

// Growing-window coherency engine. Each accepted frame extends every bus
// trajectory by one sample; TDA properties and clusters are recomputed and
// the per-cluster typicality variance is watched until it stops moving for
// lambda seconds.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coherency/clustering.hpp"
#include "coherency/preprocess.hpp"
#include "coherency/tda.hpp"

namespace coherency {

struct ConvergenceConfig {
  double lambda_s = 0.5;
  double var_rel_tol = 1e-2;
  bool require_stable_membership = true;
  double max_window_s = 30.0;

  void validate() const;

  bool operator==(const ConvergenceConfig&) const = default;
};

struct EngineConfig {
  PreprocessConfig preprocess;
  ConvergenceConfig convergence;
  ChebyshevParams chebyshev;
  // Committed moments and distances are rebuilt from stored trajectories
  // every this many samples.
  std::size_t refresh_interval = 256;

  void validate() const;

  bool operator==(const EngineConfig&) const = default;
};

enum class EngineStatus { warming_up, running, converged, aborted };

std::string to_string(EngineStatus s);
EngineStatus engine_status_from_string(const std::string& s);

// Membership and variance snapshot for one K. Clusters are stored ordered by
// their smallest member so snapshots compare directly.
struct HistoryEntry {
  std::size_t k = 0;
  double timestamp = 0.0;
  std::vector<std::vector<std::size_t>> membership;
  std::vector<double> variances;
};

HistoryEntry make_history_entry(const ClusterSet& cs, double timestamp);

// Index of the reference entry: the newest entry at least lambda older than
// the last one. nullopt while the history spans less than lambda.
std::optional<std::size_t> horizon_start(std::span<const HistoryEntry> history, double lambda_s);

// Largest relative variance change against the horizon start, or +inf when
// the cluster structure changed inside the horizon or the horizon is short.
double variance_drift(std::span<const HistoryEntry> history, const ConvergenceConfig& cfg);

bool check_convergence(std::span<const HistoryEntry> history, const ConvergenceConfig& cfg);

struct TraceEntry {
  std::size_t k = 0;
  double timestamp = 0.0;
  std::vector<double> tau;
  std::vector<Cluster> clusters;
  double drift = 0.0;  // +inf until the horizon is filled

  bool operator==(const TraceEntry&) const = default;
};

struct CoherencyResult {
  ClusterSet groups;
  std::vector<std::size_t> center_buses;  // one per group, same order
  EngineStatus status = EngineStatus::warming_up;
  bool converged = false;
  bool degenerate = false;
  std::size_t samples = 0;                 // K at the last step
  double sample_interval_s = 0.0;
  double window_length_s = 0.0;            // K * dt
  std::optional<double> disturbance_offset_s;
  std::optional<double> window_from_event_s;
  std::size_t group_delay_samples = 0;
  std::vector<std::size_t> anomalous_buses;  // Chebyshev tail at the last step
  std::vector<TraceEntry> trace;

  bool operator==(const CoherencyResult&) const = default;
};

class CoherencyEngine {
 public:
  CoherencyEngine(std::size_t buses, EngineConfig cfg);

  // Ingests one frame. Returns the current clusters once the warm-up is over.
  // A rejected frame (StreamShapeError, InputQualityError) leaves the engine
  // unchanged. Throws std::logic_error once converged or aborted.
  std::optional<ClusterSet> step(const MeasurementFrame& frame);

  EngineStatus status() const { return status_; }
  bool finished() const {
    return status_ == EngineStatus::converged || status_ == EngineStatus::aborted;
  }
  std::size_t buses() const { return buses_; }
  std::size_t samples() const { return pre_.samples(); }
  double sample_interval() const { return dt_; }
  std::size_t group_delay() const { return pre_.group_delay(); }

  // Values from the latest emitting step.
  const TdaProperties& properties() const { return props_; }
  const ClusterSet& clusters() const { return clusters_; }
  const DistanceState& distances() const { return working_d2_; }
  double drift() const { return drift_; }

  const std::vector<TraceEntry>& trace() const { return trace_; }

  // Channel-major trajectories (committed + provisional) as used at the
  // latest step.
  Trajectories trajectories() const;

  CoherencyResult result(std::optional<double> event_time_s = std::nullopt) const;

  const EngineConfig& config() const { return cfg_; }

 private:
  void validate(const MeasurementFrame& frame) const;

  EngineConfig cfg_;
  std::size_t buses_;
  StreamPreprocessor pre_;
  DistanceState committed_d2_;
  RunningMoments committed_moments_;
  std::size_t consumed_ = 0;

  DistanceState working_d2_;
  TdaProperties props_;
  ClusterSet clusters_;
  double drift_ = 0.0;

  std::vector<HistoryEntry> history_;
  std::vector<TraceEntry> trace_;
  EngineStatus status_ = EngineStatus::warming_up;
  double first_t_ = 0.0;
  double last_t_ = 0.0;
  double dt_ = 0.0;
};

using FrameSource = std::function<std::optional<MeasurementFrame>()>;

// Drives the engine until convergence, the max-window bound, or the end of
// the source. Throws InsufficientDataError when the source ends before any
// clusters were produced.
CoherencyResult run(const FrameSource& source, std::size_t buses, const EngineConfig& cfg,
                    std::optional<double> event_time_s = std::nullopt);

CoherencyResult run(std::span<const MeasurementFrame> frames, const EngineConfig& cfg,
                    std::optional<double> event_time_s = std::nullopt);

}  // namespace coherency
