#include "coherency/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "coherency/error.hpp"

namespace coherency {

namespace {

constexpr double kSpacingRel = 1e-6;
constexpr double kVarianceFloor = 1e-12;

}  // namespace

void ConvergenceConfig::validate() const {
  if (!std::isfinite(lambda_s) || !(lambda_s > 0.0)) throw ConfigError("lambda must be positive");
  if (!std::isfinite(var_rel_tol) || !(var_rel_tol > 0.0)) {
    throw ConfigError("var_rel_tol must be positive");
  }
  if (!(max_window_s > lambda_s)) throw ConfigError("max_window must exceed lambda");
}

void EngineConfig::validate() const {
  preprocess.validate();
  convergence.validate();
  if (refresh_interval == 0) throw ConfigError("refresh_interval must be positive");
}

std::string to_string(EngineStatus s) {
  switch (s) {
    case EngineStatus::warming_up: return "warming_up";
    case EngineStatus::running: return "running";
    case EngineStatus::converged: return "converged";
    case EngineStatus::aborted: return "aborted";
  }
  return "unknown";
}

EngineStatus engine_status_from_string(const std::string& s) {
  if (s == "warming_up") return EngineStatus::warming_up;
  if (s == "running") return EngineStatus::running;
  if (s == "converged") return EngineStatus::converged;
  if (s == "aborted") return EngineStatus::aborted;
  throw ConfigError("unknown engine status '" + s + "'");
}

HistoryEntry make_history_entry(const ClusterSet& cs, double timestamp) {
  std::vector<const Cluster*> order;
  order.reserve(cs.clusters.size());
  for (const auto& c : cs.clusters) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const Cluster* a, const Cluster* b) {
    return a->members.front() < b->members.front();
  });
  HistoryEntry e;
  e.k = cs.iteration_k;
  e.timestamp = timestamp;
  for (const auto* c : order) {
    e.membership.push_back(c->members);
    e.variances.push_back(c->tau_variance);
  }
  return e;
}

std::optional<std::size_t> horizon_start(std::span<const HistoryEntry> history, double lambda_s) {
  if (history.empty()) return std::nullopt;
  const double now = history.back().timestamp;
  const double dt = history.size() > 1
                        ? history[history.size() - 1].timestamp - history[history.size() - 2].timestamp
                        : 0.0;
  const double tol = kSpacingRel * std::max(dt, lambda_s);
  for (std::size_t i = history.size(); i-- > 0;) {
    if (now - history[i].timestamp >= lambda_s - tol) return i;
  }
  return std::nullopt;
}

double variance_drift(std::span<const HistoryEntry> history, const ConvergenceConfig& cfg) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto start = horizon_start(history, cfg.lambda_s);
  if (!start) return inf;
  const auto& ref = history[*start];
  double drift = 0.0;
  for (std::size_t i = *start + 1; i < history.size(); ++i) {
    const auto& e = history[i];
    if (e.variances.size() != ref.variances.size()) return inf;
    if (cfg.require_stable_membership && e.membership != ref.membership) return inf;
    for (std::size_t c = 0; c < e.variances.size(); ++c) {
      const double base = std::max(ref.variances[c], kVarianceFloor);
      drift = std::max(drift, std::abs(e.variances[c] - ref.variances[c]) / base);
    }
  }
  return drift;
}

bool check_convergence(std::span<const HistoryEntry> history, const ConvergenceConfig& cfg) {
  return variance_drift(history, cfg) <= cfg.var_rel_tol;
}

CoherencyEngine::CoherencyEngine(std::size_t buses, EngineConfig cfg)
    : cfg_(cfg),
      buses_(buses),
      pre_(buses, cfg.preprocess),
      committed_d2_(buses),
      committed_moments_(buses),
      working_d2_(buses) {
  if (buses == 0) throw StreamShapeError("engine needs at least one bus");
  cfg_.validate();
}

void CoherencyEngine::validate(const MeasurementFrame& frame) const {
  if (finished()) throw std::logic_error("engine already finished (" + to_string(status_) + ")");
  const std::size_t k = samples();
  if (frame.values.size() != buses_) {
    throw StreamShapeError("frame has " + std::to_string(frame.values.size()) +
                           " values, stream has " + std::to_string(buses_) + " buses");
  }
  for (std::size_t b = 0; b < buses_; ++b) {
    if (!std::isfinite(frame.values[b])) {
      throw InputQualityError("non-finite value for bus " + std::to_string(b) + " at sample " +
                                  std::to_string(k),
                              b, k);
    }
  }
  const double t = frame.timestamp;
  if (!std::isfinite(t)) {
    throw InputQualityError("non-finite timestamp at sample " + std::to_string(k),
                            InputQualityError::npos, k);
  }
  if (k > 0 && !(t > last_t_)) {
    throw InputQualityError("timestamp " + std::to_string(t) + " is not after " +
                                std::to_string(last_t_),
                            InputQualityError::npos, k);
  }
  if (k >= 2 && std::abs((t - last_t_) - dt_) > kSpacingRel * dt_) {
    throw InputQualityError("irregular sample spacing at sample " + std::to_string(k),
                            InputQualityError::npos, k);
  }
}

std::optional<ClusterSet> CoherencyEngine::step(const MeasurementFrame& frame) {
  validate(frame);
  const std::size_t k_before = samples();
  if (k_before == 0) first_t_ = frame.timestamp;
  if (k_before == 1) {
    dt_ = frame.timestamp - last_t_;
    pre_.set_sample_interval(dt_);
  }
  pre_.push(frame.values);
  last_t_ = frame.timestamp;

  while (consumed_ < pre_.committed()) {
    const auto s = pre_.committed_sample(consumed_);
    committed_d2_.add_sample(s);
    committed_moments_.add_sample(s);
    ++consumed_;
    if (consumed_ % cfg_.refresh_interval == 0) {
      const auto& traj = pre_.committed_trajectories();
      committed_d2_ = batch_distance_state(traj);
      committed_moments_ = batch_running_moments(traj);
    }
  }

  const std::size_t k = samples();
  if (k < std::max<std::size_t>(cfg_.preprocess.warmup_min_samples, 2)) return std::nullopt;

  // Overlay the provisional tail on copies of the committed state.
  working_d2_ = committed_d2_;
  const auto cp = committed_moments_.checkpoint();
  for (const auto& s : pre_.provisional_samples()) {
    working_d2_.add_sample(s);
    committed_moments_.add_sample(s);
  }
  props_ = tda_properties(committed_moments_);
  committed_moments_.restore(cp);

  clusters_ = cluster_buses(props_, working_d2_);

  history_.push_back(make_history_entry(clusters_, last_t_));
  if (const auto start = horizon_start(history_, cfg_.convergence.lambda_s); start && *start > 0) {
    history_.erase(history_.begin(), history_.begin() + static_cast<std::ptrdiff_t>(*start));
  }
  drift_ = variance_drift(history_, cfg_.convergence);

  trace_.push_back(TraceEntry{k, last_t_, props_.tau, clusters_.clusters, drift_});

  if (drift_ <= cfg_.convergence.var_rel_tol) {
    status_ = EngineStatus::converged;
  } else if (static_cast<double>(k) * dt_ >= cfg_.convergence.max_window_s) {
    status_ = EngineStatus::aborted;
  } else {
    status_ = EngineStatus::running;
  }
  return clusters_;
}

Trajectories CoherencyEngine::trajectories() const {
  Trajectories out = pre_.committed_trajectories();
  for (const auto& s : pre_.provisional_samples()) {
    for (std::size_t b = 0; b < buses_; ++b) out[b].push_back(s[b]);
  }
  return out;
}

CoherencyResult CoherencyEngine::result(std::optional<double> event_time_s) const {
  CoherencyResult r;
  r.groups = clusters_;
  for (const auto& c : clusters_.clusters) r.center_buses.push_back(c.center_bus);
  r.status = status_;
  r.converged = status_ == EngineStatus::converged;
  r.degenerate = props_.degenerate;
  r.samples = samples();
  r.sample_interval_s = dt_;
  r.window_length_s = static_cast<double>(samples()) * dt_;
  r.group_delay_samples = pre_.group_delay();
  if (event_time_s) {
    r.disturbance_offset_s = *event_time_s;
    r.window_from_event_s = (last_t_ - first_t_) - *event_time_s;
  }
  for (std::size_t b = 0; b < props_.eps.size(); ++b) {
    if (chebyshev_is_anomalous(props_.eps[b], cfg_.chebyshev)) r.anomalous_buses.push_back(b);
  }
  r.trace = trace_;
  return r;
}

CoherencyResult run(const FrameSource& source, std::size_t buses, const EngineConfig& cfg,
                    std::optional<double> event_time_s) {
  CoherencyEngine engine(buses, cfg);
  while (!engine.finished()) {
    auto frame = source();
    if (!frame) break;
    engine.step(*frame);
  }
  if (engine.status() == EngineStatus::warming_up) throw InsufficientDataError();
  return engine.result(event_time_s);
}

CoherencyResult run(std::span<const MeasurementFrame> frames, const EngineConfig& cfg,
                    std::optional<double> event_time_s) {
  if (frames.empty()) throw InsufficientDataError();
  std::size_t next = 0;
  FrameSource source = [&]() -> std::optional<MeasurementFrame> {
    if (next == frames.size()) return std::nullopt;
    return frames[next++];
  };
  return run(source, frames.front().values.size(), cfg, event_time_s);
}

}  // namespace coherency
