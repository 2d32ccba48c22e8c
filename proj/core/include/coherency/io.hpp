#pragma once

// Dataset files, line-delimited frame records and JSON result reports.
//
// CSV layout: header "t,bus_<id>,...", one row per frame (timestamp in
// seconds, then one frequency in Hz per bus). Sidecars sit next to the CSV:
// "<stem>.meta.json" (nominal, sample rate, optional event time) and
// "<stem>.truth.json" (reference groups and center buses, one-based ids).
//
// Stream records: one JSON object per line, {"t": <seconds>, "f": [<Hz>...]}.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coherency/engine.hpp"
#include "coherency/signal_gen.hpp"
#include "coherency/tda.hpp"

namespace coherency {

inline constexpr const char* kToolVersion = "0.1.0";

struct CsvDataset {
  std::vector<std::size_t> bus_ids;  // from the header, in column order
  std::vector<MeasurementFrame> frames;
};

// Throws ParseError with the offending line number.
CsvDataset read_csv(std::istream& in, double nominal_hz = 60.0);
CsvDataset read_csv_file(const std::string& path, double nominal_hz = 60.0);

void write_csv(std::ostream& out, const CsvDataset& ds);
void write_csv_file(const std::string& path, const CsvDataset& ds);

struct DatasetMeta {
  double nominal_hz = 60.0;
  double sample_rate_hz = 60.0;
  std::optional<double> event_time_s;
  std::size_t n_buses = 0;

  bool operator==(const DatasetMeta&) const = default;
};

// "<dir>/k2a.csv" -> "<dir>/k2a.meta.json" / "<dir>/k2a.truth.json".
std::string meta_path_for(const std::string& csv_path);
std::string truth_path_for(const std::string& csv_path);

void write_meta_file(const std::string& path, const DatasetMeta& meta);
DatasetMeta read_meta_file(const std::string& path);

// Truth groups and centers are written with ids from bus_ids.
void write_truth_file(const std::string& path, const GroundTruth& truth,
                      const std::vector<std::size_t>& bus_ids);
GroundTruth read_truth_file(const std::string& path, const std::vector<std::size_t>& bus_ids);

// Dataset built from a scenario, with ids 1..N.
CsvDataset dataset_from_scenario(const Scenario& sc);

std::vector<std::size_t> default_bus_ids(std::size_t n);

// Throws ParseError (line 0) when the record is not a valid frame object.
MeasurementFrame parse_frame_line(std::string_view line, double nominal_hz = 60.0);
std::string format_frame_line(const MeasurementFrame& frame);

struct IngestionStats {
  std::size_t frames_read = 0;
  std::size_t skipped_frames = 0;

  bool operator==(const IngestionStats&) const = default;
};

struct ResultReport {
  std::string tool_version = kToolVersion;
  std::string created_utc;  // metadata, not part of equality
  std::vector<std::size_t> bus_ids;
  std::optional<double> event_time_s;
  EngineConfig config;
  CoherencyResult result;
  IngestionStats ingestion;  // transport detail, not part of equality

  // Compares payloads: everything except created_utc and ingestion.
  bool operator==(const ResultReport& other) const;
};

ResultReport make_report(const CoherencyResult& result, const std::vector<std::size_t>& bus_ids,
                         const EngineConfig& cfg, std::optional<double> event_time_s);

// Current UTC time, ISO 8601 with a trailing Z.
std::string utc_timestamp();

// Pretty-printed JSON document. Non-finite drift values are written as null.
std::string format_report(const ResultReport& report);
// Throws ParseError.
ResultReport parse_report(std::string_view text);

// Feeds stream records into an engine. The first accepted frame fixes the
// bus count; a later frame of a different width is a StreamShapeError.
// Records that fail to parse or are rejected by the engine's input checks are
// skipped and counted.
class StreamSession {
 public:
  enum class Outcome { warming_up, emitted, skipped, finished };

  explicit StreamSession(EngineConfig cfg, double nominal_hz = 60.0,
                         std::optional<double> event_time_s = std::nullopt);

  // `warning` receives the reason when the record is skipped.
  Outcome feed_line(std::string_view line, std::string* warning = nullptr);
  Outcome feed_frame(const MeasurementFrame& frame, std::string* warning = nullptr);

  bool finished() const { return engine_ && engine_->finished(); }
  bool started() const { return engine_.has_value(); }
  const CoherencyEngine& engine() const;
  const IngestionStats& stats() const { return stats_; }

  // Throws InsufficientDataError before the first emitted cluster set.
  ResultReport report() const;

 private:
  EngineConfig cfg_;
  double nominal_hz_;
  std::optional<double> event_time_s_;
  std::optional<CoherencyEngine> engine_;
  IngestionStats stats_;
};

// Runs the engine over an in-memory dataset, the file-side counterpart of
// StreamSession.
ResultReport analyze_dataset(const CsvDataset& ds, const EngineConfig& cfg,
                             std::optional<double> event_time_s);

}  // namespace coherency
