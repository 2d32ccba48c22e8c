#include "coherency/io.hpp"

#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "coherency/error.hpp"
#include "json.hpp"

namespace coherency {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("not a number: '" + std::string(field) + "'", line);
  }
  return v;
}

std::size_t parse_bus_id(std::string_view name, std::size_t line) {
  name = trim(name);
  constexpr std::string_view prefix = "bus_";
  if (name.substr(0, prefix.size()) != prefix) {
    throw ParseError("column '" + std::string(name) + "' is not named bus_<id>", line);
  }
  const auto digits = name.substr(prefix.size());
  std::size_t id = 0;
  const auto* end = digits.data() + digits.size();
  const auto [ptr, ec] = std::from_chars(digits.data(), end, id);
  if (ec != std::errc() || ptr != end || digits.empty()) {
    throw ParseError("bad bus id in column '" + std::string(name) + "'", line);
  }
  return id;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::logic_error("to_chars failed");
  return std::string(buf, ptr);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

std::string stem_of(const std::string& csv_path) {
  constexpr std::string_view ext = ".csv";
  if (csv_path.size() >= ext.size() &&
      csv_path.compare(csv_path.size() - ext.size(), ext.size(), ext) == 0) {
    return csv_path.substr(0, csv_path.size() - ext.size());
  }
  return csv_path;
}

std::size_t index_of(const std::vector<std::size_t>& ids, std::size_t id) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return i;
  }
  throw ParseError("unknown bus id " + std::to_string(id), 0);
}

json ids_json(const std::vector<std::size_t>& idx, const std::vector<std::size_t>& ids) {
  json a = json::array();
  for (auto i : idx) a.push_back(ids.at(i));
  return a;
}

std::vector<std::size_t> idx_from_json(const json& a, const std::vector<std::size_t>& ids) {
  std::vector<std::size_t> out;
  for (const auto& v : a) out.push_back(index_of(ids, v.get<std::size_t>()));
  return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_inf(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

json cluster_json(const Cluster& c, const std::vector<std::size_t>& ids) {
  return json{{"seed_bus", ids.at(c.seed_bus)},
              {"members", ids_json(c.members, ids)},
              {"center_bus", ids.at(c.center_bus)},
              {"peak_tau", c.peak_tau},
              {"spread_sigma", c.spread_sigma},
              {"tau_variance", c.tau_variance}};
}

Cluster cluster_from(const json& j, const std::vector<std::size_t>& ids) {
  Cluster c;
  c.seed_bus = index_of(ids, j.at("seed_bus").get<std::size_t>());
  c.members = idx_from_json(j.at("members"), ids);
  c.center_bus = index_of(ids, j.at("center_bus").get<std::size_t>());
  c.peak_tau = j.at("peak_tau").get<double>();
  c.spread_sigma = j.at("spread_sigma").get<double>();
  c.tau_variance = j.at("tau_variance").get<double>();
  return c;
}

json config_json(const EngineConfig& cfg) {
  return json{{"median_window", cfg.preprocess.median_window},
              {"nominal_hz", cfg.preprocess.nominal_hz},
              {"detrend_window_s", cfg.preprocess.detrend_window_s},
              {"warmup_min_samples", cfg.preprocess.warmup_min_samples},
              {"lambda_s", cfg.convergence.lambda_s},
              {"var_rel_tol", cfg.convergence.var_rel_tol},
              {"require_stable_membership", cfg.convergence.require_stable_membership},
              {"max_window_s", cfg.convergence.max_window_s},
              {"chebyshev_n", cfg.chebyshev.n()},
              {"refresh_interval", cfg.refresh_interval}};
}

EngineConfig config_from(const json& j) {
  EngineConfig cfg;
  cfg.preprocess.median_window = j.at("median_window").get<std::size_t>();
  cfg.preprocess.nominal_hz = j.at("nominal_hz").get<double>();
  cfg.preprocess.detrend_window_s = j.at("detrend_window_s").get<double>();
  cfg.preprocess.warmup_min_samples = j.at("warmup_min_samples").get<std::size_t>();
  cfg.convergence.lambda_s = j.at("lambda_s").get<double>();
  cfg.convergence.var_rel_tol = j.at("var_rel_tol").get<double>();
  cfg.convergence.require_stable_membership = j.at("require_stable_membership").get<bool>();
  cfg.convergence.max_window_s = j.at("max_window_s").get<double>();
  cfg.chebyshev = ChebyshevParams(j.at("chebyshev_n").get<double>());
  cfg.refresh_interval = j.at("refresh_interval").get<std::size_t>();
  return cfg;
}

json report_json(const ResultReport& rep) {
  const auto& ids = rep.bus_ids;
  const auto& r = rep.result;
  json groups = json::array();
  json clusters = json::array();
  for (const auto& c : r.groups.clusters) {
    groups.push_back(ids_json(c.members, ids));
    clusters.push_back(cluster_json(c, ids));
  }

  json k = json::array(), t = json::array(), tau = json::array(), drift = json::array();
  json tc = json::array();
  for (const auto& e : r.trace) {
    k.push_back(e.k);
    t.push_back(e.timestamp);
    tau.push_back(e.tau);
    drift.push_back(finite_or_null(e.drift));
    json cs = json::array();
    for (const auto& c : e.clusters) cs.push_back(cluster_json(c, ids));
    tc.push_back(std::move(cs));
  }

  return json{
      {"tool_version", rep.tool_version},
      {"created_utc", rep.created_utc},
      {"converged", r.converged},
      {"status", to_string(r.status)},
      {"groups", groups},
      {"center_buses", ids_json(r.center_buses, ids)},
      {"window_length_s", r.window_length_s},
      {"window_from_event_s", optional_json(r.window_from_event_s)},
      {"event_time_s", optional_json(rep.event_time_s)},
      {"disturbance_offset_s", optional_json(r.disturbance_offset_s)},
      {"samples", r.samples},
      {"iteration_k", r.groups.iteration_k},
      {"sample_interval_s", r.sample_interval_s},
      {"group_delay_samples", r.group_delay_samples},
      {"degenerate", r.degenerate},
      {"anomalous_buses", ids_json(r.anomalous_buses, ids)},
      {"bus_ids", ids},
      {"clusters", clusters},
      {"trace", json{{"k", k}, {"t", t}, {"tau", tau}, {"max_variance_drift", drift}, {"clusters", tc}}},
      {"config", config_json(rep.config)},
      {"ingestion", json{{"frames_read", rep.ingestion.frames_read},
                         {"skipped_frames", rep.ingestion.skipped_frames}}},
  };
}

ResultReport report_from(const json& j) {
  ResultReport rep;
  rep.tool_version = j.at("tool_version").get<std::string>();
  rep.created_utc = j.at("created_utc").get<std::string>();
  rep.bus_ids = j.at("bus_ids").get<std::vector<std::size_t>>();
  const auto& ids = rep.bus_ids;
  rep.event_time_s = optional_from(j.at("event_time_s"));
  rep.config = config_from(j.at("config"));

  auto& r = rep.result;
  r.converged = j.at("converged").get<bool>();
  r.status = engine_status_from_string(j.at("status").get<std::string>());
  for (const auto& c : j.at("clusters")) r.groups.clusters.push_back(cluster_from(c, ids));
  r.groups.iteration_k = j.at("iteration_k").get<std::size_t>();
  r.center_buses = idx_from_json(j.at("center_buses"), ids);
  r.window_length_s = j.at("window_length_s").get<double>();
  r.window_from_event_s = optional_from(j.at("window_from_event_s"));
  r.disturbance_offset_s = optional_from(j.at("disturbance_offset_s"));
  r.samples = j.at("samples").get<std::size_t>();
  r.sample_interval_s = j.at("sample_interval_s").get<double>();
  r.group_delay_samples = j.at("group_delay_samples").get<std::size_t>();
  r.degenerate = j.at("degenerate").get<bool>();
  r.anomalous_buses = idx_from_json(j.at("anomalous_buses"), ids);

  const auto& tr = j.at("trace");
  const auto& k = tr.at("k");
  for (std::size_t i = 0; i < k.size(); ++i) {
    TraceEntry e;
    e.k = k[i].get<std::size_t>();
    e.timestamp = tr.at("t")[i].get<double>();
    e.tau = tr.at("tau")[i].get<std::vector<double>>();
    e.drift = number_or_inf(tr.at("max_variance_drift")[i]);
    for (const auto& c : tr.at("clusters")[i]) e.clusters.push_back(cluster_from(c, ids));
    r.trace.push_back(std::move(e));
  }

  const auto& ing = j.at("ingestion");
  rep.ingestion.frames_read = ing.at("frames_read").get<std::size_t>();
  rep.ingestion.skipped_frames = ing.at("skipped_frames").get<std::size_t>();
  return rep;
}

}  // namespace

CsvDataset read_csv(std::istream& in, double nominal_hz) {
  CsvDataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto fields = split(body, ',');
    if (!have_header) {
      if (trim(fields.front()) != "t") throw ParseError("header must start with 't'", line_no);
      for (std::size_t c = 1; c < fields.size(); ++c) {
        const auto id = parse_bus_id(fields[c], line_no);
        for (auto other : ds.bus_ids) {
          if (other == id) throw ParseError("duplicate bus id " + std::to_string(id), line_no);
        }
        ds.bus_ids.push_back(id);
      }
      if (ds.bus_ids.size() < 2) throw ParseError("need at least two bus columns", line_no);
      have_header = true;
      continue;
    }
    if (fields.size() != ds.bus_ids.size() + 1) {
      throw ParseError("expected " + std::to_string(ds.bus_ids.size() + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    MeasurementFrame f;
    f.nominal = nominal_hz;
    f.timestamp = parse_double(fields[0], line_no);
    if (!std::isfinite(f.timestamp)) throw ParseError("non-finite timestamp", line_no);
    if (!ds.frames.empty() && !(f.timestamp > ds.frames.back().timestamp)) {
      throw ParseError("timestamp does not increase", line_no);
    }
    f.values.reserve(ds.bus_ids.size());
    for (std::size_t c = 1; c < fields.size(); ++c) f.values.push_back(parse_double(fields[c], line_no));
    ds.frames.push_back(std::move(f));
  }
  if (!have_header) throw ParseError("missing header", line_no);
  return ds;
}

CsvDataset read_csv_file(const std::string& path, double nominal_hz) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_csv(in, nominal_hz);
}

void write_csv(std::ostream& out, const CsvDataset& ds) {
  std::string text = "t";
  for (auto id : ds.bus_ids) text += ",bus_" + std::to_string(id);
  text += '\n';
  for (const auto& f : ds.frames) {
    if (f.values.size() != ds.bus_ids.size()) throw StreamShapeError("frame width differs from header");
    text += format_double(f.timestamp);
    for (double v : f.values) {
      text += ',';
      text += format_double(v);
    }
    text += '\n';
  }
  out << text;
}

void write_csv_file(const std::string& path, const CsvDataset& ds) {
  std::ostringstream s;
  write_csv(s, ds);
  write_text_file(path, s.str());
}

std::string meta_path_for(const std::string& csv_path) { return stem_of(csv_path) + ".meta.json"; }
std::string truth_path_for(const std::string& csv_path) { return stem_of(csv_path) + ".truth.json"; }

void write_meta_file(const std::string& path, const DatasetMeta& meta) {
  const json j{{"nominal_hz", meta.nominal_hz},
               {"sample_rate_hz", meta.sample_rate_hz},
               {"event_time_s", optional_json(meta.event_time_s)},
               {"n_buses", meta.n_buses}};
  write_text_file(path, j.dump(2) + "\n");
}

DatasetMeta read_meta_file(const std::string& path) {
  const auto j = read_json_file(path);
  try {
    DatasetMeta m;
    m.nominal_hz = j.at("nominal_hz").get<double>();
    m.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    if (j.contains("event_time_s")) m.event_time_s = optional_from(j.at("event_time_s"));
    if (j.contains("n_buses")) m.n_buses = j.at("n_buses").get<std::size_t>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void write_truth_file(const std::string& path, const GroundTruth& truth,
                      const std::vector<std::size_t>& bus_ids) {
  json groups = json::array();
  for (const auto& g : truth.groups) groups.push_back(ids_json(g, bus_ids));
  const json j{{"groups", groups}, {"center_buses", ids_json(truth.center_buses, bus_ids)}};
  write_text_file(path, j.dump(2) + "\n");
}

GroundTruth read_truth_file(const std::string& path, const std::vector<std::size_t>& bus_ids) {
  const auto j = read_json_file(path);
  try {
    GroundTruth gt;
    for (const auto& g : j.at("groups")) gt.groups.push_back(idx_from_json(g, bus_ids));
    gt.center_buses = idx_from_json(j.at("center_buses"), bus_ids);
    return gt;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

std::vector<std::size_t> default_bus_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i + 1;
  return ids;
}

CsvDataset dataset_from_scenario(const Scenario& sc) {
  CsvDataset ds;
  ds.frames = sc.frames;
  ds.bus_ids = default_bus_ids(sc.frames.empty() ? 0 : sc.frames.front().values.size());
  return ds;
}

MeasurementFrame parse_frame_line(std::string_view line, double nominal_hz) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception&) {
    throw ParseError("record is not valid JSON", 0);
  }
  if (!j.is_object() || !j.contains("t") || !j.contains("f")) {
    throw ParseError("record needs keys 't' and 'f'", 0);
  }
  const auto& t = j.at("t");
  const auto& f = j.at("f");
  if (!t.is_number() || !f.is_array()) throw ParseError("'t' must be a number and 'f' an array", 0);
  MeasurementFrame frame;
  frame.nominal = nominal_hz;
  frame.timestamp = t.get<double>();
  frame.values.reserve(f.size());
  for (const auto& v : f) {
    if (!v.is_number()) throw ParseError("'f' entries must be numbers", 0);
    frame.values.push_back(v.get<double>());
  }
  return frame;
}

std::string format_frame_line(const MeasurementFrame& frame) {
  std::string s = "{\"t\":" + format_double(frame.timestamp) + ",\"f\":[";
  for (std::size_t i = 0; i < frame.values.size(); ++i) {
    if (i) s += ',';
    s += format_double(frame.values[i]);
  }
  s += "]}";
  return s;
}

bool ResultReport::operator==(const ResultReport& other) const {
  return tool_version == other.tool_version && bus_ids == other.bus_ids &&
         event_time_s == other.event_time_s && config == other.config && result == other.result;
}

ResultReport make_report(const CoherencyResult& result, const std::vector<std::size_t>& bus_ids,
                         const EngineConfig& cfg, std::optional<double> event_time_s) {
  ResultReport rep;
  rep.created_utc = utc_timestamp();
  rep.bus_ids = bus_ids;
  rep.event_time_s = event_time_s;
  rep.config = cfg;
  rep.result = result;
  return rep;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_report(const ResultReport& report) { return report_json(report).dump(2) + "\n"; }

ResultReport parse_report(std::string_view text) {
  try {
    return report_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what(), 0);
  }
}

StreamSession::StreamSession(EngineConfig cfg, double nominal_hz, std::optional<double> event_time_s)
    : cfg_(cfg), nominal_hz_(nominal_hz), event_time_s_(event_time_s) {
  cfg_.validate();
}

const CoherencyEngine& StreamSession::engine() const {
  if (!engine_) throw InsufficientDataError("no frames received");
  return *engine_;
}

StreamSession::Outcome StreamSession::feed_line(std::string_view line, std::string* warning) {
  if (trim(line).empty()) return engine_ && engine_->status() != EngineStatus::warming_up
                                     ? Outcome::emitted
                                     : Outcome::warming_up;
  MeasurementFrame frame;
  try {
    frame = parse_frame_line(line, nominal_hz_);
  } catch (const ParseError& e) {
    ++stats_.frames_read;
    ++stats_.skipped_frames;
    if (warning) *warning = e.what();
    return Outcome::skipped;
  }
  return feed_frame(frame, warning);
}

StreamSession::Outcome StreamSession::feed_frame(const MeasurementFrame& frame, std::string* warning) {
  if (finished()) return Outcome::finished;
  ++stats_.frames_read;
  if (!engine_) {
    if (frame.values.size() < 2) {
      ++stats_.skipped_frames;
      if (warning) *warning = "frame needs at least two values";
      return Outcome::skipped;
    }
    engine_.emplace(frame.values.size(), cfg_);
  }
  if (frame.values.size() != engine_->buses()) {
    throw StreamShapeError("stream width changed from " + std::to_string(engine_->buses()) + " to " +
                           std::to_string(frame.values.size()) + " values");
  }
  try {
    const auto out = engine_->step(frame);
    if (engine_->finished()) return Outcome::finished;
    return out ? Outcome::emitted : Outcome::warming_up;
  } catch (const InputQualityError& e) {
    ++stats_.skipped_frames;
    if (warning) *warning = e.what();
    return Outcome::skipped;
  }
}

ResultReport StreamSession::report() const {
  if (!engine_ || engine_->status() == EngineStatus::warming_up) throw InsufficientDataError();
  auto rep = make_report(engine_->result(event_time_s_), default_bus_ids(engine_->buses()), cfg_,
                         event_time_s_);
  rep.ingestion = stats_;
  return rep;
}

ResultReport analyze_dataset(const CsvDataset& ds, const EngineConfig& cfg,
                             std::optional<double> event_time_s) {
  auto result = run(ds.frames, cfg, event_time_s);
  auto rep = make_report(result, ds.bus_ids, cfg, event_time_s);
  rep.ingestion.frames_read = result.samples;
  return rep;
}

}  // namespace coherency
