// coherency: generate synthetic datasets, analyze CSV files, or consume a
// line-delimited frame stream.
//
// Exit codes: 0 converged (or generate succeeded), 2 not converged within the
// data or the max-window bound, 1 usage or data error.

#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "coherency/engine.hpp"
#include "coherency/error.hpp"
#include "coherency/io.hpp"
#include "coherency/signal_gen.hpp"
#include "line_source.hpp"

namespace {

using namespace coherency;

constexpr int kExitConverged = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct EngineFlags {
  std::optional<double> nominal;
  double lambda = 0.5;
  double var_tol = 1e-2;
  std::size_t median_window = 5;
  double detrend_window = 2.0;
  double max_window = 30.0;
  double chebyshev_n = 3.0;
  bool allow_membership_changes = false;
  std::optional<double> event_time;
  std::string output;
};

void add_engine_flags(CLI::App* cmd, EngineFlags& f) {
  cmd->add_option("--nominal-freq", f.nominal, "Nominal frequency in Hz (default: sidecar or 60)");
  cmd->add_option("--lambda", f.lambda, "Stability horizon in seconds")->capture_default_str();
  cmd->add_option("--var-tol", f.var_tol, "Allowed relative variance drift over the horizon")
      ->capture_default_str();
  cmd->add_option("--median-window", f.median_window, "Despike median window (odd samples)")
      ->capture_default_str();
  cmd->add_option("--detrend-window", f.detrend_window, "Detrend moving-average window in seconds")
      ->capture_default_str();
  cmd->add_option("--max-window", f.max_window, "Give up after this many seconds of data")
      ->capture_default_str();
  cmd->add_option("--chebyshev-n", f.chebyshev_n, "Anomaly bound in standard deviations")
      ->capture_default_str();
  cmd->add_flag("--allow-membership-changes", f.allow_membership_changes,
                "Converge on variance alone, without frozen membership");
  cmd->add_option("--event-time", f.event_time, "Disturbance time in seconds from stream start");
  cmd->add_option("-o,--output", f.output, "Write the report here instead of stdout");
}

EngineConfig engine_config(const EngineFlags& f, double nominal) {
  EngineConfig cfg;
  cfg.preprocess.nominal_hz = nominal;
  cfg.preprocess.median_window = f.median_window;
  cfg.preprocess.detrend_window_s = f.detrend_window;
  cfg.convergence.lambda_s = f.lambda;
  cfg.convergence.var_rel_tol = f.var_tol;
  cfg.convergence.max_window_s = f.max_window;
  cfg.convergence.require_stable_membership = !f.allow_membership_changes;
  cfg.chebyshev = ChebyshevParams(f.chebyshev_n);
  cfg.validate();
  return cfg;
}

void emit_report(const ResultReport& rep, const std::string& path) {
  const auto text = format_report(rep);
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

int exit_code_for(const ResultReport& rep) {
  return rep.result.converged ? kExitConverged : kExitNotConverged;
}

struct GenerateFlags {
  std::string preset = "kundur2area";
  std::uint64_t seed = 0;
  std::string output;
  std::optional<std::size_t> modes;
  std::optional<double> noise;
  std::optional<double> duration;
};

int cmd_generate(const GenerateFlags& f) {
  if (f.preset != "kundur2area") throw ConfigError("unknown preset '" + f.preset + "'");
  auto cfg = kundur_preset(f.seed);
  if (f.modes) {
    if (*f.modes == 0) {
      cfg.modes.clear();
      cfg.trend.clear();
      cfg.noise_std_hz = 0.0;
    } else if (*f.modes < cfg.modes.size()) {
      cfg.modes.resize(*f.modes);
    }
  }
  if (f.noise) cfg.noise_std_hz = *f.noise;
  if (f.duration) cfg.duration_s = *f.duration;
  const auto sc = generate(cfg);
  const auto ds = dataset_from_scenario(sc);
  write_csv_file(f.output, ds);
  write_meta_file(meta_path_for(f.output),
                  DatasetMeta{cfg.nominal_hz, cfg.sample_rate_hz, cfg.event_time_s, cfg.n_buses});
  write_truth_file(truth_path_for(f.output), sc.truth, ds.bus_ids);
  return 0;
}

int cmd_analyze(const std::string& path, const EngineFlags& f) {
  std::optional<DatasetMeta> meta;
  if (std::ifstream(meta_path_for(path)).good()) meta = read_meta_file(meta_path_for(path));
  const double nominal = f.nominal.value_or(meta ? meta->nominal_hz : 60.0);
  std::optional<double> event = f.event_time;
  if (!event && meta) event = meta->event_time_s;
  const auto cfg = engine_config(f, nominal);
  const auto ds = read_csv_file(path, nominal);
  const auto rep = analyze_dataset(ds, cfg, event);
  emit_report(rep, f.output);
  return exit_code_for(rep);
}

struct StreamFlags {
  std::optional<int> port;
  std::string bind = "127.0.0.1";
  bool quiet = false;
};

int cmd_stream(const EngineFlags& f, const StreamFlags& s) {
  const double nominal = f.nominal.value_or(60.0);
  const auto cfg = engine_config(f, nominal);
  int fd = STDIN_FILENO;
  bool close_fd = false;
  if (s.port) {
    std::cerr << "listening on " << s.bind << ":" << *s.port << "\n";
    fd = tools::accept_one(s.bind, *s.port);
    close_fd = true;
  }
  auto queue = std::make_shared<tools::LineQueue>();
  tools::start_reader(fd, queue, close_fd);

  StreamSession session(cfg, nominal, f.event_time);
  while (!session.finished()) {
    auto line = queue->pop();
    if (!line) break;
    std::string warning;
    const auto outcome = session.feed_line(*line, &warning);
    if (outcome == StreamSession::Outcome::skipped) {
      std::cerr << "warning: skipped record " << session.stats().frames_read << ": " << warning
                << "\n";
      continue;
    }
    if (!s.quiet && session.started() && session.engine().status() != EngineStatus::warming_up &&
        (outcome == StreamSession::Outcome::emitted || outcome == StreamSession::Outcome::finished)) {
      const auto& eng = session.engine();
      std::fprintf(stderr, "K=%zu clusters=%zu drift=%.6g\n", eng.samples(),
                   eng.clusters().clusters.size(), eng.drift());
    }
  }
  queue->abandon();
  const auto rep = session.report();
  emit_report(rep, f.output);
  return exit_code_for(rep);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coherent-group identification from bus frequency measurements"};
  app.require_subcommand(1);
  app.set_version_flag("--version", coherency::kToolVersion);

  GenerateFlags gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic ringdown dataset");
  generate->add_option("--preset", gen.preset, "Scenario preset")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Noise seed")->capture_default_str();
  generate->add_option("-o,--output", gen.output, "CSV path; sidecars are written next to it")
      ->required();
  generate->add_option("--modes", gen.modes,
                       "Keep only the first N preset modes; 0 gives a constant-frequency dataset");
  generate->add_option("--noise-std", gen.noise, "Measurement noise standard deviation in Hz");
  generate->add_option("--duration", gen.duration, "Duration in seconds");

  EngineFlags analyze_flags;
  std::string dataset;
  auto* analyze = app.add_subcommand("analyze", "Run the coherency engine over a CSV dataset");
  analyze->add_option("dataset", dataset, "CSV file with header t,bus_<id>,...")->required();
  add_engine_flags(analyze, analyze_flags);

  EngineFlags stream_flags;
  StreamFlags stream_opts;
  auto* stream = app.add_subcommand(
      "stream", "Consume {\"t\":..,\"f\":[..]} records from stdin or a TCP connection");
  add_engine_flags(stream, stream_flags);
  stream->add_option("--listen", stream_opts.port, "Accept one TCP connection on this port");
  stream->add_option("--bind", stream_opts.bind, "Listen address")->capture_default_str();
  stream->add_flag("-q,--quiet", stream_opts.quiet, "Suppress per-frame status lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitError;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*analyze) return cmd_analyze(dataset, analyze_flags);
    if (*stream) return cmd_stream(stream_flags, stream_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
