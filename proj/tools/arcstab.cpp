// arcstab: synth -> extract -> train -> eval, plus the streaming monitor.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "arcstab/classify.hpp"
#include "arcstab/config.hpp"
#include "arcstab/errors.hpp"
#include "arcstab/eval.hpp"
#include "arcstab/features.hpp"
#include "arcstab/monitor.hpp"
#include "arcstab/signal.hpp"
#include "arcstab/trace_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace arcstab;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string format;
};

struct Paths {
  std::string trace;
  std::string labels;
  std::string features;
  std::string model;
  std::string report;
  std::string input = "-";
  std::string input_format = "csv";
  bool all_windows = false;
  bool spectrogram = false;
};

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.resolve();
  cfg.validate();
  return cfg;
}

std::string hash_comment(const std::string& hash) { return "config_hash: " + hash; }

fs::path out_dir(const Common& c) {
  fs::path dir(c.out);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback.string() : given;
}

SignalTrace load_with_labels(const RunConfig& cfg, const std::string& trace_path,
                             const std::string& labels_path) {
  LoadOptions opt;
  opt.sample_rate = cfg.sample_rate();
  SignalTrace trace = load_trace(trace_path, trace_format_for(trace_path), opt);
  if (!labels_path.empty()) {
    trace.labels = read_labels_csv(labels_path);
  } else {
    const fs::path sibling = fs::path(trace_path).parent_path() / "labels.csv";
    if (fs::exists(sibling)) trace.labels = read_labels_csv(sibling);
  }
  return trace;
}

int cmd_synth(const Common& c) {
  const RunConfig cfg = resolve_config(c);
  const std::string hash = config_hash(cfg);
  const fs::path dir = out_dir(c);
  const SignalTrace trace = synthesize_dataset(cfg.generate);
  write_trace_csv(dir / "trace.csv", trace, hash_comment(hash));
  write_labels_csv(dir / "labels.csv", trace.labels, hash_comment(hash));

  json per_class = json::object();
  for (auto r : kRegimes) per_class[std::string(regime_name(r))] = 0;
  for (const auto& l : trace.labels) {
    per_class[std::string(regime_name(l.label))] = per_class[std::string(regime_name(l.label))].get<int>() + 1;
  }
  json spans = json::array();
  for (const auto& s : trace.spans) {
    spans.push_back({{"regime", std::string(regime_name(s.regime))}, {"start", s.start},
                     {"length", s.length}});
  }
  write_json(dir / "synth.json", {{"config_hash", hash},
                                  {"seed", cfg.seed},
                                  {"samples", trace.samples.size()},
                                  {"sample_rate", trace.sample_rate},
                                  {"labeled_windows", trace.labels.size()},
                                  {"per_class", per_class},
                                  {"spans", spans}});
  return 0;
}

int cmd_extract(const Common& c, const Paths& p) {
  const RunConfig cfg = resolve_config(c);
  const std::string hash = config_hash(cfg);
  const fs::path dir = out_dir(c);
  SignalTrace trace = load_with_labels(cfg, or_default(p.trace, dir / "trace.csv"), p.labels);
  if (trace.samples.empty()) throw EmptyInput();
  if (p.all_windows) trace.labels.clear();
  const FeaturePipeline pipeline(cfg.pipeline, trace.sample_rate);
  const auto rows = pipeline.extract_trace(trace);

  const std::string format = c.format.empty() ? "csv" : c.format;
  if (format == "csv") {
    write_feature_csv(dir / "features.csv", rows, hash_comment(hash));
  } else if (format == "json") {
    json arr = json::array();
    for (const auto& r : rows) {
      json row = {{"frame", r.frame}};
      const auto v = r.features.to_array();
      for (std::size_t i = 0; i < kFeatureCount; ++i) row[std::string(kFeatureNames[i])] = v[i];
      row["label"] = r.label ? json(std::string(regime_name(*r.label))) : json(nullptr);
      arr.push_back(row);
    }
    write_json(dir / "features.json", {{"config_hash", hash}, {"rows", arr}});
  } else {
    throw InvalidArgument("extract: --format must be csv or json");
  }

  if (p.spectrogram) {
    const auto frames = segment(trace, cfg.pipeline.segmentation);
    std::vector<PsdFrame> psds;
    psds.reserve(frames.size());
    for (const auto& f : frames) {
      psds.push_back(pipeline.psd(f.samples, pipeline.frame_time(f.start_index)));
    }
    write_spectrogram(dir / "spectrogram.csv", psds, pipeline.hop_s(), cfg.pipeline.nfft);

    const DescriptorSeries s = pipeline.descriptors(trace);
    const auto rate = s.h_s.size() >= 2 ? entropy_rate(s) : std::vector<double>{};
    std::ofstream out(dir / "descriptors.csv");
    out << "# " << hash_comment(hash) << "\ntime_s,asi,thd_arc,h_s,dh_s_dt\n";
    for (std::size_t i = 0; i < s.times_s.size(); ++i) {
      out << format_double(s.times_s[i]) << ',' << format_double(s.asi[i]) << ','
          << format_double(s.thd_arc[i]) << ',' << format_double(s.h_s[i]) << ','
          << (i > 0 ? format_double(rate[i - 1]) : "") << '\n';
    }
  }
  return 0;
}

int cmd_train(const Common& c, const Paths& p) {
  const RunConfig cfg = resolve_config(c);
  const std::string hash = config_hash(cfg);
  const fs::path dir = out_dir(c);
  const auto rows = read_feature_csv(or_default(p.features, dir / "features.csv"));
  if (rows.empty()) throw EmptyInput();
  const Dataset ds = dataset_from_rows(rows);
  TrainedModel model = train(ds, cfg.train.kind, cfg.train.hyperparams);
  model.asi_threshold = calibrate_asi_threshold(rows, Regime::Stable, cfg.train.asi_quantile);
  json j = model_to_json(model);
  j["config_hash"] = hash;
  write_json(or_default(p.model, dir / "model.json"), j);
  return 0;
}

int cmd_eval(const Common& c, const Paths& p) {
  const RunConfig cfg = resolve_config(c);
  const std::string hash = config_hash(cfg);
  const fs::path dir = out_dir(c);
  const auto rows = read_feature_csv(or_default(p.features, dir / "features.csv"));
  if (rows.empty()) throw EmptyInput();
  const Dataset ds = dataset_from_rows(rows);
  const EvalReport report = evaluate(ds, cfg.train.kind, cfg.train.hyperparams, cfg.eval);
  json j = report_to_json(report);
  j["config_hash"] = hash;
  j["config"] = config_to_json(cfg);
  write_json(or_default(p.report, dir / "report.json"), j);
  if (report.holdout) write_curve_csvs((dir / "curves").string(), report, hash_comment(hash));
  if (!report.violations.empty()) {
    std::string msg;
    for (const auto& v : report.violations) msg += (msg.empty() ? "" : "; ") + v;
    throw Error("threshold_violation", msg);
  }
  return 0;
}

// Reads samples from a CSV stream (one value per line, or time,value) or
// little-endian float32, feeding the monitor as they arrive.
template <typename Sink>
void read_stream(std::istream& in, const std::string& format, Sink sink) {
  if (format == "f32") {
    std::vector<char> buf(4096 * 4);
    std::vector<double> chunk;
    std::size_t carry = 0;
    while (in.read(buf.data() + carry, static_cast<std::streamsize>(buf.size() - carry)) ||
           in.gcount() > 0) {
      const std::size_t have = carry + static_cast<std::size_t>(in.gcount());
      const std::size_t whole = have / 4;
      chunk.resize(whole);
      for (std::size_t i = 0; i < whole; ++i) {
        unsigned char b[4];
        std::memcpy(b, buf.data() + 4 * i, 4);
        const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                   (static_cast<std::uint32_t>(b[1]) << 8) |
                                   (static_cast<std::uint32_t>(b[2]) << 16) |
                                   (static_cast<std::uint32_t>(b[3]) << 24);
        float f;
        std::memcpy(&f, &bits, 4);
        chunk[i] = f;
      }
      sink(chunk);
      carry = have - whole * 4;
      std::memmove(buf.data(), buf.data() + whole * 4, carry);
      if (!in) break;
    }
    if (carry != 0) throw FormatError("monitor: trailing partial float32 sample");
    return;
  }
  if (format != "csv") throw InvalidArgument("monitor: --input-format must be csv or f32");
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> one(1);
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.rfind(',');
    const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
    if (!seen_data && !field.empty() && std::isalpha(static_cast<unsigned char>(field[0]))) {
      continue;  // header
    }
    seen_data = true;
    one[0] = parse_double(field, line_no);
    sink(one);
  }
}

int cmd_monitor(const Common& c, const Paths& p) {
  const RunConfig cfg = resolve_config(c);
  const std::string hash = config_hash(cfg);
  const fs::path dir = c.out;
  auto model = std::make_shared<TrainedModel>(load_model(or_default(p.model, dir / "model.json")));
  const Monitor monitor(cfg.monitor_config(), model);
  MonitorState state = monitor.initial_state();

  const std::string format = c.format.empty() ? "ndjson" : c.format;
  if (format != "ndjson" && format != "json") {
    throw InvalidArgument("monitor: --format must be ndjson or json");
  }
  json all = json::array();
  auto emit = [&](const std::vector<MonitorEvent>& events) {
    for (const auto& e : events) {
      json j = event_to_json(e);
      j["config_hash"] = hash;
      if (format == "ndjson") {
        std::cout << j.dump() << '\n' << std::flush;
      } else {
        all.push_back(std::move(j));
      }
    }
  };
  auto sink = [&](const std::vector<double>& chunk) { emit(monitor.step(state, chunk)); };

  if (p.input == "-") {
    read_stream(std::cin, p.input_format, sink);
  } else {
    std::ifstream in(p.input, p.input_format == "f32" ? std::ios::binary : std::ios::in);
    if (!in) throw InvalidArgument("cannot read " + p.input);
    read_stream(in, p.input_format, sink);
  }
  if (format == "json") std::cout << json{{"config_hash", hash}, {"events", all}}.dump(2) << '\n';
  return 0;
}

std::string pct(const json& v) {
  if (!v.is_number()) return "n/a";
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(1);
  s << 100.0 * v.get<double>() << "%";
  return s.str();
}

int cmd_report(const Common& c, const Paths& p) {
  const json r = read_json(or_default(p.report, fs::path(c.out) / "report.json"));
  if (r.value("format", "") != "arcstab-report") throw FormatError("not an arcstab report");
  if (c.format == "json") {
    json copy = r;
    copy.erase("timing");
    std::cout << copy.dump(2) << '\n';
    return 0;
  }
  std::ostringstream out;
  out << "model       " << r["model"]["kind"].get<std::string>() << '\n';
  out << "config hash " << r.value("config_hash", "-") << '\n';
  const auto& d = r["dataset"];
  out << "dataset     " << d["windows"] << " windows, " << d["features"] << " features (";
  bool first = true;
  for (const auto& [k, v] : d["per_class"].items()) {
    out << (first ? "" : ", ") << k << ' ' << v;
    first = false;
  }
  out << ")\n";
  if (r.contains("holdout")) {
    const auto& h = r["holdout"];
    out << "hold-out    accuracy " << pct(h["accuracy"]) << ", CI [" << pct(h["ci"]["low"]) << ", "
        << pct(h["ci"]["high"]) << "], macro-F1 " << pct(h["macro_f1"]) << '\n';
    out << "confusion   (rows truth, cols predicted; Transient, Stable, Extinction)\n";
    for (const auto& row : h["confusion"]) out << "            " << row.dump() << '\n';
    for (const auto& [k, v] : h["roc"].items()) {
      out << "AUC " << k << std::string(12 - std::min<std::size_t>(k.size(), 11), ' ')
          << (v["auc"].is_null() ? "n/a" : v["auc"].dump()) << '\n';
    }
    if (!h["importance"].empty()) {
      out << "importance ";
      std::size_t n = 0;
      for (const auto& i : h["importance"]) {
        if (n++ == 5) break;
        out << ' ' << i["feature"].get<std::string>() << '=' << i["score"].dump();
      }
      out << '\n';
    }
  }
  for (const char* key : {"kfold", "loo"}) {
    if (!r.contains(key)) continue;
    out << key << std::string(12 - std::strlen(key), ' ') << pct(r[key]["mean"]) << " +/- "
        << pct(r[key]["std"]) << " over " << r[key]["folds"].size() << " folds\n";
  }
  if (!r["violations"].empty()) out << "violations  " << r["violations"].dump() << '\n';
  std::cout << out.str();
  return 0;
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arc stability analysis: synthesis, features, classification, monitoring"};
  app.require_subcommand(1);
  Common common;
  Paths paths;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Run config JSON");
    sub->add_option("--seed", common.seed, "Override the master seed");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--format", common.format, "Output format (csv, ndjson, json)");
  };

  auto* synth = app.add_subcommand("synth", "Generate the labeled three-phase trace");
  add_common(synth);

  auto* extract = app.add_subcommand("extract", "Trace -> feature CSV");
  add_common(extract);
  extract->add_option("--trace", paths.trace, "Trace file (CSV or WAV); default <out>/trace.csv");
  extract->add_option("--labels", paths.labels, "Window labels CSV");
  extract->add_flag("--all-windows", paths.all_windows, "Ignore labels, emit every window");
  extract->add_flag("--spectrogram", paths.spectrogram, "Also write spectrogram and descriptor CSVs");

  auto* trainc = app.add_subcommand("train", "Feature CSV -> model JSON");
  add_common(trainc);
  trainc->add_option("--features", paths.features, "Feature CSV; default <out>/features.csv");
  trainc->add_option("--model", paths.model, "Model path; default <out>/model.json");

  auto* evalc = app.add_subcommand("eval", "Feature CSV -> report JSON and curve CSVs");
  add_common(evalc);
  evalc->add_option("--features", paths.features, "Feature CSV; default <out>/features.csv");
  evalc->add_option("--report", paths.report, "Report path; default <out>/report.json");

  auto* monitorc = app.add_subcommand("monitor", "Stream samples -> NDJSON events");
  add_common(monitorc);
  monitorc->add_option("--model", paths.model, "Model JSON; default <out>/model.json");
  monitorc->add_option("--input", paths.input, "Sample source, '-' for stdin");
  monitorc->add_option("--input-format", paths.input_format, "csv or f32");

  auto* reportc = app.add_subcommand("report", "Summarize a report JSON");
  add_common(reportc);
  reportc->add_option("--report", paths.report, "Report path; default <out>/report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*extract) return cmd_extract(common, paths);
    if (*trainc) return cmd_train(common, paths);
    if (*evalc) return cmd_eval(common, paths);
    if (*monitorc) return cmd_monitor(common, paths);
    if (*reportc) return cmd_report(common, paths);
  } catch (const Error& e) {
    print_error(e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 1;
}
