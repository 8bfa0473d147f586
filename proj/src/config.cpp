#include "arcstab/config.hpp"

#include <cstdio>
#include <fstream>

#include "arcstab/errors.hpp"
#include "json_util.hpp"

namespace arcstab {

using nlohmann::json;
using detail::check_keys;
using detail::read_opt;

namespace {

json band_json(const FrequencyBand& b) { return json::array({b.low_hz, b.high_hz}); }

FrequencyBand band_from(const json& j, const char* key, FrequencyBand fallback,
                        const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
    throw ConfigError(where + ": '" + key + "' must be [low_hz, high_hz]");
  }
  return {(*it)[0].get<double>(), (*it)[1].get<double>()};
}

// Re-throws validation failures as config errors so the CLI reports them
// under one code.
template <typename F>
void validated(F&& f) {
  try {
    f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

CiMethod parse_ci_method(const std::string& s) {
  if (s == "wald") return CiMethod::Wald;
  if (s == "wilson") return CiMethod::Wilson;
  throw ConfigError("eval: ci_method must be 'wald' or 'wilson'");
}

}  // namespace

json regime_params_to_json(const RegimeParams& p) {
  return {{"base_amplitude", p.base_amplitude},
          {"fundamental_hz", p.fundamental_hz},
          {"harmonic2_ratio", p.harmonic2_ratio},
          {"noise_sigma", p.noise_sigma},
          {"sample_rate", p.sample_rate},
          {"duration_s", p.duration_s},
          {"burst_band", band_json(p.burst_band)},
          {"burst_rate_min_hz", p.burst_rate_min_hz},
          {"burst_rate_max_hz", p.burst_rate_max_hz},
          {"burst_min_s", p.burst_min_s},
          {"burst_max_s", p.burst_max_s},
          {"burst_amplitude", p.burst_amplitude},
          {"burst_spread", p.burst_spread},
          {"sideband_mod_hz", p.sideband_mod_hz},
          {"modulation_depth", p.modulation_depth},
          {"instability_lambda", p.instability_lambda},
          {"clip", p.clip},
          {"clip_abs_a", p.clip_abs_a}};
}

RegimeParams regime_params_from_json(const json& j, RegimeParams p) {
  const std::string where = "generate.phases";
  check_keys(j,
             {"base_amplitude", "fundamental_hz", "harmonic2_ratio", "noise_sigma", "sample_rate",
              "duration_s", "burst_band", "burst_rate_min_hz", "burst_rate_max_hz", "burst_min_s",
              "burst_max_s", "burst_amplitude", "burst_spread", "sideband_mod_hz",
              "modulation_depth", "instability_lambda", "clip", "clip_abs_a"},
             where);
  read_opt(j, "base_amplitude", p.base_amplitude, where);
  read_opt(j, "fundamental_hz", p.fundamental_hz, where);
  read_opt(j, "harmonic2_ratio", p.harmonic2_ratio, where);
  read_opt(j, "noise_sigma", p.noise_sigma, where);
  read_opt(j, "sample_rate", p.sample_rate, where);
  read_opt(j, "duration_s", p.duration_s, where);
  p.burst_band = band_from(j, "burst_band", p.burst_band, where);
  read_opt(j, "burst_rate_min_hz", p.burst_rate_min_hz, where);
  read_opt(j, "burst_rate_max_hz", p.burst_rate_max_hz, where);
  read_opt(j, "burst_min_s", p.burst_min_s, where);
  read_opt(j, "burst_max_s", p.burst_max_s, where);
  read_opt(j, "burst_amplitude", p.burst_amplitude, where);
  read_opt(j, "burst_spread", p.burst_spread, where);
  read_opt(j, "sideband_mod_hz", p.sideband_mod_hz, where);
  read_opt(j, "modulation_depth", p.modulation_depth, where);
  read_opt(j, "instability_lambda", p.instability_lambda, where);
  read_opt(j, "clip", p.clip, where);
  read_opt(j, "clip_abs_a", p.clip_abs_a, where);
  validated([&] { p.validate(); });
  return p;
}

void RunConfig::resolve() {
  generate.seed = seed;
  generate.segmentation = pipeline.segmentation;
  train.hyperparams.seed = seed;
  eval.seed = seed;
}

void RunConfig::validate() const {
  validated([&] {
    for (const auto& p : generate.phases) p.validate();
    pipeline.validate();
    train.hyperparams.validate();
    eval.validate();
    monitor_config().validate();
  });
  if (!(train.asi_quantile >= 0.0 && train.asi_quantile <= 1.0)) {
    throw ConfigError("train: asi_quantile must lie in [0, 1]");
  }
  if (generate.windows_per_phase == 0) throw ConfigError("generate: windows_per_phase must be >= 1");
}

MonitorConfig RunConfig::monitor_config() const {
  MonitorConfig m;
  m.pipeline = pipeline;
  m.sample_rate = sample_rate();
  m.asi_threshold = monitor.asi_threshold;
  m.warmup_windows = monitor.warmup_windows;
  return m;
}

json config_to_json(const RunConfig& c) {
  json phases = json::object();
  for (auto r : kRegimes) {
    phases[std::string(regime_name(r))] = regime_params_to_json(c.generate.phases[regime_index(r)]);
  }
  json protocols = json::array();
  if (c.eval.holdout) protocols.push_back("holdout");
  if (c.eval.kfold) protocols.push_back("kfold");
  if (c.eval.loo) protocols.push_back("loo");
  json thresholds = json::object();
  if (c.eval.min_accuracy) thresholds["min_accuracy"] = *c.eval.min_accuracy;
  if (c.eval.min_macro_f1) thresholds["min_macro_f1"] = *c.eval.min_macro_f1;
  if (c.eval.min_cv_mean) thresholds["min_cv_mean"] = *c.eval.min_cv_mean;
  const auto& b = c.pipeline.bands;
  return {
      {"seed", c.seed},
      {"generate", {{"windows_per_phase", c.generate.windows_per_phase}, {"phases", phases}}},
      {"pipeline",
       {{"window_len", c.pipeline.segmentation.window_len},
        {"hop", c.pipeline.segmentation.hop},
        {"nfft", c.pipeline.nfft},
        {"fundamental_hz", b.fundamental_hz},
        {"asi_band", band_json(b.asi_band)},
        {"p100_band", band_json(b.p100_band)},
        {"her_half_width_hz", b.her_half_width_hz},
        {"thd_harmonics", b.thd_harmonics},
        {"degeneracy_eps", b.degeneracy_eps}}},
      {"train",
       {{"kind", std::string(model_kind_name(c.train.kind))},
        {"hyperparams", hyperparams_to_json(c.train.hyperparams)},
        {"asi_quantile", c.train.asi_quantile}}},
      {"eval",
       {{"protocols", protocols},
        {"test_fraction", c.eval.test_fraction},
        {"k", c.eval.k},
        {"ci_level", c.eval.ci_level},
        {"ci_method", c.eval.ci_method == CiMethod::Wald ? "wald" : "wilson"},
        {"importance_repeats", c.eval.importance_repeats},
        {"grid_search", c.eval.grid_search},
        {"thresholds", thresholds}}},
      {"monitor",
       {{"asi_threshold", c.monitor.asi_threshold ? json(*c.monitor.asi_threshold) : json(nullptr)},
        {"warmup_windows", c.monitor.warmup_windows},
        {"min_lead_windows", c.monitor.min_lead_windows}}}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  check_keys(j, {"seed", "generate", "pipeline", "train", "eval", "monitor"}, "config");
  read_opt(j, "seed", c.seed, "config");

  if (auto g = j.find("generate"); g != j.end()) {
    check_keys(*g, {"windows_per_phase", "phases"}, "generate");
    read_opt(*g, "windows_per_phase", c.generate.windows_per_phase, "generate");
    if (auto ph = g->find("phases"); ph != g->end()) {
      detail::require_object(*ph, "generate.phases");
      for (const auto& [name, params] : ph->items()) {
        Regime r;
        try {
          r = parse_regime(name);
        } catch (const InvalidArgument&) {
          throw ConfigError("generate.phases: unknown phase '" + name + "'");
        }
        auto& slot = c.generate.phases[regime_index(r)];
        slot = regime_params_from_json(params, slot);
      }
    }
  }

  if (auto p = j.find("pipeline"); p != j.end()) {
    const std::string w = "pipeline";
    check_keys(*p,
               {"window_len", "hop", "nfft", "fundamental_hz", "asi_band", "p100_band",
                "her_half_width_hz", "thd_harmonics", "degeneracy_eps"},
               w);
    auto& b = c.pipeline.bands;
    read_opt(*p, "window_len", c.pipeline.segmentation.window_len, w);
    read_opt(*p, "hop", c.pipeline.segmentation.hop, w);
    read_opt(*p, "nfft", c.pipeline.nfft, w);
    read_opt(*p, "fundamental_hz", b.fundamental_hz, w);
    b.asi_band = band_from(*p, "asi_band", b.asi_band, w);
    b.p100_band = band_from(*p, "p100_band", b.p100_band, w);
    read_opt(*p, "her_half_width_hz", b.her_half_width_hz, w);
    read_opt(*p, "thd_harmonics", b.thd_harmonics, w);
    read_opt(*p, "degeneracy_eps", b.degeneracy_eps, w);
  }

  if (auto t = j.find("train"); t != j.end()) {
    check_keys(*t, {"kind", "hyperparams", "asi_quantile"}, "train");
    if (auto k = t->find("kind"); k != t->end()) {
      if (!k->is_string()) throw ConfigError("train: kind must be a string");
      try {
        c.train.kind = parse_model_kind(k->get<std::string>());
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("train: ") + e.what());
      }
    }
    if (auto h = t->find("hyperparams"); h != t->end()) {
      c.train.hyperparams = hyperparams_from_json(*h);
    }
    read_opt(*t, "asi_quantile", c.train.asi_quantile, "train");
  }

  if (auto e = j.find("eval"); e != j.end()) {
    const std::string w = "eval";
    check_keys(*e,
               {"protocols", "test_fraction", "k", "ci_level", "ci_method", "importance_repeats",
                "grid_search", "thresholds"},
               w);
    if (auto pr = e->find("protocols"); pr != e->end()) {
      if (!pr->is_array()) throw ConfigError("eval: protocols must be an array");
      c.eval.holdout = c.eval.kfold = c.eval.loo = false;
      for (const auto& name : *pr) {
        const std::string s = name.is_string() ? name.get<std::string>() : "";
        if (s == "holdout") c.eval.holdout = true;
        else if (s == "kfold") c.eval.kfold = true;
        else if (s == "loo") c.eval.loo = true;
        else throw ConfigError("eval: unknown protocol '" + name.dump() + "'");
      }
    }
    read_opt(*e, "test_fraction", c.eval.test_fraction, w);
    read_opt(*e, "k", c.eval.k, w);
    read_opt(*e, "ci_level", c.eval.ci_level, w);
    std::string method = "wald";
    read_opt(*e, "ci_method", method, w);
    c.eval.ci_method = parse_ci_method(method);
    read_opt(*e, "importance_repeats", c.eval.importance_repeats, w);
    read_opt(*e, "grid_search", c.eval.grid_search, w);
    if (auto th = e->find("thresholds"); th != e->end()) {
      check_keys(*th, {"min_accuracy", "min_macro_f1", "min_cv_mean"}, "eval.thresholds");
      auto opt = [&](const char* key, std::optional<double>& out) {
        if (th->contains(key) && !(*th)[key].is_null()) {
          double v = 0.0;
          read_opt(*th, key, v, "eval.thresholds");
          out = v;
        }
      };
      opt("min_accuracy", c.eval.min_accuracy);
      opt("min_macro_f1", c.eval.min_macro_f1);
      opt("min_cv_mean", c.eval.min_cv_mean);
    }
  }

  if (auto m = j.find("monitor"); m != j.end()) {
    check_keys(*m, {"asi_threshold", "warmup_windows", "min_lead_windows"}, "monitor");
    if (m->contains("asi_threshold") && !(*m)["asi_threshold"].is_null()) {
      double v = 0.0;
      read_opt(*m, "asi_threshold", v, "monitor");
      c.monitor.asi_threshold = v;
    }
    read_opt(*m, "warmup_windows", c.monitor.warmup_windows, "monitor");
    read_opt(*m, "min_lead_windows", c.monitor.min_lead_windows, "monitor");
  }

  c.resolve();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(config_to_json(config).dump()); }

}  // namespace arcstab
