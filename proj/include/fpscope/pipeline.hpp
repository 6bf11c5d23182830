#pragma once

// End-to-end run: ingest -> resolve -> taint -> coflow/classify -> match ->
// stats, with a key/value config file and atomically written reports.

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fpscope/coflow.hpp"
#include "fpscope/depgraph.hpp"
#include "fpscope/error.hpp"
#include "fpscope/hash.hpp"
#include "fpscope/ingest.hpp"
#include "fpscope/ir.hpp"
#include "fpscope/sdkmatch.hpp"
#include "fpscope/stats.hpp"
#include "fpscope/taint.hpp"

namespace fpscope::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

enum class OutputFormat : std::uint8_t { kJson, kCsv };

struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path manifests;
  std::filesystem::path apps;
  std::filesystem::path app_code;
  std::filesystem::path labels;
  std::filesystem::path signal_map;
  std::filesystem::path taint_config;
  std::filesystem::path rule;
  std::filesystem::path ratings;  // optional
  std::filesystem::path out;

  double eta = 0.2;
  double gamma = 0.55;
  std::optional<int> threshold;  // defaults to the rule's minDistinctSources
  int context_depth = 1;
  std::int64_t min_audience = static_cast<std::int64_t>(ingest::kDefaultMinAudience);
  std::int64_t top_k = static_cast<std::int64_t>(stats::kDefaultTopK);
  taint::SourceScope scope = taint::SourceScope::kMainOnly;
  OutputFormat format = OutputFormat::kJson;
  int jobs = 1;
  bool timings = false;

  std::string source;                          // config file, for messages
  std::filesystem::path base;                  // relative paths resolve here
  std::map<std::string, std::size_t> lines;    // key -> line it was set on

  std::string where(const std::string& key) const {
    auto it = lines.find(key);
    std::string out = source.empty() ? std::string("config") : source;
    if (it != lines.end() && it->second > 0) out += ":" + std::to_string(it->second);
    return out + ": " + key;
  }
};

inline constexpr std::array<std::string_view, 20> kConfigKeys{
    "corpus", "manifests", "apps",  "appCode",      "labels",      "signalMap", "taintConfig",
    "rule",   "ratings",   "out",   "eta",          "gamma",       "threshold", "contextDepth",
    "minAudience", "topK", "scope", "format",       "jobs",        "timings"};

namespace detail {

inline double to_double(const std::string& key, const std::string& v, const PipelineConfig& c) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(c.where(key) + ": expected a number, got '" + v + "'");
  }
}

inline std::int64_t to_int(const std::string& key, const std::string& v, const PipelineConfig& c) {
  try {
    std::size_t used = 0;
    long long n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError(c.where(key) + ": expected an integer, got '" + v + "'");
  }
}

inline std::filesystem::path to_path(const std::string& v, const PipelineConfig& c) {
  std::filesystem::path p(v);
  return p.is_absolute() || c.base.empty() ? p : c.base / p;
}

}  // namespace detail

// Sets one key from its textual value. `line` is 0 for command-line overrides.
inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value,
                          std::size_t line = 0) {
  c.lines[key] = line;
  if (key == "corpus") c.corpus = detail::to_path(value, c);
  else if (key == "manifests") c.manifests = detail::to_path(value, c);
  else if (key == "apps") c.apps = detail::to_path(value, c);
  else if (key == "appCode") c.app_code = detail::to_path(value, c);
  else if (key == "labels") c.labels = detail::to_path(value, c);
  else if (key == "signalMap") c.signal_map = detail::to_path(value, c);
  else if (key == "taintConfig") c.taint_config = detail::to_path(value, c);
  else if (key == "rule") c.rule = detail::to_path(value, c);
  else if (key == "ratings") c.ratings = value.empty() ? std::filesystem::path() : detail::to_path(value, c);
  else if (key == "out") c.out = detail::to_path(value, c);
  else if (key == "eta") c.eta = detail::to_double(key, value, c);
  else if (key == "gamma") c.gamma = detail::to_double(key, value, c);
  else if (key == "threshold") c.threshold = static_cast<int>(detail::to_int(key, value, c));
  else if (key == "contextDepth") c.context_depth = static_cast<int>(detail::to_int(key, value, c));
  else if (key == "minAudience") c.min_audience = detail::to_int(key, value, c);
  else if (key == "topK") c.top_k = detail::to_int(key, value, c);
  else if (key == "jobs") c.jobs = static_cast<int>(detail::to_int(key, value, c));
  else if (key == "scope") {
    if (value == "main-only") c.scope = taint::SourceScope::kMainOnly;
    else if (value == "bundle") c.scope = taint::SourceScope::kWholeBundle;
    else throw ConfigError(c.where(key) + ": expected main-only or bundle, got '" + value + "'");
  } else if (key == "format") {
    if (value == "json") c.format = OutputFormat::kJson;
    else if (value == "csv") c.format = OutputFormat::kCsv;
    else throw ConfigError(c.where(key) + ": expected json or csv, got '" + value + "'");
  } else if (key == "timings") {
    if (value == "true") c.timings = true;
    else if (value == "false") c.timings = false;
    else throw ConfigError(c.where(key) + ": expected true or false, got '" + value + "'");
  } else {
    c.lines.erase(key);
    throw ConfigError((c.source.empty() ? std::string("config") : c.source) +
                      (line ? ":" + std::to_string(line) : std::string()) + ": unknown key '" +
                      key + "'");
  }
}

// `key = value` lines; values are "quoted strings", numbers or true/false.
// '#' starts a comment outside of quotes.
inline PipelineConfig parse_config(std::string_view text, const std::string& source = {},
                                   const std::filesystem::path& base = {}) {
  PipelineConfig c;
  c.source = source;
  c.base = base;
  std::set<std::string> seen;
  std::size_t lineno = 0, pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto fail = [&](const std::string& msg, std::size_t col) -> void {
      throw ConfigError((source.empty() ? std::string("config") : source) + ":" +
                        std::to_string(lineno) + ":" + std::to_string(col) + ": " + msg);
    };
    std::size_t i = line.find_first_not_of(" \t");
    if (i == std::string_view::npos || line[i] == '#') {
      if (nl == text.size()) break;
      continue;
    }
    std::size_t k = i;
    while (k < line.size() && (std::isalnum(static_cast<unsigned char>(line[k])) || line[k] == '_'))
      ++k;
    const std::string key(line.substr(i, k - i));
    if (key.empty()) fail("expected a key", i + 1);
    std::size_t eq = line.find_first_not_of(" \t", k);
    if (eq == std::string_view::npos || line[eq] != '=') fail("expected '=' after key", k + 1);
    std::size_t v = line.find_first_not_of(" \t", eq + 1);
    if (v == std::string_view::npos) fail("missing value", eq + 2);
    std::string value;
    std::size_t end;
    if (line[v] == '"') {
      end = v + 1;
      bool closed = false;
      while (end < line.size()) {
        char ch = line[end++];
        if (ch == '"') {
          closed = true;
          break;
        }
        if (ch == '\\' && end < line.size()) ch = line[end++];
        value.push_back(ch);
      }
      if (!closed) fail("unterminated string", v + 1);
    } else {
      end = v;
      while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '#') ++end;
      value = std::string(line.substr(v, end - v));
    }
    std::size_t rest = line.find_first_not_of(" \t", end);
    if (rest != std::string_view::npos && line[rest] != '#') fail("unexpected text after value", rest + 1);
    if (!seen.insert(key).second) fail("duplicate key '" + key + "'", i + 1);
    apply_setting(c, key, value, lineno);
    if (nl == text.size()) break;
  }
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path))
    throw ConfigError("config file not found: " + path.string());
  return parse_config(ingest::read_file(path), path.string(), path.parent_path());
}

// Range and existence checks; runs before any stage.
inline void validate(const PipelineConfig& c) {
  try {
    match::check_thresholds(c.eta, c.gamma);
  } catch (const ConfigError& e) {
    throw ConfigError(c.where(c.eta > 0.0 && c.eta <= 1.0 ? "gamma" : "eta") + ": " + e.what());
  }
  if (c.threshold && *c.threshold <= 0) throw ConfigError(c.where("threshold") + ": must be positive");
  if (c.context_depth < 0 || c.context_depth > 2)
    throw ConfigError(c.where("contextDepth") + ": must be within 0..2");
  if (c.min_audience < 0) throw ConfigError(c.where("minAudience") + ": must be non-negative");
  if (c.top_k < 1) throw ConfigError(c.where("topK") + ": must be at least 1");
  if (c.jobs < 1) throw ConfigError(c.where("jobs") + ": must be at least 1");

  auto require = [&](const std::string& key, const std::filesystem::path& p, bool dir) {
    if (p.empty()) throw ConfigError(c.where(key) + ": required path is not set");
    const bool ok = dir ? std::filesystem::is_directory(p) : std::filesystem::is_regular_file(p);
    if (!ok) throw ConfigError(c.where(key) + ": " + (dir ? "directory" : "file") + " not found: " + p.string());
  };
  require("corpus", c.corpus, true);
  require("manifests", c.manifests, true);
  require("apps", c.apps, false);
  require("appCode", c.app_code, true);
  require("labels", c.labels, false);
  require("signalMap", c.signal_map, false);
  require("taintConfig", c.taint_config, false);
  require("rule", c.rule, false);
  if (!c.ratings.empty()) require("ratings", c.ratings, false);
  if (c.out.empty()) throw ConfigError(c.where("out") + ": required path is not set");
}

// ---------------------------------------------------------------------------
// Helpers

// Runs fn(i) for i in [0, n) on up to `jobs` threads. If any call throws,
// the exception of the lowest index is rethrown after all workers finish.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Writes through a temporary sibling and renames it into place.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw AnalysisError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return out;
}

inline std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                                     std::string_view ext) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Content digest of a file, or of a directory's sorted file names and contents.
inline std::string digest_input(const std::filesystem::path& p) {
  Fnv1a64 h;
  if (std::filesystem::is_directory(p)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      h.update(std::filesystem::relative(f, p).generic_string());
      h.update(ingest::read_file(f));
    }
  } else {
    h.update(ingest::read_file(p));
  }
  return hex64(h.digest());
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Prefixes the stage name while keeping the error category.
template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError("stage " + stage + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + stage + ": " + e.what());
  } catch (const AnalysisError& e) {
    throw AnalysisError("stage " + stage + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("stage " + stage + ": " + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw AnalysisError("stage " + stage + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Stages

struct Corpus {
  std::vector<ir::SdkIR> all;         // every parsed IR file
  std::vector<SdkCoordinate> kept;    // after the version filter
  std::vector<SdkCoordinate> excluded;
};

inline Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus c;
  std::set<SdkCoordinate> seen;
  for (const auto& f : list_files(dir, ".ir")) {
    try {
      c.all.push_back(ir::parse_ir(ingest::read_file(f)));
    } catch (const ParseError& e) {
      throw ParseError(e.message(), e.line(), e.column(), f.string());
    }
    if (!seen.insert(c.all.back().coordinate).second)
      throw ParseError("SDK " + c.all.back().coordinate.str() + " appears in two corpus files", 0, 0,
                       f.string());
  }
  if (c.all.empty()) throw ConfigError("corpus directory has no .ir files: " + dir.string());
  std::sort(c.all.begin(), c.all.end(),
            [](const ir::SdkIR& a, const ir::SdkIR& b) { return a.coordinate < b.coordinate; });
  std::vector<SdkCoordinate> coords;
  for (const auto& s : c.all) coords.push_back(s.coordinate);
  c.kept = ingest::filter_sdk_versions(coords);
  for (const auto& s : coords)
    if (!std::binary_search(c.kept.begin(), c.kept.end(), s)) c.excluded.push_back(s);
  return c;
}

struct RunResult {
  std::vector<std::string> files;  // written, relative to out, sorted
  nlohmann::json manifest;
};

inline RunResult run_pipeline(const PipelineConfig& cfg) {
  validate(cfg);
  using Clock = std::chrono::steady_clock;
  std::map<std::string, double> timings;
  std::set<std::string> written;
  auto emit = [&](const std::string& rel, std::string_view content) {
    write_atomic(cfg.out / rel, content);
    written.insert(rel);
  };
  auto timed = [&](const std::string& stage, auto&& fn) {
    const auto t0 = Clock::now();
    in_stage(stage, fn);
    timings[stage] = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };
  std::filesystem::create_directories(cfg.out);

  // ingest
  std::vector<ingest::AppRecord> apps;
  std::map<SdkCoordinate, ingest::LabelAssignment> labels;
  ingest::SignalClassMap signal_map;
  Corpus corpus;
  taint::TaintConfig taint_config;
  coflow::CoFlowRule rule;
  timed("ingest", [&] {
    const auto all_apps = ingest::parse_apps_jsonl(ingest::read_file(cfg.apps), cfg.apps.string());
    apps = ingest::filter_apps(all_apps, static_cast<std::uint64_t>(cfg.min_audience));
    labels = ingest::parse_labels_csv(ingest::read_file(cfg.labels), cfg.labels.string());
    signal_map = ingest::parse_signal_map_csv(ingest::read_file(cfg.signal_map), cfg.signal_map.string());
    taint_config = taint::parse_taint_config_json(ingest::read_file(cfg.taint_config), cfg.taint_config.string());
    rule = coflow::parse_rule_json(ingest::read_file(cfg.rule), cfg.rule.string());
    corpus = load_corpus(cfg.corpus);

    nlohmann::json j;
    j["appsTotal"] = all_apps.size();
    j["appsKept"] = apps.size();
    j["minAudience"] = cfg.min_audience;
    j["marketReach"] = ingest::market_reach(apps);
    j["sdkVersionsTotal"] = corpus.all.size();
    j["sdkVersionsKept"] = corpus.kept.size();
    j["excludedVersions"] = nlohmann::json::array();
    for (const auto& c : corpus.excluded) j["excludedVersions"].push_back(c.str());
    emit("ingest.json", dump(j));
  });

  // resolve
  std::vector<dep::ResolvedBundle> bundles;
  timed("resolve", [&] {
    auto manifests = dep::load_manifests(cfg.manifests);
    std::set<SdkCoordinate> have;
    for (const auto& m : manifests) have.insert(m.coordinate);
    for (const auto& s : corpus.all)
      if (!have.contains(s.coordinate)) manifests.push_back(dep::Manifest{s.coordinate, {}});
    const auto graph = dep::build_graph(manifests);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& main : corpus.kept) {
      bundles.push_back(dep::resolve(graph, main));
      j.push_back(dep::bundle_to_json(bundles.back()));
    }
    emit("bundles.json", dump(j));
  });

  // taint
  std::vector<taint::TaintResult> taint_results(bundles.size());
  timed("taint", [&] {
    taint::CodeMap code;
    for (const auto& s : corpus.all) code.emplace(s.coordinate, s);
    taint::AnalysisOptions opts;
    opts.scope = cfg.scope;
    opts.context_depth = cfg.context_depth;
    parallel_for(bundles.size(), cfg.jobs, [&](std::size_t i) {
      taint_results[i] = taint::analyze(bundles[i], code, taint_config, opts);
    });
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      nlohmann::json e;
      e["sdk"] = bundles[i].main.str();
      e["findings"] = nlohmann::json::array();
      for (const auto& f : taint_results[i].findings) e["findings"].push_back(taint::finding_to_json(f));
      e["diagnostics"] = taint_results[i].diagnostics;
      j.push_back(std::move(e));
    }
    emit("taint.json", dump(j));
  });

  // coflow + classify
  stats::Verdicts verdicts;
  const int threshold = cfg.threshold.value_or(rule.min_distinct_sources);
  timed("classify", [&] {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      auto found = coflow::detect(taint_results[i].graph, taint_results[i].findings, rule);
      auto v = coflow::classify(bundles[i].main, std::move(found), threshold);
      j.push_back(coflow::verdict_to_json(v));
      verdicts.emplace(v.sdk, std::move(v));
    }
    emit("verdicts.json", dump(j));
  });

  // match
  stats::AppSdks app_sdks;
  timed("match", [&] {
    std::vector<ir::SdkIR> indexed;
    for (const auto& s : corpus.all)
      if (std::binary_search(corpus.kept.begin(), corpus.kept.end(), s.coordinate)) indexed.push_back(s);
    const auto weights = match::compute_weights(indexed);
    const auto index = match::build_index(indexed, weights);
    emit("index.bin", index.serialize());

    std::vector<ir::SdkIR> app_code(apps.size());
    std::vector<match::MatchReport> reports(apps.size());
    for (std::size_t i = 0; i < apps.size(); ++i) {
      const auto path = cfg.app_code / (apps[i].app_id + ".ir");
      if (!std::filesystem::is_regular_file(path))
        throw ConfigError("no code for app '" + apps[i].app_id + "': " + path.string());
      try {
        app_code[i] = ir::parse_ir(ingest::read_file(path));
      } catch (const ParseError& e) {
        throw ParseError(e.message(), e.line(), e.column(), path.string());
      }
    }
    parallel_for(apps.size(), cfg.jobs, [&](std::size_t i) {
      reports[i] = match::match(app_code[i], index, weights, cfg.eta, cfg.gamma);
      reports[i].app_id = apps[i].app_id;
    });
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < apps.size(); ++i) {
      const auto accepted = reports[i].accepted();
      app_sdks[apps[i].app_id] = std::set<SdkCoordinate>(accepted.begin(), accepted.end());
      auto r = match::report_to_json(reports[i], index);
      if (apps[i].declared_sdks) {
        std::set<SdkCoordinate> truth(apps[i].declared_sdks->begin(), apps[i].declared_sdks->end());
        std::size_t tp = 0;
        for (const auto& c : accepted) tp += truth.contains(c) ? 1 : 0;
        r["declared"] = {{"truePositives", tp},
                         {"falsePositives", accepted.size() - tp},
                         {"falseNegatives", truth.size() - tp}};
      }
      j.push_back(std::move(r));
    }
    emit("matches.json", dump(j));
  });

  // stats
  std::vector<std::string> stats_notes;
  timed("stats", [&] {
    const bool csv = cfg.format == OutputFormat::kCsv;
    const auto prev = stats::prevalence(apps, app_sdks, verdicts, labels);
    emit(csv ? "stats/prevalence.csv" : "stats/prevalence.json",
         csv ? stats::prevalence_to_csv(prev) : dump(stats::prevalence_to_json(prev)));
    const auto co = stats::cooccurrence(apps, app_sdks, verdicts, static_cast<std::size_t>(cfg.top_k));
    emit(csv ? "stats/cooccurrence.csv" : "stats/cooccurrence.json",
         csv ? stats::cooccurrence_to_csv(co) : dump(stats::cooccurrence_to_json(co)));
    const auto shares = stats::sensitive_signal_shares(verdicts, signal_map);
    if (csv) {
      std::string s = "class,sdks,share\n";
      for (const auto& [k, n] : shares.counts)
        s += k + "," + std::to_string(n) + "," + stats::format_number(shares.shares.at(k)) + "\n";
      emit("stats/signals.csv", s);
    } else {
      emit("stats/signals.json", dump(stats::shares_to_json(shares)));
    }
    if (!cfg.ratings.empty()) {
      const auto ratings = stats::parse_ratings_csv(ingest::read_file(cfg.ratings), cfg.ratings.string());
      const auto alpha = stats::krippendorff_alpha(ratings);
      nlohmann::json j;
      j["items"] = ratings.size();
      j["raters"] = ratings.front().size();
      j["alpha"] = alpha ? nlohmann::json(*alpha) : nlohmann::json(nullptr);
      emit("stats/alpha.json", dump(j));
    }
    const bool any_flagged = std::any_of(verdicts.begin(), verdicts.end(),
                                         [](const auto& kv) { return kv.second.flagged; });
    if (any_flagged)
      emit("stats/embedding.csv", stats::export_onehot_embeddings(verdicts).to_csv());
    else
      stats_notes.push_back("no flagged SDKs; embedding not written");
    for (const auto& d : prev.diagnostics) stats_notes.push_back(d);
  });

  nlohmann::json m;
  m["tool"] = {{"name", "fpscope"}, {"version", kVersion},
               {"indexFormat", match::SdkIndex::kFormatVersion}};
  m["config"] = {{"eta", cfg.eta},
                 {"gamma", cfg.gamma},
                 {"threshold", threshold},
                 {"contextDepth", cfg.context_depth},
                 {"minAudience", cfg.min_audience},
                 {"topK", cfg.top_k},
                 {"scope", cfg.scope == taint::SourceScope::kMainOnly ? "main-only" : "bundle"},
                 {"format", cfg.format == OutputFormat::kJson ? "json" : "csv"}};
  nlohmann::json inputs;
  auto input = [&](const std::string& key, const std::filesystem::path& p) {
    if (!p.empty()) inputs[key] = {{"name", p.filename().string()}, {"fnv1a64", digest_input(p)}};
  };
  input("corpus", cfg.corpus);
  input("manifests", cfg.manifests);
  input("apps", cfg.apps);
  input("appCode", cfg.app_code);
  input("labels", cfg.labels);
  input("signalMap", cfg.signal_map);
  input("taintConfig", cfg.taint_config);
  input("rule", cfg.rule);
  input("ratings", cfg.ratings);
  m["inputs"] = inputs;
  m["stages"] = {"ingest", "resolve", "taint", "classify", "match", "stats"};
  m["diagnostics"] = stats_notes;
  if (cfg.timings) m["timingsMs"] = timings;
  nlohmann::json outputs;
  for (const auto& rel : written)
    outputs[rel] = hex64(fnv1a64(ingest::read_file(cfg.out / rel)));
  m["outputs"] = outputs;
  emit("manifest.json", dump(m));

  RunResult r;
  r.files.assign(written.begin(), written.end());
  r.manifest = std::move(m);
  return r;
}

}  // namespace fpscope::pipeline
