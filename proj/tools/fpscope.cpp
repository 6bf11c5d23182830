// fpscope command-line entry point.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fpscope/coflow.hpp"
#include "fpscope/depgraph.hpp"
#include "fpscope/error.hpp"
#include "fpscope/fixtures.hpp"
#include "fpscope/ingest.hpp"
#include "fpscope/ir.hpp"
#include "fpscope/pipeline.hpp"
#include "fpscope/sdkmatch.hpp"
#include "fpscope/stats.hpp"
#include "fpscope/taint.hpp"

namespace fs = std::filesystem;
using namespace fpscope;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;
constexpr int kExitAnalysis = 4;

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(ingest::read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what(), 0, 0, p.string());
  }
}

ir::SdkIR read_ir(const fs::path& p) {
  try {
    return ir::parse_ir(ingest::read_file(p));
  } catch (const ParseError& e) {
    throw ParseError(e.message(), e.line(), e.column(), p.string());
  }
}

taint::CodeMap read_corpus(const fs::path& dir) {
  taint::CodeMap code;
  for (auto& s : pipeline::load_corpus(dir).all) code.emplace(s.coordinate, std::move(s));
  return code;
}

void write_out(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    pipeline::write_atomic(out, text);
}

taint::SourceScope parse_scope(const std::string& s) {
  if (s == "main-only") return taint::SourceScope::kMainOnly;
  if (s == "bundle") return taint::SourceScope::kWholeBundle;
  throw ConfigError("--scope must be main-only or bundle");
}

std::vector<coflow::FingerprintVerdict> read_verdicts(const fs::path& p) {
  const auto j = read_json(p);
  std::vector<coflow::FingerprintVerdict> out;
  if (j.is_array())
    for (const auto& v : j) out.push_back(coflow::verdict_from_json(v));
  else
    out.push_back(coflow::verdict_from_json(j));
  return out;
}

struct StatsInputs {
  std::string apps, matches, verdicts, labels, signal_map, ratings, format = "json", out;
  std::int64_t top_k = static_cast<std::int64_t>(stats::kDefaultTopK);
};

// App -> SDK membership from a matches file, or from declaredSdks.
stats::AppSdks app_sdks_for(const std::vector<ingest::AppRecord>& apps, const std::string& matches) {
  stats::AppSdks out;
  if (!matches.empty()) {
    for (const auto& r : read_json(matches)) {
      auto& set = out[r.at("app").get<std::string>()];
      for (const auto& c : r.at("accepted")) set.insert(SdkCoordinate::parse(c.get<std::string>()));
    }
    return out;
  }
  for (const auto& a : apps)
    if (a.declared_sdks) out[a.app_id].insert(a.declared_sdks->begin(), a.declared_sdks->end());
  return out;
}

stats::Verdicts verdict_map(const std::string& path) {
  stats::Verdicts out;
  for (auto& v : read_verdicts(path)) out.emplace(v.sdk, std::move(v));
  return out;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fpscope: fingerprinting-SDK detection over an SDK/app corpus"};
  app.require_subcommand(1);

  // resolve
  std::string manifests_dir, main_coord, out_path;
  auto* resolve = app.add_subcommand("resolve", "Resolve the dependency bundle of one SDK");
  resolve->add_option("--manifests", manifests_dir, "Directory of manifest JSON files")->required();
  resolve->add_option("--main", main_coord, "Main SDK coordinate g:a:v")->required();
  resolve->add_option("-o,--output", out_path, "Output file (default stdout)");

  // taint
  std::string bundle_path, corpus_dir, taint_config_path, scope = "main-only";
  int context_depth = 1;
  bool conservative = false;
  auto* taint_cmd = app.add_subcommand("taint", "Taint analysis of a resolved bundle (JSON lines)");
  taint_cmd->add_option("--bundle", bundle_path, "Bundle JSON from 'resolve'")->required();
  taint_cmd->add_option("--corpus", corpus_dir, "Directory of SDK .ir files")->required();
  taint_cmd->add_option("--config", taint_config_path, "Taint config JSON")->required();
  taint_cmd->add_option("--scope", scope, "main-only|bundle");
  taint_cmd->add_option("--context-depth", context_depth, "Call-site context depth 0..2");
  taint_cmd->add_flag("--conservative-unknown", conservative, "Unknown APIs propagate taint");
  taint_cmd->add_option("-o,--output", out_path, "Output file (default stdout)");

  // coflow
  std::string rule_path;
  std::optional<int> threshold;
  auto* coflow_cmd = app.add_subcommand("coflow", "CoFlow detection and verdict for one bundle");
  coflow_cmd->add_option("--bundle", bundle_path, "Bundle JSON from 'resolve'")->required();
  coflow_cmd->add_option("--corpus", corpus_dir, "Directory of SDK .ir files")->required();
  coflow_cmd->add_option("--taint-config", taint_config_path, "Taint config JSON")->required();
  coflow_cmd->add_option("--rule", rule_path, "CoFlow rule JSON")->required();
  coflow_cmd->add_option("--threshold", threshold, "Distinct-signal threshold (default: rule)");
  coflow_cmd->add_option("--scope", scope, "main-only|bundle");
  coflow_cmd->add_option("--context-depth", context_depth, "Call-site context depth 0..2");
  coflow_cmd->add_option("-o,--output", out_path, "Output file (default stdout)");

  // classify
  std::string verdicts_path;
  int classify_threshold = coflow::kDefaultThreshold;
  auto* classify_cmd = app.add_subcommand("classify", "Re-apply the signal threshold to verdicts");
  classify_cmd->add_option("--verdicts", verdicts_path, "Verdict JSON (object or array)")->required();
  classify_cmd->add_option("--threshold", classify_threshold, "Distinct-signal threshold");
  classify_cmd->add_option("-o,--output", out_path, "Output file (default stdout)");

  // index build
  std::string index_path;
  bool keep_unstable = false;
  auto* index_cmd = app.add_subcommand("index", "SDK index operations");
  index_cmd->require_subcommand(1);
  auto* index_build = index_cmd->add_subcommand("build", "Build an SDK index from a corpus");
  index_build->add_option("--corpus", corpus_dir, "Directory of SDK .ir files")->required();
  index_build->add_option("--out", index_path, "Index file")->required();
  index_build->add_flag("--keep-unstable", keep_unstable, "Keep alpha/beta/test/dev/debug/qa versions");

  // match
  std::string app_path;
  double eta = 0.2, gamma = 0.55;
  auto* match_cmd = app.add_subcommand("match", "Identify indexed SDKs in app code");
  match_cmd->add_option("--index", index_path, "Index file")->required();
  match_cmd->add_option("--app", app_path, "App code .ir file")->required();
  match_cmd->add_option("--eta", eta, "Class similarity threshold (0,1]");
  match_cmd->add_option("--gamma", gamma, "SDK support threshold (0,1]");
  match_cmd->add_option("-o,--output", out_path, "Output file (default stdout)");

  // stats
  StatsInputs si;
  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  stats_cmd->require_subcommand(1);
  auto add_common = [&](CLI::App* c) {
    c->add_option("--format", si.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c->add_option("-o,--output", si.out, "Output file (default stdout)");
  };
  auto* st_prev = stats_cmd->add_subcommand("prevalence", "Per-category prevalence");
  auto* st_co = stats_cmd->add_subcommand("cooccur", "Cross-category co-occurrence");
  for (auto* c : {st_prev, st_co}) {
    c->add_option("--apps", si.apps, "App metadata JSON lines")->required();
    c->add_option("--matches", si.matches, "matches.json (default: declaredSdks)");
    c->add_option("--verdicts", si.verdicts, "Verdicts JSON")->required();
    add_common(c);
  }
  st_prev->add_option("--labels", si.labels, "Label CSV")->required();
  st_co->add_option("--top-k", si.top_k, "Apps per category");
  auto* st_sig = stats_cmd->add_subcommand("signals", "Sensitive-signal shares");
  st_sig->add_option("--verdicts", si.verdicts, "Verdicts JSON")->required();
  st_sig->add_option("--signal-map", si.signal_map, "Signal-class CSV")->required();
  add_common(st_sig);
  auto* st_alpha = stats_cmd->add_subcommand("alpha", "Krippendorff's alpha (nominal)");
  st_alpha->add_option("--ratings", si.ratings, "Ratings CSV")->required();
  add_common(st_alpha);
  auto* st_embed = stats_cmd->add_subcommand("embed", "One-hot API embedding (CSV)");
  st_embed->add_option("--verdicts", si.verdicts, "Verdicts JSON")->required();
  st_embed->add_option("-o,--output", si.out, "Output file (default stdout)");

  // run
  std::string config_path;
  std::map<std::string, std::string> overrides;
  auto* run_cmd = app.add_subcommand("run", "Full pipeline from a config file");
  run_cmd->add_option("--config", config_path, "Pipeline config file")->required();
  for (std::string_view key : pipeline::kConfigKeys) {
    std::string flag;
    for (char ch : key) {
      if (std::isupper(static_cast<unsigned char>(ch))) {
        flag += '-';
        flag += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      } else {
        flag += ch;
      }
    }
    run_cmd->add_option_function<std::string>(
        "--" + flag, [&overrides, key = std::string(key)](const std::string& v) { overrides[key] = v; },
        "Override '" + std::string(key) + "'");
  }

  // fixtures emit
  std::string fixtures_out;
  auto* fixtures_cmd = app.add_subcommand("fixtures", "Bundled demo inputs");
  fixtures_cmd->require_subcommand(1);
  auto* fixtures_emit = fixtures_cmd->add_subcommand("emit", "Write the demo corpus and config");
  fixtures_emit->add_option("--out", fixtures_out, "Target directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (resolve->parsed()) {
      const auto graph = dep::build_graph(dep::load_manifests(manifests_dir));
      const auto bundle = dep::resolve(graph, SdkCoordinate::parse(main_coord));
      write_out(out_path, dump(dep::bundle_to_json(bundle)));
    } else if (taint_cmd->parsed()) {
      const auto bundle = dep::bundle_from_json(read_json(bundle_path));
      const auto cfg = taint::parse_taint_config_json(ingest::read_file(taint_config_path), taint_config_path);
      taint::AnalysisOptions opts{parse_scope(scope), context_depth, conservative};
      const auto result = taint::analyze(bundle, read_corpus(corpus_dir), cfg, opts);
      std::string text;
      for (const auto& f : result.findings) text += taint::finding_to_json(f).dump() + "\n";
      for (const auto& d : result.diagnostics) std::cerr << "fpscope: " << d << "\n";
      write_out(out_path, text);
    } else if (coflow_cmd->parsed()) {
      const auto bundle = dep::bundle_from_json(read_json(bundle_path));
      const auto cfg = taint::parse_taint_config_json(ingest::read_file(taint_config_path), taint_config_path);
      const auto rule = coflow::parse_rule_json(ingest::read_file(rule_path), rule_path);
      taint::AnalysisOptions opts{parse_scope(scope), context_depth, false};
      const auto result = taint::analyze(bundle, read_corpus(corpus_dir), cfg, opts);
      auto found = coflow::detect(result.graph, result.findings, rule);
      const auto v = coflow::classify(bundle.main, std::move(found), threshold.value_or(rule.min_distinct_sources));
      write_out(out_path, dump(coflow::verdict_to_json(v)));
    } else if (classify_cmd->parsed()) {
      nlohmann::json j = nlohmann::json::array();
      for (const auto& v : read_verdicts(verdicts_path))
        j.push_back(coflow::verdict_to_json(coflow::classify(v.sdk, v.findings, classify_threshold)));
      write_out(out_path, dump(j));
    } else if (index_build->parsed()) {
      const auto corpus = pipeline::load_corpus(corpus_dir);
      std::vector<ir::SdkIR> sdks;
      for (const auto& s : corpus.all)
        if (keep_unstable || !ingest::is_excluded_version(s.coordinate.version)) sdks.push_back(s);
      const auto idx = match::build_index(sdks, match::compute_weights(sdks));
      pipeline::write_atomic(index_path, idx.serialize());
      std::cerr << "fpscope: indexed " << idx.sdks().size() << " SDKs, " << idx.class_count()
                << " classes\n";
    } else if (match_cmd->parsed()) {
      match::check_thresholds(eta, gamma);
      const auto idx = match::SdkIndex::load(index_path);
      const auto report = match::match(read_ir(app_path), idx, eta, gamma);
      write_out(out_path, dump(match::report_to_json(report, idx)));
    } else if (stats_cmd->parsed()) {
      const bool csv = si.format == "csv";
      if (st_prev->parsed() || st_co->parsed()) {
        const auto apps = ingest::parse_apps_jsonl(ingest::read_file(si.apps), si.apps);
        const auto app_sdks = app_sdks_for(apps, si.matches);
        const auto verdicts = verdict_map(si.verdicts);
        if (st_prev->parsed()) {
          const auto labels = ingest::parse_labels_csv(ingest::read_file(si.labels), si.labels);
          const auto t = stats::prevalence(apps, app_sdks, verdicts, labels);
          for (const auto& d : t.diagnostics) std::cerr << "fpscope: " << d << "\n";
          write_out(si.out, csv ? stats::prevalence_to_csv(t) : dump(stats::prevalence_to_json(t)));
        } else {
          if (si.top_k < 1) throw ConfigError("--top-k must be at least 1");
          const auto m = stats::cooccurrence(apps, app_sdks, verdicts, static_cast<std::size_t>(si.top_k));
          write_out(si.out, csv ? stats::cooccurrence_to_csv(m) : dump(stats::cooccurrence_to_json(m)));
        }
      } else if (st_sig->parsed()) {
        const auto map = ingest::parse_signal_map_csv(ingest::read_file(si.signal_map), si.signal_map);
        const auto s = stats::sensitive_signal_shares(verdict_map(si.verdicts), map);
        if (csv) {
          std::string text = "class,sdks,share\n";
          for (const auto& [k, n] : s.counts)
            text += k + "," + std::to_string(n) + "," + stats::format_number(s.shares.at(k)) + "\n";
          write_out(si.out, text);
        } else {
          write_out(si.out, dump(stats::shares_to_json(s)));
        }
      } else if (st_alpha->parsed()) {
        const auto r = stats::parse_ratings_csv(ingest::read_file(si.ratings), si.ratings);
        const auto a = stats::krippendorff_alpha(r);
        if (csv) {
          write_out(si.out, "alpha\n" + (a ? stats::format_number(*a) : std::string()) + "\n");
        } else {
          nlohmann::json j;
          j["items"] = r.size();
          j["raters"] = r.front().size();
          j["alpha"] = a ? nlohmann::json(*a) : nlohmann::json(nullptr);
          write_out(si.out, dump(j));
        }
        if (!a) std::cerr << "fpscope: alpha undefined (a single value in use)\n";
      } else if (st_embed->parsed()) {
        write_out(si.out, stats::export_onehot_embeddings(verdict_map(si.verdicts)).to_csv());
      }
    } else if (run_cmd->parsed()) {
      auto cfg = pipeline::load_config(config_path);
      const fs::path saved_base = cfg.base;
      cfg.base = fs::current_path();  // command-line paths are relative to the caller
      for (const auto& [k, v] : overrides) pipeline::apply_setting(cfg, k, v);
      cfg.base = saved_base;
      const auto r = pipeline::run_pipeline(cfg);
      for (const auto& f : r.files) std::cout << (cfg.out / f).string() << "\n";
    } else if (fixtures_emit->parsed()) {
      for (const auto& f : fixtures::emit_demo(fixtures_out)) std::cout << (fs::path(fixtures_out) / f).string() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "fpscope: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "fpscope: parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const AnalysisError& e) {
    std::cerr << "fpscope: analysis error: " << e.what() << "\n";
    return kExitAnalysis;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "fpscope: parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "fpscope: analysis error: " << e.what() << "\n";
    return kExitAnalysis;
  }
  return 0;
}
