// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "fpscope/fixtures.hpp"
#include "fpscope/pipeline.hpp"
#include "support/demo.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace fpscope;
namespace fs = std::filesystem;
namespace t = fpscope::testing;

namespace {

using Clock = std::chrono::steady_clock;

// Collects the first few failures of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 3) notes_ << (notes_.tellp() > 0 ? "; " : "") << what;
  }
  void note(const std::string& s) { info_ << (info_.tellp() > 0 ? ", " : "") << s; }
  bool ok() const { return failures_ == 0; }
  std::string failures() const {
    return notes_.str() + (failures_ > 3 ? " (+" + std::to_string(failures_ - 3) + " more)" : "");
  }
  std::string info() const { return info_.str(); }

 private:
  int failures_ = 0;
  std::ostringstream notes_, info_;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

int failed = 0;

void run(const std::string& name, double limit_s, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = Clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (limit_s > 0) c.expect(secs < limit_s, "took " + fmt(secs, 3) + " s, limit " + fmt(limit_s) + " s");
  std::string line = (c.ok() ? "PASS " : "FAIL ") + name + " [" + fmt(secs, 3) + " s]";
  if (!c.info().empty()) line += " " + c.info();
  if (!c.ok()) line += ": " + c.failures();
  std::cout << line << std::endl;
  if (!c.ok()) ++failed;
}

SdkCoordinate C(const std::string& s) { return SdkCoordinate::parse(s); }

coflow::CoFlowFinding finding_with(int n) {
  coflow::CoFlowFinding f;
  f.rule = "r";
  f.sink_site = taint::Site{"x.Y.z", 0};
  f.sink_api = "java.net.K.send";
  for (int i = 0; i < n; ++i)
    f.sources.insert(coflow::SourceHit{"s" + std::to_string(i), "android.A" + std::to_string(i) + ".get",
                                       taint::Site{"x.Y.z", static_cast<std::uint32_t>(100 + i)}});
  return f;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = t::read_text(e.path());
  return files;
}

void dependency(Check& c) {
  const std::vector<dep::Manifest> ms{{C("M:A:1"), {C("N:B:1"), C("P:C:1")}},
                                      {C("N:B:1"), {C("P:C:2")}},
                                      {C("P:C:1"), {}},
                                      {C("P:C:2"), {}}};
  const auto b = dep::resolve(dep::build_graph(ms), C("M:A:1"));
  c.expect(b.resolved.count("P:C") && b.resolved.at("P:C") == C("P:C:1"), "golden scenario did not pick P:C:1");
  c.expect(!b.contains(C("P:C:2")), "P:C:2 in golden bundle");

  t::Rng rng(500);
  std::size_t mismatches = 0, nodes = 0;
  for (int i = 0; i < 500; ++i) {
    const auto dag = t::random_dag(rng, 50);
    nodes = std::max(nodes, dep::build_graph(dag.manifests).nodes().size());
    const auto got = dep::resolve(dep::build_graph(dag.manifests), dag.main);
    const auto want = oracle::resolve_by_paths(dag.manifests, dag.main);
    bool same = got.resolved.size() == want.size();
    for (const auto& [key, cd] : want)
      same = same && got.resolved.count(key) && got.resolved.at(key) == cd.first &&
             got.depth_of.at(cd.first) == cd.second;
    if (!same) ++mismatches;
  }
  c.expect(nodes <= 50, "DAG with " + std::to_string(nodes) + " nodes");
  c.expect(mismatches == 0, std::to_string(mismatches) + " of 500 DAGs disagree with path enumeration");
  c.note("500 DAGs, largest " + std::to_string(nodes) + " nodes, " + std::to_string(mismatches) + " mismatches");
}

void coflow_golden(Check& c) {
  const auto v = t::coflow2_verdict();
  c.expect(v.findings.size() == 2, std::to_string(v.findings.size()) + " findings");
  std::map<std::string, std::set<std::string>> by_sink;
  for (const auto& f : v.findings)
    for (const auto& s : f.sources) {
      by_sink[f.sink_site.str()].insert(s.label);
      c.expect(s.site.method.starts_with("com.fp."), "dependency source " + s.label + " present");
    }
  c.expect(by_sink["com.dep.Net.upload@7"] == std::set<std::string>{"androidId", "brand", "model"},
           "wrong sources at the network sink");
  c.expect(by_sink["com.fp.Collector.seal@1"] == std::set<std::string>{"androidId"},
           "wrong sources at the cipher sink");
  const std::string a = t::coflow2_json(), b = t::coflow2_json();
  c.expect(a == b, "two runs differ");
  c.expect(a == t::read_text(FPSCOPE_GOLDEN_DIR "/coflow2.json"), "output differs from golden file");
}

void taint_oracle(Check& c) {
  t::Rng rng(200);
  std::size_t mismatches = 0, findings = 0;
  const taint::AnalysisOptions opts{taint::SourceScope::kMainOnly, 1, false};
  for (int i = 0; i < 200; ++i) {
    const auto p = t::random_taint_program(rng, 5, 30);
    const auto code = p.code();
    const auto bundle = dep::resolve(dep::build_graph(p.manifests), p.sdks[0].coordinate);
    const auto r = taint::analyze(bundle, code, p.config, opts);
    const auto want = oracle::TaintOracle(bundle, code, p.config, opts).facts();
    findings += r.findings.size();
    if (oracle::facts_of(r.findings) != want) ++mismatches;
    c.expect(r.graph.is_fixed_point(), "program " + std::to_string(i) + " not at a fixed point");
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " of 200 programs disagree with the oracle");
  c.note("200 programs, " + std::to_string(findings) + " findings");
}

void classification(Check& c) {
  const SdkCoordinate sdk{"g", "a", "1"};
  c.expect(!coflow::classify(sdk, {finding_with(19)}, 20).flagged, "19 signals flagged at N=20");
  c.expect(coflow::classify(sdk, {finding_with(20)}, 20).flagged, "20 signals not flagged at N=20");
  for (int signals = 0; signals <= 25; ++signals) {
    bool prev = true;
    for (int n = 1; n <= 25; ++n) {
      const bool f = coflow::classify(sdk, {finding_with(signals)}, n).flagged;
      c.expect(f == (signals >= n), "signals " + std::to_string(signals) + " at N=" + std::to_string(n));
      c.expect(prev || !f, "flag reappears at N=" + std::to_string(n));
      prev = f;
    }
  }
}

void matcher_exactness(Check& c) {
  t::Rng rng(2020);
  std::size_t queries = 0, mismatches = 0, classes = 0;
  for (int i = 0; i < 20; ++i) {
    const auto corpus = t::random_corpus(rng, 100);
    std::size_t n = 0;
    for (const auto& s : corpus) n += s.classes.size();
    classes = std::max(classes, n);
    const auto w = match::compute_weights(corpus);
    const auto idx = match::build_index(corpus, w);
    for (const auto& sdk : corpus)
      for (const auto& cls : sdk.classes)
        for (double eta : {0.05, 0.2, 0.5, 0.9}) {
          ++queries;
          mismatches += oracle::candidate_mismatches(idx, match::class_vector(cls, w), eta);
        }
  }
  c.expect(classes <= 100, "corpus with " + std::to_string(classes) + " classes");
  c.expect(mismatches == 0, std::to_string(mismatches) + " candidate mismatches");
  c.note(std::to_string(queries) + " queries, " + std::to_string(mismatches) + " mismatches");
}

void planted_recovery(Check& c) {
  t::Rng rng(5050);
  std::vector<ir::SdkIR> sdks;
  for (int i = 0; i < 50; ++i) sdks.push_back(t::random_feature_sdk(rng, i, 3, 10));
  const auto idx = match::build_index(sdks, match::compute_weights(sdks));
  std::size_t tp = 0, fp = 0, fn = 0;
  for (int a = 0; a < 30; ++a) {
    std::vector<std::size_t> chosen;
    while (chosen.size() < 3) {
      const auto k = t::pick(rng, sdks.size());
      if (std::find(chosen.begin(), chosen.end(), k) == chosen.end()) chosen.push_back(k);
    }
    const auto app = t::plant_app(rng, sdks, chosen, 0.2, a);
    const auto accepted = match::match(app.code, idx, 0.2, 0.55).accepted();
    const std::set<SdkCoordinate> got(accepted.begin(), accepted.end());
    for (const auto& s : got) (app.truth.contains(s) ? tp : fp)++;
    for (const auto& s : app.truth) fn += got.contains(s) ? 0 : 1;
  }
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  c.expect(precision >= 0.95, "precision " + fmt(precision));
  c.expect(recall >= 0.80, "recall " + fmt(recall));
  c.note("precision " + fmt(precision) + ", recall " + fmt(recall));
}

void vector_algebra(Check& c) {
  using namespace match;
  t::Rng rng(99);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int i = 0; i < 500; ++i) {
    FeatureVector a, b;
    for (int k = 0; k < 15; ++k) {
      a.add(rng() % 30, u(rng));
      b.add(rng() % 30, u(rng));
    }
    const double ab = cosine(a, b);
    c.expect(std::abs(ab - cosine(b, a)) <= 1e-12, "cosine not symmetric");
    c.expect(std::abs(cosine(a, a) - 1.0) <= 1e-12, "cosine(a, a) != 1");
    c.expect(std::abs(cosine(a.scaled(u(rng)), b) - ab) <= 1e-12, "cosine not scale invariant");
    c.expect(ab >= 0.0 && ab <= 1.0, "cosine out of range");
    c.expect(std::abs(ab - oracle::cosine_loop(a, b)) <= 1e-12, "cosine differs from loop");
  }
  for (int i = 0; i < 30; ++i) {
    std::vector<ir::SdkIR> corpus;
    for (int k = 0; k < 6; ++k) corpus.push_back(t::random_feature_sdk(rng, k, 1, 5));
    const auto w = compute_weights(corpus);
    for (const auto& sdk : corpus) {
      FeatureVector sdk_sum, sdk_direct;
      for (const auto& cls : sdk.classes) {
        const auto cv = class_vector(cls, w);
        std::map<Dim, double> recount;
        for (const auto& m : cls.methods) {
          const auto fm = extract_features(m);
          for (const auto& [d, x] : fm.entries()) recount[d] += x * w.weight(d);
        }
        c.expect(cv.size() == recount.size(), "class vector dimensions");
        for (const auto& [d, x] : recount) c.expect(std::abs(cv.get(d) - x) <= 1e-12, "class additivity");
        sdk_sum += cv;
        for (const auto& m : cls.methods) sdk_direct += weighted_vector(extract_features(m), w);
      }
      c.expect(sdk_sum.size() == sdk_direct.size(), "sdk vector dimensions");
      for (const auto& [d, x] : sdk_direct.entries()) c.expect(std::abs(sdk_sum.get(d) - x) <= 1e-12, "sdk additivity");
    }
  }
  for (int i = 0; i < 50; ++i) {
    const auto sdk = t::random_feature_sdk(rng, i, 1, 6);
    const auto renamed = fixtures::rename_identifiers(sdk, "zz" + std::to_string(i));
    const std::vector<ir::SdkIR> corpus{sdk};
    const auto w = compute_weights(corpus);
    for (std::size_t k = 0; k < sdk.classes.size(); ++k)
      c.expect(class_vector(sdk.classes[k], w) == class_vector(renamed.classes[k], w), "renaming changed a vector");
  }
  std::istringstream in(t::read_text(FPSCOPE_GOLDEN_DIR "/fnv1a64.txt"));
  std::string line;
  int hashes = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const std::string input = nlohmann::json::parse(line.substr(0, tab)).get<std::string>();
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(input)));
    c.expect(hex == line.substr(tab + 1), "hash of " + input);
    ++hashes;
  }
  c.expect(hashes >= 10, "hash golden file has " + std::to_string(hashes) + " entries");
}

void alpha(Check& c) {
  const stats::RatingMatrix perfect{{"a", "a"}, {"b", "b"}, {"a", "a"}, {"c", "c"}};
  const auto p = stats::krippendorff_alpha(perfect);
  c.expect(p.has_value() && *p == 1.0, "perfect agreement is not exactly 1");

  t::Rng rng(50);
  int compared = 0;
  while (compared < 50) {
    const auto m = t::random_ratings(rng, t::between(rng, 2, 10), t::between(rng, 2, 4), t::between(rng, 2, 4), 0.15);
    std::optional<double> got;
    try {
      got = stats::krippendorff_alpha(m);
    } catch (const ConfigError&) {
      continue;
    }
    const auto want = oracle::alpha_direct(m);
    if (!want) {
      c.expect(!got, "alpha defined where the oracle is not");
      continue;
    }
    c.expect(got && std::abs(*got - *want) <= 1e-12, "alpha differs from hand oracle");
    ++compared;
  }
  const auto noise = stats::krippendorff_alpha(t::random_ratings(rng, 10000, 2, 2, 0.0));
  c.expect(noise && std::abs(*noise) <= 0.05, "random labels gave alpha " + (noise ? fmt(*noise) : "undefined"));
  c.note("random-label alpha " + (noise ? fmt(*noise) : "undefined"));
}

void stats_recount(Check& c) {
  t::Rng rng(20);
  for (int i = 0; i < 20; ++i) {
    const auto fx = t::random_stats_fixture(rng);
    const auto table = stats::prevalence(fx.apps, fx.app_sdks, fx.verdicts, fx.labels);
    const auto want = oracle::prevalence_recount(fx.apps, fx.app_sdks, fx.verdicts, fx.labels);
    c.expect(table.rows.size() == want.size(), "prevalence row count");
    for (const auto& row : table.rows) {
      if (!want.contains(row.category)) {
        c.expect(false, "unexpected category " + row.category);
        continue;
      }
      const auto& w = want.at(row.category);
      c.expect(row.apps == w.apps && row.apps_with_flagged == w.any, "prevalence counts for " + row.category);
      for (auto l : ingest::kSdkLabels) {
        auto it = w.by_label.find(l);
        c.expect(row.label_counts[static_cast<std::size_t>(l)] == (it == w.by_label.end() ? 0u : it->second),
                 "label count in " + row.category);
      }
    }

    const auto m = stats::cooccurrence(fx.apps, fx.app_sdks, fx.verdicts, 10);
    const auto pairs = oracle::cooccurrence_recount(fx.apps, fx.app_sdks, fx.verdicts, 10);
    for (std::size_t a = 0; a < m.categories.size(); ++a)
      for (std::size_t b = 0; b < m.categories.size(); ++b) {
        const auto [hits, n] = pairs.at({m.categories[a], m.categories[b]});
        const std::optional<double> want_cell =
            n == 0 ? std::nullopt : std::optional<double>(static_cast<double>(hits) / static_cast<double>(n));
        c.expect(m.at(a, b) == want_cell, "co-occurrence cell");
        c.expect(m.at(a, b) == m.at(b, a), "co-occurrence not symmetric");
      }

    std::size_t flagged = 0;
    const auto counts = oracle::signal_recount(fx.verdicts, fx.signal_map, flagged);
    const auto s = stats::sensitive_signal_shares(fx.verdicts, fx.signal_map);
    c.expect(s.flagged_sdks == flagged, "flagged SDK count");
    for (const auto& [cls, n] : s.counts) {
      auto it = counts.find(cls);
      c.expect(n == (it == counts.end() ? 0u : it->second), "signal count for " + cls);
    }

    const auto apis = oracle::api_recount(fx.verdicts);
    if (apis.empty()) continue;
    const auto e = stats::export_onehot_embeddings(fx.verdicts);
    c.expect(e.rows.size() == apis.size(), "embedding rows");
    for (std::size_t r = 0; r < e.rows.size() && r < e.cells.size(); ++r) {
      std::set<std::string> hot;
      for (std::size_t k = 0; k < e.columns.size(); ++k)
        if (e.cells[r][k]) hot.insert(e.columns[k]);
      c.expect(apis.contains(e.rows[r]) && hot == apis.at(e.rows[r]), "embedding row " + e.rows[r].str());
    }
  }
}

void determinism(Check& c) {
  std::random_device rd;
  const fs::path dir = fs::temp_directory_path() / ("fpscope-accept-" + std::to_string(rd()));
  fixtures::emit_demo(dir);
  const auto cfg = pipeline::load_config(dir / "fpscope.toml");
  pipeline::run_pipeline(cfg);
  const auto first = snapshot(cfg.out);
  pipeline::run_pipeline(cfg);
  const auto second = snapshot(cfg.out);
  c.expect(!first.empty(), "no report written");
  c.expect(first == second, "report directories differ");
  c.note(std::to_string(first.size()) + " files");
  std::error_code ec;
  fs::remove_all(dir, ec);
}

}  // namespace

int main() {
  run("dependency-resolution", 5.0, dependency);
  run("coflow-golden", 0, coflow_golden);
  run("taint-oracle", 30.0, taint_oracle);
  run("classification-boundary", 0, classification);
  run("matcher-exactness", 0, matcher_exactness);
  run("planted-recovery", 60.0, planted_recovery);
  run("vector-algebra", 0, vector_algebra);
  run("krippendorff-alpha", 0, alpha);
  run("stats-recount", 0, stats_recount);
  run("pipeline-determinism", 0, determinism);
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
