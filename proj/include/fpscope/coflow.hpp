#pragma once

// Crossover-flow detection: many sources converging on one sink.

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpscope/coordinate.hpp"
#include "fpscope/error.hpp"
#include "fpscope/taint.hpp"

namespace fpscope::coflow {

inline constexpr int kDefaultThreshold = 20;

struct CoFlowRule {
  std::string name;
  std::vector<std::set<std::string>> source_groups;
  std::set<taint::SinkGroup> sink_groups;
  int min_distinct_sources = kDefaultThreshold;

  void validate() const {
    if (name.empty()) throw ConfigError("rule has no name");
    if (source_groups.empty()) throw ConfigError("rule '" + name + "' has no source groups");
    for (const auto& g : source_groups)
      if (g.empty()) throw ConfigError("rule '" + name + "' has an empty source group");
    if (sink_groups.empty()) throw ConfigError("rule '" + name + "' has no sink groups");
    if (min_distinct_sources <= 0)
      throw ConfigError("rule '" + name + "' needs a positive minDistinctSources");
  }

  std::set<std::string> all_labels() const {
    std::set<std::string> out;
    for (const auto& g : source_groups) out.insert(g.begin(), g.end());
    return out;
  }
};

struct SourceHit {
  std::string label;
  std::string api;
  taint::Site site;

  auto operator<=>(const SourceHit&) const = default;
  bool operator==(const SourceHit&) const = default;
};

struct CoFlowFinding {
  std::string rule;
  taint::Site sink_site;
  std::string sink_api;
  taint::SinkGroup sink_group = taint::SinkGroup::kNetwork;
  std::set<SourceHit> sources;  // every reaching source, not one per group

  bool operator==(const CoFlowFinding&) const = default;
};

// Groups flows by sink site and keeps the sinks where every source group of
// the rule is represented. A single-group rule holding all fingerprinting
// labels yields one finding per sink reached by any of them.
inline std::vector<CoFlowFinding> detect(const taint::TaintFlowGraph& graph,
                                         std::span<const taint::FlowFinding> findings,
                                         const CoFlowRule& rule) {
  rule.validate();
  std::set<taint::Site> graph_sinks;
  for (const taint::TaintNode& n : graph.nodes()) {
    if (n.kind == taint::TaintNode::Kind::kSink)
      graph_sinks.insert(taint::Site{n.name, static_cast<std::uint32_t>(n.index)});
  }
  const std::set<std::string> wanted = rule.all_labels();

  std::map<taint::Site, CoFlowFinding> by_sink;
  for (const taint::FlowFinding& f : findings) {
    if (!graph_sinks.contains(f.sink_site))
      throw AnalysisError("flow at sink " + f.sink_site.str() + " is not in the taint graph");
    if (!rule.sink_groups.contains(f.sink_group) || !wanted.contains(f.source_label)) continue;
    auto& out = by_sink[f.sink_site];
    out.rule = rule.name;
    out.sink_site = f.sink_site;
    out.sink_api = f.sink_api;
    out.sink_group = f.sink_group;
    out.sources.insert(SourceHit{f.source_label, f.source_api, f.source_site});
  }

  std::vector<CoFlowFinding> result;
  for (auto& [site, finding] : by_sink) {
    std::set<std::string> present;
    for (const SourceHit& s : finding.sources) present.insert(s.label);
    bool covered = true;
    for (const auto& group : rule.source_groups) {
      bool hit = false;
      for (const auto& label : group) hit = hit || present.contains(label);
      covered = covered && hit;
    }
    if (covered) result.push_back(std::move(finding));
  }
  return result;
}

struct FingerprintVerdict {
  SdkCoordinate sdk;
  bool flagged = false;
  int distinct_signals = 0;
  int threshold = kDefaultThreshold;
  std::vector<CoFlowFinding> findings;

  std::set<std::string> signals() const {
    std::set<std::string> out;
    for (const auto& f : findings)
      for (const auto& s : f.sources) out.insert(s.label);
    return out;
  }

  // Source APIs whose data reaches a sink.
  std::set<std::string> apis() const {
    std::set<std::string> out;
    for (const auto& f : findings)
      for (const auto& s : f.sources) out.insert(s.api);
    return out;
  }
};

inline FingerprintVerdict classify(const SdkCoordinate& sdk, std::vector<CoFlowFinding> findings,
                                   int threshold = kDefaultThreshold) {
  if (threshold <= 0) throw ConfigError("fingerprinting threshold must be positive");
  FingerprintVerdict v;
  v.sdk = sdk;
  v.threshold = threshold;
  v.findings = std::move(findings);
  v.distinct_signals = static_cast<int>(v.signals().size());
  v.flagged = v.distinct_signals >= threshold;
  return v;
}

// ---------------------------------------------------------------------------
// JSON

inline CoFlowRule parse_rule_json(std::string_view text, const std::string& source = {}) {
  try {
    const auto j = nlohmann::json::parse(text);
    CoFlowRule r;
    r.name = j.at("name").get<std::string>();
    for (const auto& g : j.at("sourceGroups"))
      r.source_groups.push_back(g.get<std::set<std::string>>());
    for (const auto& g : j.at("sinkGroups"))
      r.sink_groups.insert(taint::parse_sink_group(g.get<std::string>()));
    if (j.contains("minDistinctSources"))
      r.min_distinct_sources = j.at("minDistinctSources").get<int>();
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("rule: ") + e.what(), 0, 0, source);
  } catch (const ParseError& e) {
    throw ParseError(e.message(), 0, 0, source);
  }
}

inline nlohmann::json rule_to_json(const CoFlowRule& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["sourceGroups"] = nlohmann::json::array();
  for (const auto& g : r.source_groups) j["sourceGroups"].push_back(g);
  j["sinkGroups"] = nlohmann::json::array();
  for (auto g : r.sink_groups) j["sinkGroups"].push_back(taint::sink_group_name(g));
  j["minDistinctSources"] = r.min_distinct_sources;
  return j;
}

inline nlohmann::json finding_to_json(const CoFlowFinding& f) {
  nlohmann::json j;
  j["rule"] = f.rule;
  j["sinkSite"] = taint::site_to_json(f.sink_site);
  j["sinkApi"] = f.sink_api;
  j["sinkGroup"] = taint::sink_group_name(f.sink_group);
  j["sources"] = nlohmann::json::array();
  for (const auto& s : f.sources) {
    j["sources"].push_back(
        {{"label", s.label}, {"api", s.api}, {"site", taint::site_to_json(s.site)}});
  }
  return j;
}

inline CoFlowFinding finding_from_json(const nlohmann::json& j) {
  CoFlowFinding f;
  f.rule = j.at("rule").get<std::string>();
  f.sink_site = taint::site_from_json(j.at("sinkSite"));
  f.sink_api = j.at("sinkApi").get<std::string>();
  f.sink_group = taint::parse_sink_group(j.at("sinkGroup").get<std::string>());
  for (const auto& s : j.at("sources")) {
    f.sources.insert(SourceHit{s.at("label").get<std::string>(), s.at("api").get<std::string>(),
                               taint::site_from_json(s.at("site"))});
  }
  return f;
}

inline nlohmann::json verdict_to_json(const FingerprintVerdict& v) {
  nlohmann::json j;
  j["sdk"] = v.sdk.str();
  j["flagged"] = v.flagged;
  j["distinctSignals"] = v.distinct_signals;
  j["threshold"] = v.threshold;
  j["signals"] = v.signals();
  j["apis"] = v.apis();
  j["findings"] = nlohmann::json::array();
  for (const auto& f : v.findings) j["findings"].push_back(finding_to_json(f));
  return j;
}

inline FingerprintVerdict verdict_from_json(const nlohmann::json& j) {
  try {
    std::vector<CoFlowFinding> findings;
    for (const auto& f : j.at("findings")) findings.push_back(finding_from_json(f));
    const int threshold = j.contains("threshold") ? j.at("threshold").get<int>() : kDefaultThreshold;
    return classify(SdkCoordinate::parse(j.at("sdk").get<std::string>()), std::move(findings),
                    threshold);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("verdict: ") + e.what());
  }
}

}  // namespace fpscope::coflow
