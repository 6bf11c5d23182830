#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fpscope/coordinate.hpp"
#include "fpscope/error.hpp"

namespace fpscope::dep {

struct Manifest {
  SdkCoordinate coordinate;
  std::vector<SdkCoordinate> dependencies;

  bool operator==(const Manifest&) const = default;
};

inline void validate(const Manifest& m) {
  std::set<SdkCoordinate> seen;
  for (const SdkCoordinate& d : m.dependencies) {
    if (d == m.coordinate)
      throw ParseError("manifest " + m.coordinate.str() + " depends on itself");
    if (!seen.insert(d).second)
      throw ParseError("manifest " + m.coordinate.str() + " lists " + d.str() +
                       " twice");
  }
}

class DependencyGraph {
 public:
  const std::set<SdkCoordinate>& nodes() const { return nodes_; }
  const std::set<SdkCoordinate>& external() const { return external_; }

  bool contains(const SdkCoordinate& c) const { return nodes_.contains(c); }
  bool is_external(const SdkCoordinate& c) const { return external_.contains(c); }

  const std::set<SdkCoordinate>& successors(const SdkCoordinate& c) const {
    static const std::set<SdkCoordinate> kNone;
    auto it = out_.find(c);
    return it == out_.end() ? kNone : it->second;
  }

  std::vector<std::pair<SdkCoordinate, SdkCoordinate>> edges() const {
    std::vector<std::pair<SdkCoordinate, SdkCoordinate>> out;
    for (const auto& [from, tos] : out_)
      for (const auto& to : tos) out.emplace_back(from, to);
    return out;
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& [_, tos] : out_) n += tos.size();
    return n;
  }

 private:
  friend DependencyGraph build_graph(std::span<const Manifest>);

  std::set<SdkCoordinate> nodes_;
  std::set<SdkCoordinate> external_;
  std::map<SdkCoordinate, std::set<SdkCoordinate>> out_;
};

// One node per manifest plus every referenced coordinate that has no
// manifest (marked external, no outgoing edges).
inline DependencyGraph build_graph(std::span<const Manifest> manifests) {
  DependencyGraph g;
  for (const Manifest& m : manifests) {
    validate(m);
    if (!g.nodes_.insert(m.coordinate).second)
      throw ParseError("duplicate manifest for " + m.coordinate.str());
    g.out_[m.coordinate].insert(m.dependencies.begin(), m.dependencies.end());
  }
  for (const Manifest& m : manifests) {
    for (const SdkCoordinate& d : m.dependencies) {
      if (g.nodes_.insert(d).second) g.external_.insert(d);
    }
  }
  return g;
}

struct ResolvedBundle {
  SdkCoordinate main;
  // (group:artifact) -> chosen coordinate
  std::map<std::string, SdkCoordinate> resolved;
  std::map<SdkCoordinate, int> depth_of;
  // BFS tree; the main SDK has no parent.
  std::map<SdkCoordinate, SdkCoordinate> parent_of;
  std::vector<std::string> diagnostics;

  // Chosen coordinates ordered by (depth, coordinate).
  std::vector<SdkCoordinate> coordinates() const {
    std::vector<std::pair<int, SdkCoordinate>> tmp;
    for (const auto& [c, d] : depth_of) tmp.emplace_back(d, c);
    std::sort(tmp.begin(), tmp.end());
    std::vector<SdkCoordinate> out;
    for (auto& [_, c] : tmp) out.push_back(std::move(c));
    return out;
  }

  bool contains(const SdkCoordinate& c) const { return depth_of.contains(c); }
};

// Level-synchronous BFS from `main`. Each (group, artifact) keeps the version
// reached at the smallest depth; at equal depth the lexicographically greatest
// version string wins. Discarded versions are not expanded.
inline ResolvedBundle resolve(const DependencyGraph& graph, const SdkCoordinate& main) {
  if (!graph.contains(main))
    throw AnalysisError("main SDK " + main.str() + " is not in the dependency graph");
  ResolvedBundle b;
  b.main = main;
  b.resolved.emplace(main.key(), main);
  b.depth_of.emplace(main, 0);

  auto note = [&b](std::string msg) {
    if (std::find(b.diagnostics.begin(), b.diagnostics.end(), msg) == b.diagnostics.end())
      b.diagnostics.push_back(std::move(msg));
  };
  bool cycle_reported = false;
  std::set<SdkCoordinate> frontier{main};
  for (int depth = 0; !frontier.empty(); ++depth) {
    // key -> version candidates -> parents at this level
    std::map<std::string, std::map<SdkCoordinate, std::set<SdkCoordinate>>> candidates;
    for (const SdkCoordinate& node : frontier) {
      for (const SdkCoordinate& next : graph.successors(node)) {
        if (next == main && !cycle_reported) {
          b.diagnostics.push_back("warning: dependency cycle involving main SDK " +
                                  main.str() + " (via " + node.str() + ")");
          cycle_reported = true;
        }
        auto chosen = b.resolved.find(next.key());
        if (chosen != b.resolved.end()) {
          if (chosen->second != next &&
              b.depth_of.at(chosen->second) <= depth) {
            note("conflict: " + next.str() + " (depth " +
                                    std::to_string(depth + 1) + ") discarded for " +
                                    chosen->second.str() + " (depth " +
                                    std::to_string(b.depth_of.at(chosen->second)) + ")");
          }
          continue;
        }
        candidates[next.key()][next].insert(node);
      }
    }
    std::set<SdkCoordinate> next_frontier;
    for (auto& [key, versions] : candidates) {
      // Same (group, artifact): map order is version order.
      auto best = std::prev(versions.end());
      for (auto it = versions.begin(); it != best; ++it) {
        note("conflict: " + it->first.str() + " (depth " +
                                std::to_string(depth + 1) + ") discarded for " +
                                best->first.str() + " (tie broken by version)");
      }
      b.resolved.emplace(key, best->first);
      b.depth_of.emplace(best->first, depth + 1);
      b.parent_of.emplace(best->first, *best->second.begin());
      next_frontier.insert(best->first);
    }
    frontier = std::move(next_frontier);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Manifest files: {"coordinate": "g:a:v", "dependencies": ["g:a:v", ...]}

inline Manifest parse_manifest_json(std::string_view text, const std::string& source = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0, 0, source);
  }
  try {
    Manifest m;
    m.coordinate = SdkCoordinate::parse(j.at("coordinate").get<std::string>());
    if (j.contains("dependencies")) {
      for (const auto& d : j.at("dependencies"))
        m.dependencies.push_back(SdkCoordinate::parse(d.get<std::string>()));
    }
    validate(m);
    return m;
  } catch (const ParseError& e) {
    throw ParseError(e.message(), 0, 0, source);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what(), 0, 0, source);
  }
}

inline std::string manifest_to_json(const Manifest& m) {
  nlohmann::json j;
  j["coordinate"] = m.coordinate.str();
  j["dependencies"] = nlohmann::json::array();
  for (const auto& d : m.dependencies) j["dependencies"].push_back(d.str());
  return j.dump(2) + "\n";
}

inline std::vector<Manifest> load_manifests(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ConfigError("manifest directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Manifest> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out.push_back(parse_manifest_json(ss.str(), f.string()));
  }
  return out;
}

inline nlohmann::json bundle_to_json(const ResolvedBundle& b) {
  nlohmann::json j;
  j["main"] = b.main.str();
  j["resolved"] = nlohmann::json::array();
  for (const SdkCoordinate& c : b.coordinates()) {
    nlohmann::json e;
    e["coordinate"] = c.str();
    e["depth"] = b.depth_of.at(c);
    auto p = b.parent_of.find(c);
    if (p != b.parent_of.end()) e["parent"] = p->second.str();
    j["resolved"].push_back(std::move(e));
  }
  j["diagnostics"] = b.diagnostics;
  return j;
}

inline ResolvedBundle bundle_from_json(const nlohmann::json& j) {
  try {
    ResolvedBundle b;
    b.main = SdkCoordinate::parse(j.at("main").get<std::string>());
    for (const auto& e : j.at("resolved")) {
      auto c = SdkCoordinate::parse(e.at("coordinate").get<std::string>());
      const int depth = e.at("depth").get<int>();
      if (!b.resolved.emplace(c.key(), c).second)
        throw ParseError("bundle lists two versions of " + c.key());
      b.depth_of.emplace(c, depth);
      if (e.contains("parent"))
        b.parent_of.emplace(c, SdkCoordinate::parse(e.at("parent").get<std::string>()));
    }
    if (!b.depth_of.contains(b.main) || b.depth_of.at(b.main) != 0)
      throw ParseError("bundle does not contain its main SDK at depth 0");
    if (j.contains("diagnostics"))
      b.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bundle: ") + e.what());
  }
}

}  // namespace fpscope::dep
