#pragma once

// Interprocedural taint analysis over a resolved SDK bundle.
//
// Abstraction:
//  * registers are versioned by their defining instruction (SSA-like, given
//    the IR's single-pass definition order); a redefinition by CONST starts
//    a fresh, untainted version
//  * fields are merged across all objects (one node per field identifier)
//  * arrays are a single cell: stores taint the array register's version
//  * call-site contexts up to depth k; deeper chains collapse into one
//    "top" context per method
//  * flow-insensitive inside a method

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fpscope/coordinate.hpp"
#include "fpscope/depgraph.hpp"
#include "fpscope/error.hpp"
#include "fpscope/ir.hpp"

namespace fpscope::taint {

enum class SinkGroup : std::uint8_t { kNetwork, kEncryption };

inline std::string_view sink_group_name(SinkGroup g) {
  return g == SinkGroup::kNetwork ? "NETWORK" : "ENCRYPTION";
}

inline SinkGroup parse_sink_group(std::string_view s) {
  if (s == "NETWORK") return SinkGroup::kNetwork;
  if (s == "ENCRYPTION") return SinkGroup::kEncryption;
  throw ParseError("unknown sink group '" + std::string(s) +
                   "' (expected NETWORK or ENCRYPTION)");
}

struct TaintConfig {
  std::map<std::string, std::string> sources;  // api -> signal label
  std::map<std::string, SinkGroup> sinks;      // api -> sink group
  std::set<std::string> propagators;

  void validate() const {
    for (const auto& [api, label] : sources) {
      if (sinks.contains(api))
        throw ConfigError("API '" + api + "' is configured as both source and sink");
      if (label.empty()) throw ConfigError("source '" + api + "' has an empty label");
    }
  }
};

inline TaintConfig parse_taint_config_json(std::string_view text,
                                           const std::string& source = {}) {
  try {
    const auto j = nlohmann::json::parse(text);
    TaintConfig c;
    if (j.contains("sources"))
      for (const auto& [api, label] : j.at("sources").items())
        c.sources.emplace(api, label.get<std::string>());
    if (j.contains("sinks"))
      for (const auto& [api, group] : j.at("sinks").items())
        c.sinks.emplace(api, parse_sink_group(group.get<std::string>()));
    if (j.contains("propagators"))
      for (const auto& api : j.at("propagators")) c.propagators.insert(api.get<std::string>());
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("taint config: ") + e.what(), 0, 0, source);
  } catch (const ParseError& e) {
    throw ParseError(e.message(), 0, 0, source);
  }
}

inline nlohmann::json taint_config_to_json(const TaintConfig& c) {
  nlohmann::json j;
  j["sources"] = nlohmann::json::object();
  for (const auto& [api, label] : c.sources) j["sources"][api] = label;
  j["sinks"] = nlohmann::json::object();
  for (const auto& [api, g] : c.sinks) j["sinks"][api] = sink_group_name(g);
  j["propagators"] = c.propagators;
  return j;
}

enum class SourceScope : std::uint8_t { kMainOnly, kWholeBundle };

struct AnalysisOptions {
  SourceScope scope = SourceScope::kMainOnly;
  int context_depth = 1;  // 0..2
  // Unknown external APIs forward argument taint to their result when set.
  bool conservative_unknown_apis = false;
};

// (method id, instruction index)
struct Site {
  std::string method;
  std::uint32_t index = 0;

  auto operator<=>(const Site&) const = default;
  bool operator==(const Site&) const = default;
  std::string str() const { return method + "@" + std::to_string(index); }
};

// Call-site chain, most recent call first.
struct Context {
  std::vector<Site> chain;
  bool top = false;

  auto operator<=>(const Context&) const = default;
  bool operator==(const Context&) const = default;

  Context push(const Site& call, int k) const {
    if (top || static_cast<int>(chain.size()) + 1 > k) return Context{{}, true};
    Context c;
    c.chain.reserve(chain.size() + 1);
    c.chain.push_back(call);
    c.chain.insert(c.chain.end(), chain.begin(), chain.end());
    return c;
  }

  std::string str() const {
    if (top) return "[T]";
    std::string out = "[";
    for (std::size_t i = 0; i < chain.size(); ++i) {
      if (i) out += ",";
      out += chain[i].str();
    }
    return out + "]";
  }
};

struct TaintNode {
  enum class Kind : std::uint8_t { kRegister, kField, kReturn, kSink };

  Kind kind = Kind::kRegister;
  std::string name;  // method id, or field id for kField
  ir::Reg reg;       // kRegister only
  // kRegister: defining instruction index, -1 for a parameter.
  // kSink: index of the sink call.
  std::int32_t index = -1;
  Context ctx;

  auto operator<=>(const TaintNode&) const = default;
  bool operator==(const TaintNode&) const = default;

  static TaintNode register_node(std::string method, ir::Reg r, std::int32_t def,
                                 Context ctx) {
    return {Kind::kRegister, std::move(method), r, def, std::move(ctx)};
  }
  static TaintNode field_node(std::string field) {
    return {Kind::kField, std::move(field), {}, -1, {}};
  }
  static TaintNode return_node(std::string method, Context ctx) {
    return {Kind::kReturn, std::move(method), {}, -1, std::move(ctx)};
  }
  static TaintNode sink_node(std::string method, std::int32_t index, Context ctx) {
    return {Kind::kSink, std::move(method), {}, index, std::move(ctx)};
  }

  std::string str() const {
    switch (kind) {
      case Kind::kRegister:
        return "reg(" + name + "," + reg.str() + "@" +
               (index < 0 ? std::string("param") : std::to_string(index)) + "," +
               ctx.str() + ")";
      case Kind::kField:
        return "field(" + name + ")";
      case Kind::kReturn:
        return "ret(" + name + "," + ctx.str() + ")";
      case Kind::kSink:
        return "sink(" + name + "@" + std::to_string(index) + "," + ctx.str() + ")";
    }
    return {};
  }
};

// One taint fact: a signal produced at a source call.
struct SourceTag {
  std::string label;
  std::string api;
  Site site;

  auto operator<=>(const SourceTag&) const = default;
  bool operator==(const SourceTag&) const = default;
};

using NodeId = std::uint32_t;

struct Edge {
  NodeId from;
  NodeId to;
  Site via;  // instruction that induced the transfer
};

class TaintFlowGraph {
 public:
  std::size_t node_count() const { return nodes_.size(); }
  const TaintNode& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<TaintNode>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::uint32_t>& out_edges(NodeId id) const { return out_.at(id); }

  std::optional<NodeId> find(const TaintNode& n) const {
    auto it = index_.find(n);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<SourceTag>& tag_table() const { return tag_table_; }
  const std::set<std::uint32_t>& tag_ids(NodeId id) const { return tags_.at(id); }
  const std::set<std::uint32_t>& seed_ids(NodeId id) const { return seeds_.at(id); }

  std::set<SourceTag> tags(NodeId id) const {
    std::set<SourceTag> out;
    for (auto t : tags_.at(id)) out.insert(tag_table_[t]);
    return out;
  }

  std::set<std::string> labels(NodeId id) const {
    std::set<std::string> out;
    for (auto t : tags_.at(id)) out.insert(tag_table_[t].label);
    return out;
  }

  // One extra propagation round over every edge changes nothing.
  bool is_fixed_point() const {
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      for (auto t : seeds_[n])
        if (!tags_[n].contains(t)) return false;
    }
    for (const Edge& e : edges_) {
      for (auto t : tags_[e.from])
        if (!tags_[e.to].contains(t)) return false;
    }
    return true;
  }

 private:
  friend class Analyzer;

  NodeId intern(const TaintNode& n) {
    auto [it, inserted] = index_.emplace(n, static_cast<NodeId>(nodes_.size()));
    if (inserted) {
      nodes_.push_back(n);
      out_.emplace_back();
      tags_.emplace_back();
      seeds_.emplace_back();
    }
    return it->second;
  }

  std::vector<TaintNode> nodes_;
  std::map<TaintNode, NodeId> index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::uint32_t>> out_;
  std::vector<SourceTag> tag_table_;
  std::vector<std::set<std::uint32_t>> tags_;
  std::vector<std::set<std::uint32_t>> seeds_;
};

struct FlowFinding {
  std::string source_label;
  std::string source_api;
  Site source_site;
  std::string sink_api;
  SinkGroup sink_group = SinkGroup::kNetwork;
  Site sink_site;
  std::vector<TaintNode> path;  // source register ... sink node
};

struct TaintResult {
  TaintFlowGraph graph;
  std::vector<FlowFinding> findings;
  std::vector<std::string> diagnostics;
};

using CodeMap = std::map<SdkCoordinate, ir::SdkIR>;

class Analyzer {
 public:
  Analyzer(const dep::ResolvedBundle& bundle, const CodeMap& code,
           const TaintConfig& config, const AnalysisOptions& options)
      : bundle_(bundle), config_(config), options_(options) {
    if (options.context_depth < 0 || options.context_depth > 2)
      throw ConfigError("context depth must be within 0..2");
    config.validate();
    for (const SdkCoordinate& c : bundle.coordinates()) {
      auto it = code.find(c);
      if (it == code.end()) throw AnalysisError("missing IR for bundle coordinate " + c.str());
      const bool is_main = c == bundle.main;
      for (const ir::ClassIR& cls : it->second.classes) {
        for (const ir::MethodIR& m : cls.methods) {
          if (!methods_.emplace(m.id, MethodInfo{&m, is_main, {}}).second)
            throw AnalysisError("method id '" + m.id + "' is defined twice in the bundle of " +
                                bundle.main.str());
        }
      }
    }
    for (auto& [id, info] : methods_) info.versions = resolve_versions(*info.method);
  }

  TaintResult run() {
    build();
    propagate();
    TaintResult r;
    r.findings = collect_findings();
    r.diagnostics = std::move(diagnostics_);
    r.graph = std::move(graph_);
    return r;
  }

 private:
  struct MethodInfo {
    const ir::MethodIR* method;
    bool in_main;
    // versions[i][j]: defining index of srcs[j] at instruction i (-1 = param)
    std::vector<std::vector<std::int32_t>> versions;
  };

  static std::vector<std::vector<std::int32_t>> resolve_versions(const ir::MethodIR& m) {
    std::map<ir::Reg, std::int32_t> current;
    for (ir::Reg p : m.params) current[p] = -1;
    std::vector<std::vector<std::int32_t>> out(m.body.size());
    for (std::size_t i = 0; i < m.body.size(); ++i) {
      const ir::Instruction& ins = m.body[i];
      for (ir::Reg r : ins.srcs) out[i].push_back(current.at(r));
      if (ins.dst) current[*ins.dst] = static_cast<std::int32_t>(i);
    }
    return out;
  }

  NodeId use(const std::string& m, const MethodInfo& info, std::size_t i, std::size_t j,
             const Context& ctx) {
    const ir::Instruction& ins = info.method->body[i];
    return graph_.intern(TaintNode::register_node(m, ins.srcs[j], info.versions[i][j], ctx));
  }

  NodeId def(const std::string& m, std::size_t i, const ir::Instruction& ins,
             const Context& ctx) {
    return graph_.intern(
        TaintNode::register_node(m, *ins.dst, static_cast<std::int32_t>(i), ctx));
  }

  void add_edge(NodeId from, NodeId to, const Site& via) {
    graph_.out_[from].push_back(static_cast<std::uint32_t>(graph_.edges_.size()));
    graph_.edges_.push_back(Edge{from, to, via});
  }

  std::uint32_t tag_id(const SourceTag& t) {
    auto [it, inserted] = tag_index_.emplace(t, static_cast<std::uint32_t>(graph_.tag_table_.size()));
    if (inserted) graph_.tag_table_.push_back(t);
    return it->second;
  }

  void note(std::string msg) {
    if (std::find(diagnostics_.begin(), diagnostics_.end(), msg) == diagnostics_.end())
      diagnostics_.push_back(std::move(msg));
  }

  void build() {
    std::deque<std::pair<std::string, Context>> work;
    std::set<std::pair<std::string, Context>> seen;
    auto enqueue = [&](const std::string& m, Context ctx) {
      if (seen.emplace(m, ctx).second) work.emplace_back(m, std::move(ctx));
    };
    for (const auto& [id, info] : methods_) {
      if (info.in_main && info.method->visibility == ir::Visibility::kPublic)
        enqueue(id, Context{});
    }
    while (!work.empty()) {
      auto [m, ctx] = std::move(work.front());
      work.pop_front();
      visit(m, ctx, enqueue);
    }
  }

  template <typename Enqueue>
  void visit(const std::string& m, const Context& ctx, Enqueue&& enqueue) {
    using IK = ir::InstructionKind;
    const MethodInfo& info = methods_.at(m);
    const ir::MethodIR& method = *info.method;
    graph_.intern(TaintNode::return_node(m, ctx));
    for (ir::Reg p : method.params)
      graph_.intern(TaintNode::register_node(m, p, -1, ctx));

    for (std::size_t i = 0; i < method.body.size(); ++i) {
      const ir::Instruction& ins = method.body[i];
      const Site here{m, static_cast<std::uint32_t>(i)};
      const std::optional<NodeId> dst =
          ins.dst ? std::optional<NodeId>(def(m, i, ins, ctx)) : std::nullopt;
      auto all_srcs_to = [&](NodeId to) {
        for (std::size_t j = 0; j < ins.srcs.size(); ++j)
          add_edge(use(m, info, i, j, ctx), to, here);
      };
      switch (ins.kind) {
        case IK::ASSIGN:
        case IK::CAST:
        case IK::MOVE_RESULT:
        case IK::UNARY_OP:
        case IK::BINARY_OP:
        case IK::CMP:
          all_srcs_to(*dst);
          break;
        case IK::LOAD_INSTANCE:
        case IK::LOAD_STATIC:
          add_edge(graph_.intern(TaintNode::field_node(*ins.field)), *dst, here);
          break;
        case IK::STORE_INSTANCE:
          add_edge(use(m, info, i, 1, ctx), graph_.intern(TaintNode::field_node(*ins.field)),
                   here);
          break;
        case IK::STORE_STATIC:
          add_edge(use(m, info, i, 0, ctx), graph_.intern(TaintNode::field_node(*ins.field)),
                   here);
          break;
        case IK::LOAD_ARRAY:
          add_edge(use(m, info, i, 0, ctx), *dst, here);
          break;
        case IK::STORE_ARRAY:
          add_edge(use(m, info, i, 2, ctx), use(m, info, i, 0, ctx), here);
          break;
        case IK::RETURN:
          add_edge(use(m, info, i, 0, ctx), graph_.intern(TaintNode::return_node(m, ctx)), here);
          break;
        case IK::INVOKE_VIRTUAL:
        case IK::INVOKE_STATIC:
        case IK::INVOKE_DIRECT:
        case IK::INVOKE_INTERFACE:
        case IK::INVOKE_SUPER:
          if (ins.callee)
            visit_call(m, info, i, ins, ctx, dst, enqueue);
          else
            visit_api(m, info, i, ins, ctx, dst);
          break;
        default:
          // CONST*, NEW_*, INSTANCE_OF, ARRAY_LENGTH, MOVE_EXCEPTION define
          // clean values; control flow and monitors carry no data.
          break;
      }
    }
  }

  template <typename Enqueue>
  void visit_call(const std::string& m, const MethodInfo& info, std::size_t i,
                  const ir::Instruction& ins, const Context& ctx, std::optional<NodeId> dst,
                  Enqueue&& enqueue) {
    const Site here{m, static_cast<std::uint32_t>(i)};
    auto callee = methods_.find(*ins.callee);
    if (callee == methods_.end()) {
      note("unresolved callee '" + *ins.callee + "' at " + here.str() +
           " treated as an opaque propagator");
      if (dst)
        for (std::size_t j = 0; j < ins.srcs.size(); ++j)
          add_edge(use(m, info, i, j, ctx), *dst, here);
      return;
    }
    const ir::MethodIR& target = *callee->second.method;
    const Context callee_ctx = ctx.push(here, options_.context_depth);
    if (target.params.size() != ins.srcs.size())
      note("arity mismatch calling '" + target.id + "' at " + here.str());
    const std::size_t bound = std::min(target.params.size(), ins.srcs.size());
    for (std::size_t j = 0; j < bound; ++j) {
      add_edge(use(m, info, i, j, ctx),
               graph_.intern(TaintNode::register_node(target.id, target.params[j], -1,
                                                      callee_ctx)),
               here);
    }
    if (dst) add_edge(graph_.intern(TaintNode::return_node(target.id, callee_ctx)), *dst, here);
    enqueue(target.id, callee_ctx);
  }

  void visit_api(const std::string& m, const MethodInfo& info, std::size_t i,
                 const ir::Instruction& ins, const Context& ctx, std::optional<NodeId> dst) {
    const Site here{m, static_cast<std::uint32_t>(i)};
    const std::string& api = *ins.api;
    auto source = config_.sources.find(api);
    auto sink = config_.sinks.find(api);
    const bool propagates =
        config_.propagators.contains(api) ||
        (options_.conservative_unknown_apis && source == config_.sources.end() &&
         sink == config_.sinks.end());
    if (source != config_.sources.end() && dst &&
        (options_.scope == SourceScope::kWholeBundle || info.in_main)) {
      graph_.seeds_[*dst].insert(tag_id(SourceTag{source->second, api, here}));
    }
    if (sink != config_.sinks.end()) {
      const NodeId s = graph_.intern(
          TaintNode::sink_node(m, static_cast<std::int32_t>(i), ctx));
      for (std::size_t j = 0; j < ins.srcs.size(); ++j) add_edge(use(m, info, i, j, ctx), s, here);
      sink_sites_.emplace(here, std::make_pair(api, sink->second));
    }
    if (propagates && dst) {
      for (std::size_t j = 0; j < ins.srcs.size(); ++j)
        add_edge(use(m, info, i, j, ctx), *dst, here);
    }
  }

  void propagate() {
    std::deque<NodeId> work;
    std::vector<char> queued(graph_.nodes_.size(), 0);
    for (NodeId n = 0; n < graph_.nodes_.size(); ++n) {
      if (!graph_.seeds_[n].empty()) {
        graph_.tags_[n] = graph_.seeds_[n];
        work.push_back(n);
        queued[n] = 1;
      }
    }
    while (!work.empty()) {
      const NodeId n = work.front();
      work.pop_front();
      queued[n] = 0;
      for (auto e : graph_.out_[n]) {
        const NodeId to = graph_.edges_[e].to;
        bool changed = false;
        for (auto t : graph_.tags_[n]) changed |= graph_.tags_[to].insert(t).second;
        if (changed && !queued[to]) {
          work.push_back(to);
          queued[to] = 1;
        }
      }
    }
  }

  // Shortest tagged path from any seed of `tag` to a sink node at `sink`.
  std::vector<TaintNode> reconstruct(std::uint32_t tag, const Site& sink) const {
    const std::size_t n = graph_.nodes_.size();
    std::vector<std::int64_t> prev(n, -2);
    std::deque<NodeId> q;
    for (NodeId v = 0; v < n; ++v) {
      if (graph_.seeds_[v].contains(tag)) {
        prev[v] = -1;
        q.push_back(v);
      }
    }
    while (!q.empty()) {
      const NodeId v = q.front();
      q.pop_front();
      const TaintNode& node = graph_.nodes_[v];
      if (node.kind == TaintNode::Kind::kSink && node.name == sink.method &&
          node.index == static_cast<std::int32_t>(sink.index)) {
        std::vector<TaintNode> path;
        for (std::int64_t c = v; c >= 0; c = prev[static_cast<std::size_t>(c)])
          path.push_back(graph_.nodes_[static_cast<std::size_t>(c)]);
        std::reverse(path.begin(), path.end());
        return path;
      }
      for (auto e : graph_.out_[v]) {
        const NodeId to = graph_.edges_[e].to;
        if (prev[to] == -2 && graph_.tags_[to].contains(tag)) {
          prev[to] = v;
          q.push_back(to);
        }
      }
    }
    return {};
  }

  std::vector<FlowFinding> collect_findings() const {
    std::set<std::pair<Site, std::uint32_t>> keys;
    for (NodeId v = 0; v < graph_.nodes_.size(); ++v) {
      const TaintNode& node = graph_.nodes_[v];
      if (node.kind != TaintNode::Kind::kSink) continue;
      const Site site{node.name, static_cast<std::uint32_t>(node.index)};
      for (auto t : graph_.tags_[v]) keys.emplace(site, t);
    }
    std::vector<FlowFinding> out;
    for (const auto& [site, t] : keys) {
      const SourceTag& tag = graph_.tag_table_[t];
      const auto& [api, group] = sink_sites_.at(site);
      out.push_back(FlowFinding{tag.label, tag.api, tag.site, api, group, site,
                                reconstruct(t, site)});
    }
    std::sort(out.begin(), out.end(), [](const FlowFinding& a, const FlowFinding& b) {
      return std::tie(a.sink_site, a.source_site, a.source_label) <
             std::tie(b.sink_site, b.source_site, b.source_label);
    });
    return out;
  }

  const dep::ResolvedBundle& bundle_;
  const TaintConfig& config_;
  AnalysisOptions options_;
  std::map<std::string, MethodInfo> methods_;
  TaintFlowGraph graph_;
  std::map<SourceTag, std::uint32_t> tag_index_;
  std::map<Site, std::pair<std::string, SinkGroup>> sink_sites_;
  std::vector<std::string> diagnostics_;
};

inline TaintResult analyze(const dep::ResolvedBundle& bundle, const CodeMap& code,
                           const TaintConfig& config, const AnalysisOptions& options = {}) {
  return Analyzer(bundle, code, config, options).run();
}

inline std::set<std::string> reachable_labels(const TaintFlowGraph& graph,
                                              const TaintNode& node) {
  auto id = graph.find(node);
  if (!id) throw AnalysisError("unknown taint node " + node.str());
  return graph.labels(*id);
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json site_to_json(const Site& s) {
  return nlohmann::json{{"method", s.method}, {"index", s.index}};
}

inline Site site_from_json(const nlohmann::json& j) {
  return Site{j.at("method").get<std::string>(), j.at("index").get<std::uint32_t>()};
}

inline nlohmann::json finding_to_json(const FlowFinding& f) {
  nlohmann::json j;
  j["sourceLabel"] = f.source_label;
  j["sourceApi"] = f.source_api;
  j["sourceSite"] = site_to_json(f.source_site);
  j["sinkApi"] = f.sink_api;
  j["sinkGroup"] = sink_group_name(f.sink_group);
  j["sinkSite"] = site_to_json(f.sink_site);
  j["path"] = nlohmann::json::array();
  for (const TaintNode& n : f.path) j["path"].push_back(n.str());
  return j;
}

// Path nodes are rendered for humans only; they do not round-trip.
inline FlowFinding finding_from_json(const nlohmann::json& j) {
  FlowFinding f;
  f.source_label = j.at("sourceLabel").get<std::string>();
  f.source_api = j.at("sourceApi").get<std::string>();
  f.source_site = site_from_json(j.at("sourceSite"));
  f.sink_api = j.at("sinkApi").get<std::string>();
  f.sink_group = parse_sink_group(j.at("sinkGroup").get<std::string>());
  f.sink_site = site_from_json(j.at("sinkSite"));
  return f;
}

}  // namespace fpscope::taint
