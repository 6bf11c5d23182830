#pragma once

// SDK identification by weighted feature hashing and cosine similarity.
//
// Each method becomes a sparse vector over 2^64 hashed feature names:
//   sig:<anonymized signature>   1
//   api:<framework api>          invocation count
//   str:<string constant>        1
//   op:<INSTRUCTION_KIND>        count / body length
// Classes are sums of their method vectors. Feature weights are
// ln(1 + |corpus| / df) where df counts the SDKs containing the feature.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fpscope/coordinate.hpp"
#include "fpscope/error.hpp"
#include "fpscope/hash.hpp"
#include "fpscope/ir.hpp"

namespace fpscope::match {

using Dim = std::uint64_t;

inline Dim feature_dim(std::string_view feature_name) { return fnv1a64(feature_name); }

class FeatureVector {
 public:
  FeatureVector() = default;

  void add(Dim d, double w) {
    if (w == 0.0) return;
    double& slot = entries_[d];
    slot += w;
    if (slot == 0.0) entries_.erase(d);
  }

  double get(Dim d) const {
    auto it = entries_.find(d);
    return it == entries_.end() ? 0.0 : it->second;
  }

  const std::map<Dim, double>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  double norm() const {
    double s = 0.0;
    for (const auto& [_, w] : entries_) s += w * w;
    return std::sqrt(s);
  }

  FeatureVector& operator+=(const FeatureVector& other) {
    for (const auto& [d, w] : other.entries_) add(d, w);
    return *this;
  }

  FeatureVector scaled(double alpha) const {
    FeatureVector out;
    for (const auto& [d, w] : entries_) out.add(d, alpha * w);
    return out;
  }

  bool operator==(const FeatureVector&) const = default;

 private:
  std::map<Dim, double> entries_;
};

inline FeatureVector operator+(FeatureVector a, const FeatureVector& b) {
  a += b;
  return a;
}

// Feature names and unweighted values of one method, before hashing.
inline std::map<std::string, double> named_features(const ir::MethodIR& m) {
  std::map<std::string, double> out;
  out["sig:" + m.anon_signature] = 1.0;
  std::array<std::uint32_t, ir::kInstructionKindCount> ops{};
  for (const ir::Instruction& ins : m.body) {
    ++ops[static_cast<std::size_t>(ins.kind)];
    if (ins.api) out["api:" + *ins.api] += 1.0;
    if (ins.literal) out["str:" + *ins.literal] = 1.0;
  }
  if (!m.body.empty()) {
    const double len = static_cast<double>(m.body.size());
    for (auto k : ir::all_kinds()) {
      const auto c = ops[static_cast<std::size_t>(k)];
      if (c) out["op:" + std::string(ir::kind_name(k))] = c / len;
    }
  }
  return out;
}

inline FeatureVector extract_features(const ir::MethodIR& m) {
  FeatureVector v;
  for (const auto& [name, w] : named_features(m)) v.add(feature_dim(name), w);
  return v;
}

class WeightTable {
 public:
  WeightTable() = default;
  explicit WeightTable(std::map<Dim, double> weights) : weights_(std::move(weights)) {
    for (const auto& [d, w] : weights_)
      if (!(w > 0.0)) throw ConfigError("feature weights must be strictly positive");
  }

  double weight(Dim d) const {
    auto it = weights_.find(d);
    return it == weights_.end() ? 1.0 : it->second;
  }
  const std::map<Dim, double>& entries() const { return weights_; }

  // FNV-1a over (dimension, IEEE-754 bits) pairs in ascending dimension order.
  std::uint64_t fingerprint() const {
    Fnv1a64 h;
    for (const auto& [d, w] : weights_) h.update_u64(d).update_u64(std::bit_cast<std::uint64_t>(w));
    return h.digest();
  }

  bool operator==(const WeightTable&) const = default;

 private:
  std::map<Dim, double> weights_;
};

inline std::set<Dim> sdk_dimensions(const ir::SdkIR& sdk) {
  std::set<Dim> dims;
  for (const auto& cls : sdk.classes)
    for (const auto& m : cls.methods) {
      const FeatureVector v = extract_features(m);
      for (const auto& [d, _] : v.entries()) dims.insert(d);
    }
  return dims;
}

// dimension -> number of SDKs containing it
inline std::map<Dim, std::size_t> document_frequencies(std::span<const ir::SdkIR> corpus) {
  std::map<Dim, std::size_t> df;
  for (const auto& sdk : corpus)
    for (Dim d : sdk_dimensions(sdk)) ++df[d];
  return df;
}

inline WeightTable compute_weights(std::span<const ir::SdkIR> corpus) {
  if (corpus.empty()) throw ConfigError("cannot compute weights over an empty corpus");
  const double n = static_cast<double>(corpus.size());
  std::map<Dim, double> w;
  for (const auto& [d, df] : document_frequencies(corpus))
    w.emplace(d, std::log(1.0 + n / static_cast<double>(df)));
  return WeightTable(std::move(w));
}

// Bucket f counts features with document frequency f; frequencies above
// max_bucket land in the last bucket.
inline std::map<std::size_t, std::size_t> feature_frequency_histogram(
    std::span<const ir::SdkIR> corpus, std::size_t max_bucket = 10) {
  if (corpus.empty()) throw ConfigError("cannot build a histogram over an empty corpus");
  if (max_bucket == 0) throw ConfigError("histogram needs at least one bucket");
  std::map<std::size_t, std::size_t> hist;
  for (std::size_t f = 1; f <= max_bucket; ++f) hist[f] = 0;
  for (const auto& [_, df] : document_frequencies(corpus)) ++hist[std::min(df, max_bucket)];
  return hist;
}

inline FeatureVector weighted_vector(const FeatureVector& v, const WeightTable& w) {
  FeatureVector out;
  for (const auto& [d, x] : v.entries()) out.add(d, x * w.weight(d));
  return out;
}

namespace detail {

inline double sparse_dot(const FeatureVector& a, const FeatureVector& b) {
  double dot = 0.0;
  auto ia = a.entries().begin();
  auto ib = b.entries().begin();
  while (ia != a.entries().end() && ib != b.entries().end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return dot;
}

inline double finish_cosine(double dot, double na, double nb) {
  return std::clamp(dot / (na * nb), 0.0, 1.0);
}

}  // namespace detail

inline double cosine(const FeatureVector& a, const FeatureVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw AnalysisError("cosine of a zero-norm vector");
  return detail::finish_cosine(detail::sparse_dot(a, b), na, nb);
}

inline FeatureVector class_vector(const ir::ClassIR& c, const WeightTable& w) {
  if (c.methods.empty()) throw AnalysisError("class '" + c.id + "' has no methods");
  FeatureVector out;
  for (const auto& m : c.methods) out += weighted_vector(extract_features(m), w);
  return out;
}

// ---------------------------------------------------------------------------
// Index

struct ClassRef {
  std::uint32_t sdk = 0;
  std::uint32_t cls = 0;
  auto operator<=>(const ClassRef&) const = default;
  bool operator==(const ClassRef&) const = default;
};

struct Candidate {
  ClassRef ref;
  double similarity = 0.0;
  bool operator==(const Candidate&) const = default;
};

class SdkIndex {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  struct ClassEntry {
    std::string id;
    FeatureVector vector;  // weighted
    double norm = 0.0;
  };
  struct SdkEntry {
    SdkCoordinate coordinate;
    std::vector<ClassEntry> classes;
  };

  SdkIndex() = default;

  static SdkIndex build(std::span<const ir::SdkIR> corpus, const WeightTable& w) {
    if (corpus.empty()) throw ConfigError("cannot index an empty corpus");
    SdkIndex idx;
    idx.weights_ = w;
    std::set<SdkCoordinate> seen;
    for (const auto& sdk : corpus) {
      if (!seen.insert(sdk.coordinate).second)
        throw ConfigError("corpus contains " + sdk.coordinate.str() + " twice");
      SdkEntry e{sdk.coordinate, {}};
      for (const auto& cls : sdk.classes) {
        if (cls.methods.empty()) continue;
        ClassEntry ce{cls.id, class_vector(cls, w), 0.0};
        ce.norm = ce.vector.norm();
        e.classes.push_back(std::move(ce));
      }
      idx.sdks_.push_back(std::move(e));
    }
    idx.fingerprint_ = w.fingerprint();
    idx.rebuild_postings();
    return idx;
  }

  const std::vector<SdkEntry>& sdks() const { return sdks_; }
  const WeightTable& weights() const { return weights_; }
  std::uint64_t weights_fingerprint() const { return fingerprint_; }
  const ClassEntry& entry(ClassRef r) const { return sdks_.at(r.sdk).classes.at(r.cls); }

  std::size_t class_count() const {
    std::size_t n = 0;
    for (const auto& s : sdks_) n += s.classes.size();
    return n;
  }

  // Every indexed class with cosine >= eta, ordered by ClassRef. Exact.
  std::vector<Candidate> candidates(const FeatureVector& query, double eta) const {
    const double qn = query.norm();
    if (qn == 0.0) throw AnalysisError("cosine of a zero-norm vector");
    std::map<ClassRef, double> dots;
    for (const auto& [d, q] : query.entries()) {
      auto it = postings_.find(d);
      if (it == postings_.end()) continue;
      for (const auto& [ref, w] : it->second) dots[ref] += q * w;
    }
    std::vector<Candidate> out;
    for (const auto& [ref, dot] : dots) {
      const double sim = detail::finish_cosine(dot, qn, entry(ref).norm);
      if (sim >= eta) out.push_back(Candidate{ref, sim});
    }
    return out;
  }

  // Binary layout, little-endian:
  //   "FPSIDX\0\0" u32 version u64 weights-fingerprint u32 sdk-count
  //   per sdk:   str coordinate, u32 class-count
  //   per class: str id, u32 n, n x (u64 dim, f64 weight) ascending by dim
  //   trailer:   u64 n, n x (u64 dim, f64 weight)   -- the weight table
  // where str is u32 length + bytes.
  std::string serialize() const {
    std::string out("FPSIDX\0\0", 8);
    put_u32(out, kFormatVersion);
    put_u64(out, fingerprint_);
    put_u32(out, static_cast<std::uint32_t>(sdks_.size()));
    for (const auto& s : sdks_) {
      put_str(out, s.coordinate.str());
      put_u32(out, static_cast<std::uint32_t>(s.classes.size()));
      for (const auto& c : s.classes) {
        put_str(out, c.id);
        put_u32(out, static_cast<std::uint32_t>(c.vector.size()));
        for (const auto& [d, w] : c.vector.entries()) {
          put_u64(out, d);
          put_u64(out, std::bit_cast<std::uint64_t>(w));
        }
      }
    }
    put_u64(out, weights_.entries().size());
    for (const auto& [d, w] : weights_.entries()) {
      put_u64(out, d);
      put_u64(out, std::bit_cast<std::uint64_t>(w));
    }
    return out;
  }

  static SdkIndex deserialize(std::string_view bytes) {
    Reader r{bytes};
    if (r.take(8) != std::string_view("FPSIDX\0\0", 8)) throw ParseError("not an fpscope index");
    if (const auto v = r.u32(); v != kFormatVersion)
      throw ParseError("unsupported index format version " + std::to_string(v));
    SdkIndex idx;
    idx.fingerprint_ = r.u64();
    const auto n_sdks = r.u32();
    for (std::uint32_t s = 0; s < n_sdks; ++s) {
      SdkEntry e;
      e.coordinate = SdkCoordinate::parse(r.str());
      const auto n_classes = r.u32();
      for (std::uint32_t c = 0; c < n_classes; ++c) {
        ClassEntry ce;
        ce.id = std::string(r.str());
        const auto n = r.u32();
        Dim last = 0;
        for (std::uint32_t k = 0; k < n; ++k) {
          const Dim d = r.u64();
          const double w = std::bit_cast<double>(r.u64());
          if (k > 0 && d <= last) throw ParseError("index vector not sorted by dimension");
          last = d;
          ce.vector.add(d, w);
        }
        ce.norm = ce.vector.norm();
        e.classes.push_back(std::move(ce));
      }
      idx.sdks_.push_back(std::move(e));
    }
    std::map<Dim, double> w;
    const auto n_w = r.u64();
    for (std::uint64_t k = 0; k < n_w; ++k) {
      const Dim d = r.u64();
      w.emplace(d, std::bit_cast<double>(r.u64()));
    }
    if (!r.done()) throw ParseError("trailing bytes in index file");
    idx.weights_ = WeightTable(std::move(w));
    if (idx.weights_.fingerprint() != idx.fingerprint_)
      throw ParseError("index weight table does not match its fingerprint");
    idx.rebuild_postings();
    return idx;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    const std::string bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw AnalysisError("cannot write index " + path.string());
  }

  static SdkIndex load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open index " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
  }

 private:
  struct Reader {
    std::string_view bytes;
    std::size_t pos = 0;

    std::string_view take(std::size_t n) {
      if (bytes.size() - pos < n) throw ParseError("truncated index file");
      auto out = bytes.substr(pos, n);
      pos += n;
      return out;
    }
    std::uint64_t le(std::size_t n) {
      auto b = take(n);
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < n; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
      return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    std::string_view str() { return take(u32()); }
    bool done() const { return pos == bytes.size(); }
  };

  static void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
  }
  static void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
  }
  static void put_str(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
  }

  void rebuild_postings() {
    postings_.clear();
    for (std::uint32_t s = 0; s < sdks_.size(); ++s)
      for (std::uint32_t c = 0; c < sdks_[s].classes.size(); ++c)
        for (const auto& [d, w] : sdks_[s].classes[c].vector.entries())
          postings_[d].emplace_back(ClassRef{s, c}, w);
  }

  std::vector<SdkEntry> sdks_;
  WeightTable weights_;
  std::uint64_t fingerprint_ = 0;
  std::unordered_map<Dim, std::vector<std::pair<ClassRef, double>>> postings_;
};

inline SdkIndex build_index(std::span<const ir::SdkIR> corpus, const WeightTable& w) {
  return SdkIndex::build(corpus, w);
}

// ---------------------------------------------------------------------------
// Matching

struct SdkSupport {
  SdkCoordinate sdk;
  std::size_t matched_classes = 0;
  std::size_t total_classes = 0;
  double support = 0.0;
  bool accepted = false;
};

struct MatchReport {
  std::string app_id;
  std::vector<SdkSupport> sdks;  // index order
  // app class id -> candidate SDK classes surviving the support filter
  std::map<std::string, std::vector<Candidate>> candidates;

  std::vector<SdkCoordinate> accepted() const {
    std::vector<SdkCoordinate> out;
    for (const auto& s : sdks)
      if (s.accepted) out.push_back(s.sdk);
    std::sort(out.begin(), out.end());
    return out;
  }
};

inline void check_thresholds(double eta, double gamma) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("similarity threshold eta must be in (0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw ConfigError("support threshold gamma must be in (0, 1]");
}

// Stage 1: candidates per app class with cosine >= eta.
// Stage 2: an SDK is kept when the fraction of its classes hit by any app
// class is >= gamma; rejected SDKs are removed from every candidate set.
inline MatchReport match(const ir::SdkIR& app, const SdkIndex& index, const WeightTable& weights,
                         double eta, double gamma) {
  check_thresholds(eta, gamma);
  if (weights.fingerprint() != index.weights_fingerprint())
    throw ConfigError("weight table does not match the one the index was built with");
  MatchReport report;
  report.app_id = app.coordinate.str();
  for (const auto& cls : app.classes) {
    auto& slot = report.candidates[cls.id];
    if (cls.methods.empty()) continue;
    slot = index.candidates(class_vector(cls, weights), eta);
  }
  std::vector<std::set<std::uint32_t>> hit(index.sdks().size());
  for (const auto& [_, cands] : report.candidates)
    for (const auto& c : cands) hit[c.ref.sdk].insert(c.ref.cls);

  std::set<std::uint32_t> rejected;
  for (std::uint32_t s = 0; s < index.sdks().size(); ++s) {
    SdkSupport sup;
    sup.sdk = index.sdks()[s].coordinate;
    sup.total_classes = index.sdks()[s].classes.size();
    sup.matched_classes = hit[s].size();
    sup.support = sup.total_classes == 0
                      ? 0.0
                      : static_cast<double>(sup.matched_classes) /
                            static_cast<double>(sup.total_classes);
    sup.accepted = sup.total_classes > 0 && sup.support >= gamma;
    if (!sup.accepted) rejected.insert(s);
    report.sdks.push_back(std::move(sup));
  }
  for (auto& [_, cands] : report.candidates) {
    std::erase_if(cands, [&](const Candidate& c) { return rejected.contains(c.ref.sdk); });
  }
  return report;
}

inline MatchReport match(const ir::SdkIR& app, const SdkIndex& index, double eta, double gamma) {
  return match(app, index, index.weights(), eta, gamma);
}

inline nlohmann::json report_to_json(const MatchReport& r, const SdkIndex& index) {
  nlohmann::json j;
  j["app"] = r.app_id;
  j["accepted"] = nlohmann::json::array();
  for (const auto& c : r.accepted()) j["accepted"].push_back(c.str());
  j["sdks"] = nlohmann::json::array();
  for (const auto& s : r.sdks) {
    if (s.matched_classes == 0) continue;
    j["sdks"].push_back({{"sdk", s.sdk.str()},
                         {"matchedClasses", s.matched_classes},
                         {"totalClasses", s.total_classes},
                         {"support", s.support},
                         {"accepted", s.accepted}});
  }
  j["classes"] = nlohmann::json::object();
  for (const auto& [cls, cands] : r.candidates) {
    auto arr = nlohmann::json::array();
    for (const auto& c : cands) {
      arr.push_back({{"sdk", index.sdks()[c.ref.sdk].coordinate.str()},
                     {"class", index.entry(c.ref).id},
                     {"similarity", c.similarity}});
    }
    j["classes"][cls] = std::move(arr);
  }
  return j;
}

}  // namespace fpscope::match
