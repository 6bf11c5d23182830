#pragma once

// Corpus statistics over fingerprinting verdicts and app/SDK memberships.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpscope/coflow.hpp"
#include "fpscope/coordinate.hpp"
#include "fpscope/error.hpp"
#include "fpscope/ingest.hpp"

namespace fpscope::stats {

using AppSdks = std::map<std::string, std::set<SdkCoordinate>>;
using Verdicts = std::map<SdkCoordinate, coflow::FingerprintVerdict>;
using Labels = std::map<SdkCoordinate, ingest::LabelAssignment>;

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace detail {

inline bool is_flagged(const Verdicts& verdicts, const SdkCoordinate& c) {
  auto it = verdicts.find(c);
  return it != verdicts.end() && it->second.flagged;
}

inline std::set<SdkCoordinate> flagged_sdks(const AppSdks& app_sdks, const Verdicts& verdicts,
                                            const std::string& app) {
  std::set<SdkCoordinate> out;
  auto it = app_sdks.find(app);
  if (it == app_sdks.end()) return out;
  for (const auto& c : it->second)
    if (is_flagged(verdicts, c)) out.insert(c);
  return out;
}

inline void check_app_ids(std::span<const ingest::AppRecord> apps, const AppSdks& app_sdks) {
  std::set<std::string> ids;
  for (const auto& a : apps) ids.insert(a.app_id);
  for (const auto& [id, _] : app_sdks)
    if (!ids.contains(id)) throw AnalysisError("SDK membership given for unknown app '" + id + "'");
}

// Categories present in `apps`, in canonical order.
inline std::vector<std::string> present_categories(std::span<const ingest::AppRecord> apps) {
  std::set<std::size_t> idx;
  for (const auto& a : apps) {
    auto i = ingest::category_index(a.category);
    if (!i) throw AnalysisError("unknown app category '" + a.category + "'");
    idx.insert(*i);
  }
  std::vector<std::string> out;
  for (auto i : idx) out.emplace_back(ingest::kAppCategories[i]);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Prevalence

struct PrevalenceRow {
  std::string category;
  std::size_t apps = 0;
  std::size_t apps_with_flagged = 0;
  double any = 0.0;
  std::array<std::size_t, 5> label_counts{};
  std::array<double, 5> by_label{};
};

struct PrevalenceTable {
  std::vector<PrevalenceRow> rows;
  std::vector<std::string> diagnostics;
};

inline PrevalenceTable prevalence(std::span<const ingest::AppRecord> apps, const AppSdks& app_sdks,
                                  const Verdicts& verdicts, const Labels& labels) {
  detail::check_app_ids(apps, app_sdks);
  PrevalenceTable t;
  std::set<SdkCoordinate> unlabeled;
  for (const std::string& cat : detail::present_categories(apps)) {
    PrevalenceRow row;
    row.category = cat;
    for (const auto& a : apps) {
      if (a.category != cat) continue;
      ++row.apps;
      const auto flagged = detail::flagged_sdks(app_sdks, verdicts, a.app_id);
      if (flagged.empty()) continue;
      ++row.apps_with_flagged;
      std::set<ingest::SdkLabel> present;
      for (const auto& c : flagged) {
        auto l = labels.find(c);
        if (l == labels.end()) {
          unlabeled.insert(c);
          present.insert(ingest::SdkLabel::UNCLEAR_UNFOUND);
        } else {
          present.insert(l->second.label);
        }
      }
      for (auto l : present) ++row.label_counts[static_cast<std::size_t>(l)];
    }
    const double n = static_cast<double>(row.apps);
    row.any = static_cast<double>(row.apps_with_flagged) / n;
    for (std::size_t i = 0; i < 5; ++i) row.by_label[i] = static_cast<double>(row.label_counts[i]) / n;
    t.rows.push_back(std::move(row));
  }
  for (const auto& c : unlabeled)
    t.diagnostics.push_back("flagged SDK " + c.str() + " has no label; counted as UNCLEAR_UNFOUND");
  return t;
}

inline nlohmann::json prevalence_to_json(const PrevalenceTable& t) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json row;
    row["category"] = r.category;
    row["apps"] = r.apps;
    row["appsWithFlagged"] = r.apps_with_flagged;
    row["any"] = r.any;
    for (auto l : ingest::kSdkLabels)
      row["byLabel"][std::string(ingest::label_name(l))] = r.by_label[static_cast<std::size_t>(l)];
    j["rows"].push_back(std::move(row));
  }
  j["diagnostics"] = t.diagnostics;
  return j;
}

inline std::string prevalence_to_csv(const PrevalenceTable& t) {
  std::string out = "category,apps,any";
  for (auto l : ingest::kSdkLabels) out += "," + std::string(ingest::label_name(l));
  out += "\n";
  for (const auto& r : t.rows) {
    out += "\"" + r.category + "\"," + std::to_string(r.apps) + "," + format_number(r.any);
    for (double v : r.by_label) out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Co-occurrence

struct CooccurrenceMatrix {
  std::vector<std::string> categories;
  // cell (a, b); nullopt when no pair of distinct apps exists
  std::vector<std::vector<std::optional<double>>> cells;

  const std::optional<double>& at(std::size_t a, std::size_t b) const { return cells.at(a).at(b); }
};

inline constexpr std::size_t kDefaultTopK = 1000;

// Top-k apps of a category by audience size, ties by app id.
inline std::vector<const ingest::AppRecord*> top_apps(std::span<const ingest::AppRecord> apps,
                                                      const std::string& category, std::size_t k) {
  std::vector<const ingest::AppRecord*> out;
  for (const auto& a : apps)
    if (a.category == category) out.push_back(&a);
  std::sort(out.begin(), out.end(), [](const ingest::AppRecord* x, const ingest::AppRecord* y) {
    if (x->audience_size != y->audience_size) return x->audience_size > y->audience_size;
    return x->app_id < y->app_id;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

inline CooccurrenceMatrix cooccurrence(std::span<const ingest::AppRecord> apps, const AppSdks& app_sdks,
                                       const Verdicts& verdicts, std::size_t top_k = kDefaultTopK) {
  if (top_k == 0) throw ConfigError("topK must be positive");
  detail::check_app_ids(apps, app_sdks);
  CooccurrenceMatrix m;
  m.categories = detail::present_categories(apps);
  const std::size_t n = m.categories.size();
  std::vector<std::vector<std::pair<std::string, std::set<SdkCoordinate>>>> tops(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (const auto* a : top_apps(apps, m.categories[c], top_k))
      tops[c].emplace_back(a->app_id, detail::flagged_sdks(app_sdks, verdicts, a->app_id));
  }
  auto share = [](const std::set<SdkCoordinate>& x, const std::set<SdkCoordinate>& y) {
    auto ix = x.begin();
    auto iy = y.begin();
    while (ix != x.end() && iy != y.end()) {
      if (*ix < *iy) ++ix;
      else if (*iy < *ix) ++iy;
      else return true;
    }
    return false;
  };
  m.cells.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      std::size_t pairs = 0, hits = 0;
      for (const auto& [ida, sa] : tops[a]) {
        for (const auto& [idb, sb] : tops[b]) {
          if (ida == idb) continue;
          ++pairs;
          if (share(sa, sb)) ++hits;
        }
      }
      if (pairs > 0) m.cells[a][b] = m.cells[b][a] = static_cast<double>(hits) / static_cast<double>(pairs);
    }
  }
  return m;
}

inline std::string cooccurrence_to_csv(const CooccurrenceMatrix& m) {
  std::string out = "category";
  for (const auto& c : m.categories) out += ",\"" + c + "\"";
  out += "\n";
  for (std::size_t a = 0; a < m.categories.size(); ++a) {
    out += "\"" + m.categories[a] + "\"";
    for (std::size_t b = 0; b < m.categories.size(); ++b) {
      out += ",";
      if (m.cells[a][b]) out += format_number(*m.cells[a][b]);
    }
    out += "\n";
  }
  return out;
}

inline nlohmann::json cooccurrence_to_json(const CooccurrenceMatrix& m) {
  nlohmann::json j;
  j["categories"] = m.categories;
  j["cells"] = nlohmann::json::array();
  for (const auto& row : m.cells) {
    auto r = nlohmann::json::array();
    for (const auto& c : row) r.push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
    j["cells"].push_back(std::move(r));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Sensitive signal shares

struct SignalShares {
  std::size_t flagged_sdks = 0;
  std::map<std::string, std::size_t> counts;  // class name (plus "LOCATION") -> SDKs
  std::map<std::string, double> shares;
};

inline SignalShares sensitive_signal_shares(const Verdicts& verdicts,
                                            const ingest::SignalClassMap& signal_map) {
  SignalShares s;
  for (auto c : ingest::kSignalClasses) s.counts[std::string(ingest::signal_class_name(c))] = 0;
  s.counts["LOCATION"] = 0;
  for (const auto& [coord, v] : verdicts) {
    if (!v.flagged) continue;
    ++s.flagged_sdks;
    std::set<std::string> classes;
    for (const auto& api : v.apis()) {
      auto it = signal_map.find(api);
      if (it != signal_map.end()) classes.insert(std::string(ingest::signal_class_name(it->second)));
    }
    if (classes.contains("LOCATION_COARSE") || classes.contains("LOCATION_FINE"))
      classes.insert("LOCATION");
    for (const auto& c : classes) ++s.counts[c];
  }
  for (const auto& [c, n] : s.counts) {
    s.shares[c] = s.flagged_sdks == 0
                      ? 0.0
                      : static_cast<double>(n) / static_cast<double>(s.flagged_sdks);
  }
  return s;
}

inline nlohmann::json shares_to_json(const SignalShares& s) {
  nlohmann::json j;
  j["flaggedSdks"] = s.flagged_sdks;
  j["counts"] = s.counts;
  j["shares"] = s.shares;
  return j;
}

// ---------------------------------------------------------------------------
// Krippendorff's alpha, nominal metric

// items x raters; nullopt marks a missing rating
using RatingMatrix = std::vector<std::vector<std::optional<std::string>>>;

inline void validate(const RatingMatrix& r) {
  if (r.empty()) throw ConfigError("rating matrix has no items");
  const std::size_t raters = r.front().size();
  if (raters < 2) throw ConfigError("rating matrix needs at least two raters");
  bool pairable = false;
  for (const auto& item : r) {
    if (item.size() != raters) throw ConfigError("rating matrix rows differ in length");
    const auto n = std::count_if(item.begin(), item.end(), [](const auto& v) { return v.has_value(); });
    pairable = pairable || n >= 2;
  }
  if (!pairable) throw ConfigError("no item has two or more ratings");
}

struct Coincidences {
  std::vector<std::string> values;
  std::vector<std::vector<double>> o;  // o[c][k]
};

inline Coincidences coincidence_matrix(const RatingMatrix& r) {
  Coincidences m;
  std::set<std::string> vals;
  for (const auto& item : r)
    for (const auto& v : item)
      if (v) vals.insert(*v);
  m.values.assign(vals.begin(), vals.end());
  auto idx = [&](const std::string& v) {
    return static_cast<std::size_t>(std::lower_bound(m.values.begin(), m.values.end(), v) -
                                    m.values.begin());
  };
  m.o.assign(m.values.size(), std::vector<double>(m.values.size(), 0.0));
  for (const auto& item : r) {
    std::vector<std::size_t> present;
    for (const auto& v : item)
      if (v) present.push_back(idx(*v));
    if (present.size() < 2) continue;
    const double w = 1.0 / static_cast<double>(present.size() - 1);
    for (std::size_t i = 0; i < present.size(); ++i)
      for (std::size_t j = 0; j < present.size(); ++j)
        if (i != j) m.o[present[i]][present[j]] += w;
  }
  return m;
}

// alpha = 1 - (n - 1) * sum_{c != k} o_ck / sum_{c != k} n_c n_k.
// nullopt when expected disagreement is zero (a single value in use).
inline std::optional<double> krippendorff_alpha(const RatingMatrix& ratings) {
  validate(ratings);
  const Coincidences m = coincidence_matrix(ratings);
  const std::size_t v = m.values.size();
  std::vector<double> nc(v, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < v; ++c) {
    for (std::size_t k = 0; k < v; ++k) nc[c] += m.o[c][k];
    n += nc[c];
  }
  double observed = 0.0, expected = 0.0;
  for (std::size_t c = 0; c < v; ++c) {
    for (std::size_t k = 0; k < v; ++k) {
      if (c == k) continue;
      observed += m.o[c][k];
      expected += nc[c] * nc[k];
    }
  }
  if (expected == 0.0) return std::nullopt;
  return 1.0 - (n - 1.0) * observed / expected;
}

// CSV with header `item,rater1,...`; empty cells are missing ratings.
inline RatingMatrix parse_ratings_csv(std::string_view text, const std::string& source = {}) {
  auto rows = ingest::parse_csv(text, source);
  if (rows.size() < 2) throw ParseError("ratings file has no items", 0, 0, source);
  const std::size_t width = rows.front().size();
  if (width < 3) throw ParseError("ratings file needs an item column and two raters", 1, 1, source);
  RatingMatrix out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != width) throw ParseError("row width differs from header", i + 1, 1, source);
    std::vector<std::optional<std::string>> item;
    for (std::size_t c = 1; c < width; ++c) {
      if (rows[i][c].empty())
        item.emplace_back(std::nullopt);
      else
        item.emplace_back(rows[i][c]);
    }
    out.push_back(std::move(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// One-hot API embeddings (input for external dimensionality reduction)

struct Embedding {
  std::vector<SdkCoordinate> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<std::uint8_t>> cells;

  std::string to_csv() const {
    std::string out = "sdk";
    for (const auto& c : columns) out += "," + c;
    out += "\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out += rows[r].str();
      for (auto v : cells[r]) out += v ? ",1" : ",0";
      out += "\n";
    }
    return out;
  }
};

inline Embedding export_onehot_embeddings(const Verdicts& verdicts) {
  Embedding e;
  std::set<std::string> apis;
  for (const auto& [coord, v] : verdicts) {
    if (!v.flagged) continue;
    e.rows.push_back(coord);
    auto a = v.apis();
    apis.insert(a.begin(), a.end());
  }
  if (e.rows.empty()) throw AnalysisError("no flagged SDKs to embed");
  e.columns.assign(apis.begin(), apis.end());
  for (const auto& coord : e.rows) {
    const auto a = verdicts.at(coord).apis();
    std::vector<std::uint8_t> row;
    for (const auto& c : e.columns) row.push_back(a.contains(c) ? 1 : 0);
    e.cells.push_back(std::move(row));
  }
  return e;
}

}  // namespace fpscope::stats
