#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fpscope/coordinate.hpp"
#include "fpscope/error.hpp"

namespace fpscope::ingest {

// Google Play app categories, in display order.
inline constexpr std::array<std::string_view, 33> kAppCategories{
    "Art and Design",      "Auto and Vehicles",  "Beauty",
    "Books and Reference", "Business",           "Comics",
    "Communication",       "Dating",             "Education",
    "Entertainment",       "Events",             "Finance",
    "Food and Drink",      "Game",               "Health and Fitness",
    "House and Home",      "Libraries and Demo", "Lifestyle",
    "Maps and Navigation", "Medical",            "Music and Audio",
    "News and Magazines",  "Parenting",          "Personalization",
    "Photography",         "Productivity",       "Shopping",
    "Social",              "Sports",             "Tools",
    "Travel and Local",    "Video Players",      "Weather",
};

inline std::optional<std::size_t> category_index(std::string_view name) {
  auto it = std::find(kAppCategories.begin(), kAppCategories.end(), name);
  if (it == kAppCategories.end()) return std::nullopt;
  return static_cast<std::size_t>(it - kAppCategories.begin());
}

struct AppRecord {
  std::string app_id;
  std::string category;
  std::uint64_t audience_size = 0;
  std::optional<std::vector<SdkCoordinate>> declared_sdks;

  bool operator==(const AppRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Codebook labels

enum class SdkLabel : std::uint8_t {
  ADS,
  ANALYTICS,
  SECURITY_AND_AUTHENTICATION,
  TOOLS_OTHER,
  UNCLEAR_UNFOUND,
};

inline constexpr std::array<SdkLabel, 5> kSdkLabels{
    SdkLabel::ADS, SdkLabel::ANALYTICS, SdkLabel::SECURITY_AND_AUTHENTICATION,
    SdkLabel::TOOLS_OTHER, SdkLabel::UNCLEAR_UNFOUND};

inline std::string_view label_name(SdkLabel l) {
  static constexpr std::array<std::string_view, 5> kNames{
      "ADS", "ANALYTICS", "SECURITY_AND_AUTHENTICATION", "TOOLS_OTHER", "UNCLEAR_UNFOUND"};
  return kNames[static_cast<std::size_t>(l)];
}

inline std::optional<SdkLabel> parse_label(std::string_view s) {
  for (SdkLabel l : kSdkLabels)
    if (label_name(l) == s) return l;
  return std::nullopt;
}

struct SubLabelInfo {
  std::string_view name;
  SdkLabel parent;
};

inline constexpr std::array<SubLabelInfo, 13> kSubLabels{{
    {"ANALYTICS_APP_HEALTH", SdkLabel::ANALYTICS},
    {"ANALYTICS_USER_BEHAVIOR", SdkLabel::ANALYTICS},
    {"SECURITY_ANTI_FRAUD", SdkLabel::SECURITY_AND_AUTHENTICATION},
    {"SECURITY_PAYMENTS", SdkLabel::SECURITY_AND_AUTHENTICATION},
    {"SECURITY_AUTHENTICATION", SdkLabel::SECURITY_AND_AUTHENTICATION},
    {"SECURITY_ANTI_MALWARE", SdkLabel::SECURITY_AND_AUTHENTICATION},
    {"SECURITY_OTHER", SdkLabel::SECURITY_AND_AUTHENTICATION},
    {"LOCATION_PERSON", SdkLabel::TOOLS_OTHER},
    {"LOCATION_OBJECT", SdkLabel::TOOLS_OTHER},
    {"LOCATION_MAPS", SdkLabel::TOOLS_OTHER},
    {"LOCATION_OTHER", SdkLabel::TOOLS_OTHER},
    {"SOCIAL", SdkLabel::TOOLS_OTHER},
    {"OTHER", SdkLabel::TOOLS_OTHER},
}};

struct LabelAssignment {
  SdkLabel label = SdkLabel::UNCLEAR_UNFOUND;
  std::optional<std::string> sub_label;

  bool operator==(const LabelAssignment&) const = default;
};

inline LabelAssignment make_label(SdkLabel label, std::optional<std::string> sub = std::nullopt) {
  if (sub) {
    auto it = std::find_if(kSubLabels.begin(), kSubLabels.end(),
                           [&](const SubLabelInfo& s) { return s.name == *sub; });
    if (it == kSubLabels.end()) throw ParseError("unknown sub-label '" + *sub + "'");
    if (it->parent != label)
      throw ParseError("sub-label '" + *sub + "' does not belong to " +
                       std::string(label_name(label)));
  }
  return LabelAssignment{label, std::move(sub)};
}

enum class SignalClass : std::uint8_t {
  LOCATION_COARSE,
  LOCATION_FINE,
  APP_USAGE,
  ACCOUNT_LIST,
  OTHER,
};

inline constexpr std::array<SignalClass, 5> kSignalClasses{
    SignalClass::LOCATION_COARSE, SignalClass::LOCATION_FINE, SignalClass::APP_USAGE,
    SignalClass::ACCOUNT_LIST, SignalClass::OTHER};

inline std::string_view signal_class_name(SignalClass c) {
  static constexpr std::array<std::string_view, 5> kNames{
      "LOCATION_COARSE", "LOCATION_FINE", "APP_USAGE", "ACCOUNT_LIST", "OTHER"};
  return kNames[static_cast<std::size_t>(c)];
}

inline std::optional<SignalClass> parse_signal_class(std::string_view s) {
  for (SignalClass c : kSignalClasses)
    if (signal_class_name(c) == s) return c;
  return std::nullopt;
}

// framework API -> sensitivity class
using SignalClassMap = std::map<std::string, SignalClass>;

// ---------------------------------------------------------------------------
// Filters

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline constexpr std::array<std::string_view, 6> kExcludedVersionWords{
    "alpha", "beta", "test", "dev", "debug", "qa"};

inline bool is_excluded_version(std::string_view version) {
  const std::string v = lowercase(version);
  return std::any_of(kExcludedVersionWords.begin(), kExcludedVersionWords.end(),
                     [&](std::string_view w) { return v.find(w) != std::string::npos; });
}

inline std::vector<SdkCoordinate> filter_sdk_versions(std::span<const SdkCoordinate> versions) {
  std::vector<SdkCoordinate> out;
  for (const auto& c : versions)
    if (!is_excluded_version(c.version)) out.push_back(c);
  return out;
}

inline constexpr std::uint64_t kDefaultMinAudience = 10000;

// Keeps apps whose audience is strictly greater than min_audience.
inline std::vector<AppRecord> filter_apps(std::span<const AppRecord> apps,
                                          std::uint64_t min_audience = kDefaultMinAudience) {
  std::vector<AppRecord> out;
  for (const auto& a : apps)
    if (a.audience_size > min_audience) out.push_back(a);
  return out;
}

// Sum of 30-day active installs; users with several installs count more than once.
inline std::uint64_t market_reach(std::span<const AppRecord> apps) {
  std::uint64_t total = 0;
  for (const auto& a : apps) total += a.audience_size;
  return total;
}

// ---------------------------------------------------------------------------
// File formats

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline AppRecord app_from_json(const nlohmann::json& j) {
  AppRecord a;
  a.app_id = j.at("appId").get<std::string>();
  a.category = j.at("category").get<std::string>();
  if (!category_index(a.category)) throw ParseError("unknown app category '" + a.category + "'");
  const auto& size = j.at("audienceSize");
  if (!size.is_number_integer() || size.get<std::int64_t>() < 0)
    throw ParseError("audienceSize must be a non-negative integer");
  a.audience_size = size.get<std::uint64_t>();
  if (j.contains("declaredSdks") && !j.at("declaredSdks").is_null()) {
    std::vector<SdkCoordinate> sdks;
    for (const auto& s : j.at("declaredSdks")) sdks.push_back(SdkCoordinate::parse(s.get<std::string>()));
    a.declared_sdks = std::move(sdks);
  }
  return a;
}

inline nlohmann::json app_to_json(const AppRecord& a) {
  nlohmann::json j;
  j["appId"] = a.app_id;
  j["category"] = a.category;
  j["audienceSize"] = a.audience_size;
  if (a.declared_sdks) {
    j["declaredSdks"] = nlohmann::json::array();
    for (const auto& c : *a.declared_sdks) j["declaredSdks"].push_back(c.str());
  }
  return j;
}

// JSON lines, one AppRecord per line; blank lines are skipped.
inline std::vector<AppRecord> parse_apps_jsonl(std::string_view text, const std::string& source = {}) {
  std::vector<AppRecord> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(app_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno, 1, source);
    } catch (const ParseError& e) {
      throw ParseError(e.message(), lineno, 1, source);
    }
  }
  return out;
}

// Minimal CSV: comma separated, optional double quotes with "" escapes.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text,
                                                       const std::string& source = {}) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
      ++line;
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line, 1, source);
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// CSV `coordinate,label,subLabel` with a header row.
inline std::map<SdkCoordinate, LabelAssignment> parse_labels_csv(std::string_view text,
                                                                 const std::string& source = {}) {
  auto rows = parse_csv(text, source);
  std::map<SdkCoordinate, LabelAssignment> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    try {
      if (r.size() < 2 || r.size() > 3) throw ParseError("expected coordinate,label,subLabel");
      auto label = parse_label(r[1]);
      if (!label) throw ParseError("unknown label '" + r[1] + "'");
      std::optional<std::string> sub;
      if (r.size() == 3 && !r[2].empty()) sub = r[2];
      if (!out.emplace(SdkCoordinate::parse(r[0]), make_label(*label, sub)).second)
        throw ParseError("duplicate label for " + r[0]);
    } catch (const ParseError& e) {
      throw ParseError(e.message(), i + 1, 1, source);
    }
  }
  return out;
}

// CSV `api,class` with a header row.
inline SignalClassMap parse_signal_map_csv(std::string_view text, const std::string& source = {}) {
  auto rows = parse_csv(text, source);
  SignalClassMap out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 2) throw ParseError("expected api,class", i + 1, 1, source);
    auto cls = parse_signal_class(r[1]);
    if (!cls) throw ParseError("unknown signal class '" + r[1] + "'", i + 1, 1, source);
    if (!out.emplace(r[0], *cls).second)
      throw ParseError("API '" + r[0] + "' listed twice", i + 1, 1, source);
  }
  return out;
}

}  // namespace fpscope::ingest
