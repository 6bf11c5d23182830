#pragma once

#include <compare>
#include <functional>
#include <string>
#include <string_view>

#include "fpscope/error.hpp"

namespace fpscope {

// group:artifact:version triple naming one SDK version.
struct SdkCoordinate {
  std::string group;
  std::string artifact;
  std::string version;

  auto operator<=>(const SdkCoordinate&) const = default;
  bool operator==(const SdkCoordinate&) const = default;

  std::string str() const { return group + ':' + artifact + ':' + version; }

  // (group, artifact) without the version.
  std::string key() const { return group + ':' + artifact; }

  static bool valid_field(std::string_view field) {
    if (field.empty()) return false;
    for (char c : field) {
      if (c == ':' || c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
          c == '"' || c == ',')
        return false;
    }
    return true;
  }

  static SdkCoordinate parse(std::string_view text) {
    const auto first = text.find(':');
    const auto second = first == std::string_view::npos
                            ? std::string_view::npos
                            : text.find(':', first + 1);
    if (second == std::string_view::npos ||
        text.find(':', second + 1) != std::string_view::npos) {
      throw ParseError("malformed SDK coordinate '" + std::string(text) +
                       "' (expected group:artifact:version)");
    }
    SdkCoordinate c{std::string(text.substr(0, first)),
                    std::string(text.substr(first + 1, second - first - 1)),
                    std::string(text.substr(second + 1))};
    if (!valid_field(c.group) || !valid_field(c.artifact) ||
        !valid_field(c.version)) {
      throw ParseError("malformed SDK coordinate '" + std::string(text) +
                       "' (empty or invalid field)");
    }
    return c;
  }
};

}  // namespace fpscope

template <>
struct std::hash<fpscope::SdkCoordinate> {
  std::size_t operator()(const fpscope::SdkCoordinate& c) const noexcept {
    return std::hash<std::string>{}(c.str());
  }
};
