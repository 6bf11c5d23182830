#pragma once

// Bundled demo corpus: six SDK versions, four apps, and the configuration to
// run the whole pipeline over them.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fpscope/ir.hpp"
#include "fpscope/pipeline.hpp"

namespace fpscope::fixtures {

// Renames every class, method and field id; callee references follow.
// Signatures are left alone (they are already anonymized).
inline ir::SdkIR rename_identifiers(const ir::SdkIR& sdk, const std::string& prefix) {
  std::map<std::string, std::string> methods, fields;
  ir::SdkIR out = sdk;
  for (std::size_t c = 0; c < out.classes.size(); ++c) {
    auto& cls = out.classes[c];
    cls.id = prefix + ".C" + std::to_string(c);
    for (std::size_t m = 0; m < cls.methods.size(); ++m) {
      auto& method = cls.methods[m];
      const std::string renamed = cls.id + ".m" + std::to_string(m);
      methods[method.id] = renamed;
      method.id = renamed;
    }
  }
  for (auto& cls : out.classes) {
    for (auto& m : cls.methods) {
      for (auto& ins : m.body) {
        if (ins.callee) {
          auto it = methods.find(*ins.callee);
          if (it != methods.end()) ins.callee = it->second;
        }
        if (ins.field) {
          auto [it, inserted] = fields.emplace(*ins.field, prefix + ".f" + std::to_string(fields.size()));
          ins.field = it->second;
        }
      }
    }
  }
  return out;
}

// The crossover example: three device signals collected in the main SDK meet
// at a network sink that lives in its dependency; one of them is also
// encrypted locally. The dependency collects three signals of its own.
inline constexpr std::string_view kCoreIr = R"(sdk com.fp:core:1
class com.fp.Collector
method com.fp.Collector.collect public sig="()->void" params=
  invoke_static r0 api:android.os.Build.getModel
  invoke_static r1 api:android.os.Build.getBrand
  invoke_static r2 api:android.provider.Settings.Secure.getAndroidId
  new_instance r3
  invoke_virtual r4 api:java.lang.StringBuilder.append r3,r0
  invoke_virtual r5 api:java.lang.StringBuilder.append r4,r1
  invoke_virtual r6 api:java.lang.StringBuilder.append r5,r2
  invoke_virtual r7 api:java.lang.StringBuilder.toString r6
  invoke_static callee:com.dep.Net.upload r7
  invoke_static r8 callee:com.fp.Collector.seal r2
  return_void
method com.fp.Collector.seal nonpublic sig="(java.lang.String)->byte[]" params=r0
  const_string r1 "fp-key"
  invoke_static r2 api:javax.crypto.Cipher.doFinal r0,r1
  return r2
)";

inline constexpr std::string_view kNetIr = R"(sdk com.dep:net:1
class com.dep.Net
method com.dep.Net.upload public sig="(java.lang.String)->void" params=r0
  invoke_static r1 callee:com.dep.Device.profile
  new_instance r2
  invoke_virtual r3 api:java.lang.StringBuilder.append r2,r0
  invoke_virtual r4 api:java.lang.StringBuilder.append r3,r1
  invoke_virtual r5 api:java.lang.StringBuilder.toString r4
  const_string r6 "https://net.example/collect"
  invoke_virtual r7 api:java.net.URL.openConnection r6
  invoke_virtual api:java.io.OutputStream.write r7,r5
  return_void
class com.dep.Device
method com.dep.Device.profile public sig="()->java.lang.String" params=
  invoke_static r0 api:android.os.Build.getSerial
  invoke_static r1 api:android.net.wifi.WifiInfo.getMacAddress
  invoke_static r2 api:android.telephony.TelephonyManager.getImei
  binary_op r3 r0,r1
  binary_op r4 r3,r2
  return r4
)";

// The version conflict: M:A:1 asks for P:C:1 directly and for P:C:2 through
// N:B:1; the shallower request wins.
inline constexpr std::string_view kMaIr = R"(sdk M:A:1
class m.a.Tracker
method m.a.Tracker.track public sig="(android.content.Context)->void" params=r0
  invoke_static r1 api:android.telephony.TelephonyManager.getNetworkCountryIso
  invoke_static r2 api:android.location.Location.getLatitude
  invoke_static r3 api:android.accounts.AccountManager.getAccounts
  invoke_static r4 callee:n.b.Json.encode r1,r2
  invoke_static r5 callee:n.b.Json.encode r4,r3
  invoke_static callee:p.c.Http.post r5
  return_void
class m.a.Session
method m.a.Session.start public sig="(android.content.Context,int)->void" params=r0,r1
  const_string r2 "session_start"
  load_static r3 field:m.a.Session.count
  binary_op r4 r3,r1
  store_static field:m.a.Session.count r4
  return_void
)";

inline constexpr std::string_view kNbIr = R"(sdk N:B:1
class n.b.Json
method n.b.Json.encode public sig="(java.lang.Object,java.lang.Object)->java.lang.String" params=r0,r1
  const_string r2 "{\"k\":"
  invoke_static r3 api:org.json.JSONObject.quote r0
  binary_op r4 r3,r1
  binary_op r5 r2,r4
  return r5
class n.b.Apps
method n.b.Apps.list public sig="()->void" params=
  invoke_static r0 api:android.content.pm.PackageManager.getInstalledPackages
  invoke_static callee:p.c.Http.postGzip r0
  return_void
)";

inline constexpr std::string_view kPc1Ir = R"(sdk P:C:1
class p.c.Http
method p.c.Http.post public sig="(java.lang.String)->void" params=r0
  const_string r1 "https://collect.example/v1"
  invoke_virtual r2 api:java.net.URL.openConnection r1
  invoke_virtual api:java.io.OutputStream.write r2,r0
  return_void
)";

inline constexpr std::string_view kPc2Ir = R"(sdk P:C:2
class p.c.Http
method p.c.Http.post public sig="(java.lang.String)->void" params=r0
  const_string r1 "https://collect.example/v2"
  const_string r2 "Content-Encoding"
  invoke_virtual r3 api:java.net.HttpURLConnection.setRequestProperty r2
  invoke_virtual api:java.io.OutputStream.write r3,r0
  return_void
method p.c.Http.postGzip public sig="(java.lang.String)->void" params=r0
  invoke_static r1 api:java.util.zip.Deflater.deflate r0
  invoke_static callee:p.c.Http.post r1
  return_void
class p.c.Retry
method p.c.Retry.backoff nonpublic sig="(int)->long" params=r0
  const r1
  binary_op r2 r0,r1
  cast r3 r2
  return r3
)";

inline constexpr std::string_view kTaintConfig = R"({
  "sources": {
    "android.os.Build.getModel": "model",
    "android.os.Build.getBrand": "brand",
    "android.provider.Settings.Secure.getAndroidId": "androidId",
    "android.os.Build.getSerial": "serial",
    "android.net.wifi.WifiInfo.getMacAddress": "macAddress",
    "android.telephony.TelephonyManager.getImei": "imei",
    "android.telephony.TelephonyManager.getNetworkCountryIso": "countryIso",
    "android.location.Location.getLatitude": "latitude",
    "android.accounts.AccountManager.getAccounts": "accounts",
    "android.content.pm.PackageManager.getInstalledPackages": "installedApps"
  },
  "sinks": {
    "java.io.OutputStream.write": "NETWORK",
    "javax.crypto.Cipher.doFinal": "ENCRYPTION"
  },
  "propagators": [
    "java.lang.StringBuilder.append",
    "java.lang.StringBuilder.toString",
    "java.util.zip.Deflater.deflate",
    "org.json.JSONObject.quote"
  ]
}
)";

inline constexpr std::string_view kRule = R"({
  "name": "fingerprinting",
  "sourceGroups": [["model", "brand", "androidId", "serial", "macAddress", "imei",
                    "countryIso", "latitude", "accounts", "installedApps"]],
  "sinkGroups": ["NETWORK", "ENCRYPTION"],
  "minDistinctSources": 3
}
)";

inline constexpr std::string_view kSignalMap = R"(api,class
android.os.Build.getModel,OTHER
android.os.Build.getBrand,OTHER
android.provider.Settings.Secure.getAndroidId,OTHER
android.os.Build.getSerial,OTHER
android.net.wifi.WifiInfo.getMacAddress,OTHER
android.telephony.TelephonyManager.getImei,OTHER
android.telephony.TelephonyManager.getNetworkCountryIso,LOCATION_COARSE
android.location.Location.getLatitude,LOCATION_FINE
android.accounts.AccountManager.getAccounts,ACCOUNT_LIST
android.content.pm.PackageManager.getInstalledPackages,APP_USAGE
)";

// com.dep:net:1 is deliberately unlabeled.
inline constexpr std::string_view kLabels = R"(coordinate,label,subLabel
com.fp:core:1,SECURITY_AND_AUTHENTICATION,SECURITY_ANTI_FRAUD
M:A:1,ANALYTICS,ANALYTICS_USER_BEHAVIOR
N:B:1,TOOLS_OTHER,
P:C:1,TOOLS_OTHER,
P:C:2,TOOLS_OTHER,
)";

inline constexpr std::string_view kRatings = R"(item,rater1,rater2,rater3
com.fp:core:1,SECURITY_AND_AUTHENTICATION,SECURITY_AND_AUTHENTICATION,SECURITY_AND_AUTHENTICATION
com.dep:net:1,TOOLS_OTHER,UNCLEAR_UNFOUND,TOOLS_OTHER
M:A:1,ANALYTICS,ANALYTICS,
N:B:1,TOOLS_OTHER,TOOLS_OTHER,ANALYTICS
P:C:1,TOOLS_OTHER,TOOLS_OTHER,TOOLS_OTHER
P:C:2,TOOLS_OTHER,,TOOLS_OTHER
)";

inline constexpr std::string_view kConfig = R"(# fpscope demo run
corpus = "corpus"
manifests = "manifests"
apps = "apps.jsonl"
appCode = "apps"
labels = "labels.csv"
signalMap = "signals.csv"
taintConfig = "taint.json"
rule = "rule.json"
ratings = "ratings.csv"
out = "out"

eta = 0.2
gamma = 0.55
threshold = 3
contextDepth = 1
minAudience = 10000
topK = 1000
scope = "main-only"
format = "json"
jobs = 1
)";

struct DemoApp {
  std::string id;
  std::string category;
  std::uint64_t audience;
  std::vector<std::string> sdks;  // coordinates bundled into the app
};

inline const std::vector<DemoApp>& demo_apps() {
  static const std::vector<DemoApp> kApps{
      {"app.alpha", "Finance", 50000, {"com.fp:core:1", "com.dep:net:1"}},
      {"app.beta", "Finance", 20000, {"M:A:1", "N:B:1", "P:C:1"}},
      {"app.gamma", "Game", 1000000, {"com.fp:core:1", "com.dep:net:1", "M:A:1", "N:B:1", "P:C:1"}},
      {"app.delta", "Tools", 9000, {"com.fp:core:1", "com.dep:net:1"}},
  };
  return kApps;
}

inline std::map<std::string, std::string_view> demo_sdk_sources() {
  return {{"com.fp:core:1", kCoreIr}, {"com.dep:net:1", kNetIr}, {"M:A:1", kMaIr},
          {"N:B:1", kNbIr},           {"P:C:1", kPc1Ir},         {"P:C:2", kPc2Ir}};
}

inline std::vector<dep::Manifest> demo_manifests() {
  auto c = [](std::string_view s) { return SdkCoordinate::parse(s); };
  return {
      {c("com.fp:core:1"), {c("com.dep:net:1")}},
      {c("com.dep:net:1"), {}},
      {c("M:A:1"), {c("N:B:1"), c("P:C:1")}},
      {c("N:B:1"), {c("P:C:2")}},
      {c("P:C:1"), {}},
      {c("P:C:2"), {}},
  };
}

// App code: the bundled SDKs with every identifier renamed, concatenated.
inline ir::SdkIR demo_app_code(const DemoApp& app) {
  const auto sources = demo_sdk_sources();
  ir::SdkIR out;
  out.coordinate = SdkCoordinate{"app", app.id, "1"};
  for (std::size_t i = 0; i < app.sdks.size(); ++i) {
    const auto sdk = ir::parse_ir(sources.at(app.sdks[i]));
    const auto renamed = rename_identifiers(sdk, "x" + std::to_string(i));
    out.classes.insert(out.classes.end(), renamed.classes.begin(), renamed.classes.end());
  }
  return out;
}

inline std::string file_name(const SdkCoordinate& c) {
  std::string s = c.str();
  for (char& ch : s)
    if (ch == ':') ch = '_';
  return s;
}

// Relative path -> content for every demo input file.
inline std::map<std::string, std::string> demo_files() {
  std::map<std::string, std::string> files;
  for (const auto& [coord, text] : demo_sdk_sources())
    files["corpus/" + file_name(SdkCoordinate::parse(coord)) + ".ir"] = std::string(text);
  for (const auto& m : demo_manifests())
    files["manifests/" + file_name(m.coordinate) + ".json"] = dep::manifest_to_json(m);
  std::string apps;
  for (const auto& a : demo_apps()) {
    ingest::AppRecord r{a.id, a.category, a.audience, std::vector<SdkCoordinate>{}};
    for (const auto& s : a.sdks) r.declared_sdks->push_back(SdkCoordinate::parse(s));
    apps += ingest::app_to_json(r).dump() + "\n";
    files["apps/" + a.id + ".ir"] = ir::render_ir(demo_app_code(a));
  }
  files["apps.jsonl"] = apps;
  files["taint.json"] = std::string(kTaintConfig);
  files["rule.json"] = std::string(kRule);
  files["signals.csv"] = std::string(kSignalMap);
  files["labels.csv"] = std::string(kLabels);
  files["ratings.csv"] = std::string(kRatings);
  files["fpscope.toml"] = std::string(kConfig);
  return files;
}

inline std::vector<std::string> emit_demo(const std::filesystem::path& dir) {
  std::vector<std::string> written;
  for (const auto& [rel, content] : demo_files()) {
    pipeline::write_atomic(dir / rel, content);
    written.push_back(rel);
  }
  return written;
}

}  // namespace fpscope::fixtures
