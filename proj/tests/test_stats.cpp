#include <gtest/gtest.h>

#include "fpscope/stats.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace fpscope;
using namespace fpscope::stats;
namespace t = fpscope::testing;

namespace {

const SdkCoordinate kA{"g", "a", "1"};
const SdkCoordinate kB{"g", "b", "1"};

coflow::FingerprintVerdict verdict(const SdkCoordinate& c, const std::vector<std::string>& apis, bool flag = true) {
  coflow::CoFlowFinding f;
  f.rule = "r";
  f.sink_site = taint::Site{"s.S.s", 0};
  f.sink_api = "java.net.K.send";
  for (std::size_t i = 0; i < apis.size(); ++i)
    f.sources.insert(coflow::SourceHit{"l" + std::to_string(i), apis[i], taint::Site{"s.S.s", 1}});
  return coflow::classify(c, {f}, flag ? 1 : 1000);
}

RatingMatrix from_raters(const std::vector<std::string>& r1, const std::vector<std::string>& r2) {
  RatingMatrix m;
  for (std::size_t i = 0; i < r1.size(); ++i) m.push_back({r1[i], r2[i]});
  return m;
}

}  // namespace

TEST(Prevalence, HalfOfTwoApps) {
  const std::vector<ingest::AppRecord> apps{{"x", "Finance", 1, {}}, {"y", "Finance", 1, {}}};
  const AppSdks sdks{{"x", {kA}}};
  const Verdicts v{{kA, verdict(kA, {"android.X.a"})}};
  const Labels l{{kA, ingest::make_label(ingest::SdkLabel::ADS)}};
  const auto t = prevalence(apps, sdks, v, l);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].any, 0.5);
  EXPECT_EQ(t.rows[0].by_label[static_cast<std::size_t>(ingest::SdkLabel::ADS)], 0.5);
  EXPECT_TRUE(t.diagnostics.empty());
}

TEST(Prevalence, NoFlaggedMeansZero) {
  const std::vector<ingest::AppRecord> apps{{"x", "Game", 1, {}}};
  const AppSdks sdks{{"x", {kA}}};
  const Verdicts v{{kA, verdict(kA, {"android.X.a"}, false)}};
  const auto t = prevalence(apps, sdks, v, {});
  EXPECT_EQ(t.rows[0].any, 0.0);
  for (double f : t.rows[0].by_label) EXPECT_EQ(f, 0.0);
}

TEST(Prevalence, UnlabeledFlaggedIsUnclear) {
  const std::vector<ingest::AppRecord> apps{{"x", "Game", 1, {}}};
  const auto t = prevalence(apps, {{"x", {kA}}}, {{kA, verdict(kA, {"android.X.a"})}}, {});
  EXPECT_EQ(t.rows[0].by_label[static_cast<std::size_t>(ingest::SdkLabel::UNCLEAR_UNFOUND)], 1.0);
  EXPECT_EQ(t.diagnostics.size(), 1u);
  EXPECT_THROW(prevalence(apps, {{"ghost", {kA}}}, {}, {}), AnalysisError);
}

TEST(Cooccurrence, DisjointAndShared) {
  const std::vector<ingest::AppRecord> apps{
      {"f1", "Finance", 5, {}}, {"f2", "Finance", 4, {}}, {"g1", "Game", 5, {}}, {"g2", "Game", 4, {}}};
  const Verdicts v{{kA, verdict(kA, {"android.X.a"})}, {kB, verdict(kB, {"android.X.b"})}};
  const auto disjoint = cooccurrence(apps, {{"f1", {kA}}, {"f2", {kA}}, {"g1", {kB}}, {"g2", {kB}}}, v, 10);
  ASSERT_EQ(disjoint.categories.size(), 2u);
  EXPECT_EQ(disjoint.at(0, 1), 0.0);
  EXPECT_EQ(disjoint.at(0, 0), 1.0);
  const auto shared = cooccurrence(apps, {{"f1", {kA}}, {"f2", {kA}}, {"g1", {kA}}, {"g2", {kA, kB}}}, v, 10);
  EXPECT_EQ(shared.at(0, 1), 1.0);
  EXPECT_EQ(shared.at(1, 0), 1.0);
  EXPECT_THROW(cooccurrence(apps, {}, v, 0), ConfigError);
}

TEST(Cooccurrence, SingleAppCategoryHasNoDiagonal) {
  const std::vector<ingest::AppRecord> apps{{"f1", "Finance", 5, {}}, {"g1", "Game", 5, {}}};
  const auto m = cooccurrence(apps, {}, {}, 10);
  EXPECT_FALSE(m.at(0, 0).has_value());
  EXPECT_EQ(m.at(0, 1), 0.0);
  EXPECT_NE(cooccurrence_to_csv(m).find("\"Finance\",,0"), std::string::npos) << cooccurrence_to_csv(m);
}

TEST(Signals, Shares) {
  Verdicts v;
  ingest::SignalClassMap map{{"android.Acc.list", ingest::SignalClass::ACCOUNT_LIST},
                             {"android.Loc.fine", ingest::SignalClass::LOCATION_FINE}};
  for (int i = 0; i < 4; ++i) {
    const SdkCoordinate c{"g", "s" + std::to_string(i), "1"};
    v.emplace(c, verdict(c, i == 0 ? std::vector<std::string>{"android.Acc.list"} : std::vector<std::string>{"android.X"}));
  }
  auto s = sensitive_signal_shares(v, map);
  EXPECT_EQ(s.shares.at("ACCOUNT_LIST"), 0.25);
  EXPECT_EQ(s.shares.at("LOCATION"), 0.0);
  EXPECT_EQ(s.shares.at("LOCATION_COARSE"), 0.0);
  EXPECT_EQ(s.shares.at("LOCATION_FINE"), 0.0);
  v.emplace(kA, verdict(kA, {"android.Loc.fine"}));
  s = sensitive_signal_shares(v, map);
  EXPECT_EQ(s.counts.at("LOCATION"), 1u);
  EXPECT_EQ(s.flagged_sdks, 5u);
}

TEST(Alpha, PerfectAgreement) {
  EXPECT_EQ(krippendorff_alpha(from_raters({"a", "b", "a", "c"}, {"a", "b", "a", "c"})), 1.0);
}

TEST(Alpha, HandCoincidences) {
  const auto m = from_raters({"a", "a", "b", "b"}, {"a", "b", "b", "b"});
  const auto c = coincidence_matrix(m);
  EXPECT_EQ(c.o, (std::vector<std::vector<double>>{{2, 1}, {1, 4}}));
  // n_a = 3, n_b = 5, n = 8
  const double want = 1.0 - 7.0 * 2.0 / 30.0;
  EXPECT_NEAR(*krippendorff_alpha(m), want, 1e-12);
  EXPECT_NEAR(*oracle::alpha_direct(m), want, 1e-12);
}

TEST(Alpha, RandomMatchesDirectFormula) {
  t::Rng rng(55);
  int compared = 0;
  for (int i = 0; i < 200; ++i) {
    const auto m = t::random_ratings(rng, t::between(rng, 1, 12), t::between(rng, 2, 5), t::between(rng, 1, 4), 0.2);
    std::optional<double> got;
    try {
      got = krippendorff_alpha(m);
    } catch (const ConfigError&) {
      continue;  // nothing pairable
    }
    const auto want = oracle::alpha_direct(m);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      EXPECT_NEAR(*got, *want, 1e-12);
      ++compared;
    }
  }
  EXPECT_GT(compared, 100);
}

TEST(Alpha, ChanceAgreementNearZero) {
  t::Rng rng(1234);
  const auto m = t::random_ratings(rng, 10000, 2, 2, 0.0);
  EXPECT_LE(std::abs(*krippendorff_alpha(m)), 0.05);
}

TEST(Alpha, Undefined) {
  EXPECT_FALSE(krippendorff_alpha(from_raters({"a", "a"}, {"a", "a"})).has_value());
  EXPECT_THROW(krippendorff_alpha({{"a", std::nullopt}}), ConfigError);
  EXPECT_THROW(krippendorff_alpha({{"a"}}), ConfigError);
  EXPECT_THROW(krippendorff_alpha({}), ConfigError);
}

TEST(Alpha, RatingsCsv) {
  const auto m = parse_ratings_csv("item,r1,r2\nx,a,\ny,b,b\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_FALSE(m[0][1].has_value());
  EXPECT_THROW(parse_ratings_csv("item,r1\nx,a\n"), ParseError);
}

TEST(Embedding, Shapes) {
  const auto one = export_onehot_embeddings({{kA, verdict(kA, {"p", "q", "r"})}});
  EXPECT_EQ(one.columns.size(), 3u);
  EXPECT_EQ(one.cells, (std::vector<std::vector<std::uint8_t>>{{1, 1, 1}}));
  const auto two = export_onehot_embeddings({{kA, verdict(kA, {"p", "q"})}, {kB, verdict(kB, {"x", "y", "z"})}});
  EXPECT_EQ(two.cells, (std::vector<std::vector<std::uint8_t>>{{1, 1, 0, 0, 0}, {0, 0, 1, 1, 1}}));
  EXPECT_EQ(two.to_csv(), "sdk,p,q,x,y,z\ng:a:1,1,1,0,0,0\ng:b:1,0,0,1,1,1\n");
  EXPECT_THROW(export_onehot_embeddings({{kA, verdict(kA, {"p"}, false)}}), AnalysisError);
}

TEST(Recount, RandomFixtures) {
  t::Rng rng(404);
  for (int i = 0; i < 60; ++i) {
    const auto fx = t::random_stats_fixture(rng);
    const auto table = prevalence(fx.apps, fx.app_sdks, fx.verdicts, fx.labels);
    const auto want = oracle::prevalence_recount(fx.apps, fx.app_sdks, fx.verdicts, fx.labels);
    ASSERT_EQ(table.rows.size(), want.size());
    for (const auto& row : table.rows) {
      const auto& w = want.at(row.category);
      EXPECT_EQ(row.apps, w.apps);
      EXPECT_EQ(row.apps_with_flagged, w.any);
      for (auto l : ingest::kSdkLabels) {
        auto it = w.by_label.find(l);
        EXPECT_EQ(row.label_counts[static_cast<std::size_t>(l)], it == w.by_label.end() ? 0u : it->second);
      }
    }

    const auto m = cooccurrence(fx.apps, fx.app_sdks, fx.verdicts, 10);
    const auto pairs = oracle::cooccurrence_recount(fx.apps, fx.app_sdks, fx.verdicts, 10);
    for (std::size_t a = 0; a < m.categories.size(); ++a) {
      for (std::size_t b = 0; b < m.categories.size(); ++b) {
        const auto [hits, n] = pairs.at({m.categories[a], m.categories[b]});
        if (n == 0) {
          EXPECT_FALSE(m.at(a, b).has_value());
        } else {
          EXPECT_EQ(m.at(a, b), static_cast<double>(hits) / static_cast<double>(n));
        }
        EXPECT_EQ(m.at(a, b), m.at(b, a));
      }
    }

    std::size_t flagged = 0;
    const auto counts = oracle::signal_recount(fx.verdicts, fx.signal_map, flagged);
    const auto s = sensitive_signal_shares(fx.verdicts, fx.signal_map);
    EXPECT_EQ(s.flagged_sdks, flagged);
    for (const auto& [cls, n] : s.counts) {
      auto it = counts.find(cls);
      EXPECT_EQ(n, it == counts.end() ? 0u : it->second) << cls;
    }
    EXPECT_GE(s.shares.at("LOCATION"), std::max(s.shares.at("LOCATION_COARSE"), s.shares.at("LOCATION_FINE")));

    const auto apis = oracle::api_recount(fx.verdicts);
    if (apis.empty()) {
      EXPECT_THROW(export_onehot_embeddings(fx.verdicts), AnalysisError);
      continue;
    }
    const auto e = export_onehot_embeddings(fx.verdicts);
    ASSERT_EQ(e.rows.size(), apis.size());
    for (std::size_t r = 0; r < e.rows.size(); ++r) {
      std::size_t sum = 0;
      for (auto c : e.cells[r]) sum += c;
      EXPECT_EQ(sum, apis.at(e.rows[r]).size());
    }
  }
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}
