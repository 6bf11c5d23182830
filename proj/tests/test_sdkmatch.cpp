#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fpscope/fixtures.hpp"
#include "fpscope/sdkmatch.hpp"
#include "support/demo.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace fpscope;
using namespace fpscope::match;
namespace t = fpscope::testing;

namespace {

ir::MethodIR method_of(std::string_view body, std::string_view sig = "(?)->void") {
  const std::string doc = "sdk a:b:1\nclass a.C\nmethod a.C.m public sig=\"" + std::string(sig) +
                          "\" params=r0\n" + std::string(body);
  return ir::parse_ir(doc).classes[0].methods[0];
}

FeatureVector vec(std::initializer_list<std::pair<const char*, double>> xs) {
  FeatureVector v;
  for (const auto& [n, w] : xs) v.add(feature_dim(n), w);
  return v;
}

}  // namespace

TEST(Features, EmptyMethodIsSignatureOnly) {
  const auto f = named_features(method_of(""));
  EXPECT_EQ(f, (std::map<std::string, double>{{"sig:(?)->void", 1.0}}));
}

TEST(Features, CountsApisAndOps) {
  const auto f = named_features(method_of(
      "  invoke_static r1 api:android.X.x r0\n  assign r2 r1\n  invoke_static r3 api:android.X.x r2\n  assign r4 r3\n"));
  EXPECT_EQ(f.at("api:android.X.x"), 2.0);
  EXPECT_EQ(f.at("op:ASSIGN"), 0.5);
  EXPECT_EQ(f.at("op:INVOKE_STATIC"), 0.5);
  EXPECT_EQ(f.at("sig:(?)->void"), 1.0);
}

TEST(Features, RandomMethodsMatchRecount) {
  t::Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    for (const auto& cls : t::random_sdk_ir(rng).classes) {
      for (const auto& m : cls.methods) {
        std::map<std::string, double> want{{"sig:" + m.anon_signature, 1.0}};
        std::map<std::string, int> ops;
        for (const auto& ins : m.body) {
          ++ops[std::string(ir::kind_name(ins.kind))];
          if (ins.api) want["api:" + *ins.api] += 1.0;
          if (ins.literal) want["str:" + *ins.literal] = 1.0;
        }
        for (const auto& [k, c] : ops) want["op:" + k] = c / static_cast<double>(m.body.size());
        ASSERT_EQ(named_features(m), want);
        FeatureVector v;
        for (const auto& [n, w] : want) v.add(fnv1a64(n), w);
        ASSERT_EQ(extract_features(m), v);
      }
    }
  }
}

TEST(Weights, Formula) {
  std::vector<ir::SdkIR> corpus;
  for (int i = 0; i < 10; ++i) {
    ir::SdkIR s;
    s.coordinate = SdkCoordinate{"g", "a" + std::to_string(i), "1"};
    ir::ClassIR c;
    c.id = "c" + std::to_string(i);
    c.methods.push_back(method_of(i == 0 ? "  const_string r1 \"only-here\"\n" : ""));
    c.methods[0].id = c.id + ".m";
    s.classes.push_back(c);
    corpus.push_back(s);
  }
  const auto w = compute_weights(corpus);
  EXPECT_NEAR(w.weight(feature_dim("sig:(?)->void")), std::log(2.0), 1e-15);
  EXPECT_NEAR(w.weight(feature_dim("str:only-here")), std::log(11.0), 1e-15);
  EXPECT_EQ(w.weight(feature_dim("never-seen")), 1.0);
}

TEST(Weights, SingletonsWeighMost) {
  t::Rng rng(12);
  std::vector<ir::SdkIR> corpus;
  for (int i = 0; i < 30; ++i) corpus.push_back(t::random_feature_sdk(rng, i, 2, 6));
  const auto df = document_frequencies(corpus);
  const auto w = compute_weights(corpus);
  double max_w = 0.0, max_non_singleton = 0.0;
  std::size_t singletons = 0;
  for (const auto& [d, n] : df) {
    max_w = std::max(max_w, w.weight(d));
    if (n == 1) ++singletons;
    else max_non_singleton = std::max(max_non_singleton, w.weight(d));
  }
  EXPECT_GT(singletons * 2, df.size()) << "corpus not skewed towards df=1";
  for (const auto& [d, n] : df) {
    if (n == 1) {
      EXPECT_EQ(w.weight(d), max_w);
      EXPECT_GT(w.weight(d), max_non_singleton);
    }
  }
}

TEST(Histogram, Buckets) {
  t::Rng rng(2);
  const std::vector<ir::SdkIR> one{t::random_feature_sdk(rng, 0, 2, 3)};
  const auto h1 = feature_frequency_histogram(one);
  EXPECT_EQ(h1.at(1), sdk_dimensions(one[0]).size());
  for (const auto& [b, n] : h1)
    if (b != 1) {
      EXPECT_EQ(n, 0u);
    }

  std::vector<ir::SdkIR> two;
  for (int i = 0; i < 2; ++i) {
    ir::SdkIR s;
    s.coordinate = SdkCoordinate{"g", "x" + std::to_string(i), "1"};
    ir::ClassIR c;
    c.id = "k" + std::to_string(i);
    c.methods.push_back(method_of("  const_string r1 \"own" + std::to_string(i) + "\"\n",
                                  "(?)->void"));
    c.methods[0].id = c.id + ".m";
    s.classes.push_back(c);
    two.push_back(s);
  }
  // shared: sig + op:CONST_STRING; each has its own literal
  EXPECT_EQ(feature_frequency_histogram(two).at(2), 2u);

  for (int i = 0; i < 20; ++i) {
    std::vector<ir::SdkIR> corpus;
    for (int k = t::between(rng, 1, 12); k > 0; --k) corpus.push_back(t::random_feature_sdk(rng, k, 1, 4));
    std::size_t total = 0;
    for (const auto& [_, n] : feature_frequency_histogram(corpus)) total += n;
    EXPECT_EQ(total, document_frequencies(corpus).size());
  }
}

TEST(Weighted, Product) {
  const auto v = vec({{"a", 2.0}, {"b", 3.0}});
  EXPECT_EQ(weighted_vector(v, WeightTable{}), v);
  EXPECT_EQ(weighted_vector(vec({{"d", 2.0}}), WeightTable({{feature_dim("d"), 0.5}})), vec({{"d", 1.0}}));
  t::Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    FeatureVector x;
    std::map<Dim, double> w;
    for (int k = 0; k < 20; ++k) {
      x.add(rng() % 40, std::uniform_real_distribution<double>(0.1, 5)(rng));
      w[rng() % 40] = std::uniform_real_distribution<double>(0.1, 3)(rng);
    }
    const auto y = weighted_vector(x, WeightTable(w));
    for (const auto& [d, val] : x.entries()) {
      auto it = w.find(d);
      EXPECT_EQ(y.get(d), val * (it == w.end() ? 1.0 : it->second));
    }
    EXPECT_EQ(y.size(), x.size());
  }
  EXPECT_THROW(WeightTable({{1, 0.0}}), ConfigError);
}

TEST(Cosine, ClosedForms) {
  const auto a = vec({{"x", 1}, {"y", 1}});
  EXPECT_NEAR(cosine(a, a), 1.0, 1e-12);
  EXPECT_EQ(cosine(vec({{"x", 1}}), vec({{"y", 1}})), 0.0);
  EXPECT_NEAR(cosine(a, vec({{"x", 1}})), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_THROW(cosine(FeatureVector{}, a), AnalysisError);
}

TEST(Cosine, Properties) {
  t::Rng rng(19);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int i = 0; i < 500; ++i) {
    FeatureVector a, b;
    for (int k = 0; k < 15; ++k) {
      a.add(rng() % 30, u(rng));
      b.add(rng() % 30, u(rng));
    }
    const double ab = cosine(a, b);
    EXPECT_NEAR(ab, cosine(b, a), 1e-12);
    EXPECT_NEAR(cosine(a, a), 1.0, 1e-12);
    EXPECT_NEAR(cosine(a.scaled(u(rng)), b), ab, 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(ab, oracle::cosine_loop(a, b), 1e-12);
  }
}

TEST(ClassVector, Additivity) {
  t::Rng rng(23);
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
        ASSERT_EQ(cv.size(), recount.size());
        for (const auto& [d, x] : recount) EXPECT_NEAR(cv.get(d), x, 1e-12);
        if (cls.methods.size() == 1) {
          EXPECT_EQ(cv, weighted_vector(extract_features(cls.methods[0]), w));
        }
        sdk_sum += cv;
        for (const auto& m : cls.methods) sdk_direct += weighted_vector(extract_features(m), w);
      }
      ASSERT_EQ(sdk_sum.size(), sdk_direct.size());
      for (const auto& [d, x] : sdk_direct.entries()) EXPECT_NEAR(sdk_sum.get(d), x, 1e-12);
    }
  }
}

TEST(ClassVector, DisjointMethodsUnion) {
  ir::ClassIR c;
  c.id = "a.C";
  c.methods = {method_of("  const_string r1 \"p\"\n", "()->int"), method_of("  const r1\n", "(int)->void")};
  const auto v = class_vector(c, WeightTable{});
  const auto m0 = extract_features(c.methods[0]), m1 = extract_features(c.methods[1]);
  EXPECT_EQ(v.size(), m0.size() + m1.size());
}

TEST(ClassVector, RenamingIsInvisible) {
  t::Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    const auto sdk = t::random_feature_sdk(rng, i, 1, 6);
    const auto renamed = fixtures::rename_identifiers(sdk, "zz" + std::to_string(i));
    const std::vector<ir::SdkIR> corpus{sdk};
    const auto w = compute_weights(corpus);
    ASSERT_EQ(sdk.classes.size(), renamed.classes.size());
    for (std::size_t c = 0; c < sdk.classes.size(); ++c) {
      EXPECT_NE(sdk.classes[c].id, renamed.classes[c].id);
      EXPECT_EQ(class_vector(sdk.classes[c], w), class_vector(renamed.classes[c], w));
    }
  }
}

TEST(Hash, GoldenFile) {
  std::istringstream in(t::read_text(FPSCOPE_GOLDEN_DIR "/fnv1a64.txt"));
  std::string line;
  int checked = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const std::string input = nlohmann::json::parse(line.substr(0, tab)).get<std::string>();
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(input)));
    EXPECT_EQ(hex, line.substr(tab + 1)) << input;
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

TEST(Index, SelfQueryAtOne) {
  t::Rng rng(3);
  const std::vector<ir::SdkIR> corpus{t::random_feature_sdk(rng, 0, 4, 8)};
  const auto w = compute_weights(corpus);
  const auto idx = build_index(corpus, w);
  for (std::uint32_t c = 0; c < idx.sdks()[0].classes.size(); ++c) {
    const auto cands = idx.candidates(class_vector(corpus[0].classes[c], w), 1.0 - 1e-12);
    bool self = false;
    for (const auto& x : cands) self = self || x.ref == ClassRef{0, c};
    EXPECT_TRUE(self);
  }
  EXPECT_TRUE(idx.candidates(vec({{"nowhere-at-all", 1.0}}), 0.01).empty());
}

TEST(Index, MatchesBruteForce) {
  t::Rng rng(77);
  for (int i = 0; i < 10; ++i) {
    const auto corpus = t::random_corpus(rng);
    const auto w = compute_weights(corpus);
    const auto idx = build_index(corpus, w);
    for (const auto& sdk : corpus)
      for (const auto& cls : sdk.classes)
        for (double eta : {0.05, 0.2, 0.5, 0.9})
          ASSERT_EQ(oracle::candidate_mismatches(idx, class_vector(cls, w), eta), 0u);
  }
}

TEST(Index, SerializeRoundTrip) {
  t::Rng rng(8);
  const auto corpus = t::random_corpus(rng, 30);
  const auto w = compute_weights(corpus);
  const auto idx = build_index(corpus, w);
  const std::string bytes = idx.serialize();
  EXPECT_EQ(bytes.substr(0, 8), std::string("FPSIDX\0\0", 8));
  const auto back = SdkIndex::deserialize(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  EXPECT_EQ(back.weights(), w);
  EXPECT_THROW(SdkIndex::deserialize(bytes.substr(0, bytes.size() - 3)), ParseError);
  std::string bad = bytes;
  bad[8] = 9;
  EXPECT_THROW(SdkIndex::deserialize(bad), ParseError);
  const auto path = std::filesystem::temp_directory_path() / "fpscope_index_test.bin";
  idx.save(path);
  EXPECT_EQ(SdkIndex::load(path).serialize(), bytes);
  std::filesystem::remove(path);
}

TEST(Match, VerbatimCopyAndSupportBoundary) {
  t::Rng rng(13);
  std::vector<ir::SdkIR> corpus;
  for (int i = 0; i < 8; ++i) corpus.push_back(t::random_feature_sdk(rng, i, 4, 4));
  const auto w = compute_weights(corpus);
  const auto idx = build_index(corpus, w);

  ir::SdkIR app = corpus[3];
  app.coordinate = SdkCoordinate{"app", "copy", "1"};
  auto r = match::match(app, idx, 0.9, 0.55);
  const auto& s3 = r.sdks[3];
  EXPECT_TRUE(s3.accepted);
  EXPECT_EQ(s3.support, 1.0);

  ir::SdkIR half = app;
  half.classes.resize(2);
  EXPECT_FALSE(match::match(half, idx, 0.999, 0.55).sdks[3].accepted);
  EXPECT_TRUE(match::match(half, idx, 0.999, 0.45).sdks[3].accepted);
}

TEST(Match, ThresholdsAndFingerprint) {
  t::Rng rng(1);
  const auto corpus = t::random_corpus(rng, 20);
  const auto idx = build_index(corpus, compute_weights(corpus));
  EXPECT_THROW(match::match(corpus[0], idx, 0.0, 0.5), ConfigError);
  EXPECT_THROW(match::match(corpus[0], idx, 0.2, 1.5), ConfigError);
  EXPECT_NO_THROW(match::match(corpus[0], idx, 1.0, 1.0));
  EXPECT_THROW(match::match(corpus[0], idx, WeightTable{}, 0.2, 0.5), ConfigError);
}

TEST(Match, RejectedSdksLeaveNoCandidates) {
  t::Rng rng(6);
  const auto corpus = t::random_corpus(rng, 60);
  const auto idx = build_index(corpus, compute_weights(corpus));
  const auto r = match::match(corpus[0], idx, 0.1, 0.9);
  std::set<std::uint32_t> accepted;
  for (std::uint32_t s = 0; s < r.sdks.size(); ++s)
    if (r.sdks[s].accepted) accepted.insert(s);
  for (const auto& [_, cands] : r.candidates)
    for (const auto& c : cands) EXPECT_TRUE(accepted.contains(c.ref.sdk));
}

TEST(Match, PlantedRecoverySmall) {
  t::Rng rng(2024);
  std::vector<ir::SdkIR> sdks;
  for (int i = 0; i < 20; ++i) sdks.push_back(t::random_feature_sdk(rng, i, 3, 8));
  const auto idx = build_index(sdks, compute_weights(sdks));
  std::size_t tp = 0, fp = 0, fn = 0;
  for (int a = 0; a < 10; ++a) {
    std::vector<std::size_t> pick;
    while (pick.size() < 3) {
      const auto k = t::pick(rng, sdks.size());
      if (std::find(pick.begin(), pick.end(), k) == pick.end()) pick.push_back(k);
    }
    const auto app = t::plant_app(rng, sdks, pick, 0.2, a);
    for (const auto& c : match::match(app.code, idx, 0.2, 0.55).accepted()) (app.truth.contains(c) ? tp : fp)++;
    for (const auto& c : app.truth) {
      const auto acc = match::match(app.code, idx, 0.2, 0.55).accepted();
      if (std::find(acc.begin(), acc.end(), c) == acc.end()) ++fn;
    }
  }
  EXPECT_GE(static_cast<double>(tp) / static_cast<double>(tp + fp), 0.9);
  EXPECT_GE(static_cast<double>(tp) / static_cast<double>(tp + fn), 0.8);
}
