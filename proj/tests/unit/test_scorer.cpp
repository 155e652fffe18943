#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "support/scorer_oracles.hpp"
#include "xlalign/common/rng.hpp"
#include "xlalign/scorer/cipher_oracle.hpp"
#include "xlalign/scorer/model1.hpp"

using namespace xlalign;
using namespace xlalign::scorer;
using xlalign::testing::brute_force_em;

namespace {

void expect_matches_oracle(const std::vector<BitextPair>& corpus, int iterations) {
  auto m = train_model1(corpus, iterations);
  auto oracle = brute_force_em(corpus, iterations);
  for (const auto& [k, v] : oracle)
    EXPECT_NEAR(m.prob(k.second, k.first), v.convert_to<double>(), 1e-9) << k.first << "->" << k.second;
  for (const auto& [f, row] : m.table())
    for (const auto& [e, p] : row) EXPECT_TRUE(oracle.count({f, e})) << f << "->" << e;
}

synth::LanguageRegistry registry() {
  return synth::LanguageRegistry(synth::default_languages(), synth::lexicon::english_words());
}

}  // namespace

TEST(ScoreResult, UniformTenthGivesPplTen) {
  auto r = ScoreResult::from_per_token(std::vector<double>(7, std::log(0.1)));
  EXPECT_NEAR(r.ppl, 10.0, 1e-12);
  EXPECT_EQ(r.en_len, 7u);
  EXPECT_NEAR(r.norm_score, std::log(0.1), 1e-15);
}

TEST(Model1, SingleTokenFormula) {
  Model1Scorer m;
  m.set("y", "e", 1.0);
  m.set(std::string(kNullToken), "other", 1.0);
  auto r = m.score({"y"}, {"e"});
  // NULL contributes only the floor.
  EXPECT_NEAR(r.log_prob, std::log(0.5 * (1.0 + kModel1Floor)), 1e-15);
  EXPECT_NEAR(r.log_prob, std::log(0.5), 1e-8);
}

TEST(Model1, UntrainedAndEmptyRejected) {
  Model1Scorer m;
  EXPECT_THROW(m.score({"a"}, {"b"}), ContractError);
  m.set("a", "b", 1.0);
  EXPECT_THROW(m.score({"a"}, {}), ValidationError);
  EXPECT_THROW(train_model1({}, 3), ValidationError);
}

TEST(Model1, TwoByTwoMatchesBruteForce) {
  std::vector<BitextPair> corpus{{{"A"}, {"x"}}, {{"B"}, {"y"}}};
  expect_matches_oracle(corpus, 10);
  EXPECT_GE(train_model1(corpus, 10).prob("x", "A"), 0.99);
}

TEST(Model1, AmbiguityResolvedMatchesBruteForce) {
  std::vector<BitextPair> corpus{{{"A", "B"}, {"x", "y"}}, {{"A"}, {"x"}}};
  expect_matches_oracle(corpus, 5);
  double prev = 0.0;
  for (int it = 1; it <= 5; ++it) {
    const double p = train_model1(corpus, it).prob("y", "B");
    EXPECT_GT(p, prev);
    prev = p;
  }
  auto m = train_model1(corpus, 5);
  EXPECT_GT(m.prob("y", "B"), m.prob("x", "B"));
  EXPECT_GT(train_model1(corpus, 200).prob("y", "B"), 0.99);
}

TEST(Model1, LargerCorpusMatchesBruteForce) {
  std::vector<BitextPair> corpus{{{"a", "b", "c"}, {"x", "y", "z"}},
                                 {{"a", "c"}, {"x", "z"}},
                                 {{"b", "d"}, {"y", "w", "w"}},
                                 {{"d"}, {"w"}}};
  expect_matches_oracle(corpus, 4);
}

TEST(Model1, NormalizedAndLikelihoodMonotone) {
  Rng rng(21);
  std::vector<BitextPair> corpus;
  for (int i = 0; i < 200; ++i) {
    BitextPair p;
    const auto lf = rng.range(1, 8), le = rng.range(1, 8);
    for (int k = 0; k < lf; ++k) p.foreign.push_back("f" + std::to_string(rng.below(15)));
    for (int k = 0; k < le; ++k) p.english.push_back("e" + std::to_string(rng.below(12)));
    corpus.push_back(p);
  }
  auto m = train_model1(corpus, 20);
  const auto& ll = m.log_likelihoods();
  ASSERT_EQ(ll.size(), 21u);
  for (std::size_t i = 1; i < ll.size(); ++i) EXPECT_GE(ll[i], ll[i - 1] - 1e-9 * std::abs(ll[i - 1]));
  for (const auto& [f, row] : m.table()) {
    double s = 0.0;
    for (const auto& [e, p] : row) s += p;
    EXPECT_NEAR(s, 1.0, 1e-9) << f;
  }
}

TEST(Model1, JsonlIsSortedAndRoundTrips) {
  std::vector<BitextPair> corpus{{{"b", "a"}, {"y", "x"}}, {{"a"}, {"x"}}};
  auto m = train_model1(corpus, 3);
  const auto text = m.to_jsonl();
  std::istringstream in(text);
  auto back = Model1Scorer::from_jsonl(in);
  EXPECT_EQ(back.to_jsonl(), text);
  std::istringstream lines(text);
  std::string line, prev;
  std::vector<std::pair<std::string, std::string>> keys;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    keys.emplace_back(j["foreign"], j["english"]);
    EXPECT_GE(j["prob"].get<double>(), kModel1Floor);
  }
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_EQ(keys.front().first, "<null>");
  EXPECT_EQ(back.score({"a"}, {"x"}).log_prob, m.score({"a"}, {"x"}).log_prob);
}

TEST(Model1, UnseenTokensAreFloored) {
  auto m = train_model1({{{"a"}, {"x"}}}, 2);
  auto r = m.score({"zz"}, {"qq"});
  EXPECT_TRUE(std::isfinite(r.log_prob));
  EXPECT_NEAR(r.log_prob, std::log(kModel1Floor), 1e-9);
}

TEST(CipherOracle, ExactDecipherLengthTen) {
  auto reg = registry();
  CipherOracleScorer s(reg, 500, 0.05);
  Tokens en{"ann", "has", "5", "apples", ".", "the", "answer", "is", "5", "."};
  auto r = s.score(reg.get("la").encipher(en), en);
  EXPECT_NEAR(r.log_prob, 10 * std::log(0.95), 1e-12);
  EXPECT_NEAR(r.ppl, 1 / 0.95, 1e-12);
  EXPECT_EQ(r.per_token.size(), 10u);
}

TEST(CipherOracle, StopTokensIgnoredAndEnglishSourceWorks) {
  auto reg = registry();
  CipherOracleScorer s(reg, 500, 0.05);
  Tokens en{"the", "answer", "is", "5", ".", "<eos>"};
  EXPECT_NEAR(s.score(en, en).log_prob, 5 * std::log(0.95), 1e-12);
}

TEST(CipherOracle, CorruptionLowersScoreAndLengthMismatchPenalized) {
  auto reg = registry();
  CipherOracleScorer s(reg, 500, 0.05);
  Tokens en{"ann", "has", "5", "apples", "."};
  auto src = reg.get("hb").encipher(en);
  auto full = s.score(src, en).log_prob;
  Tokens bad = en;
  bad[1] = "gets";
  EXPECT_LT(s.score(src, bad).log_prob, full);
  Tokens longer = en;
  longer.push_back("more");
  EXPECT_NEAR(s.score(src, longer).log_prob, full + std::log(0.05 / 499), 1e-12);
}

TEST(CipherOracle, RankingFidelityUnderRandomCorruption) {
  auto reg = registry();
  CipherOracleScorer s(reg, 500, 0.05);
  EXPECT_EQ(xlalign::testing::ranking_violations(reg, s, 1000, 1234), 0);
}
