#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support/gradcheck.hpp"
#include "xlalign/autodiff/optimizer.hpp"
#include "xlalign/policy/sampling.hpp"

using namespace xlalign;
using namespace xlalign::policy;

namespace {

std::shared_ptr<const Vocabulary> micro_vocab(std::size_t n = 20) {
  std::vector<std::string> toks{"<eos>"};
  for (std::size_t i = 1; i < n; ++i) toks.push_back("t" + std::to_string(i));
  return std::make_shared<const Vocabulary>(toks);
}

PolicyConfig micro_config() {
  PolicyConfig c;
  c.vocab_size = 20;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 16;
  c.context_len = 16;
  c.seed = 3;
  c.init_std = 0.3;
  return c;
}

}  // namespace

TEST(Policy, DecoderMatchesTapeBitwise) {
  PolicyModel<float> m(micro_config(), micro_vocab());
  std::vector<int> prefix{1, 5, 7, 2, 9, 9, 3};
  auto all = m.all_logits(prefix);
  PolicyModel<float>::Decoder dec(m);
  for (std::size_t t = 0; t < prefix.size(); ++t) {
    const auto& logits = dec.step(prefix[t]);
    for (std::size_t v = 0; v < logits.size(); ++v) ASSERT_EQ(logits[v], all.at(t, v)) << t << "," << v;
  }
}

TEST(Policy, SampledLogProbsMatchRescoring) {
  PolicyModel<float> m(micro_config(), micro_vocab());
  DecodeParams p;
  p.temperature = 1.0;
  p.max_new_tokens = 8;
  p.seed = 42;
  std::vector<int> prompt{4, 2, 8};
  auto outs = sample(m, prompt, p, 5);
  ASSERT_EQ(outs.size(), 5u);
  for (const auto& c : outs) {
    ASSERT_FALSE(c.ids.empty());
    EXPECT_EQ(c.total_logprob(), m.sequence_log_prob(prompt, c.ids));
  }
}

TEST(Policy, SamplingIsDeterministicPerSeed) {
  PolicyModel<float> m(micro_config(), micro_vocab());
  DecodeParams p;
  p.max_new_tokens = 8;
  p.seed = 1;
  auto a = sample(m, {1, 2}, p, 4);
  auto b = sample(m, {1, 2}, p, 4);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a[i].ids, b[i].ids);
  p.temperature = 0.0;
  auto g = sample(m, {1, 2}, p, 3);
  EXPECT_EQ(g[0].ids, g[1].ids);
  EXPECT_EQ(g[1].ids, g[2].ids);
  EXPECT_THROW(sample(m, {1, 2}, p, 0), ValidationError);
}

TEST(Policy, GenerationStopsAtContextLimit) {
  auto cfg = micro_config();
  PolicyModel<float> m(cfg, micro_vocab());
  DecodeParams p;
  p.max_new_tokens = 100;
  p.stop_token = -1;  // never stop early
  auto c = sample(m, {1, 2, 3}, p, 1).front();
  EXPECT_EQ(c.ids.size(), cfg.context_len - 3);
  EXPECT_FALSE(c.stopped);
  EXPECT_EQ(c.total_logprob(), m.sequence_log_prob({1, 2, 3}, c.ids));
}

TEST(Policy, RejectsOverlongAndEmpty) {
  PolicyModel<float> m(micro_config(), micro_vocab());
  std::vector<int> long_prefix(16, 1);
  EXPECT_THROW(m.next_token_logits(long_prefix), ValidationError);
  EXPECT_THROW(m.sequence_log_prob({1, 2}, std::vector<int>(15, 1)), ValidationError);
  EXPECT_THROW(m.sequence_log_prob({1, 2}, {}), ValidationError);
}

TEST(Policy, GradientMatchesFiniteDifferences) {
  PolicyModel<double> m(micro_config(), micro_vocab());
  std::vector<SeqPair> batch{{{1, 4, 6}, {7, 2, 0}}, {{3, 3}, {5, 9, 11, 0}}};
  auto r = xlalign::testing::gradcheck(m.params(), [&](ad::Graph<double>& g) {
    return ad::scale(ad::sum(m.forward(g, batch).sequence_logprobs), -1.0);
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Policy, FrozenRolesCannotTrain) {
  PolicyModel<float> m(micro_config(), micro_vocab());
  auto ref = m.clone_frozen(Role::reference);
  EXPECT_TRUE(ref.frozen());
  ad::AdamW<float> opt;
  EXPECT_THROW(opt.step(ref.params()), ContractError);
  ad::Graph<float> g;
  std::vector<SeqPair> batch{{{1}, {2, 0}}};
  auto out = ref.forward(g, batch);
  EXPECT_FALSE(out.sequence_logprobs.requires_grad());
  EXPECT_THROW(m.clone_frozen(Role::policy), ValidationError);
}

TEST(Policy, SaveLoadRoundTripAndDigestCheck) {
  PolicyModel<float> m(micro_config(), micro_vocab());
  auto dir = std::filesystem::temp_directory_path() / "xlalign_test_policy";
  std::filesystem::remove_all(dir);
  m.save(dir);
  auto back = PolicyModel<float>::load(dir);
  EXPECT_EQ(back.digest(), m.digest());
  EXPECT_EQ(back.next_token_logits({1, 2, 3}), m.next_token_logits({1, 2, 3}));
  {
    std::fstream f(dir / "tensors.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('\x7f');
  }
  EXPECT_THROW(PolicyModel<float>::load(dir), ContractError);
  std::filesystem::remove_all(dir);
}
