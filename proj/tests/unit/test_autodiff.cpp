#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "support/gradcheck.hpp"
#include "xlalign/autodiff/checkpoint.hpp"
#include "xlalign/autodiff/ops.hpp"
#include "xlalign/autodiff/optimizer.hpp"
#include "xlalign/common/rng.hpp"

using namespace xlalign;
using namespace xlalign::ad;
using xlalign::testing::gradcheck;

namespace {

Tensor<double> randn(Shape s, Rng& rng, double stdv = 1.0) {
  Tensor<double> t(std::move(s));
  for (auto& x : t.values()) x = rng.normal() * stdv;
  return t;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("xlalign_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Ops, LogSoftmaxOfEqualLogits) {
  Graph<double> g;
  auto y = log_softmax(g.constant(Tensor<double>({1, 2}, {0.0, 0.0})));
  EXPECT_NEAR(y.value()[0], -std::log(2.0), 1e-15);
  EXPECT_NEAR(y.value()[1], -std::log(2.0), 1e-15);
}

TEST(Ops, SigmoidAtZero) {
  Graph<double> g;
  EXPECT_EQ(sigmoid(g.constant(Tensor<double>::scalar(0.0))).value().item(), 0.5);
}

TEST(Ops, SoftmaxLargeLogitsStayFinite) {
  Graph<double> g;
  auto y = softmax(g.constant(Tensor<double>({1, 2}, {1000.0, 0.0})));
  EXPECT_NEAR(y.value()[0], 1.0, 1e-12);
  EXPECT_NEAR(y.value()[1], 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(y.value()[1]));
}

TEST(Ops, SumGradientIsOnes) {
  ParameterStore<double> s;
  auto& p = s.add("p", Tensor<double>({3}, {1.0, -2.0, 0.5}));
  Graph<double> g;
  g.backward(sum(g.parameter(p)));
  for (double x : p.grad.values()) EXPECT_EQ(x, 1.0);
}

TEST(Ops, SquareSumGradientIsTwoP) {
  ParameterStore<double> s;
  auto& p = s.add("p", Tensor<double>({3}, {1.0, -2.0, 0.5}));
  Graph<double> g;
  auto v = g.parameter(p);
  g.backward(sum(mul(v, v)));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(p.grad[i], 2 * p.value[i]);
}

TEST(Ops, BackwardTwiceAccumulates) {
  ParameterStore<double> s;
  auto& p = s.add("p", Tensor<double>({2}, {1.0, 3.0}));
  Graph<double> g;
  auto v = g.parameter(p);
  auto l = sum(mul(v, v));
  g.backward(l);
  g.backward(l);
  EXPECT_EQ(p.grad[0], 4.0);
  EXPECT_EQ(p.grad[1], 12.0);
}

TEST(Ops, NonScalarLossRejected) {
  ParameterStore<double> s;
  auto& p = s.add("p", Tensor<double>({2}, {1.0, 3.0}));
  Graph<double> g;
  EXPECT_THROW(g.backward(g.parameter(p)), ValidationError);
}

TEST(Ops, ShapeMismatchNamesOpAndShapes) {
  Graph<double> g;
  auto a = g.constant(Tensor<double>({2, 3}));
  auto b = g.constant(Tensor<double>({4, 5}));
  try {
    matmul(a, b);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("matmul"), std::string::npos) << m;
    EXPECT_NE(m.find("2,3"), std::string::npos) << m;
    EXPECT_NE(m.find("4,5"), std::string::npos) << m;
  }
}

TEST(Ops, FiniteCheckReportsOp) {
  Graph<double> g(true);
  auto a = g.constant(Tensor<double>({1}, {800.0}));
  try {
    ad::exp(a);
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("exp"), std::string::npos);
  }
}

TEST(Ops, StableLogSigmoidAndSoftplusAtExtremes) {
  Graph<double> g;
  auto x = g.constant(Tensor<double>({2}, {-800.0, 800.0}));
  auto ls = log_sigmoid(x).value();
  EXPECT_NEAR(ls[0], -800.0, 1e-9);
  EXPECT_NEAR(ls[1], 0.0, 1e-12);
  auto sp = softplus(x).value();
  EXPECT_NEAR(sp[0], 0.0, 1e-12);
  EXPECT_NEAR(sp[1], 800.0, 1e-9);
}

TEST(GradCheck, ElementwiseChain) {
  Rng rng(3);
  ParameterStore<double> s;
  s.add("a", randn({2, 3}, rng));
  s.add("b", randn({2, 3}, rng));
  auto r = gradcheck(s, [&](Graph<double>& g) {
    auto a = g.parameter(s.mut("a"));
    auto b = g.parameter(s.mut("b"));
    auto y = add(mul(ad::tanh(a), sigmoid(b)), sub(softplus(a), log_sigmoid(b)));
    y = add(y, scale(ad::exp(clamp(b, -0.5, 0.5)), 0.3));
    return mean(add_scalar(minimum(y, a), 1.0));
  });
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(GradCheck, MatmulRowsAndNorms) {
  Rng rng(4);
  ParameterStore<double> s;
  s.add("x", randn({4, 5}, rng));
  s.add("w", randn({5, 3}, rng));
  s.add("b", randn({3}, rng));
  s.add("gain", randn({5}, rng));
  auto r = gradcheck(s, [&](Graph<double>& g) {
    auto x = rmsnorm(g.parameter(s.mut("x")), g.parameter(s.mut("gain")));
    auto h = add_row(matmul(x, g.parameter(s.mut("w"))), g.parameter(s.mut("b")));
    auto both = concat<double>({h, relu(h)});
    auto sel = gather_rows(both, {0, 2, 5, 7, 7});
    return sum(softmax(sel));  // constant 5 but exercises the softmax backward wiring
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  auto r2 = gradcheck(s, [&](Graph<double>& g) {
    auto x = rmsnorm(g.parameter(s.mut("x")), g.parameter(s.mut("gain")));
    auto h = add_row(matmul(x, g.parameter(s.mut("w"))), g.parameter(s.mut("b")));
    auto lp = log_softmax(concat<double>({h, relu(h)}));
    return sum(segment_sum(pick(lp, {0, 1, 2, 0, 1, 2, 0, 1}), {3, 5}));
  });
  EXPECT_LT(r2.max_rel_error, 1e-6) << r2.worst;
}

TEST(GradCheck, EmbeddingAttentionCrossEntropy) {
  Rng rng(5);
  ParameterStore<double> s;
  s.add("emb", randn({7, 6}, rng, 0.5));
  s.add("wq", randn({6, 6}, rng, 0.5));
  s.add("wk", randn({6, 6}, rng, 0.5));
  s.add("wv", randn({6, 6}, rng, 0.5));
  s.add("out", randn({6, 7}, rng, 0.5));
  const std::vector<int> ids{1, 4, 2, 6, 0, 3, 3};
  const std::vector<int> targets{4, 2, 6, 0, 3, 3, 5};
  auto r = gradcheck(s, [&](Graph<double>& g) {
    auto x = embedding(g.parameter(s.mut("emb")), ids);
    auto q = matmul(x, g.parameter(s.mut("wq")));
    auto k = matmul(x, g.parameter(s.mut("wk")));
    auto v = matmul(x, g.parameter(s.mut("wv")));
    auto a = causal_attention(q, k, v, 2, {4, 3});
    return cross_entropy(matmul(add(a, x), g.parameter(s.mut("out"))), targets);
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Optimizer, ZeroGradientLeavesParametersUnchanged) {
  ParameterStore<float> s;
  s.add("w", Tensor<float>({2, 2}, {1, 2, 3, 4}));
  auto before = s.get("w").value.storage();
  AdamW<float> opt({.lr = 1e-2});
  opt.step(s);
  EXPECT_EQ(s.get("w").value.storage(), before);
}

TEST(Optimizer, WarmupHalfwayIsHalfLr) {
  AdamWConfig c;
  c.lr = 1e-3;
  c.warmup_steps = 100;
  EXPECT_DOUBLE_EQ(warmup_lr(c, 50), 5e-4);
  EXPECT_DOUBLE_EQ(warmup_lr(c, 100), 1e-3);
}

TEST(Optimizer, ConvergesOnQuadratic) {
  ParameterStore<double> s;
  auto& p = s.add("w", Tensor<double>({3}, {2.0, -1.0, 0.5}));
  AdamW<double> opt({.lr = 0.05});
  for (int i = 0; i < 2000; ++i) {
    s.zero_grad();
    Graph<double> g;
    auto v = g.parameter(p);
    g.backward(sum(mul(v, v)));
    opt.step(s);
  }
  for (double x : p.value.values()) EXPECT_LT(std::abs(x), 1e-2);
}

TEST(Optimizer, ClippingBoundsUpdateInput) {
  ParameterStore<double> s;
  auto& p = s.add("w", Tensor<double>({2}, {0.0, 0.0}));
  p.grad[0] = 30.0;
  p.grad[1] = 40.0;
  AdamW<double> opt({.lr = 0.1, .clip_norm = 1.0});
  EXPECT_DOUBLE_EQ(opt.step(s), 50.0);
}

TEST(Optimizer, FrozenStoreRejectsStep) {
  ParameterStore<float> s;
  s.add("w", Tensor<float>({1}, {1}));
  s.freeze();
  AdamW<float> opt;
  EXPECT_THROW(opt.step(s), ContractError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(9);
  ParameterStore<float> s;
  s.add("a.w", randn({3, 4}, rng).cast<float>());
  s.add("b", randn({4}, rng).cast<float>());
  auto dir = temp_dir("ckpt");
  save_tensors(dir, s);
  auto back = load_tensors<float>(dir);
  EXPECT_EQ(back.digest(), s.digest());
  for (const auto& [name, p] : s.all()) EXPECT_EQ(back.get(name).value.storage(), p.value.storage());
  EXPECT_THROW(load_tensors<double>(dir), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST(Determinism, SameSeedSameTrajectory) {
  auto run = [] {
    Rng rng(11);
    ParameterStore<double> s;
    s.add("w", randn({4, 4}, rng));
    AdamW<double> opt({.lr = 0.01});
    for (int i = 0; i < 20; ++i) {
      s.zero_grad();
      Graph<double> g;
      auto w = g.parameter(s.mut("w"));
      g.backward(sum(ad::tanh(matmul(w, w))));
      opt.step(s);
    }
    return s.digest();
  };
  EXPECT_EQ(run(), run());
}
