#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "xlalign/autodiff/checkpoint.hpp"
#include "xlalign/autodiff/kernels.hpp"
#include "xlalign/autodiff/ops.hpp"
#include "xlalign/common/rng.hpp"
#include "xlalign/policy/vocab.hpp"

namespace xlalign::policy {

enum class Role { policy, reference, sft_anchor };

inline std::string to_string(Role r) {
  switch (r) {
    case Role::policy: return "policy";
    case Role::reference: return "reference";
    case Role::sft_anchor: return "sft_anchor";
  }
  return "policy";
}

inline Role role_from_string(std::string_view s) {
  if (s == "policy") return Role::policy;
  if (s == "reference") return Role::reference;
  if (s == "sft_anchor") return Role::sft_anchor;
  throw ValidationError("unknown role '" + std::string(s) + "'");
}

struct PolicyConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 128;
  std::size_t context_len = 160;
  std::uint64_t seed = 0;
  double init_std = 0.05;
};

inline nlohmann::json to_json(const PolicyConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},         {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"d_ff", c.d_ff},               {"context_len", c.context_len},
          {"seed", c.seed},             {"init_std", c.init_std}};
}

inline PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.context_len = j.value("context_len", c.context_len);
  c.seed = j.value("seed", c.seed);
  c.init_std = j.value("init_std", c.init_std);
  return c;
}

/// A prompt/completion pair in token ids.
struct SeqPair {
  std::vector<int> prompt;
  std::vector<int> completion;
};

/// Output of a batched teacher-forced forward pass.
template <class T>
struct BatchLogProbs {
  ad::Var<T> token_logprobs;         // [sum of completion lengths]
  ad::Var<T> sequence_logprobs;      // [batch]
  std::vector<std::size_t> lengths;  // completion length per sequence
};

/// Small pre-norm causal transformer with learned positions. The role tag
/// decides whether the parameters may change: reference and sft_anchor
/// models hold a frozen parameter store.
template <class T>
class PolicyModel {
 public:
  PolicyModel(PolicyConfig cfg, std::shared_ptr<const Vocabulary> vocab, Role role = Role::policy)
      : cfg_(cfg), vocab_(std::move(vocab)), role_(role) {
    if (cfg_.vocab_size == 0 && vocab_) cfg_.vocab_size = vocab_->size();
    validate();
    init_parameters();
    if (role_ != Role::policy) params_.freeze();
  }

  PolicyModel(PolicyConfig cfg, std::shared_ptr<const Vocabulary> vocab, ad::ParameterStore<T> params, Role role)
      : cfg_(cfg), vocab_(std::move(vocab)), role_(role), params_(std::move(params)) {
    validate();
    if (role_ != Role::policy) params_.freeze();
  }

  const PolicyConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }
  Role role() const { return role_; }
  bool frozen() const { return params_.frozen(); }
  const ad::ParameterStore<T>& params() const { return params_; }
  ad::ParameterStore<T>& params() { return params_; }
  std::string digest() const { return params_.digest(); }

  /// Deep copy with a new role; the copy's store is frozen.
  PolicyModel clone_frozen(Role new_role) const {
    if (new_role == Role::policy) throw ValidationError("clone_frozen: target role must be reference or sft_anchor");
    ad::ParameterStore<T> copy;
    for (const auto& [name, p] : params_.all()) copy.add(name, p.value);
    return PolicyModel(cfg_, vocab_, std::move(copy), new_role);
  }

  /// Trainable deep copy (used to restore checkpoints and to branch runs).
  PolicyModel clone_trainable() const {
    ad::ParameterStore<T> copy;
    for (const auto& [name, p] : params_.all()) copy.add(name, p.value);
    return PolicyModel(cfg_, vocab_, std::move(copy), Role::policy);
  }

  /// Overwrites parameter values from another model of the same shape.
  void load_values_from(const PolicyModel& other) {
    auto& mine = params_.all_mut();
    for (const auto& [name, p] : other.params().all()) {
      auto it = mine.find(name);
      if (it == mine.end() || it->second.value.shape() != p.value.shape())
        throw ValidationError("load_values_from: parameter mismatch at '" + name + "'");
      it->second.value = p.value;
    }
  }

  /// Teacher-forced log-probabilities of every completion token. Prompt
  /// tokens contribute no terms.
  BatchLogProbs<T> forward(ad::Graph<T>& g, std::span<const SeqPair> batch, bool track_grad = true) const {
    std::vector<int> ids, pos, targets;
    std::vector<std::size_t> seq_lens, comp_lens, sel;
    std::size_t row = 0;
    for (const auto& sp : batch) {
      if (sp.completion.empty()) throw ValidationError("sequence_log_prob: empty completion");
      if (sp.prompt.empty()) throw ValidationError("sequence_log_prob: empty prompt");
      const std::size_t total = sp.prompt.size() + sp.completion.size();
      if (total > cfg_.context_len)
        throw ValidationError("sequence of length " + std::to_string(total) + " exceeds context_len " +
                              std::to_string(cfg_.context_len));
      const std::size_t in_len = total - 1;
      for (std::size_t t = 0; t < in_len; ++t) {
        ids.push_back(t < sp.prompt.size() ? sp.prompt[t] : sp.completion[t - sp.prompt.size()]);
        pos.push_back(static_cast<int>(t));
      }
      for (std::size_t c = 0; c < sp.completion.size(); ++c) {
        sel.push_back(row + sp.prompt.size() - 1 + c);
        targets.push_back(sp.completion[c]);
      }
      seq_lens.push_back(in_len);
      comp_lens.push_back(sp.completion.size());
      row += in_len;
    }
    const bool grad = track_grad && !params_.frozen();
    ad::Var<T> x = trunk(g, ids, pos, seq_lens, grad);
    ad::Var<T> xs = ad::gather_rows(x, std::move(sel));
    ad::Var<T> logits = head(g, xs, grad);
    ad::Var<T> tok = ad::pick(ad::log_softmax(logits), std::move(targets));
    ad::Var<T> seq = ad::segment_sum(tok, comp_lens);
    return {tok, seq, comp_lens};
  }

  /// Logits at every position of a single prefix, shape [len, vocab].
  ad::Tensor<T> all_logits(const std::vector<int>& prefix) const {
    check_prefix(prefix);
    ad::Graph<T> g;
    std::vector<int> pos(prefix.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
    return head(g, trunk(g, prefix, pos, {prefix.size()}, false), false).value();
  }

  std::vector<T> next_token_logits(const std::vector<int>& prefix) const {
    auto all = all_logits(prefix);
    auto last = all.row(all.rows() - 1);
    return {last.begin(), last.end()};
  }

  /// log π(completion | prompt) without recording gradients.
  T sequence_log_prob(const std::vector<int>& prompt, const std::vector<int>& completion) const {
    ad::Graph<T> g;
    SeqPair sp{prompt, completion};
    return forward(g, std::span<const SeqPair>(&sp, 1), false).sequence_logprobs.value()[0];
  }

  /// Batched log-probabilities without gradients.
  std::vector<T> sequence_log_probs(std::span<const SeqPair> batch) const {
    ad::Graph<T> g;
    auto out = forward(g, batch, false).sequence_logprobs.value();
    return {out.values().begin(), out.values().end()};
  }

  /// Incremental decoder with a key/value cache. Produces logits bitwise
  /// identical to the tape forward because both use the same row kernels.
  class Decoder {
   public:
    explicit Decoder(const PolicyModel& m) : m_(m) {
      const auto& c = m.cfg_;
      keys_.assign(c.n_layers, std::vector<T>());
      values_.assign(c.n_layers, std::vector<T>());
      for (auto& k : keys_) k.reserve(c.context_len * c.d_model);
      for (auto& v : values_) v.reserve(c.context_len * c.d_model);
    }

    std::size_t length() const { return len_; }

    /// Feeds one token; returns logits for the next position.
    const std::vector<T>& step(int token) {
      const auto& c = m_.cfg_;
      if (len_ >= c.context_len)
        throw ValidationError("decoder: context_len exceeded");
      if (token < 0 || static_cast<std::size_t>(token) >= c.vocab_size)
        throw ValidationError("decoder: token id out of range");
      const std::size_t d = c.d_model, hd = d / c.n_heads;
      const T sc = T{1} / std::sqrt(static_cast<T>(hd));
      const auto& P = m_.params_;
      x_.assign(d, T{0});
      const T* te = P.get("tok_emb").value.data() + static_cast<std::size_t>(token) * d;
      const T* pe = P.get("pos_emb").value.data() + len_ * d;
      for (std::size_t i = 0; i < d; ++i) x_[i] = te[i] + pe[i];
      h_.resize(d);
      tmp_.resize(std::max(d, c.d_ff));
      att_.resize(d);
      probs_.resize(len_ + 1);
      for (std::size_t l = 0; l < c.n_layers; ++l) {
        const std::string pre = "blocks." + std::to_string(l) + ".";
        ad::kernels::rmsnorm_row(x_.data(), P.get(pre + "ln1.g").value.data(), h_.data(), d, kNormEps);
        auto& K = keys_[l];
        auto& V = values_[l];
        std::vector<T> q(d);
        ad::kernels::matvec_row(h_.data(), P.get(pre + "attn.wq").value.data(), q.data(), d, d);
        K.resize((len_ + 1) * d);
        V.resize((len_ + 1) * d);
        ad::kernels::matvec_row(h_.data(), P.get(pre + "attn.wk").value.data(), K.data() + len_ * d, d, d);
        ad::kernels::matvec_row(h_.data(), P.get(pre + "attn.wv").value.data(), V.data() + len_ * d, d, d);
        for (std::size_t h = 0; h < c.n_heads; ++h)
          ad::kernels::attend_row(q.data() + h * hd, K.data() + h * hd, V.data() + h * hd, d, len_ + 1, hd, sc,
                                  probs_.data(), att_.data() + h * hd);
        ad::kernels::matvec_row(att_.data(), P.get(pre + "attn.wo").value.data(), tmp_.data(), d, d);
        for (std::size_t i = 0; i < d; ++i) x_[i] = x_[i] + tmp_[i];
        ad::kernels::rmsnorm_row(x_.data(), P.get(pre + "ln2.g").value.data(), h_.data(), d, kNormEps);
        std::vector<T> f(c.d_ff);
        ad::kernels::matvec_row(h_.data(), P.get(pre + "mlp.w1").value.data(), f.data(), d, c.d_ff);
        const T* b1 = P.get(pre + "mlp.b1").value.data();
        for (std::size_t i = 0; i < c.d_ff; ++i) {
          f[i] = f[i] + b1[i];
          f[i] = f[i] > T{0} ? f[i] : T{0};
        }
        ad::kernels::matvec_row(f.data(), P.get(pre + "mlp.w2").value.data(), tmp_.data(), c.d_ff, d);
        const T* b2 = P.get(pre + "mlp.b2").value.data();
        for (std::size_t i = 0; i < d; ++i) tmp_[i] = tmp_[i] + b2[i];
        for (std::size_t i = 0; i < d; ++i) x_[i] = x_[i] + tmp_[i];
      }
      ad::kernels::rmsnorm_row(x_.data(), P.get("ln_f.g").value.data(), h_.data(), d, kNormEps);
      logits_.resize(c.vocab_size);
      ad::kernels::matvec_row(h_.data(), P.get("lm_head.w").value.data(), logits_.data(), d, c.vocab_size);
      const T* bo = P.get("lm_head.b").value.data();
      for (std::size_t i = 0; i < c.vocab_size; ++i) logits_[i] = logits_[i] + bo[i];
      ++len_;
      return logits_;
    }

   private:
    const PolicyModel& m_;
    std::vector<std::vector<T>> keys_, values_;
    std::vector<T> x_, h_, tmp_, att_, probs_, logits_;
    std::size_t len_ = 0;
  };

  void save(const std::filesystem::path& dir) const {
    ad::save_tensors(dir, params_);
    nlohmann::ordered_json side;
    side["config"] = to_json(cfg_);
    side["role"] = to_string(role_);
    side["dtype"] = ad::dtype_name<T>();
    side["digest"] = digest();
    side["vocab"] = vocab_->tokens();
    std::ofstream(dir / "policy.json", std::ios::trunc) << side.dump(2) << '\n';
  }

  static PolicyModel load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "policy.json");
    if (!in) throw ValidationError("missing policy.json in " + dir.string());
    const auto side = nlohmann::json::parse(in);
    auto vocab = std::make_shared<const Vocabulary>(side.at("vocab").get<std::vector<std::string>>());
    PolicyModel m(policy_config_from_json(side.at("config")), std::move(vocab), ad::load_tensors<T>(dir),
                  role_from_string(side.at("role").get<std::string>()));
    if (side.contains("digest") && side.at("digest").get<std::string>() != m.digest())
      throw ContractError("checkpoint digest mismatch in " + dir.string() + ": expected " +
                          side.at("digest").get<std::string>() + ", found " + m.digest());
    return m;
  }

 private:
  static constexpr T kNormEps = T(1e-5);

  void validate() const {
    if (cfg_.vocab_size < 2) throw ValidationError("policy: vocab_size must be >= 2");
    if (vocab_ && vocab_->size() != cfg_.vocab_size) throw ValidationError("policy: vocab_size does not match vocabulary");
    if (cfg_.n_heads == 0 || cfg_.d_model % cfg_.n_heads != 0)
      throw ValidationError("policy: d_model must be divisible by n_heads");
    if (cfg_.n_layers == 0 || cfg_.context_len < 2) throw ValidationError("policy: bad layer count or context_len");
  }

  void check_prefix(const std::vector<int>& prefix) const {
    if (prefix.empty()) throw ValidationError("next_token_logits: empty prefix");
    if (prefix.size() >= cfg_.context_len)
      throw ValidationError("next_token_logits: prefix length " + std::to_string(prefix.size()) +
                            " must be < context_len " + std::to_string(cfg_.context_len));
  }

  void init_parameters() {
    Rng rng(hash_combine(cfg_.seed, 0x5eed));
    const std::size_t d = cfg_.d_model, v = cfg_.vocab_size, ff = cfg_.d_ff;
    auto normal = [&](ad::Shape s, double stdev) {
      ad::Tensor<T> t(std::move(s));
      for (auto& x : t.values()) x = static_cast<T>(rng.normal() * stdev);
      return t;
    };
    const double sd = cfg_.init_std;
    const double proj_sd = sd / std::sqrt(2.0 * static_cast<double>(cfg_.n_layers));
    params_.add("tok_emb", normal({v, d}, sd));
    params_.add("pos_emb", normal({cfg_.context_len, d}, sd));
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string pre = "blocks." + std::to_string(l) + ".";
      params_.add(pre + "ln1.g", ad::Tensor<T>({d}, T{1}));
      params_.add(pre + "attn.wq", normal({d, d}, sd));
      params_.add(pre + "attn.wk", normal({d, d}, sd));
      params_.add(pre + "attn.wv", normal({d, d}, sd));
      params_.add(pre + "attn.wo", normal({d, d}, proj_sd));
      params_.add(pre + "ln2.g", ad::Tensor<T>({d}, T{1}));
      params_.add(pre + "mlp.w1", normal({d, ff}, sd));
      params_.add(pre + "mlp.b1", ad::Tensor<T>({ff}));
      params_.add(pre + "mlp.w2", normal({ff, d}, proj_sd));
      params_.add(pre + "mlp.b2", ad::Tensor<T>({d}));
    }
    params_.add("ln_f.g", ad::Tensor<T>({d}, T{1}));
    params_.add("lm_head.w", normal({d, v}, sd));
    params_.add("lm_head.b", ad::Tensor<T>({v}));
  }

  ad::Var<T> leaf(ad::Graph<T>& g, const std::string& name, bool grad) const {
    if (!grad) return g.parameter(params_.get(name));
    // Trainable models hand out mutable leaves so gradients reach the store.
    auto& self = const_cast<ad::ParameterStore<T>&>(params_);
    return g.parameter(self.mut(name));
  }

  ad::Var<T> trunk(ad::Graph<T>& g, const std::vector<int>& ids, const std::vector<int>& pos,
                   const std::vector<std::size_t>& seq_lens, bool grad) const {
    auto leaf = [&](const std::string& name) { return this->leaf(g, name, grad); };
    ad::Var<T> x = ad::add(ad::embedding(leaf("tok_emb"), ids), ad::embedding(leaf("pos_emb"), pos));
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string pre = "blocks." + std::to_string(l) + ".";
      ad::Var<T> h = ad::rmsnorm(x, leaf(pre + "ln1.g"), kNormEps);
      ad::Var<T> q = ad::matmul(h, leaf(pre + "attn.wq"));
      ad::Var<T> k = ad::matmul(h, leaf(pre + "attn.wk"));
      ad::Var<T> v = ad::matmul(h, leaf(pre + "attn.wv"));
      ad::Var<T> a = ad::causal_attention(q, k, v, cfg_.n_heads, seq_lens);
      x = ad::add(x, ad::matmul(a, leaf(pre + "attn.wo")));
      ad::Var<T> h2 = ad::rmsnorm(x, leaf(pre + "ln2.g"), kNormEps);
      ad::Var<T> f = ad::relu(ad::add_row(ad::matmul(h2, leaf(pre + "mlp.w1")), leaf(pre + "mlp.b1")));
      x = ad::add(x, ad::add_row(ad::matmul(f, leaf(pre + "mlp.w2")), leaf(pre + "mlp.b2")));
    }
    return x;
  }

  ad::Var<T> head(ad::Graph<T>& g, ad::Var<T> x, bool grad) const {
    auto leaf = [&](const std::string& name) { return this->leaf(g, name, grad); };
    ad::Var<T> h = ad::rmsnorm(x, leaf("ln_f.g"), kNormEps);
    return ad::add_row(ad::matmul(h, leaf("lm_head.w")), leaf("lm_head.b"));
  }

  PolicyConfig cfg_;
  std::shared_ptr<const Vocabulary> vocab_;
  Role role_ = Role::policy;
  ad::ParameterStore<T> params_;
};

}  // namespace xlalign::policy
