#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xlalign/autodiff/optimizer.hpp"
#include "xlalign/prefdata/prefdata.hpp"
#include "xlalign/trainers/report.hpp"

namespace xlalign::train {

using policy::PolicyModel;
using policy::SeqPair;

/// Prompt and target completion (stop token included) as tokens.
struct Example {
  Tokens prompt;
  Tokens completion;
};

struct SFTConfig {
  long steps = 1500;
  std::size_t batch_size = 16;
  double lr = 2e-3;
  long warmup_steps = 50;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  /// lr decays linearly after warmup to lr * min_lr_ratio at the last step.
  double min_lr_ratio = 0.1;
  std::uint64_t seed = 0;
  long log_every = 10;
};

/// Linear decay from `lr` after warmup to lr * min_ratio at `total`.
inline double decayed_lr(double lr, long step, long warmup, long total, double min_ratio) {
  if (step <= warmup || total <= warmup) return lr;
  const double f = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return lr * (1.0 - (1.0 - min_ratio) * std::min(1.0, f));
}

struct RFTConfig {
  std::size_t batch_size = 16;
  double lr = 3e-4;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
};

struct DPOConfig {
  double beta = 0.1;
  double lr = 1e-4;
  std::size_t batch_size = 16;
  long max_steps = 100;
  long warmup_steps = 10;
  double val_fraction = 0.1;
  long eval_every = 20;
  double clip_norm = 0.0;  // off
  std::uint64_t seed = 0;

  void validate() const {
    if (!(beta > 0.0)) throw ValidationError("dpo: beta must be > 0");
    if (batch_size == 0 || max_steps < 1) throw ValidationError("dpo: batch_size and max_steps must be positive");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw ValidationError("dpo: val_fraction must be in [0,1)");
  }
};

enum class RewardMode { norm_prob, raw_prob };

inline std::string to_string(RewardMode m) { return m == RewardMode::raw_prob ? "raw_prob" : "norm_prob"; }
inline RewardMode reward_mode_from_string(std::string_view s) {
  if (s == "norm_prob") return RewardMode::norm_prob;
  if (s == "raw_prob") return RewardMode::raw_prob;
  throw ValidationError("unknown reward_mode '" + std::string(s) + "'");
}

struct PPOConfig {
  double kl_coefficient = 0.05;
  double clip_ratio = 0.2;
  int ppo_epochs = 2;
  std::size_t batch_size = 8;  // (problem, language) items per step
  std::size_t samples_per_item = 4;
  double lr = 1e-4;
  long max_steps = 500;
  RewardMode reward_mode = RewardMode::norm_prob;
  double temperature = 1.0;
  std::size_t max_new_tokens = 48;
  double clip_norm = 1.0;
  /// Divide advantages by their batch standard deviation.
  bool whiten_advantages = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (kl_coefficient < 0.0) throw ValidationError("ppo: kl_coefficient must be >= 0");
    if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) throw ValidationError("ppo: clip_ratio must be in (0,1)");
    if (ppo_epochs < 1 || batch_size == 0 || samples_per_item == 0) throw ValidationError("ppo: ppo_epochs, batch_size and samples_per_item must be positive");
  }
};

struct IterConfig {
  int rounds = 3;
  prefdata::PrefBuildConfig pref;
  DPOConfig dpo;
};

namespace detail {

template <class T>
std::vector<SeqPair> encode(const policy::Vocabulary& v, std::span<const Example> xs) {
  std::vector<SeqPair> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back({v.encode(x.prompt), v.encode(x.completion)});
  return out;
}

/// Parameter values only, for checkpoint selection.
template <class T>
std::map<std::string, ad::Tensor<T>> snapshot(const PolicyModel<T>& m) {
  std::map<std::string, ad::Tensor<T>> out;
  for (const auto& [name, p] : m.params().all()) out.emplace(name, p.value);
  return out;
}

template <class T>
void restore(PolicyModel<T>& m, const std::map<std::string, ad::Tensor<T>>& snap) {
  auto& all = m.params().all_mut();
  for (const auto& [name, v] : snap) all.at(name).value = v;
}

inline ad::AdamWConfig adam(double lr, long warmup, double wd, double clip) {
  ad::AdamWConfig c;
  c.lr = lr;
  c.warmup_steps = warmup;
  c.weight_decay = wd;
  c.clip_norm = clip;
  return c;
}

/// Cycles through a seeded permutation, reshuffling at each epoch end.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : rng_(seed), order_(n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
  }
  std::vector<std::size_t> next(std::size_t b) {
    std::vector<std::size_t> out;
    while (out.size() < b) {
      if (pos_ == order_.size()) {
        rng_.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// --- SFT ---------------------------------------------------------------------

/// Gold solutions of one split. Languages with sft_weight < 1 keep a fixed,
/// seed-determined fraction of their problems.
inline std::vector<Example> sft_examples(const synth::Corpus& corpus, synth::Split split, std::uint64_t seed) {
  std::vector<Example> out;
  for (const auto& inst : corpus.instances) {
    if (inst.split != split) continue;
    const auto& lang = corpus.languages.get(inst.lang);
    const double w = lang.spec().sft_weight;
    if (w < 1.0) {
      const auto h = hash_combine(hash_combine(seed, hash_string(inst.problem_id)), hash_string(inst.lang));
      if (static_cast<double>(h >> 11) * 0x1.0p-53 >= w) continue;
    }
    Tokens completion = inst.gold_solution;
    completion.emplace_back(kStopToken);
    out.push_back({synth::make_prompt(lang, inst.question), std::move(completion)});
  }
  return out;
}

/// Mean token cross-entropy over completion tokens.
template <class T>
ad::Var<T> sft_loss(ad::Graph<T>& g, const PolicyModel<T>& model, std::span<const SeqPair> batch) {
  auto out = model.forward(g, batch);
  return ad::scale(ad::mean(out.token_logprobs), T{-1});
}

template <class T>
T sft_eval_loss(const PolicyModel<T>& model, std::span<const SeqPair> data, std::size_t chunk = 64) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.size(); i += chunk) {
    ad::Graph<T> g;
    auto out = model.forward(g, data.subspan(i, std::min(chunk, data.size() - i)), false);
    for (T x : out.token_logprobs.value().values()) s -= static_cast<double>(x);
    n += out.token_logprobs.value().size();
  }
  return static_cast<T>(s / static_cast<double>(std::max<std::size_t>(n, 1)));
}

template <class T>
TrainReport train_sft(PolicyModel<T>& model, const std::vector<Example>& data, const SFTConfig& cfg) {
  if (data.empty()) throw ValidationError("train_sft: empty dataset");
  if (model.frozen()) throw ContractError("train_sft: model is frozen");
  const auto seqs = detail::encode<T>(model.vocab(), data);
  ad::AdamW<T> opt(detail::adam(cfg.lr, cfg.warmup_steps, cfg.weight_decay, cfg.clip_norm));
  detail::BatchSampler sampler(seqs.size(), hash_combine(cfg.seed, 0x5f7));
  TrainReport rep;
  rep.kind = "sft";
  rep.lineage.push_back(model.digest());
  std::vector<SeqPair> batch;
  for (long step = 1; step <= cfg.steps; ++step) {
    batch.clear();
    for (auto i : sampler.next(std::min(cfg.batch_size, seqs.size()))) batch.push_back(seqs[i]);
    model.params().zero_grad();
    ad::Graph<T> g;
    auto loss = sft_loss(g, model, batch);
    g.backward(loss);
    opt.config().lr = decayed_lr(cfg.lr, step, cfg.warmup_steps, cfg.steps, cfg.min_lr_ratio);
    const double norm = opt.step(model.params());
    if (step == 1 || step % cfg.log_every == 0 || step == cfg.steps)
      rep.steps.push_back({step, static_cast<double>(loss.value().item()), opt.current_lr(), norm});
  }
  rep.lineage.push_back(model.digest());
  rep.selected_checkpoint = model.digest();
  rep.selected_step = cfg.steps;
  return rep;
}

// --- m-RFT -------------------------------------------------------------------

/// Exactly one epoch over the rejection-sampled data.
template <class T>
TrainReport train_rft(PolicyModel<T>& model, const std::vector<prefdata::RftExample>& data, const RFTConfig& cfg) {
  if (data.empty()) throw ValidationError("train_rft: empty dataset");
  std::vector<Example> xs;
  for (const auto& d : data) xs.push_back({d.prompt, d.completion});
  const auto seqs = detail::encode<T>(model.vocab(), xs);
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(hash_combine(cfg.seed, 0x3f7));
  rng.shuffle(order);
  ad::AdamW<T> opt(detail::adam(cfg.lr, 0, 0.0, cfg.clip_norm));
  TrainReport rep;
  rep.kind = "rft";
  rep.lineage.push_back(model.digest());
  long step = 0;
  for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
    std::vector<SeqPair> batch;
    for (std::size_t k = i; k < std::min(order.size(), i + cfg.batch_size); ++k) batch.push_back(seqs[order[k]]);
    model.params().zero_grad();
    ad::Graph<T> g;
    auto loss = sft_loss(g, model, batch);
    g.backward(loss);
    const double norm = opt.step(model.params());
    rep.steps.push_back({++step, static_cast<double>(loss.value().item()), opt.current_lr(), norm});
  }
  rep.lineage.push_back(model.digest());
  rep.selected_checkpoint = model.digest();
  rep.selected_step = step;
  return rep;
}

// --- DPO ---------------------------------------------------------------------

/// Encoded pair plus the reference log-probabilities of both completions.
struct DpoItem {
  SeqPair chosen;
  SeqPair rejected;
  double ref_chosen = 0.0;
  double ref_rejected = 0.0;
};

template <class T>
std::vector<DpoItem> prepare_dpo(const PolicyModel<T>& reference, const std::vector<prefdata::PreferencePair>& pairs,
                                 std::size_t chunk = 64) {
  if (!reference.frozen()) throw ContractError("dpo: reference model must be frozen");
  const auto& v = reference.vocab();
  std::vector<DpoItem> items;
  items.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.chosen == p.rejected) throw ValidationError("dpo: chosen equals rejected for '" + p.problem_id + "'");
    auto prompt = v.encode(p.prompt);
    items.push_back({{prompt, v.encode(p.chosen)}, {prompt, v.encode(p.rejected)}, 0.0, 0.0});
  }
  for (std::size_t i = 0; i < items.size(); i += chunk) {
    const std::size_t e = std::min(items.size(), i + chunk);
    std::vector<SeqPair> seqs;
    for (std::size_t k = i; k < e; ++k) seqs.push_back(items[k].chosen);
    for (std::size_t k = i; k < e; ++k) seqs.push_back(items[k].rejected);
    auto lp = reference.sequence_log_probs(seqs);
    for (std::size_t k = i; k < e; ++k) {
      items[k].ref_chosen = static_cast<double>(lp[k - i]);
      items[k].ref_rejected = static_cast<double>(lp[e - i + k - i]);
    }
  }
  return items;
}

/// mean_i softplus(-beta * ((pi_w - ref_w) - (pi_l - ref_l))).
template <class T>
ad::Var<T> dpo_loss(ad::Graph<T>& g, const PolicyModel<T>& policy, std::span<const DpoItem> batch, double beta,
                    bool track_grad = true) {
  if (batch.empty()) throw ValidationError("dpo_loss: empty batch");
  std::vector<SeqPair> seqs;
  const std::size_t b = batch.size();
  ad::Tensor<T> ref_margin(ad::Shape{b});
  for (const auto& it : batch) seqs.push_back(it.chosen);
  for (const auto& it : batch) seqs.push_back(it.rejected);
  for (std::size_t i = 0; i < b; ++i)
    ref_margin[i] = static_cast<T>(-beta * (batch[i].ref_chosen - batch[i].ref_rejected));
  auto lp = policy.forward(g, seqs, track_grad).sequence_logprobs;
  auto diff = ad::sub(ad::slice(lp, 0, b), ad::slice(lp, b, 2 * b));
  auto z = ad::add(ad::scale(diff, static_cast<T>(beta)), g.constant(std::move(ref_margin)));
  return ad::mean(ad::softplus(ad::scale(z, T{-1})));
}

/// dpo_loss with reference log-probs computed on the fly.
template <class T>
ad::Var<T> dpo_loss(ad::Graph<T>& g, const PolicyModel<T>& policy, const PolicyModel<T>& reference,
                    const std::vector<prefdata::PreferencePair>& pairs, double beta) {
  auto items = prepare_dpo(reference, pairs);
  return dpo_loss(g, policy, std::span<const DpoItem>(items), beta);
}

template <class T>
double dpo_eval_loss(const PolicyModel<T>& policy, std::span<const DpoItem> items, double beta, std::size_t chunk = 32) {
  double s = 0.0;
  for (std::size_t i = 0; i < items.size(); i += chunk) {
    const std::size_t n = std::min(chunk, items.size() - i);
    ad::Graph<T> g;
    s += static_cast<double>(dpo_loss(g, policy, items.subspan(i, n), beta, false).value().item()) *
         static_cast<double>(n);
  }
  return s / static_cast<double>(items.size());
}

/// beta * ((pi_w - ref_w) - (pi_l - ref_l)) for one item.
template <class T>
double implicit_margin(const PolicyModel<T>& policy, const DpoItem& it, double beta) {
  std::vector<SeqPair> s{it.chosen, it.rejected};
  auto lp = policy.sequence_log_probs(s);
  return beta * ((static_cast<double>(lp[0]) - it.ref_chosen) - (static_cast<double>(lp[1]) - it.ref_rejected));
}

/// Trains on shuffled batches; a seed-fixed val_fraction of pairs is held out
/// and the parameters with the lowest validation loss among the periodic
/// checkpoints are restored at the end. Without held-out pairs the final
/// parameters are kept.
template <class T>
TrainReport train_dpo(PolicyModel<T>& policy, const PolicyModel<T>& reference,
                      const std::vector<prefdata::PreferencePair>& pairs, const DPOConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw ValidationError("train_dpo: empty preference dataset");
  if (!reference.frozen()) throw ContractError("train_dpo: reference model must be frozen");
  const std::string ref_digest = reference.digest();
  auto items = prepare_dpo(reference, pairs);
  Rng rng(hash_combine(cfg.seed, 0xd90));
  rng.shuffle(items);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(items.size())));
  std::vector<DpoItem> val(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<DpoItem> trn(items.begin() + static_cast<std::ptrdiff_t>(n_val), items.end());

  ad::AdamW<T> opt(detail::adam(cfg.lr, cfg.warmup_steps, 0.0, cfg.clip_norm));
  detail::BatchSampler sampler(trn.size(), hash_combine(cfg.seed, 0xd91));
  TrainReport rep;
  rep.kind = "dpo";
  rep.lineage.push_back(policy.digest());
  rep.extra["reference_digest"] = ref_digest;
  rep.extra["train_pairs"] = trn.size();
  rep.extra["val_pairs"] = val.size();
  double best = INFINITY;
  std::map<std::string, ad::Tensor<T>> best_params;
  std::vector<DpoItem> batch;
  for (long step = 1; step <= cfg.max_steps; ++step) {
    batch.clear();
    for (auto i : sampler.next(std::min(cfg.batch_size, trn.size()))) batch.push_back(trn[i]);
    policy.params().zero_grad();
    ad::Graph<T> g;
    auto loss = dpo_loss(g, policy, std::span<const DpoItem>(batch), cfg.beta);
    g.backward(loss);
    const double norm = opt.step(policy.params());
    rep.steps.push_back({step, static_cast<double>(loss.value().item()), opt.current_lr(), norm});
    if (!val.empty() && (step % cfg.eval_every == 0 || step == cfg.max_steps)) {
      const double vl = dpo_eval_loss(policy, std::span<const DpoItem>(val), cfg.beta);
      rep.validation.push_back({step, vl});
      if (vl < best) {
        best = vl;
        best_params = detail::snapshot(policy);
        rep.selected_step = step;
      }
    }
  }
  if (!best_params.empty()) detail::restore(policy, best_params);
  else rep.selected_step = cfg.max_steps;
  if (reference.digest() != ref_digest) throw ContractError("train_dpo: reference parameters changed");
  rep.lineage.push_back(policy.digest());
  rep.selected_checkpoint = policy.digest();
  return rep;
}

// --- PPO ---------------------------------------------------------------------

/// One sampled sequence with everything the clipped surrogate needs.
struct PpoSample {
  SeqPair seq;
  std::vector<double> old_logprobs;  // per completion token, behavior policy
  double advantage = 0.0;
};

/// -mean over tokens of min(ratio*A, clip(ratio, 1-c, 1+c)*A) with
/// ratio = exp(logpi - logpi_old) and A the sequence advantage.
template <class T>
ad::Var<T> ppo_surrogate(ad::Graph<T>& g, const PolicyModel<T>& policy, std::span<const PpoSample> batch,
                         double clip_ratio) {
  std::vector<SeqPair> seqs;
  std::size_t ntok = 0;
  for (const auto& s : batch) {
    if (s.old_logprobs.size() != s.seq.completion.size())
      throw ValidationError("ppo: old log-probs do not match completion length");
    seqs.push_back(s.seq);
    ntok += s.old_logprobs.size();
  }
  ad::Tensor<T> old(ad::Shape{ntok}), adv(ad::Shape{ntok});
  std::size_t k = 0;
  for (const auto& s : batch)
    for (double lp : s.old_logprobs) {
      old[k] = static_cast<T>(lp);
      adv[k++] = static_cast<T>(s.advantage);
    }
  auto lp = policy.forward(g, seqs).token_logprobs;
  auto ratio = ad::exp(ad::sub(lp, g.constant(std::move(old))));
  auto a = g.constant(std::move(adv));
  auto unclipped = ad::mul(ratio, a);
  auto clipped = ad::mul(ad::clamp(ratio, static_cast<T>(1 - clip_ratio), static_cast<T>(1 + clip_ratio)), a);
  return ad::scale(ad::mean(ad::minimum(unclipped, clipped)), T{-1});
}

struct PpoStats {
  double mean_reward = 0.0;  // alignment reward before the KL penalty
  double mean_total = 0.0;   // reward after the KL penalty
  double mean_kl = 0.0;
  double loss = 0.0;
  std::size_t n = 0;
};

struct PpoItem {
  std::string problem_id;
  std::string lang;
};

/// One PPO iteration: sample one completion per item from the current policy,
/// score it against a greedy English anchor of the same policy, subtract the
/// KL penalty toward the SFT anchor, center, and run ppo_epochs clipped
/// updates on the batch.
template <class T>
PpoStats ppo_step(PolicyModel<T>& policy, const PolicyModel<T>& sft, const scorer::AlignmentScorer& sc,
                  const synth::Corpus& corpus, const std::vector<PpoItem>& items, const PPOConfig& cfg,
                  ad::AdamW<T>& opt, long step) {
  cfg.validate();
  if (!sft.frozen()) throw ContractError("ppo: sft anchor must be frozen");
  if (items.empty()) throw ValidationError("ppo: empty batch");
  const auto& vocab = policy.vocab();
  std::map<std::string, Tokens> anchors;
  for (const auto& it : items) {
    if (anchors.count(it.problem_id)) continue;
    const auto& en = corpus.instance(it.problem_id, std::string(synth::kEnglish));
    auto prompt = vocab.encode(synth::make_prompt(corpus.languages.get(synth::kEnglish), en.question));
    anchors[it.problem_id] = vocab.decode(policy::greedy(policy, prompt, cfg.max_new_tokens, vocab.stop_id()).ids);
  }
  std::vector<PpoSample> batch;
  std::vector<double> rewards;
  PpoStats st;
  // Samples of one item share a baseline, the mean reward of their group.
  std::vector<std::size_t> group;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    const auto& inst = corpus.instance(it.problem_id, it.lang);
    auto prompt = vocab.encode(synth::make_prompt(corpus.languages.get(it.lang), inst.question));
    policy::DecodeParams dp;
    dp.temperature = cfg.temperature;
    dp.max_new_tokens = cfg.max_new_tokens;
    dp.stop_token = vocab.stop_id();
    dp.seed = hash_combine(hash_combine(cfg.seed, static_cast<std::uint64_t>(step)), i);
    const auto& anchor = anchors.at(it.problem_id);
    for (auto& c : policy::sample(policy, prompt, dp, cfg.samples_per_item)) {
      double base = 0.0;  // an empty anchor has nothing to align to
      if (!strip_stop(anchor).empty()) {
        auto res = sc.score(vocab.decode(c.ids), anchor);
        base = cfg.reward_mode == RewardMode::norm_prob ? std::exp(res.norm_score) : std::exp(res.log_prob);
      }
      const double kl =
          static_cast<double>(c.total_logprob()) - static_cast<double>(sft.sequence_log_prob(prompt, c.ids));
      st.mean_reward += base;
      st.mean_kl += kl;
      rewards.push_back(base - cfg.kl_coefficient * kl);
      group.push_back(i);
      PpoSample s;
      s.seq = {prompt, c.ids};
      s.old_logprobs.assign(c.step_logprobs.begin(), c.step_logprobs.end());
      batch.push_back(std::move(s));
    }
  }
  st.n = batch.size();
  std::vector<double> gsum(items.size(), 0.0), gn(items.size(), 0.0);
  double mean = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    gsum[group[k]] += rewards[k];
    gn[group[k]] += 1.0;
    mean += rewards[k];
  }
  double var = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double baseline = gn[group[k]] > 1.0 ? gsum[group[k]] / gn[group[k]] : mean / static_cast<double>(batch.size());
    batch[k].advantage = rewards[k] - baseline;
    var += batch[k].advantage * batch[k].advantage;
  }
  if (cfg.whiten_advantages) {
    const double sd = std::sqrt(var / static_cast<double>(batch.size()));
    if (sd > 1e-8)
      for (auto& b : batch) b.advantage /= sd;
  }
  st.mean_total = mean / static_cast<double>(rewards.size());
  st.mean_reward /= static_cast<double>(st.n);
  st.mean_kl /= static_cast<double>(st.n);
  for (int e = 0; e < cfg.ppo_epochs; ++e) {
    policy.params().zero_grad();
    ad::Graph<T> g;
    auto loss = ppo_surrogate(g, policy, std::span<const PpoSample>(batch), cfg.clip_ratio);
    g.backward(loss);
    opt.step(policy.params());
    if (e == 0) st.loss = static_cast<double>(loss.value().item());
  }
  return st;
}

/// Runs max_steps PPO iterations over batches drawn from `pool`.
template <class T>
TrainReport train_ppo(PolicyModel<T>& policy, const PolicyModel<T>& sft, const scorer::AlignmentScorer& sc,
                      const synth::Corpus& corpus, const std::vector<PpoItem>& pool, const PPOConfig& cfg,
                      const std::function<void(long, const PpoStats&)>& on_step = {}) {
  cfg.validate();
  if (pool.empty()) throw ValidationError("train_ppo: empty problem pool");
  const std::string sft_digest = sft.digest();
  ad::AdamW<T> opt(detail::adam(cfg.lr, 0, 0.0, cfg.clip_norm));
  detail::BatchSampler sampler(pool.size(), hash_combine(cfg.seed, 0x990));
  TrainReport rep;
  rep.kind = "ppo";
  rep.lineage.push_back(policy.digest());
  rep.extra["sft_anchor_digest"] = sft_digest;
  rep.extra["reward_mode"] = to_string(cfg.reward_mode);
  nlohmann::ordered_json rewards = nlohmann::ordered_json::array();
  for (long step = 1; step <= cfg.max_steps; ++step) {
    std::vector<PpoItem> batch;
    for (auto i : sampler.next(std::min(cfg.batch_size, pool.size()))) batch.push_back(pool[i]);
    auto st = ppo_step(policy, sft, sc, corpus, batch, cfg, opt, step);
    rep.steps.push_back({step, st.loss, opt.current_lr(), 0.0});
    rewards.push_back({{"step", step}, {"reward", st.mean_reward}, {"kl", st.mean_kl}});
    if (on_step) on_step(step, st);
  }
  if (sft.digest() != sft_digest) throw ContractError("train_ppo: sft anchor parameters changed");
  rep.extra["rewards"] = std::move(rewards);
  rep.lineage.push_back(policy.digest());
  rep.selected_checkpoint = policy.digest();
  rep.selected_step = cfg.max_steps;
  return rep;
}

// --- iterative DPO -----------------------------------------------------------

struct RoundResult {
  int round = 0;
  prefdata::PreferenceDataset dataset;
  std::string reference_digest;
  TrainReport report;
};

/// Rounds of: freeze reference, sample with the current policy, score, pair,
/// DPO. Each dataset records the digest of the policy that produced it.
template <class T>
std::vector<RoundResult> iterate_dpo(PolicyModel<T>& policy, const scorer::AlignmentScorer& sc,
                                     const synth::Corpus& corpus, const std::vector<std::string>& problem_ids,
                                     const IterConfig& cfg,
                                     const std::function<void(const RoundResult&, const PolicyModel<T>&)>& on_round = {}) {
  if (cfg.rounds < 1) throw ValidationError("iterate: rounds must be >= 1");
  metrics::AnswerExtractor ex(corpus.languages);
  const auto langs = corpus.non_english_ids();
  std::vector<RoundResult> out;
  for (int r = 1; r <= cfg.rounds; ++r) {
    RoundResult rr;
    rr.round = r;
    auto ref = policy.clone_frozen(policy::Role::reference);
    rr.reference_digest = ref.digest();
    auto records = prefdata::collect_samples(policy, corpus, problem_ids, langs, cfg.pref, ex, r);
    prefdata::score_samples(records, sc);
    rr.dataset = prefdata::build_pairs(records, cfg.pref, r);
    rr.dataset.provenance.policy_digest = policy.digest();
    rr.dataset.provenance.scorer_id = sc.id();
    rr.dataset.provenance.config = prefdata::to_json(cfg.pref);
    if (rr.dataset.pairs.empty())
      throw ContractError("iterate: round " + std::to_string(r) + " produced no preference pairs from " +
                          std::to_string(records.size()) + " samples");
    DPOConfig dc = cfg.dpo;
    dc.seed = cfg.dpo.seed + static_cast<std::uint64_t>(r - 1);
    rr.report = train_dpo(policy, ref, rr.dataset.pairs, dc);
    if (on_round) on_round(rr, policy);
    out.push_back(std::move(rr));
  }
  return out;
}

}  // namespace xlalign::train
