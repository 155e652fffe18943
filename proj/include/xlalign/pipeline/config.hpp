#pragma once

#include <memory>
#include <set>
#include <string>

#include <json.hpp>

#include "xlalign/common/digest.hpp"
#include "xlalign/policy/model.hpp"
#include "xlalign/scorer/cipher_oracle.hpp"
#include "xlalign/scorer/model1.hpp"
#include "xlalign/trainers/trainers.hpp"

namespace xlalign::pipeline {

/// Number of training problems whose samples feed one preference round; 0
/// means the whole training split.
struct SamplingScope {
  std::size_t problems = 800;
};

struct ScorerConfig {
  std::string kind = "cipher_oracle";  // or "model1"
  double epsilon = 0.05;
  int model1_iterations = 10;
};

struct EvalConfig {
  std::size_t max_new_tokens = 48;
  /// Problems per split; 0 evaluates the whole split.
  std::size_t limit = 0;
};

/// Every knob of every stage. One resolved copy is written next to the
/// outputs of each command.
struct PipelineConfig {
  std::uint64_t seed = 7;
  std::string hparams_profile = "desk";
  synth::CorpusConfig corpus = synth::default_corpus_config();
  policy::PolicyConfig policy;
  train::SFTConfig sft;
  train::RFTConfig rft;
  prefdata::PrefBuildConfig pref;
  SamplingScope sampling;
  train::DPOConfig dpo;
  train::PPOConfig ppo;
  int rounds = 3;
  ScorerConfig scorer;
  EvalConfig eval;

  /// Propagates the global seed into every stage. The corpus keeps its own
  /// seed so that model seeds can vary over one fixed dataset.
  void apply_seed(std::uint64_t s) {
    seed = s;
    policy.seed = s;
    sft.seed = s;
    rft.seed = s;
    pref.seed = s;
    dpo.seed = s;
    ppo.seed = s;
  }

  /// Appendix values of the original 7B-scale runs, kept for documentation
  /// parity. They are far too small for the toy policy.
  void apply_paper_hparams() {
    hparams_profile = "paper-7b";
    dpo.beta = 0.1;
    dpo.lr = 1e-6;
    dpo.warmup_steps = 100;
    dpo.max_steps = 1000;
    ppo.lr = 2e-5;
    ppo.batch_size = 64;
    ppo.ppo_epochs = 2;
    rft.lr = 1e-5;
  }

  void validate() const {
    if (rounds < 1) throw ValidationError("rounds must be >= 1");
    if (scorer.kind != "cipher_oracle" && scorer.kind != "model1")
      throw ValidationError("unknown scorer '" + scorer.kind + "' (expected cipher_oracle or model1)");
    if (!(scorer.epsilon > 0.0 && scorer.epsilon < 1.0)) throw ValidationError("scorer.epsilon must be in (0,1)");
    pref.validate();
    dpo.validate();
    ppo.validate();
  }
};

// --- JSON ----------------------------------------------------------------------

namespace detail {
template <class V>
void get_if(const nlohmann::json& j, const char* key, V& v) {
  if (j.contains(key)) v = j.at(key).get<V>();
}
}  // namespace detail

inline nlohmann::ordered_json to_json(const train::SFTConfig& c) {
  return {{"steps", c.steps},         {"batch_size", c.batch_size},     {"lr", c.lr},
          {"warmup_steps", c.warmup_steps}, {"weight_decay", c.weight_decay}, {"clip_norm", c.clip_norm},
          {"min_lr_ratio", c.min_lr_ratio}, {"seed", c.seed},           {"log_every", c.log_every}};
}
inline void from_json_into(const nlohmann::json& j, train::SFTConfig& c) {
  using detail::get_if;
  get_if(j, "steps", c.steps);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "lr", c.lr);
  get_if(j, "warmup_steps", c.warmup_steps);
  get_if(j, "weight_decay", c.weight_decay);
  get_if(j, "clip_norm", c.clip_norm);
  get_if(j, "min_lr_ratio", c.min_lr_ratio);
  get_if(j, "seed", c.seed);
  get_if(j, "log_every", c.log_every);
}

inline nlohmann::ordered_json to_json(const train::RFTConfig& c) {
  return {{"batch_size", c.batch_size}, {"lr", c.lr}, {"clip_norm", c.clip_norm}, {"seed", c.seed}};
}
inline void from_json_into(const nlohmann::json& j, train::RFTConfig& c) {
  using detail::get_if;
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "lr", c.lr);
  get_if(j, "clip_norm", c.clip_norm);
  get_if(j, "seed", c.seed);
}

inline nlohmann::ordered_json to_json(const train::DPOConfig& c) {
  return {{"beta", c.beta},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"max_steps", c.max_steps},
          {"warmup_steps", c.warmup_steps},
          {"val_fraction", c.val_fraction},
          {"eval_every", c.eval_every},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed}};
}
inline void from_json_into(const nlohmann::json& j, train::DPOConfig& c) {
  using detail::get_if;
  get_if(j, "beta", c.beta);
  get_if(j, "lr", c.lr);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "max_steps", c.max_steps);
  get_if(j, "warmup_steps", c.warmup_steps);
  get_if(j, "val_fraction", c.val_fraction);
  get_if(j, "eval_every", c.eval_every);
  get_if(j, "clip_norm", c.clip_norm);
  get_if(j, "seed", c.seed);
}

inline nlohmann::ordered_json to_json(const train::PPOConfig& c) {
  return {{"kl_coefficient", c.kl_coefficient},
          {"clip_ratio", c.clip_ratio},
          {"ppo_epochs", c.ppo_epochs},
          {"batch_size", c.batch_size},
          {"samples_per_item", c.samples_per_item},
          {"lr", c.lr},
          {"max_steps", c.max_steps},
          {"reward_mode", train::to_string(c.reward_mode)},
          {"temperature", c.temperature},
          {"max_new_tokens", c.max_new_tokens},
          {"clip_norm", c.clip_norm},
          {"whiten_advantages", c.whiten_advantages},
          {"seed", c.seed}};
}
inline void from_json_into(const nlohmann::json& j, train::PPOConfig& c) {
  using detail::get_if;
  get_if(j, "kl_coefficient", c.kl_coefficient);
  get_if(j, "clip_ratio", c.clip_ratio);
  get_if(j, "ppo_epochs", c.ppo_epochs);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "samples_per_item", c.samples_per_item);
  get_if(j, "lr", c.lr);
  get_if(j, "max_steps", c.max_steps);
  if (j.contains("reward_mode")) c.reward_mode = train::reward_mode_from_string(j.at("reward_mode").get<std::string>());
  get_if(j, "temperature", c.temperature);
  get_if(j, "max_new_tokens", c.max_new_tokens);
  get_if(j, "clip_norm", c.clip_norm);
  get_if(j, "whiten_advantages", c.whiten_advantages);
  get_if(j, "seed", c.seed);
}

inline nlohmann::ordered_json to_json(const PipelineConfig& c) {
  nlohmann::ordered_json pol = nlohmann::ordered_json::parse(policy::to_json(c.policy).dump());
  pol.erase("vocab_size");  // fixed by the corpus
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["hparams_profile"] = c.hparams_profile;
  j["corpus"] = nlohmann::ordered_json::parse(synth::corpus_config_to_json(c.corpus).dump());
  j["policy"] = pol;
  j["sft"] = to_json(c.sft);
  j["rft"] = to_json(c.rft);
  j["pref"] = prefdata::to_json(c.pref);
  j["sampling"] = {{"problems", c.sampling.problems}};
  j["dpo"] = to_json(c.dpo);
  j["ppo"] = to_json(c.ppo);
  j["rounds"] = c.rounds;
  j["scorer"] = {{"kind", c.scorer.kind},
                 {"epsilon", c.scorer.epsilon},
                 {"model1_iterations", c.scorer.model1_iterations}};
  j["eval"] = {{"max_new_tokens", c.eval.max_new_tokens}, {"limit", c.eval.limit}};
  return j;
}

/// Overlays `j` onto `c`; keys absent from `j` keep their current value.
inline void merge_json(const nlohmann::json& j, PipelineConfig& c) {
  using detail::get_if;
  static const std::set<std::string> known{"seed", "hparams_profile", "corpus", "policy", "sft",    "rft",  "pref",
                                           "sampling", "dpo", "ppo", "rounds", "scorer", "eval"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ValidationError("unknown config key '" + k + "'");
  if (j.contains("seed")) c.apply_seed(j.at("seed").get<std::uint64_t>());
  get_if(j, "hparams_profile", c.hparams_profile);
  if (j.contains("corpus")) {
    auto merged = synth::corpus_config_to_json(c.corpus);
    merged.update(j.at("corpus"));
    c.corpus = synth::corpus_config_from_json(merged);
  }
  if (j.contains("policy")) {
    auto merged = policy::to_json(c.policy);
    merged.update(j.at("policy"));
    c.policy = policy::policy_config_from_json(merged);
  }
  if (j.contains("sft")) from_json_into(j.at("sft"), c.sft);
  if (j.contains("rft")) from_json_into(j.at("rft"), c.rft);
  if (j.contains("pref")) {
    auto merged = nlohmann::json::parse(prefdata::to_json(c.pref).dump());
    merged.update(j.at("pref"));
    c.pref = prefdata::pref_config_from_json(merged);
  }
  if (j.contains("sampling")) get_if(j.at("sampling"), "problems", c.sampling.problems);
  if (j.contains("dpo")) from_json_into(j.at("dpo"), c.dpo);
  if (j.contains("ppo")) from_json_into(j.at("ppo"), c.ppo);
  get_if(j, "rounds", c.rounds);
  if (j.contains("scorer")) {
    const auto& s = j.at("scorer");
    get_if(s, "kind", c.scorer.kind);
    get_if(s, "epsilon", c.scorer.epsilon);
    get_if(s, "model1_iterations", c.scorer.model1_iterations);
  }
  if (j.contains("eval")) {
    get_if(j.at("eval"), "max_new_tokens", c.eval.max_new_tokens);
    get_if(j.at("eval"), "limit", c.eval.limit);
  }
}

inline std::string config_digest(const PipelineConfig& c) { return sha256_hex(to_json(c).dump()); }

// --- defaults ------------------------------------------------------------------

inline PipelineConfig default_pipeline_config() {
  PipelineConfig c;
  c.apply_seed(c.seed);
  return c;
}

// --- scorer ----------------------------------------------------------------------

/// Builds the configured alignment scorer. Model 1 is trained on the
/// corpus's training-split bitext.
inline std::unique_ptr<scorer::AlignmentScorer> make_scorer(const ScorerConfig& cfg, const synth::Corpus& corpus,
                                                            std::size_t vocab_size) {
  if (cfg.kind == "cipher_oracle")
    return std::make_unique<scorer::CipherOracleScorer>(corpus.languages, vocab_size, cfg.epsilon);
  if (cfg.kind == "model1") {
    auto m = scorer::train_model1(scorer::bitext_from_parallel(synth::make_parallel(corpus)), cfg.model1_iterations);
    return std::make_unique<scorer::Model1Scorer>(std::move(m));
  }
  throw ValidationError("unknown scorer '" + cfg.kind + "'");
}

}  // namespace xlalign::pipeline
