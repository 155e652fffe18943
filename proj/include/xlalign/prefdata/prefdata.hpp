#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xlalign/metrics/metrics.hpp"
#include "xlalign/policy/sampling.hpp"
#include "xlalign/scorer/scorer.hpp"

namespace xlalign::prefdata {

enum class AnchorMode { greedy_english, gold_english };

inline std::string to_string(AnchorMode m) { return m == AnchorMode::gold_english ? "gold_english" : "greedy_english"; }
inline AnchorMode anchor_mode_from_string(std::string_view s) {
  if (s == "greedy_english") return AnchorMode::greedy_english;
  if (s == "gold_english") return AnchorMode::gold_english;
  throw ValidationError("unknown anchor_mode '" + std::string(s) + "'");
}

struct PrefBuildConfig {
  std::size_t samples_per_problem = 4;
  double temperature = 0.9;
  double margin = 0.02;
  AnchorMode anchor_mode = AnchorMode::greedy_english;
  std::size_t max_new_tokens = 48;
  std::uint64_t seed = 0;

  void validate() const {
    if (samples_per_problem < 2) throw ValidationError("samples_per_problem must be >= 2");
    if (margin < 0.0) throw ValidationError("margin must be >= 0");
    if (temperature <= 0.0) throw ValidationError("sampling temperature must be > 0");
  }
};

inline nlohmann::ordered_json to_json(const PrefBuildConfig& c) {
  nlohmann::ordered_json j;
  j["samples_per_problem"] = c.samples_per_problem;
  j["temperature"] = c.temperature;
  j["margin"] = c.margin;
  j["anchor_mode"] = to_string(c.anchor_mode);
  j["max_new_tokens"] = c.max_new_tokens;
  j["seed"] = c.seed;
  return j;
}

inline PrefBuildConfig pref_config_from_json(const nlohmann::json& j) {
  PrefBuildConfig c;
  c.samples_per_problem = j.value("samples_per_problem", c.samples_per_problem);
  c.temperature = j.value("temperature", c.temperature);
  c.margin = j.value("margin", c.margin);
  if (j.contains("anchor_mode")) c.anchor_mode = anchor_mode_from_string(j.at("anchor_mode").get<std::string>());
  c.max_new_tokens = j.value("max_new_tokens", c.max_new_tokens);
  c.seed = j.value("seed", c.seed);
  return c;
}

/// One sampled completion. English records are the anchors and carry no
/// score.
struct SampleRecord {
  std::string problem_id;
  std::string lang;
  Tokens prompt;
  Tokens completion;  // ends with the stop token when generation stopped
  std::optional<long long> extracted_answer;
  std::optional<scorer::ScoreResult> score;
  std::vector<double> step_logprobs;
  int source_round = 0;
};

struct PreferencePair {
  std::string problem_id;
  std::string lang;
  Tokens prompt;
  Tokens anchor_en;
  Tokens chosen;
  Tokens rejected;
  double score_w = 0.0;  // norm_score
  double score_l = 0.0;
  int round = 0;
};

struct Provenance {
  std::string policy_digest;
  std::string scorer_id;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  int round = 0;
};

struct PreferenceDataset {
  std::vector<PreferencePair> pairs;
  Provenance provenance;
};

struct RftExample {
  std::string problem_id;
  std::string lang;
  Tokens prompt;
  Tokens completion;
};

inline std::uint64_t sample_seed(std::uint64_t base, const std::string& problem_id, const std::string& lang, int round) {
  return hash_combine(hash_combine(hash_combine(base, hash_string(problem_id)), hash_string(lang)),
                      static_cast<std::uint64_t>(round));
}

/// Samples n completions per (problem, non-English language) and one English
/// anchor per problem. English anchors come first, then the non-English
/// records grouped by problem, then language.
template <class T>
std::vector<SampleRecord> collect_samples(const policy::PolicyModel<T>& policy, const synth::Corpus& corpus,
                                          const std::vector<std::string>& problem_ids,
                                          const std::vector<std::string>& languages, const PrefBuildConfig& cfg,
                                          const metrics::AnswerExtractor& ex, int round = 0) {
  cfg.validate();
  const auto& vocab = policy.vocab();
  std::vector<SampleRecord> anchors, samples;
  auto make_record = [&](const synth::ProblemInstance& inst, const Tokens& prompt,
                         const policy::Completion<T>& c) {
    SampleRecord r;
    r.problem_id = inst.problem_id;
    r.lang = inst.lang;
    r.prompt = prompt;
    r.completion = vocab.decode(c.ids);
    r.extracted_answer = ex.extract(r.completion, r.lang);
    r.step_logprobs.assign(c.step_logprobs.begin(), c.step_logprobs.end());
    r.source_round = round;
    return r;
  };
  for (const auto& pid : problem_ids) {
    const auto& en = corpus.instance(pid, std::string(synth::kEnglish));
    const Tokens en_prompt = synth::make_prompt(corpus.languages.get(synth::kEnglish), en.question);
    if (cfg.anchor_mode == AnchorMode::gold_english) {
      SampleRecord r;
      r.problem_id = pid;
      r.lang = en.lang;
      r.prompt = en_prompt;
      r.completion = en.gold_solution;
      r.completion.emplace_back(kStopToken);
      r.extracted_answer = ex.extract(r.completion, r.lang);
      r.source_round = round;
      anchors.push_back(std::move(r));
    } else {
      auto c = policy::greedy(policy, vocab.encode(en_prompt), cfg.max_new_tokens, vocab.stop_id());
      anchors.push_back(make_record(en, en_prompt, c));
    }
    for (const auto& lang : languages) {
      if (lang == synth::kEnglish) continue;
      const auto& inst = corpus.instance(pid, lang);
      const Tokens prompt = synth::make_prompt(corpus.languages.get(lang), inst.question);
      policy::DecodeParams dp;
      dp.temperature = cfg.temperature;
      dp.max_new_tokens = cfg.max_new_tokens;
      dp.stop_token = vocab.stop_id();
      dp.seed = sample_seed(cfg.seed, pid, lang, round);
      for (const auto& c : policy::sample(policy, vocab.encode(prompt), dp, cfg.samples_per_problem))
        samples.push_back(make_record(inst, prompt, c));
    }
  }
  anchors.insert(anchors.end(), std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.end()));
  return anchors;
}

/// English anchors of a record list, keyed by problem id.
inline std::map<std::string, const SampleRecord*> anchor_index(const std::vector<SampleRecord>& records) {
  std::map<std::string, const SampleRecord*> out;
  for (const auto& r : records)
    if (r.lang == synth::kEnglish) out[r.problem_id] = &r;
  return out;
}

/// Fills score on every non-English record against the anchor with the same
/// problem id. Idempotent.
inline void score_samples(std::vector<SampleRecord>& records, const std::vector<SampleRecord>& anchors,
                          const scorer::AlignmentScorer& sc) {
  std::map<std::string, const SampleRecord*> idx;
  for (const auto& a : anchors) {
    if (a.lang != synth::kEnglish) throw ValidationError("anchor for '" + a.problem_id + "' is not English");
    idx[a.problem_id] = &a;
  }
  std::set<std::string> missing;
  for (const auto& r : records)
    if (r.lang != synth::kEnglish && !idx.count(r.problem_id)) missing.insert(r.problem_id);
  if (!missing.empty()) {
    std::string ids;
    for (const auto& m : missing) ids += (ids.empty() ? "" : ",") + m;
    throw ValidationError("score_samples: missing English anchor for problems " + ids);
  }
  for (auto& r : records) {
    if (r.lang == synth::kEnglish) continue;
    r.score = sc.score(r.completion, idx.at(r.problem_id)->completion);
  }
}

inline void score_samples(std::vector<SampleRecord>& records, const scorer::AlignmentScorer& sc) {
  std::vector<SampleRecord> anchors;
  for (const auto& r : records)
    if (r.lang == synth::kEnglish) anchors.push_back(r);
  score_samples(records, anchors, sc);
}

/// All score-ordered pairs within each (problem, language) whose
/// norm_score gap exceeds the margin. Identical completions collapse to one.
inline PreferenceDataset build_pairs(const std::vector<SampleRecord>& records, const PrefBuildConfig& cfg,
                                     int round = 0) {
  if (cfg.margin < 0.0) throw ValidationError("margin must be >= 0");
  std::map<std::string, const SampleRecord*> anchors = anchor_index(records);
  std::map<std::pair<std::string, std::string>, std::vector<const SampleRecord*>> groups;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : records) {
    if (r.lang == synth::kEnglish) continue;
    if (!r.score) throw ValidationError("build_pairs: record for '" + r.problem_id + "' is not scored");
    auto key = std::make_pair(r.problem_id, r.lang);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  PreferenceDataset ds;
  ds.provenance.round = round;
  for (const auto& key : order) {
    auto& g = groups[key];
    std::vector<const SampleRecord*> uniq;
    std::set<Tokens> seen;
    for (const auto* r : g)
      if (seen.insert(r->completion).second) uniq.push_back(r);
    std::sort(uniq.begin(), uniq.end(), [](const SampleRecord* a, const SampleRecord* b) {
      if (a->score->norm_score != b->score->norm_score) return a->score->norm_score > b->score->norm_score;
      return a->completion < b->completion;
    });
    const auto anc = anchors.find(key.first);
    for (std::size_t i = 0; i < uniq.size(); ++i)
      for (std::size_t j = i + 1; j < uniq.size(); ++j) {
        const double gap = uniq[i]->score->norm_score - uniq[j]->score->norm_score;
        if (!(gap > cfg.margin)) continue;
        PreferencePair p;
        p.problem_id = key.first;
        p.lang = key.second;
        p.prompt = uniq[i]->prompt;
        if (anc != anchors.end()) p.anchor_en = anc->second->completion;
        p.chosen = uniq[i]->completion;
        p.rejected = uniq[j]->completion;
        p.score_w = uniq[i]->score->norm_score;
        p.score_l = uniq[j]->score->norm_score;
        p.round = round;
        ds.pairs.push_back(std::move(p));
      }
  }
  return ds;
}

/// Correct samples (all languages) with exact duplicates per problem removed.
inline std::vector<RftExample> build_rft(const std::vector<SampleRecord>& records,
                                         const std::map<std::string, long long>& gold) {
  std::vector<RftExample> out;
  std::set<std::pair<std::string, Tokens>> seen;
  for (const auto& r : records) {
    auto g = gold.find(r.problem_id);
    if (g == gold.end() || !r.extracted_answer || *r.extracted_answer != g->second) continue;
    if (!seen.insert({r.problem_id, r.completion}).second) continue;
    out.push_back({r.problem_id, r.lang, r.prompt, r.completion});
  }
  return out;
}

// --- serialization ---------------------------------------------------------

inline nlohmann::ordered_json to_json(const PreferencePair& p) {
  nlohmann::ordered_json j;
  j["problem_id"] = p.problem_id;
  j["lang"] = p.lang;
  j["prompt"] = join_tokens(p.prompt);
  j["anchor_en"] = join_tokens(p.anchor_en);
  j["chosen"] = join_tokens(p.chosen);
  j["rejected"] = join_tokens(p.rejected);
  j["score_w"] = p.score_w;
  j["score_l"] = p.score_l;
  j["round"] = p.round;
  return j;
}

inline PreferencePair pair_from_json(const nlohmann::json& j) {
  PreferencePair p;
  p.problem_id = j.at("problem_id").get<std::string>();
  p.lang = j.at("lang").get<std::string>();
  p.prompt = split_tokens(j.at("prompt").get<std::string>());
  p.anchor_en = split_tokens(j.at("anchor_en").get<std::string>());
  p.chosen = split_tokens(j.at("chosen").get<std::string>());
  p.rejected = split_tokens(j.at("rejected").get<std::string>());
  p.score_w = j.at("score_w").get<double>();
  p.score_l = j.at("score_l").get<double>();
  p.round = j.at("round").get<int>();
  return p;
}

inline nlohmann::ordered_json to_json(const RftExample& e) {
  nlohmann::ordered_json j;
  j["problem_id"] = e.problem_id;
  j["lang"] = e.lang;
  j["prompt"] = join_tokens(e.prompt);
  j["completion"] = join_tokens(e.completion);
  return j;
}

inline RftExample rft_from_json(const nlohmann::json& j) {
  return {j.at("problem_id").get<std::string>(), j.at("lang").get<std::string>(),
          split_tokens(j.at("prompt").get<std::string>()), split_tokens(j.at("completion").get<std::string>())};
}

inline nlohmann::ordered_json to_json(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["problem_id"] = r.problem_id;
  j["lang"] = r.lang;
  j["prompt"] = join_tokens(r.prompt);
  j["completion"] = join_tokens(r.completion);
  j["extracted_answer"] = r.extracted_answer ? nlohmann::ordered_json(*r.extracted_answer) : nlohmann::ordered_json();
  if (r.score) {
    j["score"] = {{"log_prob", r.score->log_prob},
                  {"per_token", r.score->per_token},
                  {"en_len", r.score->en_len},
                  {"norm_score", r.score->norm_score},
                  {"ppl", r.score->ppl}};
  } else {
    j["score"] = nullptr;
  }
  j["step_logprobs"] = r.step_logprobs;
  j["round"] = r.source_round;
  return j;
}

inline SampleRecord record_from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.problem_id = j.at("problem_id").get<std::string>();
  r.lang = j.at("lang").get<std::string>();
  r.prompt = split_tokens(j.at("prompt").get<std::string>());
  r.completion = split_tokens(j.at("completion").get<std::string>());
  if (j.contains("extracted_answer") && !j.at("extracted_answer").is_null())
    r.extracted_answer = j.at("extracted_answer").get<long long>();
  if (j.contains("score") && !j.at("score").is_null())
    r.score = scorer::ScoreResult::from_per_token(j.at("score").at("per_token").get<std::vector<double>>());
  r.step_logprobs = j.value("step_logprobs", std::vector<double>{});
  r.source_round = j.value("round", 0);
  return r;
}

template <class Item>
std::string to_jsonl(const std::vector<Item>& items) {
  std::string out;
  for (const auto& it : items) {
    out += to_json(it).dump();
    out.push_back('\n');
  }
  return out;
}

/// Parses JSONL with `parse` applied per non-empty line; errors name the line.
template <class F>
auto from_jsonl(std::istream& in, F parse) {
  std::vector<decltype(parse(nlohmann::json{}))> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(parse(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const Provenance& p) {
  nlohmann::ordered_json j;
  j["policy_digest"] = p.policy_digest;
  j["scorer_id"] = p.scorer_id;
  j["config"] = p.config;
  j["round"] = p.round;
  return j;
}

inline Provenance provenance_from_json(const nlohmann::json& j) {
  Provenance p;
  p.policy_digest = j.at("policy_digest").get<std::string>();
  p.scorer_id = j.at("scorer_id").get<std::string>();
  p.config = j.at("config");
  p.round = j.at("round").get<int>();
  return p;
}

}  // namespace xlalign::prefdata
