#pragma once

#include <string>
#include <vector>

#include "xlalign/metrics/metrics.hpp"
#include "xlalign/policy/sampling.hpp"

namespace xlalign::pipeline {

/// Problems of one split in corpus order, truncated to `limit` when nonzero.
/// Problem ids of one split in corpus order. A nonzero limit keeps `limit`
/// evenly spaced ids so that every template stays represented.
inline std::vector<std::string> split_problem_ids(const synth::Corpus& corpus, synth::Split split, std::size_t limit = 0) {
  std::vector<std::string> all;
  for (const auto& p : corpus.problems)
    if (p.split == split) all.push_back(p.problem_id);
  if (limit == 0 || limit >= all.size()) return all;
  std::vector<std::string> out;
  out.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) out.push_back(all[i * all.size() / limit]);
  return out;
}

inline std::map<std::string, long long> gold_answers(const synth::Corpus& corpus) {
  std::map<std::string, long long> out;
  for (const auto& p : corpus.problems) out[p.problem_id] = p.answer;
  return out;
}

/// Greedy completion for every (problem, language).
template <class T>
std::vector<metrics::EvalRecord> generate_eval_records(const policy::PolicyModel<T>& model, const synth::Corpus& corpus,
                                                       const std::vector<std::string>& problem_ids,
                                                       std::size_t max_new_tokens) {
  const auto& vocab = model.vocab();
  std::vector<metrics::EvalRecord> out;
  for (const auto& pid : problem_ids)
    for (const auto& lang : corpus.language_ids()) {
      const auto& inst = corpus.instance(pid, lang);
      auto prompt = vocab.encode(synth::make_prompt(corpus.languages.get(lang), inst.question));
      auto c = policy::greedy(model, prompt, max_new_tokens, vocab.stop_id());
      out.push_back({pid, lang, vocab.decode(c.ids)});
    }
  return out;
}

template <class T>
metrics::EvalResult evaluate_model(const std::string& name, const policy::PolicyModel<T>& model,
                                   const synth::Corpus& corpus, synth::Split split, const scorer::AlignmentScorer& sc,
                                   std::size_t max_new_tokens, std::size_t limit = 0) {
  const auto ids = split_problem_ids(corpus, split, limit);
  auto records = generate_eval_records(model, corpus, ids, max_new_tokens);
  metrics::AnswerExtractor ex(corpus.languages);
  return metrics::evaluate(name, synth::to_string(split), records, gold_answers(corpus), ex, sc);
}

}  // namespace xlalign::pipeline
