#pragma once

// Model 1 reference EM with exact rationals, and the corruption-trial check
// for the cipher oracle. Both are independent of the library code under test.

#include <boost/multiprecision/cpp_int.hpp>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "xlalign/common/rng.hpp"
#include "xlalign/scorer/cipher_oracle.hpp"
#include "xlalign/scorer/model1.hpp"

namespace xlalign::testing {

using boost::multiprecision::cpp_rational;
using scorer::BitextPair;
using scorer::kNullToken;

/// Enumerates every alignment explicitly.
using RTable = std::map<std::pair<std::string, std::string>, cpp_rational>;  // (f, e) -> t(e|f)

RTable brute_force_em(const std::vector<BitextPair>& corpus, int iterations) {
  std::map<std::string, std::set<std::string>> cooc;
  for (const auto& p : corpus)
    for (const auto& e : p.english) {
      cooc[std::string(kNullToken)].insert(e);
      for (const auto& f : p.foreign) cooc[f].insert(e);
    }
  RTable t;
  for (const auto& [f, es] : cooc)
    for (const auto& e : es) t[{f, e}] = cpp_rational(1, static_cast<int>(es.size()));
  for (int it = 0; it < iterations; ++it) {
    RTable counts;
    for (const auto& p : corpus) {
      std::vector<std::string> src{std::string(kNullToken)};
      src.insert(src.end(), p.foreign.begin(), p.foreign.end());
      const std::size_t m = p.english.size(), L = src.size();
      std::size_t n_align = 1;
      for (std::size_t j = 0; j < m; ++j) n_align *= L;
      std::vector<cpp_rational> weight(n_align);
      cpp_rational z = 0;
      for (std::size_t a = 0; a < n_align; ++a) {
        cpp_rational w = 1;
        std::size_t code = a;
        for (std::size_t j = 0; j < m; ++j, code /= L) w *= t[{src[code % L], p.english[j]}];
        weight[a] = w;
        z += w;
      }
      for (std::size_t a = 0; a < n_align; ++a) {
        std::size_t code = a;
        for (std::size_t j = 0; j < m; ++j, code /= L) counts[{src[code % L], p.english[j]}] += weight[a] / z;
      }
    }
    std::map<std::string, cpp_rational> totals;
    for (const auto& [k, c] : counts) totals[k.first] += c;
    for (auto& [k, v] : t) v = counts.count(k) ? counts[k] / totals[k.first] : cpp_rational(0);
  }
  return t;
}

/// Largest |t_library - t_oracle| over all oracle entries, or infinity when the
/// library table has an entry the oracle lacks.
inline double model1_max_abs_error(const std::vector<BitextPair>& corpus, int iterations) {
  auto m = scorer::train_model1(corpus, iterations);
  auto oracle = brute_force_em(corpus, iterations);
  double worst = 0.0;
  for (const auto& [k, v] : oracle) worst = std::max(worst, std::abs(m.prob(k.second, k.first) - v.convert_to<double>()));
  for (const auto& [f, row] : m.table())
    for (const auto& [e, p] : row)
      if (!oracle.count({f, e})) return INFINITY;
  return worst;
}

/// Corrupts one random position at a time of an enciphered sentence's English
/// reference; every corruption must strictly lower the score. Returns the
/// number of violations over `trials` sentences.
inline int ranking_violations(const synth::LanguageRegistry& reg, const scorer::AlignmentScorer& s, int trials,
                              std::uint64_t seed) {
  const auto words = synth::lexicon::english_words();
  const std::vector<std::string> langs{"ha", "hb", "la", "lb"};
  Rng rng(seed);
  int violations = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Tokens en;
    const auto len = rng.range(3, 25);
    for (int i = 0; i < len; ++i)
      en.push_back(rng.uniform() < 0.2 ? std::to_string(rng.below(100)) : words[rng.below(words.size())]);
    en.push_back(".");
    const auto src = reg.get(langs[rng.below(langs.size())]).encipher(en);
    std::vector<std::size_t> order(en.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    Tokens cand = en;
    double prev = s.score(src, cand).log_prob;
    for (std::size_t k = 0; k < order.size(); ++k) {
      auto& tok = cand[order[k]];
      std::string repl;
      do repl = words[rng.below(words.size())];
      while (repl == tok);
      tok = repl;
      const double cur = s.score(src, cand).log_prob;
      if (!(cur < prev)) ++violations;
      prev = cur;
    }
  }
  return violations;
}

}  // namespace xlalign::testing
