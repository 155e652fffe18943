#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xlalign/common/error.hpp"
#include "xlalign/common/rng.hpp"
#include "xlalign/common/tokens.hpp"

namespace xlalign::synth {

enum class ReorderRule { identity, reverse_clause, swap_adjacent_pairs };

inline std::string to_string(ReorderRule r) {
  switch (r) {
    case ReorderRule::identity: return "identity";
    case ReorderRule::reverse_clause: return "reverse-clause";
    case ReorderRule::swap_adjacent_pairs: return "swap-adjacent-pairs";
  }
  return "identity";
}

inline ReorderRule reorder_rule_from_string(std::string_view s) {
  if (s == "identity") return ReorderRule::identity;
  if (s == "reverse-clause") return ReorderRule::reverse_clause;
  if (s == "swap-adjacent-pairs") return ReorderRule::swap_adjacent_pairs;
  throw ValidationError("unknown reorder rule '" + std::string(s) + "'");
}

inline constexpr std::string_view kEnglish = "en";

inline const std::set<std::string, std::less<>>& default_preserved_symbols() {
  static const std::set<std::string, std::less<>> s{"+", "-", "*", "=", ".", ",", "?", std::string(kStopToken)};
  return s;
}

inline bool is_clause_delimiter(std::string_view t) { return t == "." || t == "," || t == "?"; }

struct LanguageSpec {
  std::string lang_id;
  std::uint64_t cipher_seed = 0;
  ReorderRule reorder = ReorderRule::identity;
  /// Fraction of problems this language contributes to supervised training.
  double sft_weight = 1.0;
  /// First character of every pseudo-word; 0 lets the registry assign one.
  char first_char = 0;
};

/// Applies a reorder rule inside every clause. Delimiters stay in place.
/// Every rule is an involution, so the same call inverts it.
inline Tokens apply_reorder(const Tokens& toks, ReorderRule rule) {
  if (rule == ReorderRule::identity) return toks;
  Tokens out = toks;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    if (rule == ReorderRule::reverse_clause) {
      std::reverse(out.begin() + static_cast<std::ptrdiff_t>(start), out.begin() + static_cast<std::ptrdiff_t>(end));
    } else {
      for (std::size_t i = start; i + 1 < end; i += 2) std::swap(out[i], out[i + 1]);
    }
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (is_clause_delimiter(out[i])) {
      flush(i);
      start = i + 1;
    }
  }
  flush(out.size());
  return out;
}

/// A cipher language: a bijection from the English word list onto seeded
/// pseudo-words plus a clause reorder rule. English itself is the identity.
class Language {
 public:
  Language() = default;

  Language(LanguageSpec spec, const std::vector<std::string>& english_words, char first_char)
      : spec_(std::move(spec)) {
    if (spec_.lang_id == kEnglish) {
      for (const auto& w : english_words) {
        forward_[w] = w;
        backward_[w] = w;
      }
      return;
    }
    Rng rng(hash_combine(spec_.cipher_seed, hash_string(spec_.lang_id)));
    std::vector<std::string> sorted = english_words;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& w : sorted) {
      std::string pseudo;
      do {
        pseudo.assign(1, first_char);
        for (int k = 0; k < 4; ++k) pseudo.push_back(static_cast<char>('a' + rng.below(26)));
      } while (backward_.count(pseudo));
      forward_[w] = pseudo;
      backward_[pseudo] = w;
    }
  }

  const LanguageSpec& spec() const { return spec_; }
  const std::string& id() const { return spec_.lang_id; }
  bool is_english() const { return spec_.lang_id == kEnglish; }

  static bool is_preserved(std::string_view t) {
    return is_number_token(t) || default_preserved_symbols().count(t) > 0;
  }

  /// English surface tokens -> this language.
  Tokens encipher(const Tokens& en) const {
    Tokens mapped;
    mapped.reserve(en.size());
    for (std::size_t i = 0; i < en.size(); ++i) mapped.push_back(map_token(forward_, en[i], i));
    return apply_reorder(mapped, spec_.reorder);
  }

  /// This language -> English surface tokens (reorder inverted).
  Tokens decipher(const Tokens& toks) const {
    Tokens mapped;
    mapped.reserve(toks.size());
    for (std::size_t i = 0; i < toks.size(); ++i) mapped.push_back(map_token(backward_, toks[i], i));
    return apply_reorder(mapped, spec_.reorder);
  }

  const std::map<std::string, std::string>& word_map() const { return forward_; }
  const std::map<std::string, std::string>& inverse_word_map() const { return backward_; }

 private:
  std::string map_token(const std::map<std::string, std::string>& m, const std::string& t, std::size_t pos) const {
    if (is_preserved(t)) return t;
    auto it = m.find(t);
    if (it == m.end())
      throw ValidationError("unknown token '" + t + "' at position " + std::to_string(pos) + " for language '" +
                            spec_.lang_id + "'");
    return it->second;
  }

  LanguageSpec spec_;
  std::map<std::string, std::string> forward_;
  std::map<std::string, std::string> backward_;
};

/// All languages of one corpus. Construction checks that pseudo-word
/// vocabularies are pairwise disjoint and disjoint from English.
class LanguageRegistry {
 public:
  LanguageRegistry() = default;

  LanguageRegistry(const std::vector<LanguageSpec>& specs, const std::vector<std::string>& english_words) {
    static constexpr std::string_view kFirstChars = "QVXZJKWYBDFGHMNPRSTL";
    std::size_t next_char = 0;
    std::set<std::string> seen_ids;
    for (const auto& spec : specs) {
      if (!seen_ids.insert(spec.lang_id).second) throw ValidationError("duplicate language id '" + spec.lang_id + "'");
      char fc = spec.first_char;
      if (spec.lang_id != kEnglish && fc == 0) {
        require(next_char < kFirstChars.size(), "too many languages");
        fc = kFirstChars[next_char++];
      }
      langs_.emplace_back(spec, english_words, fc);
    }
    std::unordered_map<std::string, std::string> owner;
    for (const auto& w : english_words) owner[w] = std::string(kEnglish);
    for (const auto& lang : langs_) {
      if (lang.is_english()) continue;
      for (const auto& [pseudo, en] : lang.inverse_word_map()) {
        auto [it, inserted] = owner.emplace(pseudo, lang.id());
        if (!inserted)
          throw ValidationError("vocabulary collision: token '" + pseudo + "' produced by language '" + lang.id() +
                                "' already belongs to '" + it->second + "'");
        lookup_[pseudo] = {&lang - langs_.data(), en};
      }
    }
  }

  const std::vector<Language>& languages() const { return langs_; }

  const Language& get(std::string_view id) const {
    for (const auto& l : langs_)
      if (l.id() == id) return l;
    throw ValidationError("unknown language '" + std::string(id) + "'");
  }

  bool contains(std::string_view id) const {
    return std::any_of(langs_.begin(), langs_.end(), [&](const Language& l) { return l.id() == id; });
  }

  /// Language owning a pseudo-word, or nullptr for English words, preserved
  /// tokens and anything unknown.
  const Language* owner_of(const std::string& token) const {
    auto it = lookup_.find(token);
    return it == lookup_.end() ? nullptr : &langs_[static_cast<std::size_t>(it->second.first)];
  }

  /// English word for a pseudo-word of any language, if known.
  const std::string* english_of(const std::string& token) const {
    auto it = lookup_.find(token);
    return it == lookup_.end() ? nullptr : &it->second.second;
  }

 private:
  std::vector<Language> langs_;
  std::unordered_map<std::string, std::pair<std::ptrdiff_t, std::string>> lookup_;
};

}  // namespace xlalign::synth
