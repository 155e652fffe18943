#pragma once

#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "xlalign/common/error.hpp"
#include "xlalign/common/tokens.hpp"
#include "xlalign/synthlang/corpus.hpp"

namespace xlalign::policy {

/// Shared multilingual vocabulary. Id 0 is the stop token.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
        throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
    if (tokens_.empty() || tokens_[0] != kStopToken) throw ValidationError("vocabulary must start with the stop token");
  }

  /// Stop token, symbols, numbers 0..max_value, English words, then each
  /// cipher language's pseudo-words.
  static Vocabulary for_corpus(const synth::Corpus& corpus) {
    std::vector<std::string> toks{std::string(kStopToken)};
    for (const auto& s : synth::default_preserved_symbols())
      if (s != kStopToken) toks.push_back(s);
    for (int n = 0; n <= corpus.config.max_value; ++n) toks.push_back(std::to_string(n));
    for (const auto& lang : corpus.languages.languages())
      for (const auto& [_, w] : lang.word_map()) toks.push_back(w);
    return Vocabulary(std::move(toks));
  }

  std::size_t size() const { return tokens_.size(); }
  int stop_id() const { return 0; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  int id(const std::string& tok) const {
    auto it = index_.find(tok);
    if (it == index_.end()) throw ValidationError("token '" + tok + "' not in vocabulary");
    return it->second;
  }

  std::vector<int> encode(const Tokens& toks) const {
    std::vector<int> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id(t));
    return out;
  }

  Tokens decode(const std::vector<int>& ids) const {
    Tokens out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(token(i));
    return out;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace xlalign::policy
