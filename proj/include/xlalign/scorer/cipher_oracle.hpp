#pragma once

#include <cmath>
#include <string>
#include <unordered_map>

#include "xlalign/scorer/scorer.hpp"
#include "xlalign/synthlang/language.hpp"

namespace xlalign::scorer {

/// Exact translation model available because every language is a cipher of
/// English. The source language is the one owning most of the source's
/// word tokens; source tokens outside that language (and outside the
/// preserved set) decipher to nothing and never match.
class CipherOracleScorer final : public AlignmentScorer {
 public:
  CipherOracleScorer(synth::LanguageRegistry registry, std::size_t vocab_size, double eps = 0.05)
      : reg_(std::move(registry)), vocab_size_(vocab_size), eps_(eps) {
    if (vocab_size_ < 3) throw ValidationError("cipher oracle: vocab_size must be >= 3");
    if (!(eps_ >= 0.0 && eps_ < 1.0)) throw ValidationError("cipher oracle: eps must be in [0,1)");
    if (reg_.contains(synth::kEnglish))
      for (const auto& [w, _] : reg_.get(synth::kEnglish).word_map()) english_.emplace(w, true);
  }

  std::string id() const override { return "cipher_oracle"; }
  double eps() const { return eps_; }

  /// Language whose words make up most of `src`; English when no word
  /// tokens are present. Ties go to the earlier registry entry.
  const synth::Language* detect(const Tokens& src) const {
    std::unordered_map<const synth::Language*, std::size_t> votes;
    const synth::Language* en = reg_.contains(synth::kEnglish) ? &reg_.get(synth::kEnglish) : nullptr;
    for (const auto& t : src) {
      if (const auto* l = reg_.owner_of(t)) ++votes[l];
      else if (en && english_.count(t)) ++votes[en];
    }
    const synth::Language* best = en;
    std::size_t best_n = 0;
    for (const auto& l : reg_.languages()) {
      auto it = votes.find(&l);
      if (it != votes.end() && it->second > best_n) {
        best = &l;
        best_n = it->second;
      }
    }
    return best;
  }

  /// English reading of `src` under the detected language.
  Tokens decipher(const Tokens& src) const {
    const synth::Language* lang = detect(src);
    Tokens out;
    out.reserve(src.size());
    for (const auto& t : src) {
      if (synth::Language::is_preserved(t)) {
        out.push_back(t);
      } else if (lang && lang->inverse_word_map().count(t)) {
        out.push_back(lang->inverse_word_map().at(t));
      } else {
        out.emplace_back();  // matches no English token
      }
    }
    return lang ? synth::apply_reorder(out, lang->spec().reorder) : out;
  }

 protected:
  std::vector<double> per_token(const Tokens& src, const Tokens& en) const override {
    const Tokens dec = decipher(src);
    const double hit = std::log(1.0 - eps_);
    const double miss = std::log(eps_ / static_cast<double>(vocab_size_ - 1));
    std::vector<double> out(en.size());
    for (std::size_t j = 0; j < en.size(); ++j) out[j] = (j < dec.size() && dec[j] == en[j]) ? hit : miss;
    return out;
  }

 private:
  synth::LanguageRegistry reg_;
  std::unordered_map<std::string, bool> english_;
  std::size_t vocab_size_;
  double eps_;
};

}  // namespace xlalign::scorer
