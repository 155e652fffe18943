#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "xlalign/common/error.hpp"
#include "xlalign/common/tokens.hpp"

namespace xlalign::scorer {

/// Forced-decoding result for one (source, English) pair.
struct ScoreResult {
  double log_prob = 0.0;
  std::vector<double> per_token;
  std::size_t en_len = 0;
  double norm_score = 0.0;
  double ppl = 1.0;

  static ScoreResult from_per_token(std::vector<double> per_token) {
    ScoreResult r;
    for (double x : per_token) r.log_prob += x;
    r.en_len = per_token.size();
    r.per_token = std::move(per_token);
    r.norm_score = r.log_prob / static_cast<double>(r.en_len);
    r.ppl = std::exp(-r.norm_score);
    return r;
  }
};

/// log P(english | source). Implementations are immutable after
/// construction. Trailing stop tokens on either side are ignored.
class AlignmentScorer {
 public:
  virtual ~AlignmentScorer() = default;
  virtual std::string id() const = 0;

  ScoreResult score(const Tokens& src, const Tokens& en) const {
    Tokens s = strip_stop(src), e = strip_stop(en);
    if (e.empty()) throw ValidationError("score: empty English sequence");
    return ScoreResult::from_per_token(per_token(s, e));
  }

  double ppl(const Tokens& src, const Tokens& en) const { return score(src, en).ppl; }

 protected:
  virtual std::vector<double> per_token(const Tokens& src, const Tokens& en) const = 0;
};

}  // namespace xlalign::scorer
