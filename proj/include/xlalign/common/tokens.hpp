#pragma once

#include <algorithm>
#include <charconv>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace xlalign {

using Tokens = std::vector<std::string>;

inline constexpr std::string_view kStopToken = "<eos>";

inline bool is_number_token(std::string_view t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::optional<long long> parse_number_token(std::string_view t) {
  if (!is_number_token(t) || t.size() > 18) return std::nullopt;
  long long v = 0;
  std::from_chars(t.data(), t.data() + t.size(), v);
  return v;
}

inline std::string join_tokens(const Tokens& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

inline Tokens split_tokens(std::string_view s) {
  Tokens out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Drops a single trailing stop token, if present.
inline Tokens strip_stop(Tokens toks) {
  if (!toks.empty() && toks.back() == kStopToken) toks.pop_back();
  return toks;
}

}  // namespace xlalign
