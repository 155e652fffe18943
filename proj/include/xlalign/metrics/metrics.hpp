#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xlalign/scorer/scorer.hpp"
#include "xlalign/synthlang/corpus.hpp"

namespace xlalign::metrics {

/// Finds "the answer is <N>" as it surfaces in each language. Reordering
/// moves the number inside the clause, so every language gets its own
/// pattern with one numeric slot.
class AnswerExtractor {
 public:
  explicit AnswerExtractor(const synth::LanguageRegistry& reg) {
    for (const auto& lang : reg.languages()) {
      Tokens clause = synth::lexicon::answer_marker();
      clause.push_back("0");
      clause.push_back(".");
      Tokens surf = lang.encipher(clause);
      surf.pop_back();
      Pattern p;
      for (std::size_t i = 0; i < surf.size(); ++i) {
        if (surf[i] == "0") p.slot = i;
        p.tokens.push_back(surf[i]);
      }
      patterns_[lang.id()] = std::move(p);
    }
  }

  std::optional<long long> extract(const Tokens& completion, const std::string& lang) const {
    auto it = patterns_.find(lang);
    if (it == patterns_.end()) throw ValidationError("extract_answer: unknown language '" + lang + "'");
    const auto& p = it->second;
    const std::size_t w = p.tokens.size();
    for (std::size_t start = completion.size() >= w ? completion.size() - w + 1 : 0; start-- > 0;) {
      bool ok = true;
      for (std::size_t k = 0; k < w && ok; ++k)
        ok = k == p.slot ? is_number_token(completion[start + k]) : completion[start + k] == p.tokens[k];
      if (ok) return parse_number_token(completion[start + p.slot]);
    }
    for (std::size_t i = completion.size(); i-- > 0;)
      if (is_number_token(completion[i])) return parse_number_token(completion[i]);
    return std::nullopt;
  }

 private:
  struct Pattern {
    Tokens tokens;
    std::size_t slot = 0;
  };
  std::map<std::string, Pattern> patterns_;
};

/// One model output to evaluate.
struct EvalRecord {
  std::string problem_id;
  std::string lang;
  Tokens completion;
};

inline double acr(const std::set<std::string>& m, const std::set<std::string>& n) {
  if (n.empty()) return 1.0;
  std::size_t both = 0;
  for (const auto& p : n) both += m.count(p);
  return static_cast<double>(both) / static_cast<double>(n.size());
}

/// Problem ids answered correctly, per language. Duplicate (problem, lang)
/// records are rejected.
inline std::map<std::string, std::set<std::string>> correct_sets(const std::vector<EvalRecord>& records,
                                                                   const std::map<std::string, long long>& gold,
                                                                   const AnswerExtractor& ex) {
  std::set<std::pair<std::string, std::string>> seen;
  std::map<std::string, std::set<std::string>> out;
  for (const auto& r : records) {
    if (!seen.insert({r.problem_id, r.lang}).second)
      throw ValidationError("duplicate eval record for problem '" + r.problem_id + "' language '" + r.lang + "'");
    out[r.lang];
    auto g = gold.find(r.problem_id);
    if (g == gold.end()) throw ValidationError("no gold answer for problem '" + r.problem_id + "'");
    auto a = ex.extract(r.completion, r.lang);
    if (a && *a == g->second) out[r.lang].insert(r.problem_id);
  }
  return out;
}

/// Fraction of records per language whose extracted answer equals gold.
inline std::map<std::string, double> accuracy(const std::vector<EvalRecord>& records,
                                              const std::map<std::string, long long>& gold,
                                              const AnswerExtractor& ex) {
  auto sets = correct_sets(records, gold, ex);
  std::map<std::string, std::size_t> totals;
  for (const auto& r : records) ++totals[r.lang];
  std::map<std::string, double> out;
  for (const auto& [lang, n] : totals)
    out[lang] = static_cast<double>(sets[lang].size()) / static_cast<double>(n);
  return out;
}

/// Mean per-pair PPL of each non-English record against its problem's
/// English anchor.
inline std::map<std::string, double> corpus_ppl(const std::vector<EvalRecord>& records,
                                                const std::map<std::string, Tokens>& anchors,
                                                const scorer::AlignmentScorer& sc) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  std::vector<std::string> missing;
  for (const auto& r : records) {
    if (r.lang == synth::kEnglish) continue;
    auto a = anchors.find(r.problem_id);
    if (a == anchors.end()) {
      missing.push_back(r.problem_id);
      continue;
    }
    auto& [s, n] = acc[r.lang];
    s += sc.ppl(r.completion, a->second);
    ++n;
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) ids += (i ? "," : "") + missing[i];
    throw ValidationError("corpus_ppl: missing English anchors for " + std::to_string(missing.size()) +
                          " records (" + ids + ")");
  }
  std::map<std::string, double> out;
  for (const auto& [lang, sn] : acc) out[lang] = sn.first / static_cast<double>(sn.second);
  return out;
}

namespace detail {

inline std::map<Tokens, int> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<Tokens, int> c;
  if (t.size() < n) return c;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++c[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i),
                                                           t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return c;
}

}  // namespace detail

/// BLEU-4 of one candidate against several references: uniform weights,
/// clipped counts, brevity penalty against the closest reference length
/// (shorter wins ties), add-one smoothing on 2..4-gram precisions only.
inline double bleu4(const Tokens& cand, const std::vector<Tokens>& refs) {
  if (refs.empty()) throw ValidationError("bleu: no references");
  if (cand.empty()) return 0.0;
  double log_p = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto cc = detail::ngram_counts(cand, n);
    std::map<Tokens, int> max_ref;
    for (const auto& r : refs)
      for (const auto& [g, k] : detail::ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], k);
    long match = 0, total = 0;
    for (const auto& [g, k] : cc) {
      total += k;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) match += std::min(k, it->second);
    }
    double p;
    if (n == 1) {
      if (match == 0) return 0.0;
      p = static_cast<double>(match) / static_cast<double>(total);
    } else {
      p = static_cast<double>(match + 1) / static_cast<double>(total + 1);
    }
    log_p += 0.25 * std::log(p);
  }
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t l) { return l > cand.size() ? l - cand.size() : cand.size() - l; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  const double bp = cand.size() >= best ? 1.0 : std::exp(1.0 - static_cast<double>(best) / static_cast<double>(cand.size()));
  return bp * std::exp(log_p);
}

/// Mean BLEU-4 of each sample against the others.
inline double self_bleu(const std::vector<Tokens>& samples) {
  if (samples.size() < 2) throw ValidationError("self_bleu: need at least 2 samples");
  double s = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<Tokens> refs;
    for (std::size_t j = 0; j < samples.size(); ++j)
      if (j != i) refs.push_back(strip_stop(samples[j]));
    s += bleu4(strip_stop(samples[i]), refs);
  }
  return s / static_cast<double>(samples.size());
}

/// Per-language evaluation of one model on one split.
struct EvalResult {
  std::string model;
  std::string split;
  std::vector<std::string> languages;  // English first when present
  std::map<std::string, double> accuracy;
  std::map<std::string, double> ppl;  // non-English only
  std::map<std::string, double> acr;  // non-English only
  std::map<std::string, std::size_t> counts;

  double avg_accuracy() const {
    double s = 0.0;
    for (const auto& l : languages) s += accuracy.at(l);
    return languages.empty() ? 0.0 : s / static_cast<double>(languages.size());
  }
  double avg_nonenglish(const std::map<std::string, double>& m) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& l : languages)
      if (l != synth::kEnglish) {
        s += m.at(l);
        ++n;
      }
    return n ? s / static_cast<double>(n) : 0.0;
  }
  double avg_ppl() const { return avg_nonenglish(ppl); }
  double avg_acr() const { return avg_nonenglish(acr); }
  double avg_nonenglish_accuracy() const { return avg_nonenglish(accuracy); }
};

inline nlohmann::ordered_json to_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["split"] = r.split;
  j["languages"] = r.languages;
  for (const auto& l : r.languages) {
    nlohmann::ordered_json x;
    x["accuracy"] = r.accuracy.at(l);
    if (r.ppl.count(l)) x["ppl"] = r.ppl.at(l);
    if (r.acr.count(l)) x["acr"] = r.acr.at(l);
    x["count"] = r.counts.count(l) ? r.counts.at(l) : 0;
    j["per_language"][l] = x;
  }
  j["avg"] = {{"accuracy", r.avg_accuracy()}, {"ppl", r.avg_ppl()}, {"acr", r.avg_acr()}};
  return j;
}

inline EvalResult eval_result_from_json(const nlohmann::json& j) {
  EvalResult r;
  r.model = j.at("model").get<std::string>();
  r.split = j.at("split").get<std::string>();
  r.languages = j.at("languages").get<std::vector<std::string>>();
  for (const auto& l : r.languages) {
    const auto& x = j.at("per_language").at(l);
    r.accuracy[l] = x.at("accuracy").get<double>();
    if (x.contains("ppl")) r.ppl[l] = x.at("ppl").get<double>();
    if (x.contains("acr")) r.acr[l] = x.at("acr").get<double>();
    r.counts[l] = x.value("count", std::size_t{0});
  }
  return r;
}

/// Scores one model's outputs. `records` holds one completion per (problem,
/// language); English records double as the PPL anchors.
inline EvalResult evaluate(const std::string& model, const std::string& split, const std::vector<EvalRecord>& records,
                           const std::map<std::string, long long>& gold, const AnswerExtractor& ex,
                           const scorer::AlignmentScorer& sc) {
  EvalResult r;
  r.model = model;
  r.split = split;
  std::set<std::string> langs;
  std::map<std::string, std::set<std::string>> universe;
  std::map<std::string, Tokens> anchors;
  for (const auto& rec : records) {
    langs.insert(rec.lang);
    universe[rec.lang].insert(rec.problem_id);
    ++r.counts[rec.lang];
    if (rec.lang == synth::kEnglish) anchors[rec.problem_id] = rec.completion;
  }
  if (langs.empty()) throw ValidationError("evaluate: no records");
  if (langs.count(std::string(synth::kEnglish))) r.languages.push_back(std::string(synth::kEnglish));
  for (const auto& l : langs)
    if (l != synth::kEnglish) r.languages.push_back(l);
  for (const auto& [l, u] : universe)
    if (u != universe.begin()->second)
      throw ValidationError("evaluate: language '" + l + "' covers a different problem set");
  r.accuracy = accuracy(records, gold, ex);
  if (!anchors.empty()) {
    r.ppl = corpus_ppl(records, anchors, sc);
    auto sets = correct_sets(records, gold, ex);
    const auto& m = sets[std::string(synth::kEnglish)];
    for (const auto& l : r.languages)
      if (l != synth::kEnglish) r.acr[l] = acr(m, sets[l]);
  }
  return r;
}

enum class ReportFormat { text, markdown, csv };

inline ReportFormat report_format_from_string(std::string_view s) {
  if (s == "text") return ReportFormat::text;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  throw ValidationError("unknown report format '" + std::string(s) + "'");
}

inline std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// Per-language tables (rows: model x metric, columns: languages + Avg), or
/// CSV with one row per (model, language).
inline std::string render_report(const std::vector<EvalResult>& results, ReportFormat format) {
  if (results.empty()) throw ValidationError("render_report: no results");
  for (const auto& r : results)
    if (r.languages.empty()) throw ValidationError("render_report: empty language set for '" + r.model + "'");
  std::ostringstream os;
  if (format == ReportFormat::csv) {
    os << "model,split,lang,accuracy,ppl,acr\n";
    for (const auto& r : results)
      for (const auto& l : r.languages) {
        os << r.model << ',' << r.split << ',' << l << ',' << fmt4(r.accuracy.at(l)) << ',';
        if (r.ppl.count(l)) os << fmt4(r.ppl.at(l));
        os << ',';
        if (r.acr.count(l)) os << fmt4(r.acr.at(l));
        os << '\n';
      }
    return os.str();
  }

  struct Row {
    std::vector<std::string> cells;
  };
  std::vector<std::string> header{"model", "split", "metric"};
  for (const auto& l : results.front().languages) header.push_back(l);
  header.push_back("Avg");
  std::vector<Row> rows;
  for (const auto& r : results) {
    if (r.languages != results.front().languages)
      throw ValidationError("render_report: results cover different languages");
    auto add = [&](const std::string& metric, const std::map<std::string, double>& m, double avg) {
      Row row{{r.model, r.split, metric}};
      for (const auto& l : r.languages) row.cells.push_back(m.count(l) ? fmt4(m.at(l)) : "-");
      row.cells.push_back(fmt4(avg));
      rows.push_back(std::move(row));
    };
    add("accuracy", r.accuracy, r.avg_accuracy());
    if (!r.ppl.empty()) add("ppl", r.ppl, r.avg_ppl());
    if (!r.acr.empty()) add("acr", r.acr, r.avg_acr());
  }
  if (format == ReportFormat::markdown) {
    os << '|';
    for (const auto& h : header) os << ' ' << h << " |";
    os << "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) os << (i < 3 ? "---|" : "---:|");
    os << '\n';
    for (const auto& row : rows) {
      os << '|';
      for (const auto& c : row.cells) os << ' ' << c << " |";
      os << '\n';
    }
    return os.str();
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.cells.size(); ++i) width[i] = std::max(width[i], row.cells[i].size());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << "  ";
      const auto pad = std::string(width[i] - cells[i].size(), ' ');
      if (i < 3) os << cells[i] << pad;
      else os << pad << cells[i];
    }
    os << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row.cells);
  return os.str();
}

}  // namespace xlalign::metrics
