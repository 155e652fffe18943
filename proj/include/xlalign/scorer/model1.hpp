#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "xlalign/scorer/scorer.hpp"
#include "xlalign/synthlang/corpus.hpp"

namespace xlalign::scorer {

inline constexpr std::string_view kNullToken = "<null>";
inline constexpr double kModel1Floor = 1e-9;

/// IBM Model 1 lexical table t(e|f) with a NULL source token.
class Model1Scorer final : public AlignmentScorer {
 public:
  Model1Scorer() = default;

  std::string id() const override { return "model1"; }
  bool trained() const { return trained_; }

  /// t(e|f) without flooring; 0 for unseen pairs.
  double prob(const std::string& e, const std::string& f) const {
    auto fi = table_.find(f);
    if (fi == table_.end()) return 0.0;
    auto ei = fi->second.find(e);
    return ei == fi->second.end() ? 0.0 : ei->second;
  }

  const std::unordered_map<std::string, std::unordered_map<std::string, double>>& table() const { return table_; }

  /// Training-corpus log-likelihood before each EM iteration and after the
  /// last one.
  const std::vector<double>& log_likelihoods() const { return ll_; }

  void set(const std::string& f, const std::string& e, double p) {
    table_[f][e] = p;
    trained_ = true;
  }
  void set_log_likelihoods(std::vector<double> ll) { ll_ = std::move(ll); }

  std::string to_jsonl() const {
    std::map<std::string, std::map<std::string, double>> sorted;
    for (const auto& [f, row] : table_)
      for (const auto& [e, p] : row)
        if (p >= kModel1Floor) sorted[f][e] = p;
    std::ostringstream os;
    for (const auto& [f, row] : sorted)
      for (const auto& [e, p] : row) {
        nlohmann::ordered_json j;
        j["foreign"] = f;
        j["english"] = e;
        j["prob"] = p;
        os << j.dump() << '\n';
      }
    return os.str();
  }

  static Model1Scorer from_jsonl(std::istream& in) {
    Model1Scorer m;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
        m.set(j.at("foreign").get<std::string>(), j.at("english").get<std::string>(), j.at("prob").get<double>());
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("model1 table line " + std::to_string(n) + ": " + e.what());
      }
    }
    if (!m.trained_) throw ValidationError("model1 table is empty");
    return m;
  }

  void save(const std::filesystem::path& file) const { std::ofstream(file, std::ios::trunc) << to_jsonl(); }
  static Model1Scorer load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError("cannot open model1 table " + file.string());
    return from_jsonl(in);
  }

 protected:
  std::vector<double> per_token(const Tokens& src, const Tokens& en) const override {
    if (!trained_) throw ContractError("model1 scorer is not trained");
    std::vector<const std::unordered_map<std::string, double>*> rows;
    rows.reserve(src.size() + 1);
    auto row_of = [&](const std::string& f) -> const std::unordered_map<std::string, double>* {
      auto it = table_.find(f);
      return it == table_.end() ? nullptr : &it->second;
    };
    rows.push_back(row_of(std::string(kNullToken)));
    for (const auto& f : src) rows.push_back(row_of(f));
    const double inv = 1.0 / static_cast<double>(rows.size());
    std::vector<double> out(en.size());
    for (std::size_t j = 0; j < en.size(); ++j) {
      double s = 0.0;
      for (const auto* r : rows) {
        double p = 0.0;
        if (r) {
          auto it = r->find(en[j]);
          if (it != r->end()) p = it->second;
        }
        s += std::max(p, kModel1Floor);
      }
      out[j] = std::log(inv * s);
    }
    return out;
  }

 private:
  std::unordered_map<std::string, std::unordered_map<std::string, double>> table_;
  std::vector<double> ll_;
  bool trained_ = false;
};

/// One (foreign, English) training sentence pair.
struct BitextPair {
  Tokens foreign;
  Tokens english;
};

inline std::vector<BitextPair> bitext_from_parallel(const std::vector<synth::ParallelPair>& pairs) {
  std::vector<BitextPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({strip_stop(p.src_tokens), strip_stop(p.en_tokens)});
  return out;
}

/// Standard Model 1 EM. t starts uniform over the English words co-occurring
/// with each foreign word (NULL co-occurs with everything).
inline Model1Scorer train_model1(const std::vector<BitextPair>& pairs, int iterations) {
  if (pairs.empty()) throw ValidationError("train_model1: empty corpus");
  if (iterations < 1) throw ValidationError("train_model1: iterations must be >= 1");

  std::map<std::string, int> fid_map, eid_map;
  fid_map[std::string(kNullToken)] = 0;
  for (const auto& p : pairs) {
    if (p.english.empty()) throw ValidationError("train_model1: empty English side");
    for (const auto& f : p.foreign) fid_map.emplace(f, 0);
    for (const auto& e : p.english) eid_map.emplace(e, 0);
  }
  std::vector<std::string> fnames, enames;
  for (auto& [k, v] : fid_map) {
    v = static_cast<int>(fnames.size());
    fnames.push_back(k);
  }
  for (auto& [k, v] : eid_map) {
    v = static_cast<int>(enames.size());
    enames.push_back(k);
  }
  const std::size_t F = fnames.size(), E = enames.size();
  const int null_id = fid_map.at(std::string(kNullToken));

  struct Enc {
    std::vector<int> f, e;
  };
  std::vector<Enc> enc;
  enc.reserve(pairs.size());
  std::vector<char> co(F * E, 0);
  for (const auto& p : pairs) {
    Enc x;
    x.f.push_back(null_id);
    for (const auto& f : p.foreign) x.f.push_back(fid_map.at(f));
    for (const auto& e : p.english) x.e.push_back(eid_map.at(e));
    for (int f : x.f)
      for (int e : x.e) co[static_cast<std::size_t>(f) * E + static_cast<std::size_t>(e)] = 1;
    enc.push_back(std::move(x));
  }

  std::vector<double> t(F * E, 0.0);
  for (std::size_t f = 0; f < F; ++f) {
    std::size_t n = 0;
    for (std::size_t e = 0; e < E; ++e) n += co[f * E + e];
    for (std::size_t e = 0; e < E; ++e)
      if (co[f * E + e]) t[f * E + e] = 1.0 / static_cast<double>(n);
  }

  auto log_likelihood = [&] {
    double ll = 0.0;
    for (const auto& x : enc) {
      const double inv = 1.0 / static_cast<double>(x.f.size());
      for (int e : x.e) {
        double s = 0.0;
        for (int f : x.f) s += t[static_cast<std::size_t>(f) * E + static_cast<std::size_t>(e)];
        ll += std::log(inv * s);
      }
    }
    return ll;
  };

  std::vector<double> ll;
  std::vector<double> count(F * E), total(F);
  for (int it = 0; it < iterations; ++it) {
    ll.push_back(log_likelihood());
    std::fill(count.begin(), count.end(), 0.0);
    std::fill(total.begin(), total.end(), 0.0);
    for (const auto& x : enc) {
      for (int e : x.e) {
        double z = 0.0;
        for (int f : x.f) z += t[static_cast<std::size_t>(f) * E + static_cast<std::size_t>(e)];
        for (int f : x.f) {
          const double c = t[static_cast<std::size_t>(f) * E + static_cast<std::size_t>(e)] / z;
          count[static_cast<std::size_t>(f) * E + static_cast<std::size_t>(e)] += c;
          total[static_cast<std::size_t>(f)] += c;
        }
      }
    }
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t e = 0; e < E; ++e)
        t[f * E + e] = total[f] > 0.0 ? count[f * E + e] / total[f] : 0.0;
  }
  ll.push_back(log_likelihood());

  Model1Scorer m;
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t e = 0; e < E; ++e)
      if (t[f * E + e] > 0.0) m.set(fnames[f], enames[e], t[f * E + e]);
  m.set_log_likelihoods(std::move(ll));
  return m;
}

}  // namespace xlalign::scorer
