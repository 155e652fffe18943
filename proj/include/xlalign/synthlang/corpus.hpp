#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xlalign/common/error.hpp"
#include "xlalign/common/rng.hpp"
#include "xlalign/common/tokens.hpp"
#include "xlalign/synthlang/language.hpp"

namespace xlalign::synth {

enum class Op { add, sub, mul };
enum class Split { train, test_in_domain, test_ood };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test_in_domain: return "test_in_domain";
    case Split::test_ood: return "test_ood";
  }
  return "train";
}

inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test_in_domain") return Split::test_in_domain;
  if (s == "test_ood") return Split::test_ood;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

inline std::string_view op_symbol(Op op) {
  switch (op) {
    case Op::add: return "+";
    case Op::sub: return "-";
    case Op::mul: return "*";
  }
  return "+";
}

/// English surface lexicon. Slots are written {name}, {ent} and {n}.
namespace lexicon {

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> v{"ann", "ben", "cara", "dan", "eva", "finn",
                                          "gus", "hana", "ivan", "jill", "kurt", "lena"};
  return v;
}
inline const std::vector<std::string>& entities() {
  static const std::vector<std::string> v{"apples", "pens", "books", "coins", "cards", "shells", "stamps", "eggs",
                                          "cups",   "rocks", "toys", "balls", "keys",  "bells",  "hats",   "socks"};
  return v;
}
/// Nouns reserved for the out-of-domain split.
inline const std::vector<std::string>& ood_entities() {
  static const std::vector<std::string> v{"kites", "drums", "gems", "jars", "maps", "nuts"};
  return v;
}
inline const std::vector<std::string>& openings() {
  static const std::vector<std::string> v{"{name} has {n} {ent} .", "{name} starts with {n} {ent} .",
                                          "there are {n} {ent} in a box ."};
  return v;
}
inline const std::vector<std::string>& steps(Op op) {
  static const std::vector<std::string> add{"{name} buys {n} more .", "then {name} finds {n} more .",
                                            "a friend gives {name} {n} more ."};
  static const std::vector<std::string> sub{"{name} gives away {n} .", "then {name} loses {n} .",
                                            "{name} eats {n} of them ."};
  static const std::vector<std::string> mul{"then the pile grows {n} times .", "{name} gets {n} times as many ."};
  switch (op) {
    case Op::add: return add;
    case Op::sub: return sub;
    case Op::mul: return mul;
  }
  return add;
}
inline const std::vector<std::string>& questions() {
  static const std::vector<std::string> v{"how many {ent} does {name} have now ?",
                                          "how many {ent} are there in the end ?", "what is the total now ?"};
  return v;
}
inline const std::vector<std::string>& instruction() {
  static const std::vector<std::string> v{"solve", "."};
  return v;
}
inline const std::vector<std::string>& answer_marker() {
  static const std::vector<std::string> v{"the", "answer", "is"};
  return v;
}

/// Every English word the grammar can emit, sorted.
inline std::vector<std::string> english_words() {
  std::set<std::string> words;
  auto add_pattern = [&](const std::string& p) {
    for (const auto& t : split_tokens(p))
      if (t.front() != '{' && !Language::is_preserved(t)) words.insert(t);
  };
  for (const auto& v : {names(), entities(), ood_entities(), instruction(), answer_marker()})
    for (const auto& w : v)
      if (!Language::is_preserved(w)) words.insert(w);
  for (const auto& p : openings()) add_pattern(p);
  for (Op op : {Op::add, Op::sub, Op::mul})
    for (const auto& p : steps(op)) add_pattern(p);
  for (const auto& p : questions()) add_pattern(p);
  return {words.begin(), words.end()};
}

}  // namespace lexicon

struct TemplateStep {
  Op op = Op::add;
  int phrase = 0;
};

/// One problem template: opening, an operation chain of one to three steps,
/// and a question. The solution is one equation per step followed by
/// "the answer is <N> .".
struct ProblemTemplate {
  int template_id = 0;
  int opening = 0;
  std::vector<TemplateStep> steps;
  int question = 0;
  bool ood = false;

  friend bool operator==(const ProblemTemplate& a, const ProblemTemplate& b) {
    if (a.opening != b.opening || a.question != b.question || a.steps.size() != b.steps.size()) return false;
    for (std::size_t i = 0; i < a.steps.size(); ++i)
      if (a.steps[i].op != b.steps[i].op || a.steps[i].phrase != b.steps[i].phrase) return false;
    return true;
  }
};

inline std::int64_t apply_op(Op op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
  }
  return a;
}

/// A language-independent problem: template plus instantiated slots.
struct Problem {
  std::string problem_id;
  int template_id = 0;
  Split split = Split::train;
  std::string name;
  std::string entity;
  /// operands[0] is the starting quantity; operands[k] feeds step k-1.
  std::vector<std::int64_t> operands;
  std::int64_t answer = 0;
  Tokens en_question;
  Tokens en_solution;
};

struct ProblemInstance {
  std::string problem_id;
  std::string lang;
  Tokens question;
  Tokens gold_solution;
  std::int64_t gold_answer = 0;
  int template_id = 0;
  Split split = Split::train;
};

struct ParallelPair {
  std::string src_lang;
  Tokens src_tokens;
  Tokens en_tokens;
  std::string problem_id;
};

struct CorpusConfig {
  int n_templates = 20;
  int n_per_template = 100;
  std::vector<LanguageSpec> languages;
  std::uint64_t seed = 7;
  double ood_template_fraction = 0.2;
  /// Fraction of in-domain problems held out as test_in_domain.
  double test_in_domain_fraction = 0.1;
  /// Upper bound (inclusive) on every quantity in a problem.
  int max_value = 40;
  /// Operand ranges: starting quantity 2..max_start, added or removed amount
  /// 1..max_step, multiplier 2..max_multiplier.
  int max_start = 20;
  int max_step = 10;
  int max_multiplier = 3;
  /// Out-of-domain problems draw their nouns from a reserved list.
  bool heldout_entities = true;
};

/// English plus two high-resource (identity order, full weight) and two
/// low-resource (reordered, quarter weight) cipher languages.
inline std::vector<LanguageSpec> default_languages() {
  return {
      {"en", 0, ReorderRule::identity, 1.0, 0},
      {"ha", 1101, ReorderRule::identity, 1.0, 0},
      {"hb", 1202, ReorderRule::identity, 1.0, 0},
      {"la", 1303, ReorderRule::reverse_clause, 0.25, 0},
      {"lb", 1404, ReorderRule::swap_adjacent_pairs, 0.25, 0},
  };
}

inline CorpusConfig default_corpus_config() {
  CorpusConfig c;
  c.languages = default_languages();
  return c;
}

inline std::string fill_pattern(const std::string& pattern, const std::string& name, const std::string& entity,
                                std::int64_t n) {
  std::string out;
  for (const auto& t : split_tokens(pattern)) {
    if (!out.empty()) out.push_back(' ');
    if (t == "{name}") out += name;
    else if (t == "{ent}") out += entity;
    else if (t == "{n}") out += std::to_string(n);
    else out += t;
  }
  return out;
}

class Corpus {
 public:
  CorpusConfig config;
  LanguageRegistry languages;
  std::vector<ProblemTemplate> templates;
  std::vector<Problem> problems;
  /// One entry per (problem, language), problem-major in config language order.
  std::vector<ProblemInstance> instances;

  std::vector<std::string> language_ids() const {
    std::vector<std::string> ids;
    for (const auto& l : languages.languages()) ids.push_back(l.id());
    return ids;
  }

  std::vector<std::string> non_english_ids() const {
    std::vector<std::string> ids;
    for (const auto& l : languages.languages())
      if (!l.is_english()) ids.push_back(l.id());
    return ids;
  }

  std::vector<const ProblemInstance*> split(Split s) const {
    std::vector<const ProblemInstance*> out;
    for (const auto& inst : instances)
      if (inst.split == s) out.push_back(&inst);
    return out;
  }

  const Problem& problem(const std::string& id) const {
    auto it = problem_index_.find(id);
    if (it == problem_index_.end()) throw ValidationError("unknown problem id '" + id + "'");
    return problems[it->second];
  }

  const ProblemInstance& instance(const std::string& problem_id, const std::string& lang) const {
    auto it = instance_index_.find(problem_id + "\x1f" + lang);
    if (it == instance_index_.end())
      throw ValidationError("no instance for problem '" + problem_id + "' in language '" + lang + "'");
    return instances[it->second];
  }

  void reindex() {
    problem_index_.clear();
    instance_index_.clear();
    for (std::size_t i = 0; i < problems.size(); ++i) problem_index_[problems[i].problem_id] = i;
    for (std::size_t i = 0; i < instances.size(); ++i)
      instance_index_[instances[i].problem_id + "\x1f" + instances[i].lang] = i;
  }

 private:
  std::map<std::string, std::size_t> problem_index_;
  std::map<std::string, std::size_t> instance_index_;
};

namespace detail {

inline std::vector<ProblemTemplate> make_templates(const CorpusConfig& cfg, Rng& rng) {
  std::vector<ProblemTemplate> out;
  int guard = 0;
  while (static_cast<int>(out.size()) < cfg.n_templates) {
    require(++guard < 100000, "cannot generate enough distinct templates");
    ProblemTemplate t;
    t.opening = static_cast<int>(rng.below(lexicon::openings().size()));
    const auto n_steps = static_cast<int>(rng.range(1, 3));
    for (int k = 0; k < n_steps; ++k) {
      Op op = static_cast<Op>(rng.below(3));
      t.steps.push_back({op, static_cast<int>(rng.below(lexicon::steps(op).size()))});
    }
    t.question = static_cast<int>(rng.below(lexicon::questions().size()));
    if (std::find(out.begin(), out.end(), t) != out.end()) continue;
    t.template_id = static_cast<int>(out.size());
    out.push_back(t);
  }
  return out;
}

inline bool draw_operands(const ProblemTemplate& t, const CorpusConfig& cfg, Rng& rng, std::vector<std::int64_t>& operands) {
  operands.clear();
  std::int64_t value = rng.range(2, std::min(cfg.max_start, cfg.max_value));
  operands.push_back(value);
  for (const auto& step : t.steps) {
    std::int64_t b = 0;
    switch (step.op) {
      case Op::add: b = rng.range(1, cfg.max_step); break;
      case Op::sub:
        if (value < 1) return false;
        b = rng.range(1, std::min<std::int64_t>(value, cfg.max_step));
        break;
      case Op::mul: b = rng.range(2, cfg.max_multiplier); break;
    }
    value = apply_op(step.op, value, b);
    if (value < 0 || value > cfg.max_value) return false;
    operands.push_back(b);
  }
  return true;
}

inline bool ood_covered(const std::vector<ProblemTemplate>& ts) {
  std::set<std::pair<int, int>> phrases;
  std::set<int> openings, questions;
  std::set<std::size_t> lengths;
  for (const auto& t : ts) {
    if (t.ood) continue;
    for (const auto& s : t.steps) phrases.insert({static_cast<int>(s.op), s.phrase});
    openings.insert(t.opening);
    questions.insert(t.question);
    lengths.insert(t.steps.size());
  }
  for (const auto& t : ts) {
    if (!t.ood) continue;
    if (!openings.count(t.opening) || !questions.count(t.question) || !lengths.count(t.steps.size())) return false;
    for (const auto& s : t.steps)
      if (!phrases.count({static_cast<int>(s.op), s.phrase})) return false;
  }
  return true;
}

inline void render_english(const ProblemTemplate& t, Problem& p) {
  std::string q = fill_pattern(lexicon::openings()[static_cast<std::size_t>(t.opening)], p.name, p.entity, p.operands[0]);
  std::string sol;
  std::int64_t value = p.operands[0];
  for (std::size_t k = 0; k < t.steps.size(); ++k) {
    const auto& step = t.steps[k];
    const std::int64_t b = p.operands[k + 1];
    q += " " + fill_pattern(lexicon::steps(step.op)[static_cast<std::size_t>(step.phrase)], p.name, p.entity, b);
    const std::int64_t next = apply_op(step.op, value, b);
    if (!sol.empty()) sol += " ";
    sol += std::to_string(value) + " " + std::string(op_symbol(step.op)) + " " + std::to_string(b) + " = " +
           std::to_string(next) + " .";
    value = next;
  }
  q += " " + fill_pattern(lexicon::questions()[static_cast<std::size_t>(t.question)], p.name, p.entity, 0);
  sol += " the answer is " + std::to_string(value) + " .";
  p.answer = value;
  p.en_question = split_tokens(q);
  p.en_solution = split_tokens(sol);
}

}  // namespace detail

/// Number of templates reserved for the out-of-domain split.
inline int ood_template_count(int n_templates, double fraction) {
  auto k = static_cast<int>(std::llround(n_templates * fraction));
  return std::clamp(k, 1, n_templates - 1);
}

/// Deterministic corpus generation; a pure function of the config.
inline Corpus generate_corpus(const CorpusConfig& cfg) {
  require(cfg.n_templates >= 4, "n_templates must be >= 4");
  require(cfg.n_per_template >= 1, "n_per_template must be >= 1");
  require(cfg.ood_template_fraction > 0.0 && cfg.ood_template_fraction < 1.0, "ood_template_fraction must be in (0,1)");
  require(cfg.test_in_domain_fraction >= 0.0 && cfg.test_in_domain_fraction < 1.0,
          "test_in_domain_fraction must be in [0,1)");
  require(cfg.max_value >= 20, "max_value must be >= 20");
  require(cfg.max_start >= 2 && cfg.max_step >= 1 && cfg.max_multiplier >= 2, "operand ranges too small");
  require(cfg.languages.size() >= 2, "at least two languages required");
  require(std::any_of(cfg.languages.begin(), cfg.languages.end(),
                      [](const LanguageSpec& l) { return l.lang_id == kEnglish; }),
          "languages must include 'en'");

  Corpus c;
  c.config = cfg;
  c.languages = LanguageRegistry(cfg.languages, lexicon::english_words());

  Rng rng(hash_combine(cfg.seed, 0x7e3a1));
  c.templates = detail::make_templates(cfg, rng);
  // Held-out templates are new compositions of step phrases and chain
  // lengths that training still covers individually.
  const int n_ood = ood_template_count(cfg.n_templates, cfg.ood_template_fraction);
  std::vector<int> order(c.templates.size());
  for (int attempt = 0;; ++attempt) {
    require(attempt < 1000, "cannot choose held-out templates whose steps are covered by training templates");
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    for (auto& t : c.templates) t.ood = false;
    for (int i = 0; i < n_ood; ++i) c.templates[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])].ood = true;
    if (detail::ood_covered(c.templates)) break;
  }

  const auto& names = lexicon::names();
  int serial = 0;
  for (const auto& t : c.templates) {
    const auto& ents = (t.ood && cfg.heldout_entities) ? lexicon::ood_entities() : lexicon::entities();
    for (int k = 0; k < cfg.n_per_template; ++k) {
      Problem p;
      char buf[16];
      std::snprintf(buf, sizeof buf, "p%05d", serial++);
      p.problem_id = buf;
      p.template_id = t.template_id;
      p.name = names[rng.below(names.size())];
      p.entity = ents[rng.below(ents.size())];
      int tries = 0;
      while (!detail::draw_operands(t, cfg, rng, p.operands))
        require(++tries < 10000, "cannot instantiate template " + std::to_string(t.template_id));
      detail::render_english(t, p);
      if (t.ood) p.split = Split::test_ood;
      else p.split = rng.uniform() < cfg.test_in_domain_fraction ? Split::test_in_domain : Split::train;
      c.problems.push_back(std::move(p));
    }
  }

  for (const auto& p : c.problems) {
    for (const auto& lang : c.languages.languages()) {
      ProblemInstance inst;
      inst.problem_id = p.problem_id;
      inst.lang = lang.id();
      inst.question = lang.encipher(p.en_question);
      inst.gold_solution = lang.encipher(p.en_solution);
      inst.gold_answer = p.answer;
      inst.template_id = p.template_id;
      inst.split = p.split;
      c.instances.push_back(std::move(inst));
    }
  }
  c.reindex();
  return c;
}

/// One pair per non-English training instance: question+solution against
/// the English counterpart.
inline std::vector<ParallelPair> make_parallel(const Corpus& corpus) {
  std::vector<ParallelPair> out;
  for (const auto& inst : corpus.instances) {
    if (inst.split != Split::train || inst.lang == kEnglish) continue;
    const auto& en = corpus.instance(inst.problem_id, std::string(kEnglish));
    ParallelPair pp;
    pp.src_lang = inst.lang;
    pp.problem_id = inst.problem_id;
    pp.src_tokens = inst.question;
    pp.src_tokens.insert(pp.src_tokens.end(), inst.gold_solution.begin(), inst.gold_solution.end());
    pp.en_tokens = en.question;
    pp.en_tokens.insert(pp.en_tokens.end(), en.gold_solution.begin(), en.gold_solution.end());
    out.push_back(std::move(pp));
  }
  return out;
}

/// Instruction prefix in the instance's language followed by the question.
inline Tokens make_prompt(const Language& lang, const Tokens& question) {
  Tokens p = lang.encipher(lexicon::instruction());
  p.insert(p.end(), question.begin(), question.end());
  return p;
}

// --- serialization ---------------------------------------------------------

inline nlohmann::ordered_json instance_to_json(const ProblemInstance& inst) {
  nlohmann::ordered_json j;
  j["problem_id"] = inst.problem_id;
  j["lang"] = inst.lang;
  j["split"] = to_string(inst.split);
  j["question"] = join_tokens(inst.question);
  j["solution"] = join_tokens(inst.gold_solution);
  j["answer"] = inst.gold_answer;
  j["template_id"] = inst.template_id;
  return j;
}

/// JSONL, one instance per line, fields in a fixed order.
inline std::string corpus_to_jsonl(const Corpus& c) {
  std::string out;
  for (const auto& inst : c.instances) {
    out += instance_to_json(inst).dump();
    out.push_back('\n');
  }
  return out;
}

inline ProblemInstance instance_from_json(const nlohmann::json& j) {
  ProblemInstance inst;
  inst.problem_id = j.at("problem_id").get<std::string>();
  inst.lang = j.at("lang").get<std::string>();
  inst.split = split_from_string(j.at("split").get<std::string>());
  inst.question = split_tokens(j.at("question").get<std::string>());
  inst.gold_solution = split_tokens(j.at("solution").get<std::string>());
  inst.gold_answer = j.at("answer").get<std::int64_t>();
  inst.template_id = j.at("template_id").get<int>();
  return inst;
}

inline nlohmann::json corpus_config_to_json(const CorpusConfig& c) {
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& l : c.languages)
    langs.push_back({{"lang_id", l.lang_id},
                     {"cipher_seed", l.cipher_seed},
                     {"reorder_rule", to_string(l.reorder)},
                     {"sft_weight", l.sft_weight},
                     {"first_char", l.first_char ? std::string(1, l.first_char) : std::string()}});
  return {{"n_templates", c.n_templates},
          {"n_per_template", c.n_per_template},
          {"languages", langs},
          {"seed", c.seed},
          {"ood_template_fraction", c.ood_template_fraction},
          {"test_in_domain_fraction", c.test_in_domain_fraction},
          {"max_value", c.max_value},
          {"max_start", c.max_start},
          {"max_step", c.max_step},
          {"max_multiplier", c.max_multiplier},
          {"heldout_entities", c.heldout_entities}};
}

inline CorpusConfig corpus_config_from_json(const nlohmann::json& j) {
  CorpusConfig c = default_corpus_config();
  c.n_templates = j.value("n_templates", c.n_templates);
  c.n_per_template = j.value("n_per_template", c.n_per_template);
  c.seed = j.value("seed", c.seed);
  c.ood_template_fraction = j.value("ood_template_fraction", c.ood_template_fraction);
  c.test_in_domain_fraction = j.value("test_in_domain_fraction", c.test_in_domain_fraction);
  c.max_value = j.value("max_value", c.max_value);
  c.max_start = j.value("max_start", c.max_start);
  c.max_step = j.value("max_step", c.max_step);
  c.max_multiplier = j.value("max_multiplier", c.max_multiplier);
  c.heldout_entities = j.value("heldout_entities", c.heldout_entities);
  if (j.contains("languages")) {
    c.languages.clear();
    for (const auto& l : j.at("languages")) {
      LanguageSpec s;
      s.lang_id = l.at("lang_id").get<std::string>();
      s.cipher_seed = l.value("cipher_seed", std::uint64_t{0});
      s.reorder = reorder_rule_from_string(l.value("reorder_rule", std::string("identity")));
      s.sft_weight = l.value("sft_weight", 1.0);
      const auto fc = l.value("first_char", std::string());
      s.first_char = fc.empty() ? 0 : fc[0];
      c.languages.push_back(s);
    }
  }
  return c;
}

}  // namespace xlalign::synth
