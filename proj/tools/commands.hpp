#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "xlalign/pipeline/artifacts.hpp"
#include "xlalign/pipeline/config.hpp"
#include "xlalign/pipeline/evaluate.hpp"

namespace xlalign::cli {

namespace fs = std::filesystem;
using pipeline::ArtifactMeta;
using pipeline::PipelineConfig;
using Model = policy::PolicyModel<float>;

/// Flags shared by every command.
struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string run_dir;
  bool force = false;
  bool paper_hparams = false;
  bool quiet = false;
};

/// Parses the value of a --set override as JSON, falling back to a string.
inline nlohmann::json parse_scalar(const std::string& v) {
  try {
    return nlohmann::json::parse(v);
  } catch (const nlohmann::json::exception&) {
    return v;
  }
}

inline nlohmann::json overrides_to_json(const std::vector<std::string>& sets) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key.path=value, got '" + s + "'");
    nlohmann::json* node = &j;
    std::stringstream path(s.substr(0, eq));
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(path, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = parse_scalar(s.substr(eq + 1));
  }
  return j;
}

/// Resolved configuration plus where this invocation writes.
class Context {
 public:
  Context(std::string command, const Common& common) : command_(std::move(command)), common_(common) {
    cfg_ = pipeline::default_pipeline_config();
    if (!common.config_file.empty()) {
      std::ifstream in(common.config_file);
      if (!in) throw ValidationError("cannot read config " + common.config_file);
      try {
        pipeline::merge_json(nlohmann::json::parse(in), cfg_);
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config " + common.config_file + ": " + e.what());
      }
    }
    if (common.paper_hparams) cfg_.apply_paper_hparams();
    if (common.seed) cfg_.apply_seed(*common.seed);
    try {
      pipeline::merge_json(overrides_to_json(common.sets), cfg_);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("--set: ") + e.what());
    }
    cfg_.validate();
    run_dir_ = common.run_dir.empty() ? default_run_dir() : fs::path(common.run_dir);
  }

  PipelineConfig& cfg() { return cfg_; }
  const PipelineConfig& cfg() const { return cfg_; }
  const fs::path& run_dir() const { return run_dir_; }
  bool force() const { return common_.force; }
  const std::string& command() const { return command_; }

  fs::path out_or(const std::string& explicit_out, const fs::path& rel) const {
    return explicit_out.empty() ? run_dir_ / rel : fs::path(explicit_out);
  }

  /// Writes the resolved config next to an artifact and returns a meta
  /// template that references it.
  ArtifactMeta begin(const std::string& kind, const fs::path& artifact) {
    const fs::path snap = run_dir_ / "config" / (command_ + "-" + artifact.filename().string() + ".json");
    fs::create_directories(snap.parent_path());
    std::ofstream(snap, std::ios::trunc) << pipeline::to_json(cfg_).dump(2) << '\n';
    ArtifactMeta m;
    m.kind = kind;
    m.command = command_;
    m.config_digest = pipeline::config_digest(cfg_);
    m.config_snapshot = snap.generic_string();
    return m;
  }

  void log(const std::string& msg) const {
    if (!common_.quiet) std::cerr << "[" << command_ << "] " << msg << '\n';
  }

 private:
  fs::path default_run_dir() const {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return fs::path("runs") / (std::string(buf) + "-seed" + std::to_string(cfg_.seed));
  }

  std::string command_;
  Common common_;
  PipelineConfig cfg_;
  fs::path run_dir_;
};

// --- loading inputs --------------------------------------------------------------

struct LoadedCorpus {
  synth::Corpus corpus;
  ArtifactMeta meta;
  fs::path path;
};

inline LoadedCorpus load_corpus(const std::string& dir) {
  if (dir.empty()) throw ValidationError("--corpus is required");
  auto meta = pipeline::verify(dir, "corpus");
  return {pipeline::load_corpus(dir), meta, dir};
}

struct LoadedModel {
  Model model;
  ArtifactMeta meta;
  fs::path path;
};

inline LoadedModel load_model(const std::string& dir, const LoadedCorpus& c, bool force) {
  if (dir.empty()) throw ValidationError("--model is required");
  auto meta = pipeline::verify(dir, "checkpoint");
  pipeline::check_lineage(c.meta.sha256, meta, dir, force);
  return {Model::load(dir), meta, dir};
}

inline ArtifactMeta verified_input(const std::string& path, const std::string& kind, const LoadedCorpus& c,
                                   bool force) {
  if (path.empty()) throw ValidationError("missing --" + kind + " input");
  auto meta = pipeline::verify(path, kind);
  pipeline::check_lineage(c.meta.sha256, meta, path, force);
  return meta;
}

template <class F>
auto read_jsonl(const fs::path& p, F parse) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot read " + p.string());
  return prefdata::from_jsonl(in, parse);
}

inline void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + p.string());
  out << s;
}

inline void save_train_report(Context& ctx, const train::TrainReport& rep, const fs::path& stem,
                              const ArtifactMeta& parent_meta) {
  write_text(stem.string() + ".json", rep.to_json().dump(2) + "\n");
  write_text(stem.string() + ".csv", rep.to_csv());
  for (const auto* ext : {".json", ".csv"}) {
    fs::path p = stem.string() + ext;
    auto m = ctx.begin("train_report", p);
    m.corpus_sha256 = parent_meta.corpus_sha256;
    pipeline::seal(p, m);
  }
}

inline ArtifactMeta save_model(Context& ctx, const Model& m, const fs::path& dir, const LoadedCorpus& c,
                               std::vector<pipeline::ParentRef> parents, nlohmann::ordered_json extra = {}) {
  if (fs::exists(dir)) fs::remove_all(dir);
  m.save(dir);
  auto meta = ctx.begin("checkpoint", dir);
  meta.corpus_sha256 = c.meta.sha256;
  meta.parents = std::move(parents);
  meta.extra = extra.is_null() ? nlohmann::ordered_json::object() : std::move(extra);
  meta.extra["model_digest"] = m.digest();
  return pipeline::seal(dir, meta);
}

// --- commands --------------------------------------------------------------------

struct Args {
  std::string corpus, model, samples, scored, prefs, rft, predictions, out, name, split = "train", format = "all";
  std::vector<std::string> inputs;
  std::optional<int> rounds;
  std::optional<std::size_t> problems;
  std::optional<std::string> scorer;
  int round = 1;
};

inline int cmd_gen_corpus(Context& ctx, const Args& a) {
  auto cc = ctx.cfg().corpus;
  const auto corpus = synth::generate_corpus(cc);
  const fs::path out = ctx.out_or(a.out, "corpus");
  pipeline::save_corpus(out, corpus);
  auto meta = ctx.begin("corpus", out);
  meta.extra = {{"problems", corpus.problems.size()}, {"languages", corpus.language_ids()}};
  meta = pipeline::seal(out, meta);
  meta.corpus_sha256 = meta.sha256;
  pipeline::seal(out, meta);
  std::cout << "corpus " << out.generic_string() << " sha256=" << meta.sha256 << " problems=" << corpus.problems.size()
            << "\n";
  return 0;
}

inline int cmd_train_sft(Context& ctx, const Args& a) {
  const auto c = load_corpus(a.corpus);
  auto vocab = std::make_shared<const policy::Vocabulary>(policy::Vocabulary::for_corpus(c.corpus));
  auto pc = ctx.cfg().policy;
  pc.vocab_size = vocab->size();
  Model m(pc, vocab);
  ctx.log("training " + std::to_string(ctx.cfg().sft.steps) + " steps");
  const auto rep = train::train_sft(m, train::sft_examples(c.corpus, synth::Split::train, ctx.cfg().sft.seed), ctx.cfg().sft);
  const fs::path out = ctx.out_or(a.out, "checkpoints/sft");
  auto meta = save_model(ctx, m, out, c, {pipeline::parent_of(c.path, c.meta)});
  save_train_report(ctx, rep, ctx.run_dir() / "reports" / "train_sft", meta);
  std::cout << "checkpoint " << out.generic_string() << " digest=" << m.digest() << " final_loss=" << rep.steps.back().loss
            << "\n";
  return 0;
}

inline std::vector<std::string> sampling_ids(const Context& ctx, const synth::Corpus& corpus, synth::Split split,
                                             std::optional<std::size_t> override_n) {
  return pipeline::split_problem_ids(corpus, split, override_n.value_or(ctx.cfg().sampling.problems));
}

inline int cmd_sample(Context& ctx, const Args& a) {
  const auto c = load_corpus(a.corpus);
  auto lm = load_model(a.model, c, ctx.force());
  const auto ids = sampling_ids(ctx, c.corpus, synth::split_from_string(a.split), a.problems);
  metrics::AnswerExtractor ex(c.corpus.languages);
  ctx.log("sampling " + std::to_string(ids.size()) + " problems");
  const auto records = prefdata::collect_samples(lm.model, c.corpus, ids, c.corpus.non_english_ids(), ctx.cfg().pref, ex, a.round);
  const fs::path out = ctx.out_or(a.out, "datasets/samples.jsonl");
  write_text(out, prefdata::to_jsonl(records));
  auto meta = ctx.begin("samples", out);
  meta.corpus_sha256 = c.meta.sha256;
  meta.parents = {pipeline::parent_of(c.path, c.meta), pipeline::parent_of(lm.path, lm.meta)};
  meta.extra = {{"policy_digest", lm.model.digest()}, {"round", a.round}, {"records", records.size()}};
  pipeline::seal(out, meta);
  std::cout << "samples " << out.generic_string() << " records=" << records.size() << "\n";
  return 0;
}

inline int cmd_score(Context& ctx, const Args& a) {
  const auto c = load_corpus(a.corpus);
  if (a.scorer) ctx.cfg().scorer.kind = *a.scorer;
  ctx.cfg().validate();
  const auto in_meta = verified_input(a.samples, "samples", c, ctx.force());
  auto records = read_jsonl(a.samples, prefdata::record_from_json);
  const auto sc = pipeline::make_scorer(ctx.cfg().scorer, c.corpus, policy::Vocabulary::for_corpus(c.corpus).size());
  prefdata::score_samples(records, *sc);
  const fs::path out = ctx.out_or(a.out, "datasets/scored.jsonl");
  write_text(out, prefdata::to_jsonl(records));
  auto meta = ctx.begin("scored", out);
  meta.corpus_sha256 = c.meta.sha256;
  meta.parents = {pipeline::parent_of(a.samples, in_meta)};
  meta.extra = in_meta.extra;
  meta.extra["scorer_id"] = sc->id();
  pipeline::seal(out, meta);
  std::cout << "scored " << out.generic_string() << " scorer=" << sc->id() << "\n";
  return 0;
}

inline int cmd_build_prefs(Context& ctx, const Args& a) {
  const auto c = load_corpus(a.corpus);
  const auto in_meta = verified_input(a.scored, "scored", c, ctx.force());
  const auto records = read_jsonl(a.scored, prefdata::record_from_json);
  const int round = in_meta.extra.value("round", 0);
  auto ds = prefdata::build_pairs(records, ctx.cfg().pref, round);
  const fs::path out = ctx.out_or(a.out, "datasets/prefs.jsonl");
  write_text(out, prefdata::to_jsonl(ds.pairs));
  prefdata::Provenance prov;
  prov.policy_digest = in_meta.extra.value("policy_digest", std::string());
  prov.scorer_id = in_meta.extra.value("scorer_id", std::string());
  prov.config = prefdata::to_json(ctx.cfg().pref);
  prov.round = round;
  auto meta = ctx.begin("prefs", out);
  meta.corpus_sha256 = c.meta.sha256;
  meta.parents = {pipeline::parent_of(a.scored, in_meta)};
  meta.extra = {{"provenance", prefdata::to_json(prov)}, {"pairs", ds.pairs.size()}};
  pipeline::seal(out, meta);

  const auto rft = prefdata::build_rft(records, pipeline::gold_answers(c.corpus));
  const fs::path rft_out = out.parent_path() / "rft.jsonl";
  write_text(rft_out, prefdata::to_jsonl(rft));
  auto rmeta = ctx.begin("rft", rft_out);
  rmeta.corpus_sha256 = c.meta.sha256;
  rmeta.parents = meta.parents;
  rmeta.extra = {{"examples", rft.size()}};
  pipeline::seal(rft_out, rmeta);
  if (rft.empty()) ctx.log("warning: no correct samples, rft dataset is empty");
  std::cout << "prefs " << out.generic_string() << " pairs=" << ds.pairs.size() << "\nrft " << rft_out.generic_string()
            << " examples=" << rft.size() << "\n";
  return 0;
}

inline int cmd_train_dpo(Context& ctx, const Args& a) {
  const auto c = load_corpus(a.corpus);
  auto lm = load_model(a.model, c, ctx.force());
  const auto pmeta = verified_input(a.prefs, "prefs", c, ctx.force());
  const auto expected = pmeta.extra.value("provenance", nlohmann::json::object()).value("policy_digest", std::string());
  if (!ctx.force() && !expected.empty() && expected != lm.model.digest())
    throw ContractError("preference data was sampled from policy " + expected + ", but --model is " +
                        lm.model.digest() + " (use --force to override)");
  const auto pairs = read_jsonl(a.prefs, prefdata::pair_from_json);
  auto ref = lm.model.clone_frozen(policy::Role::reference);
  ctx.log("dpo on " + std::to_string(pairs.size()) + " pairs");
  const auto rep = train::train_dpo(lm.model, ref, pairs, ctx.cfg().dpo);
  const fs::path out = ctx.out_or(a.out, "checkpoints/dpo");
  auto meta = save_model(ctx, lm.model, out, c, {pipeline::parent_of(lm.path, lm.meta), pipeline::parent_of(a.prefs, pmeta)},
                         {{"reference_digest", ref.digest()}});
  save_train_report(ctx, rep, ctx.run_dir() / "reports" / "train_dpo", meta);
  std::cout << "checkpoint " << out.generic_string() << " digest=" << lm.model.digest()
            << " selected_step=" << rep.selected_step << "\n";
  return 0;
}

inline int cmd_train_rft(Context& ctx, const Args& a) {
  const auto c = load_corpus(a.corpus);
  auto lm = load_model(a.model, c, ctx.force());
  const auto rmeta = verified_input(a.rft, "rft", c, ctx.force());
  const auto data = read_jsonl(a.rft, [](const nlohmann::json& j) { return prefdata::rft_from_json(j); });
  const auto rep = train::train_rft(lm.model, data, ctx.cfg().rft);
  const fs::path out = ctx.out_or(a.out, "checkpoints/rft");
  auto meta = save_model(ctx, lm.model, out, c, {pipeline::parent_of(lm.path, lm.meta), pipeline::parent_of(a.rft, rmeta)});
  save_train_report(ctx, rep, ctx.run_dir() / "reports" / "train_rft", meta);
  std::cout << "checkpoint " << out.generic_string() << " digest=" << lm.model.digest() << " steps=" << rep.steps.size()
            << "\n";
  return 0;
}

inline std::vector<train::PpoItem> ppo_pool(const synth::Corpus& corpus, const std::vector<std::string>& ids) {
  std::vector<train::PpoItem> pool;
  for (const auto& pid : ids)
    for (const auto& lang : corpus.non_english_ids()) pool.push_back({pid, lang});
  return pool;
}

inline int cmd_train_ppo(Context& ctx, const Args& a) {
  const auto c = load_corpus(a.corpus);
  if (a.scorer) ctx.cfg().scorer.kind = *a.scorer;
  ctx.cfg().validate();
  auto lm = load_model(a.model, c, ctx.force());
  const auto sft = lm.model.clone_frozen(policy::Role::sft_anchor);
  const auto sc = pipeline::make_scorer(ctx.cfg().scorer, c.corpus, lm.model.vocab().size());
  const auto pool = ppo_pool(c.corpus, sampling_ids(ctx, c.corpus, synth::Split::train, a.problems));
  ctx.log("ppo for " + std::to_string(ctx.cfg().ppo.max_steps) + " steps");
  const auto rep = train::train_ppo(lm.model, sft, *sc, c.corpus, pool, ctx.cfg().ppo, [&](long step, const train::PpoStats& s) {
    if (step % 50 == 0) ctx.log("step " + std::to_string(step) + " reward " + std::to_string(s.mean_reward));
  });
  const fs::path out = ctx.out_or(a.out, "checkpoints/ppo");
  auto meta = save_model(ctx, lm.model, out, c, {pipeline::parent_of(lm.path, lm.meta)},
                         {{"sft_anchor_digest", sft.digest()}, {"scorer_id", sc->id()}});
  save_train_report(ctx, rep, ctx.run_dir() / "reports" / "train_ppo", meta);
  std::cout << "checkpoint " << out.generic_string() << " digest=" << lm.model.digest() << "\n";
  return 0;
}

inline int cmd_iterate(Context& ctx, const Args& a) {
  const auto c = load_corpus(a.corpus);
  if (a.rounds) ctx.cfg().rounds = *a.rounds;
  if (a.scorer) ctx.cfg().scorer.kind = *a.scorer;
  ctx.cfg().validate();
  auto lm = load_model(a.model, c, ctx.force());
  const auto sc = pipeline::make_scorer(ctx.cfg().scorer, c.corpus, lm.model.vocab().size());
  train::IterConfig ic;
  ic.rounds = ctx.cfg().rounds;
  ic.pref = ctx.cfg().pref;
  ic.dpo = ctx.cfg().dpo;
  const fs::path base = a.out.empty() ? ctx.run_dir() : fs::path(a.out);
  pipeline::ParentRef prev = pipeline::parent_of(lm.path, lm.meta);
  const auto ids = sampling_ids(ctx, c.corpus, synth::Split::train, a.problems);
  train::iterate_dpo<float>(lm.model, *sc, c.corpus, ids, ic, [&](const train::RoundResult& rr, const Model& m) {
    const std::string tag = "round" + std::to_string(rr.round);
    const fs::path ds_path = base / "datasets" / (tag + "_prefs.jsonl");
    write_text(ds_path, prefdata::to_jsonl(rr.dataset.pairs));
    auto dmeta = ctx.begin("prefs", ds_path);
    dmeta.corpus_sha256 = c.meta.sha256;
    dmeta.parents = {prev};
    dmeta.extra = {{"provenance", prefdata::to_json(rr.dataset.provenance)}, {"pairs", rr.dataset.pairs.size()}};
    dmeta = pipeline::seal(ds_path, dmeta);
    const fs::path ck = base / "checkpoints" / tag;
    auto cmeta = save_model(ctx, m, ck, c, {prev, pipeline::parent_of(ds_path, dmeta)},
                            {{"round", rr.round}, {"reference_digest", rr.reference_digest}});
    save_train_report(ctx, rr.report, base / "reports" / ("train_dpo_" + tag), cmeta);
    prev = pipeline::parent_of(ck, cmeta);
    ctx.log(tag + ": " + std::to_string(rr.dataset.pairs.size()) + " pairs, selected step " +
            std::to_string(rr.report.selected_step));
    std::cout << "round " << rr.round << " prefs " << ds_path.generic_string() << " checkpoint " << ck.generic_string()
              << " digest=" << m.digest() << "\n";
  });
  return 0;
}

/// Predictions JSONL: {problem_id, lang, completion|solution}.
inline std::vector<metrics::EvalRecord> read_predictions(std::istream& in) {
  return prefdata::from_jsonl(in, [](const nlohmann::json& j) {
    metrics::EvalRecord r;
    r.problem_id = j.at("problem_id").get<std::string>();
    r.lang = j.at("lang").get<std::string>();
    if (j.contains("completion")) r.completion = split_tokens(j.at("completion").get<std::string>());
    else if (j.contains("solution")) r.completion = split_tokens(j.at("solution").get<std::string>());
    else throw ValidationError("prediction for '" + r.problem_id + "' has neither completion nor solution");
    return r;
  });
}

inline int cmd_eval(Context& ctx, const Args& a) {
  const auto c = load_corpus(a.corpus);
  if (a.scorer) ctx.cfg().scorer.kind = *a.scorer;
  ctx.cfg().validate();
  if (a.model.empty() == a.predictions.empty()) throw ValidationError("eval needs exactly one of --model or --predictions");
  const std::size_t vocab_size = policy::Vocabulary::for_corpus(c.corpus).size();
  const auto sc = pipeline::make_scorer(ctx.cfg().scorer, c.corpus, vocab_size);
  metrics::AnswerExtractor ex(c.corpus.languages);
  const auto gold = pipeline::gold_answers(c.corpus);
  std::vector<pipeline::ParentRef> parents{pipeline::parent_of(c.path, c.meta)};
  std::string name = a.name;
  std::vector<metrics::EvalResult> results;
  const synth::Split splits[] = {synth::Split::test_in_domain, synth::Split::test_ood};
  if (!a.model.empty()) {
    auto lm = load_model(a.model, c, ctx.force());
    parents.push_back(pipeline::parent_of(lm.path, lm.meta));
    if (name.empty()) name = fs::path(a.model).filename().string();
    for (auto split : splits) {
      ctx.log("evaluating " + synth::to_string(split));
      results.push_back(pipeline::evaluate_model(name, lm.model, c.corpus, split, *sc, ctx.cfg().eval.max_new_tokens,
                                                 ctx.cfg().eval.limit));
    }
  } else {
    std::vector<metrics::EvalRecord> preds;
    if (a.predictions == "-") {
      preds = read_predictions(std::cin);
    } else {
      std::ifstream in(a.predictions);
      if (!in) throw ValidationError("cannot read " + a.predictions);
      preds = read_predictions(in);
    }
    if (name.empty()) name = "predictions";
    std::map<std::string, synth::Split> split_of;
    for (const auto& p : c.corpus.problems) split_of[p.problem_id] = p.split;
    for (auto split : splits) {
      std::vector<metrics::EvalRecord> part;
      for (const auto& r : preds) {
        auto it = split_of.find(r.problem_id);
        if (it == split_of.end()) throw ValidationError("prediction for unknown problem '" + r.problem_id + "'");
        if (it->second == split) part.push_back(r);
      }
      if (!part.empty()) results.push_back(metrics::evaluate(name, synth::to_string(split), part, gold, ex, *sc));
    }
    if (results.empty()) throw ValidationError("no predictions for test_in_domain or test_ood problems");
  }
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : results) j.push_back(metrics::to_json(r));
  const fs::path out = ctx.out_or(a.out, "reports/eval_" + name + ".json");
  write_text(out, j.dump(2) + "\n");
  auto meta = ctx.begin("eval", out);
  meta.corpus_sha256 = c.meta.sha256;
  meta.parents = parents;
  meta.extra = {{"scorer_id", sc->id()}};
  pipeline::seal(out, meta);
  std::cout << metrics::render_report(results, metrics::ReportFormat::text);
  return 0;
}

inline int cmd_report(Context& ctx, const Args& a) {
  if (a.inputs.empty()) throw ValidationError("report needs at least one --inputs file");
  std::vector<metrics::EvalResult> results;
  std::vector<pipeline::ParentRef> parents;
  std::string corpus_sha;
  for (const auto& in : a.inputs) {
    auto m = pipeline::verify(in, "eval");
    if (corpus_sha.empty()) corpus_sha = m.corpus_sha256;
    else if (!ctx.force() && m.corpus_sha256 != corpus_sha)
      throw ContractError("lineage mismatch: " + in + " was evaluated on corpus " + m.corpus_sha256 + ", expected " +
                          corpus_sha + " (use --force to override)");
    parents.push_back(pipeline::parent_of(in, m));
    std::ifstream f(in);
    for (const auto& r : nlohmann::json::parse(f)) results.push_back(metrics::eval_result_from_json(r));
  }
  std::vector<std::pair<metrics::ReportFormat, std::string>> formats;
  if (a.format == "all")
    formats = {{metrics::ReportFormat::text, "txt"}, {metrics::ReportFormat::markdown, "md"}, {metrics::ReportFormat::csv, "csv"}};
  else {
    const auto f = metrics::report_format_from_string(a.format);
    formats = {{f, f == metrics::ReportFormat::text ? "txt" : f == metrics::ReportFormat::markdown ? "md" : "csv"}};
  }
  const std::string stem = a.out.empty() ? (ctx.run_dir() / "reports" / "report").string() : a.out;
  for (const auto& [f, ext] : formats) {
    const fs::path out = stem + "." + ext;
    const std::string body = metrics::render_report(results, f);
    write_text(out, body);
    auto meta = ctx.begin("report", out);
    meta.corpus_sha256 = corpus_sha;
    meta.parents = parents;
    pipeline::seal(out, meta);
    if (f == metrics::ReportFormat::text) std::cout << body;
    std::cout << "report " << out.generic_string() << "\n";
  }
  return 0;
}

}  // namespace xlalign::cli
