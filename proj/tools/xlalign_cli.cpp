#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

#include "commands.hpp"

using namespace xlalign;
using namespace xlalign::cli;

namespace {

std::string escape(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

int fail(int code, const std::string& msg) {
  std::cerr << "error: code=" << code << " message=\"" << escape(msg) << "\"\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual alignment as preference optimization on cipher languages"};
  app.require_subcommand(1);

  Common common;
  Args args;
  std::size_t problems = 0;
  int rounds = 0;
  std::string scorer;

  using Handler = std::function<int(Context&, const Args&)>;
  std::map<CLI::App*, std::pair<std::string, Handler>> handlers;

  auto add = [&](const std::string& name, const std::string& help, Handler h) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", common.config_file, "JSON config overlay");
    sub->add_option("--set", common.sets, "Override one key, e.g. dpo.beta=0.5 (repeatable)");
    sub->add_option("--seed", common.seed, "Global seed for every stage except the corpus");
    sub->add_option("--run-dir", common.run_dir, "Output root (default runs/<utc time>-seed<seed>)");
    sub->add_flag("--force", common.force, "Accept inputs with mismatched lineage");
    sub->add_flag("--paper-hparams", common.paper_hparams, "Use the 7B-scale hyperparameters");
    sub->add_flag("-q,--quiet", common.quiet, "No progress output on stderr");
    sub->add_option("-o,--out", args.out, "Output path (default under the run dir)");
    handlers[sub] = {name, std::move(h)};
    return sub;
  };

  add("gen-corpus", "Generate the parallel cipher-language corpus", cmd_gen_corpus);

  auto* sft = add("train-sft", "Supervised fine-tuning on the training split", cmd_train_sft);
  sft->add_option("--corpus", args.corpus, "Corpus directory")->required();

  auto* sample = add("sample", "Sample completions from a checkpoint", cmd_sample);
  sample->add_option("--corpus", args.corpus)->required();
  sample->add_option("--model", args.model)->required();
  sample->add_option("--split", args.split, "Problem split to sample")->capture_default_str();
  sample->add_option("--problems", problems, "Number of problems (default sampling.problems)");
  sample->add_option("--round", args.round, "Round number stored in the records")->capture_default_str();

  auto* score = add("score", "Score sampled completions", cmd_score);
  score->add_option("--corpus", args.corpus)->required();
  score->add_option("--samples", args.samples)->required();
  score->add_option("--scorer", scorer, "cipher_oracle | model1");

  auto* prefs = add("build-prefs", "Build preference pairs and the RFT set from scored samples", cmd_build_prefs);
  prefs->add_option("--corpus", args.corpus)->required();
  prefs->add_option("--scored", args.scored)->required();

  auto* dpo = add("train-dpo", "One DPO run against a frozen copy of --model", cmd_train_dpo);
  dpo->add_option("--corpus", args.corpus)->required();
  dpo->add_option("--model", args.model)->required();
  dpo->add_option("--prefs", args.prefs)->required();

  auto* rft = add("train-rft", "Fine-tune on correct self-samples", cmd_train_rft);
  rft->add_option("--corpus", args.corpus)->required();
  rft->add_option("--model", args.model)->required();
  rft->add_option("--rft", args.rft)->required();

  auto* ppo = add("train-ppo", "PPO with the alignment score as reward", cmd_train_ppo);
  ppo->add_option("--corpus", args.corpus)->required();
  ppo->add_option("--model", args.model)->required();
  ppo->add_option("--scorer", scorer, "cipher_oracle | model1");
  ppo->add_option("--problems", problems, "Size of the training problem pool");

  auto* it = add("iterate", "Iterative DPO: sample, score, pair, train, repeat", cmd_iterate);
  it->add_option("--corpus", args.corpus)->required();
  it->add_option("--model", args.model)->required();
  it->add_option("--rounds", rounds, "Number of rounds");
  it->add_option("--scorer", scorer, "cipher_oracle | model1");
  it->add_option("--problems", problems, "Training problems sampled per round");

  auto* ev = add("eval", "Evaluate a checkpoint or a predictions file on both test splits", cmd_eval);
  ev->add_option("--corpus", args.corpus)->required();
  ev->add_option("--model", args.model);
  ev->add_option("--predictions", args.predictions, "JSONL predictions, or - for stdin");
  ev->add_option("--name", args.name, "Model name in the report");
  ev->add_option("--scorer", scorer, "cipher_oracle | model1");

  auto* rep = add("report", "Combine eval files into text, markdown and csv tables", cmd_report);
  rep->add_option("--inputs", args.inputs, "Eval JSON files")->required();
  rep->add_option("--format", args.format, "text | markdown | csv | all")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (problems > 0) args.problems = problems;
  if (rounds > 0) args.rounds = rounds;
  if (!scorer.empty()) args.scorer = scorer;

  try {
    for (auto& [sub, h] : handlers) {
      if (!sub->parsed()) continue;
      Context ctx(h.first, common);
      return h.second(ctx, args);
    }
  } catch (const ValidationError& e) {
    return fail(2, e.what());
  } catch (const ContractError& e) {
    return fail(3, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(2, e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
  return 2;
}
