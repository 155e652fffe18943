// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. `--expect-fail 6,7` marks criteria
// whose failure is known and recorded; they still print FAIL, and only an
// unexpected result changes the exit code.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "support/gradcheck.hpp"
#include "support/scorer_oracles.hpp"
#include "xlalign/pipeline/config.hpp"
#include "xlalign/pipeline/evaluate.hpp"

#ifndef XLALIGN_CLI_PATH
#error "XLALIGN_CLI_PATH must point at the xlalign binary"
#endif

using namespace xlalign;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;
using Model = policy::PolicyModel<float>;

namespace {

// Pinned tolerances.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kGradBudgetSeconds = 30.0;
constexpr double kLn2Tol = 1e-6;
constexpr double kEmTol = 1e-9;
constexpr double kMetricTol = 1e-12;
constexpr double kPplDrop = 0.10;
constexpr double kAccGainPoints = 5.0;
constexpr double kPipelineBudgetSeconds = 600.0;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

double seconds_since(clk::time_point t) { return std::chrono::duration<double>(clk::now() - t).count(); }

struct Line {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};
std::vector<Line> lines;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  lines.push_back({id, name, pass, detail});
  std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... xs) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, xs...);
  return buf;
}

// --- 1 -----------------------------------------------------------------------

policy::PolicyConfig micro_config(std::uint64_t seed) {
  policy::PolicyConfig c;
  c.vocab_size = 20;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 16;
  c.context_len = 24;
  c.init_std = 0.3;
  c.seed = seed;
  return c;
}

std::shared_ptr<const policy::Vocabulary> micro_vocab() {
  std::vector<std::string> toks{"<eos>"};
  for (int i = 1; i < 20; ++i) toks.push_back("w" + std::to_string(i));
  return std::make_shared<const policy::Vocabulary>(toks);
}

void gradient_fidelity() {
  const auto t0 = clk::now();
  auto vocab = micro_vocab();
  policy::PolicyModel<double> m(micro_config(11), vocab);
  const policy::PolicyModel<double> other(micro_config(12), vocab);
  const std::vector<train::SeqPair> seqs{{{1, 4, 6}, {7, 2, 0}}, {{3, 3, 8}, {5, 9, 11, 0}}, {{2}, {13, 17, 19, 4, 0}}};

  auto sft = testing::gradcheck(m.params(), [&](ad::Graph<double>& g) {
    return train::sft_loss(g, m, std::span<const train::SeqPair>(seqs));
  }, kGradStep);

  std::vector<train::DpoItem> items;
  for (std::size_t i = 0; i + 1 < seqs.size(); ++i) {
    train::DpoItem it;
    it.chosen = seqs[i];
    it.rejected = {seqs[i].prompt, seqs[i + 1].completion};
    it.ref_chosen = other.sequence_log_prob(it.chosen.prompt, it.chosen.completion);
    it.ref_rejected = other.sequence_log_prob(it.rejected.prompt, it.rejected.completion);
    items.push_back(it);
  }
  auto dpo = testing::gradcheck(m.params(), [&](ad::Graph<double>& g) {
    return train::dpo_loss(g, m, std::span<const train::DpoItem>(items), 0.5);
  }, kGradStep);

  // Behavior log-probs are the current ones shifted by fixed offsets, so
  // that some tokens sit inside the clip range and some outside it.
  std::vector<train::PpoSample> batch;
  const double offsets[] = {0.05, -0.35, 0.1, 0.4, -0.02, -0.5, 0.15, 0.3};
  std::size_t k = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    train::PpoSample s;
    s.seq = seqs[i];
    ad::Graph<double> g;
    auto lp = m.forward(g, std::vector<train::SeqPair>{seqs[i]}, false).token_logprobs.value();
    for (std::size_t t = 0; t < lp.size(); ++t) s.old_logprobs.push_back(lp[t] + offsets[k++ % 8]);
    s.advantage = i == 1 ? -0.7 : 0.9;
    batch.push_back(s);
  }
  auto ppo = testing::gradcheck(m.params(), [&](ad::Graph<double>& g) {
    return train::ppo_surrogate(g, m, std::span<const train::PpoSample>(batch), 0.2);
  }, kGradStep);

  const double secs = seconds_since(t0);
  const double worst = std::max({sft.max_rel_error, dpo.max_rel_error, ppo.max_rel_error});
  report(1, "gradient fidelity", worst < kGradRelTol && secs < kGradBudgetSeconds,
         fmt("max rel err sft=%.2e dpo=%.2e ppo=%.2e (tol %.0e), %zu params x3, %.1fs (budget %.0fs)",
             sft.max_rel_error, dpo.max_rel_error, ppo.max_rel_error, kGradRelTol, sft.checked, secs,
             kGradBudgetSeconds));
}

// --- 2 -----------------------------------------------------------------------

void dpo_identity(const synth::Corpus& corpus) {
  auto vocab = std::make_shared<const policy::Vocabulary>(policy::Vocabulary::for_corpus(corpus));
  auto pc = pipeline::default_pipeline_config().policy;
  pc.vocab_size = vocab->size();
  Model policy(pc, vocab);
  const auto ref = policy.clone_frozen(policy::Role::reference);
  // Chosen: a faithful encipherment. Rejected: the same with its tail cut.
  std::vector<prefdata::PreferencePair> pairs;
  for (const auto& pid : pipeline::split_problem_ids(corpus, synth::Split::train, 16)) {
    const auto& inst = corpus.instance(pid, "la");
    prefdata::PreferencePair p;
    p.problem_id = pid;
    p.lang = "la";
    p.prompt = synth::make_prompt(corpus.languages.get("la"), inst.question);
    p.chosen = inst.gold_solution;
    p.rejected = Tokens(inst.gold_solution.begin(), inst.gold_solution.begin() + inst.gold_solution.size() / 2);
    pairs.push_back(p);
  }
  double worst = 0.0;
  for (double beta : {0.01, 0.1, 1.0}) {
    ad::Graph<float> g;
    const double loss = train::dpo_loss(g, policy, ref, pairs, beta).value().item();
    worst = std::max(worst, std::abs(loss - std::log(2.0)));
  }
  report(2, "dpo loss at identity", worst <= kLn2Tol,
         fmt("max |loss - ln2| = %.2e over beta {0.01, 0.1, 1.0} (tol %.0e)", worst, kLn2Tol));
}

// --- 3 -----------------------------------------------------------------------

void pair_counts() {
  Rng rng(77);
  bool ok = true;
  std::size_t emitted = 0, sound = 0;
  std::string detail;
  prefdata::PrefBuildConfig cfg;
  cfg.margin = 0.0;
  for (std::size_t n : {2, 3, 4, 6}) {
    std::vector<prefdata::SampleRecord> rs;
    std::map<std::pair<std::string, Tokens>, double> truth;
    const int groups = 25;
    for (int p = 0; p < groups; ++p) {
      const std::string pid = "p" + std::to_string(p);
      prefdata::SampleRecord a;
      a.problem_id = pid;
      a.lang = "en";
      a.completion = {"x", "."};
      rs.push_back(a);
      for (const std::string lang : {"ha", "lb"}) {
        std::set<double> used;
        for (std::size_t i = 0; i < n; ++i) {
          prefdata::SampleRecord r;
          r.problem_id = pid;
          r.lang = lang;
          r.prompt = {"q", pid};
          r.completion = {"c" + std::to_string(i), lang, "."};
          double s;
          do s = -5.0 * rng.uniform();
          while (!used.insert(s).second);
          scorer::ScoreResult sr;
          sr.norm_score = s;
          r.score = sr;
          truth[{pid + "/" + lang, r.completion}] = s;
          rs.push_back(r);
        }
      }
    }
    rng.shuffle(rs);
    const auto ds = prefdata::build_pairs(rs, cfg);
    std::map<std::string, std::size_t> per_group;
    for (const auto& pr : ds.pairs) {
      ++per_group[pr.problem_id + "/" + pr.lang];
      ++emitted;
      const std::string key = pr.problem_id + "/" + pr.lang;
      const double w = truth.at({key, pr.chosen}), l = truth.at({key, pr.rejected});
      if (w > l && pr.score_w == w && pr.score_l == l) ++sound;
    }
    const std::size_t want = n * (n - 1) / 2;
    bool counts_ok = per_group.size() == static_cast<std::size_t>(groups) * 2;
    for (const auto& [g, c] : per_group) counts_ok = counts_ok && c == want;
    ok = ok && counts_ok;
    detail += fmt("%sn=%zu:%s", detail.empty() ? "" : " ", n, counts_ok ? "ok" : "bad");
  }
  ok = ok && sound == emitted;
  report(3, "pair construction", ok,
         detail + fmt("; order sound on %zu/%zu pairs", sound, emitted));
}

// --- 4 -----------------------------------------------------------------------

void scorer_oracles(const synth::Corpus& corpus) {
  using scorer::BitextPair;
  const std::vector<BitextPair> two_by_two{{{"A"}, {"x"}}, {{"B"}, {"y"}}};
  const std::vector<BitextPair> ambiguous{{{"A", "B"}, {"x", "y"}}, {{"A"}, {"x"}}};
  const double e1 = testing::model1_max_abs_error(two_by_two, 10);
  const double e2 = testing::model1_max_abs_error(ambiguous, 5);

  Rng rng(21);
  std::vector<BitextPair> random;
  for (int i = 0; i < 200; ++i) {
    BitextPair p;
    const auto lf = rng.range(1, 8), le = rng.range(1, 8);
    for (int k = 0; k < lf; ++k) p.foreign.push_back("f" + std::to_string(rng.below(15)));
    for (int k = 0; k < le; ++k) p.english.push_back("e" + std::to_string(rng.below(12)));
    random.push_back(p);
  }
  const auto ll = scorer::train_model1(random, 20).log_likelihoods();
  int decreases = 0;
  for (std::size_t i = 1; i < ll.size(); ++i)
    if (ll[i] < ll[i - 1]) ++decreases;

  scorer::CipherOracleScorer oracle(corpus.languages, policy::Vocabulary::for_corpus(corpus).size(), 0.05);
  const int violations = testing::ranking_violations(corpus.languages, oracle, 1000, 1234);
  report(4, "scorer oracles", e1 <= kEmTol && e2 <= kEmTol && decreases == 0 && violations == 0,
         fmt("EM vs brute force max err %.1e / %.1e (tol %.0e); LL decreases %d over %zu iters; "
             "ranking violations %d/1000 trials",
             e1, e2, kEmTol, decreases, ll.size() - 1, violations));
}

// --- 5 -----------------------------------------------------------------------

void metric_goldens(const synth::Corpus& corpus) {
  const double acr = metrics::acr({"p1", "p2", "p3"}, {"p2", "p3", "p4"});
  const Tokens s = split_tokens("3 + 4 = 7 . the answer is 7 .");
  const double sb = metrics::self_bleu({s, s, s, s});
  const double ppl = scorer::ScoreResult::from_per_token(std::vector<double>(9, std::log(0.1))).ppl;
  metrics::AnswerExtractor ex(corpus.languages);
  std::vector<metrics::EvalRecord> gold_records;
  for (const auto& i : corpus.instances)
    if (i.split == synth::Split::test_ood) gold_records.push_back({i.problem_id, i.lang, i.gold_solution});
  const auto acc = metrics::accuracy(gold_records, pipeline::gold_answers(corpus), ex);
  double min_acc = 1.0;
  for (const auto& [l, a] : acc) min_acc = std::min(min_acc, a);
  const bool ok = std::abs(acr - 2.0 / 3.0) <= kMetricTol && std::abs(sb - 1.0) <= kMetricTol &&
                  std::abs(ppl - 10.0) <= 1e-9 && min_acc == 1.0 && acc.size() == corpus.language_ids().size();
  report(5, "metric golden values",
         ok, fmt("ACR=%.12f self-BLEU=%.12f PPL=%.12f min gold accuracy=%.3f over %zu languages", acr, sb, ppl,
                 min_acc, acc.size()));
}

// --- 6..9 --------------------------------------------------------------------

struct SeedRun {
  metrics::EvalResult sft, rft;
  std::vector<metrics::EvalResult> rounds;  // after each DPO round
  double pipeline_seconds = 0.0;           // SFT + one sample/score/DPO round + evals
  std::vector<double> ppo_rewards;
};

double mean_over(const std::map<std::string, double>& m, const std::vector<std::string>& langs) {
  double s = 0.0;
  for (const auto& l : langs) s += m.at(l);
  return s / static_cast<double>(langs.size());
}

SeedRun run_seed(const synth::Corpus& corpus, std::uint64_t seed) {
  SeedRun out;
  auto cfg = pipeline::default_pipeline_config();
  cfg.apply_seed(seed);
  const scorer::CipherOracleScorer oracle(corpus.languages, policy::Vocabulary::for_corpus(corpus).size(),
                                          cfg.scorer.epsilon);
  const auto split = synth::Split::test_ood;
  const auto n_new = cfg.eval.max_new_tokens;

  auto t0 = clk::now();
  auto vocab = std::make_shared<const policy::Vocabulary>(policy::Vocabulary::for_corpus(corpus));
  auto pc = cfg.policy;
  pc.vocab_size = vocab->size();
  Model policy(pc, vocab);
  train::train_sft(policy, train::sft_examples(corpus, synth::Split::train, seed), cfg.sft);
  out.sft = pipeline::evaluate_model("sft", policy, corpus, split, oracle, n_new, cfg.eval.limit);
  const auto sft = policy.clone_frozen(policy::Role::sft_anchor);
  double base_seconds = seconds_since(t0);
  std::fprintf(stderr, "seed %llu: sft %.0fs\n", static_cast<unsigned long long>(seed), base_seconds);

  const auto ids = pipeline::split_problem_ids(corpus, synth::Split::train, cfg.sampling.problems);
  train::IterConfig ic;
  ic.rounds = 3;
  ic.pref = cfg.pref;
  ic.dpo = cfg.dpo;
  auto t1 = clk::now();
  train::iterate_dpo<float>(policy, oracle, corpus, ids, ic, [&](const train::RoundResult& rr, const Model& m) {
    out.rounds.push_back(pipeline::evaluate_model("dpo_r" + std::to_string(rr.round), m, corpus, split, oracle, n_new,
                                                  cfg.eval.limit));
    if (rr.round == 1) out.pipeline_seconds = base_seconds + seconds_since(t1);
    std::fprintf(stderr, "seed %llu: round %d done, %zu pairs\n", static_cast<unsigned long long>(seed), rr.round,
                 rr.dataset.pairs.size());
  });

  // m-RFT from the same round-1 samples: same policy, config, seed and round.
  {
    metrics::AnswerExtractor ex(corpus.languages);
    auto records = prefdata::collect_samples(sft, corpus, ids, corpus.non_english_ids(), cfg.pref, ex, 1);
    prefdata::score_samples(records, oracle);
    auto rft = sft.clone_trainable();
    train::train_rft(rft, prefdata::build_rft(records, pipeline::gold_answers(corpus)), cfg.rft);
    out.rft = pipeline::evaluate_model("rft", rft, corpus, split, oracle, n_new, cfg.eval.limit);
  }

  {
    auto ppo_policy = sft.clone_trainable();
    std::vector<train::PpoItem> pool;
    for (const auto& pid : ids)
      for (const auto& lang : corpus.non_english_ids()) pool.push_back({pid, lang});
    train::train_ppo(ppo_policy, sft, oracle, corpus, pool, cfg.ppo,
                     [&](long, const train::PpoStats& s) { out.ppo_rewards.push_back(s.mean_reward); });
  }
  std::fprintf(stderr, "seed %llu: done\n", static_cast<unsigned long long>(seed));
  return out;
}

void learning_criteria(const synth::Corpus& corpus) {
  const auto langs = corpus.non_english_ids();
  std::vector<SeedRun> runs;
  for (auto s : kSeeds) runs.push_back(run_seed(corpus, s));
  const double n = static_cast<double>(runs.size());

  // 6
  {
    bool ppl_ok = true, acr_ok = true;
    std::string ppl_d, acr_d;
    double acc0 = 0.0, acc1 = 0.0, secs = 0.0;
    for (const auto& l : langs) {
      double p0 = 0.0, p1 = 0.0, c0 = 0.0, c1 = 0.0;
      for (const auto& r : runs) {
        p0 += r.sft.ppl.at(l) / n;
        p1 += r.rounds[0].ppl.at(l) / n;
        c0 += r.sft.acr.at(l) / n;
        c1 += r.rounds[0].acr.at(l) / n;
      }
      const double drop = 1.0 - p1 / p0;
      ppl_ok = ppl_ok && drop >= kPplDrop;
      acr_ok = acr_ok && c1 > c0;
      ppl_d += fmt(" %s %.0f->%.0f (%+.1f%%)", l.c_str(), p0, p1, -100.0 * drop);
      acr_d += fmt(" %s %.3f->%.3f", l.c_str(), c0, c1);
    }
    for (const auto& r : runs) {
      acc0 += mean_over(r.sft.accuracy, langs) / n;
      acc1 += mean_over(r.rounds[0].accuracy, langs) / n;
      secs += r.pipeline_seconds;
    }
    const double gain = 100.0 * (acc1 - acc0);
    const bool acc_ok = gain >= kAccGainPoints;
    const bool time_ok = secs <= kPipelineBudgetSeconds;
    report(6, "sft then one dpo round", ppl_ok && acc_ok && acr_ok && time_ok,
           fmt("(a) ood ppl%s: %s; (b) mean non-en ood acc %.2f%% -> %.2f%% (%+.2f pts, need +%.0f): %s; "
               "(c) acr%s: %s; runtime %.0fs (budget %.0fs): %s",
               ppl_d.c_str(), ppl_ok ? "ok" : "no", 100 * acc0, 100 * acc1, gain, kAccGainPoints,
               acc_ok ? "ok" : "no", acr_d.c_str(), acr_ok ? "ok" : "no", secs, kPipelineBudgetSeconds,
               time_ok ? "ok" : "no"));
  }
  // 7
  {
    double r1 = 0.0, r2 = 0.0, r3 = 0.0;
    for (const auto& r : runs) {
      r1 += mean_over(r.rounds[0].ppl, langs) / n;
      r2 += mean_over(r.rounds[1].ppl, langs) / n;
      r3 += mean_over(r.rounds[2].ppl, langs) / n;
    }
    report(7, "iterative dpo", r3 <= r1, fmt("mean ood ppl round1 %.1f, round2 %.1f, round3 %.1f", r1, r2, r3));
  }
  // 8
  {
    double dpo = 0.0, rft = 0.0;
    for (const auto& r : runs) {
      const double base = mean_over(r.sft.accuracy, langs);
      dpo += (mean_over(r.rounds[0].accuracy, langs) - base) / n;
      rft += (mean_over(r.rft.accuracy, langs) - base) / n;
    }
    report(8, "dpo vs m-rft", dpo >= rft,
           fmt("mean non-en ood accuracy gain: dpo %+.2f pts, m-rft %+.2f pts", 100 * dpo, 100 * rft));
  }
  // 9
  {
    int rising = 0;
    std::string d;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& rw = runs[i].ppo_rewards;
      double first = 0.0, last = 0.0;
      for (std::size_t k = 0; k < 50; ++k) {
        first += rw[k] / 50.0;
        last += rw[rw.size() - 50 + k] / 50.0;
      }
      if (last > first) ++rising;
      d += fmt(" seed%llu %.3f->%.3f", static_cast<unsigned long long>(kSeeds[i]), first, last);
    }
    report(9, "ppo reward direction", rising == static_cast<int>(runs.size()),
           fmt("first-50 vs last-50 mean reward over %zu steps:%s (%d/%zu rising)", runs[0].ppo_rewards.size(),
               d.c_str(), rising, runs.size()));
  }
}

// --- 10 ----------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(XLALIGN_CLI_PATH) + " " + args + " -q >>" + log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool full_pipeline(const fs::path& run) {
  fs::remove_all(run);
  fs::create_directories(run);
  const std::string r = " --seed 7 --run-dir " + run.string();
  const std::string c = " --corpus " + (run / "corpus").string();
  const fs::path log = run / "log.txt";
  const std::string steps[] = {
      "gen-corpus" + r,
      "train-sft" + r + c,
      "sample" + r + c + " --model " + (run / "checkpoints/sft").string(),
      "score" + r + c + " --samples " + (run / "datasets/samples.jsonl").string(),
      "build-prefs" + r + c + " --scored " + (run / "datasets/scored.jsonl").string(),
      "train-dpo" + r + c + " --model " + (run / "checkpoints/sft").string() + " --prefs " +
          (run / "datasets/prefs.jsonl").string(),
      "eval" + r + c + " --model " + (run / "checkpoints/sft").string(),
      "eval" + r + c + " --model " + (run / "checkpoints/dpo").string(),
      "report" + r + " --inputs " + (run / "reports/eval_sft.json").string() + " " +
          (run / "reports/eval_dpo.json").string(),
  };
  for (const auto& s : steps)
    if (run_cli(s, log) != 0) {
      std::fprintf(stderr, "cli step failed: %s\n%s", s.c_str(), slurp(log).c_str());
      return false;
    }
  return true;
}

void determinism() {
  const fs::path base = fs::temp_directory_path() / "xlalign_acceptance";
  const fs::path a = base / "a", b = base / "b";
  const auto t0 = clk::now();
  if (!full_pipeline(a) || !full_pipeline(b)) {
    report(10, "pipeline determinism", false, "a pipeline step failed");
    return;
  }
  std::size_t files = 0, same = 0;
  std::string diff;
  for (const auto& e : fs::directory_iterator(a / "reports")) {
    const auto name = e.path().filename();
    if (name.string().ends_with(".meta.json")) continue;
    ++files;
    if (slurp(e.path()) == slurp(b / "reports" / name)) ++same;
    else diff += " " + name.string();
  }
  report(10, "pipeline determinism", files > 0 && same == files,
         fmt("%zu/%zu report files byte-identical across two seed-7 runs (%.0fs)%s", same, files, seconds_since(t0),
             diff.empty() ? "" : (" differing:" + diff).c_str()));
  fs::remove_all(base);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expected_fail;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) != "--expect-fail" || i + 1 >= argc) {
      std::fprintf(stderr, "usage: acceptance [--expect-fail N,M,...]\n");
      return 2;
    }
    std::stringstream ids(argv[++i]);
    for (std::string id; std::getline(ids, id, ',');) expected_fail.insert(std::stoi(id));
  }
  const auto t0 = clk::now();
  const auto corpus = synth::generate_corpus(pipeline::default_pipeline_config().corpus);
  gradient_fidelity();
  dpo_identity(corpus);
  pair_counts();
  scorer_oracles(corpus);
  metric_goldens(corpus);
  learning_criteria(corpus);
  determinism();
  int passed = 0, unexpected = 0;
  std::string notes;
  for (const auto& l : lines) {
    passed += l.pass;
    const bool xfail = expected_fail.count(l.id) > 0;
    if (l.pass == xfail) {
      ++unexpected;
      notes += fmt(" %s:%d", l.pass ? "XPASS" : "FAIL", l.id);
    } else if (xfail) {
      notes += fmt(" XFAIL:%d", l.id);
    }
  }
  std::printf("acceptance: %d/%zu criteria passed in %.0fs;%s%s\n", passed, lines.size(), seconds_since(t0),
              notes.empty() ? " no expected failures" : notes.c_str(),
              unexpected ? " (unexpected results)" : "");
  return unexpected == 0 ? 0 : 1;
}
