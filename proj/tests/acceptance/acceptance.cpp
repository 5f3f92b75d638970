// Copyright 2026 The Rubricopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance checks, one PASS/FAIL line each. Everything runs on the
// simulation backend. `--only N` runs a single check; the exit status is
// non-zero when any selected check fails or exceeds its time limit.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rubricopt/baseline/baseline.hpp"
#include "rubricopt/classifier/classifier.hpp"
#include "rubricopt/core/prompt.hpp"
#include "rubricopt/harness/harness.hpp"
#include "rubricopt/llm/gateway.hpp"
#include "rubricopt/llm/simulation.hpp"
#include "rubricopt/optimizer/optimizer.hpp"
#include "rubricopt/sampler/sampler.hpp"

namespace {

using namespace rubricopt;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Check {
  int id;
  std::string name;
  std::chrono::milliseconds limit;
  std::function<Outcome()> run;
};

// Records the first failure; later failures only bump the count.
class Verdicts {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ == 0) first_ = what;
  }
  Outcome outcome(std::string detail) const {
    if (failures_ == 0) return {true, std::move(detail)};
    return {false, std::to_string(failures_) + " violation(s), first: " + first_ + "; " + detail};
  }

 private:
  int failures_ = 0;
  std::string first_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::vector<LabeledComment> label_with(const LabeledCorpus& corpus) {
  std::vector<LabeledComment> out;
  for (const Comment& c : corpus.comments) out.push_back({c, corpus.truth.at(c.id)});
  return out;
}

FilterPrompt draft_prompt(const std::string& description) {
  FilterPrompt p;
  p.filter_id = "acceptance";
  p.name = "acceptance";
  p.description = description;
  return with_hash(std::move(p));
}

std::vector<Comment> plain_comments(std::size_t n, const std::string& prefix) {
  std::vector<Comment> out;
  const Timestamp base = parse_timestamp("2024-01-01T00:00:00Z");
  for (std::size_t i = 0; i < n; ++i) {
    Comment c;
    c.id = prefix + std::to_string(i);
    c.text = "comment " + std::to_string(i) + " about free crypto and a warning";
    c.published_at = base + std::chrono::minutes(i);
    out.push_back(c);
  }
  return out;
}

// --- 1 -----------------------------------------------------------------------

Outcome majority_vote_oracle() {
  Verdicts v;
  std::set<double> confidences;
  for (int mask = 0; mask < 32; ++mask) {
    std::vector<Verdict> votes;
    int catches = 0;
    for (int bit = 0; bit < 5; ++bit) {
      const bool c = (mask >> bit) & 1;
      catches += c;
      votes.push_back(c ? Verdict::kCatch : Verdict::kNotCatch);
    }
    const VoteResult r = majority_vote(votes);
    const Verdict expect_verdict = catches >= 3 ? Verdict::kCatch : Verdict::kNotCatch;
    const int top = std::max(catches, 5 - catches);
    const double expect_conf = top == 3 ? 0.6 : top == 4 ? 0.8 : 1.0;
    v.expect(r.verdict == expect_verdict, "verdict for mask " + std::to_string(mask));
    v.expect(r.confidence == expect_conf, "confidence for mask " + std::to_string(mask));
    confidences.insert(r.confidence);
  }
  v.expect(confidences == std::set<double>{0.6, 0.8, 1.0}, "confidence set");
  return v.outcome("32 vectors, confidences {0.6, 0.8, 1.0}");
}

// --- 2 -----------------------------------------------------------------------

Outcome batching_arithmetic() {
  llm::Gateway gateway(std::make_shared<llm::SimulationBackend>(default_experiment_rule()));
  Classifier classifier(gateway);
  const auto comments = plain_comments(12, "b");
  const auto before = gateway.counts();
  const auto preds = classifier.classify(draft_prompt("are spam or scams"), comments, 0);
  const auto delta = gateway.counts() - before;
  Verdicts v;
  v.expect(preds.size() == 12, "12 predictions");
  v.expect(delta.completions() == 15, "15 completions, got " + std::to_string(delta.completions()));
  v.expect(delta.completions(TaskKind::kClassify) == 15, "all classify");
  return v.outcome(std::to_string(delta.completions()) + " completion calls for 12 comments");
}

// --- 3 -----------------------------------------------------------------------

Outcome candidate_structure() {
  Verdicts v;
  std::size_t rounds_with_candidates = 0, candidates = 0;
  std::set<EditDirection> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto rule = default_experiment_rule(seed);
    const auto corpus = make_synthetic_corpus(rule, 60, 0.5, seed);
    const auto labeled = label_with(corpus);
    llm::Gateway gateway(std::make_shared<llm::SimulationBackend>(rule));
    Classifier classifier(gateway);
    Optimizer optimizer(classifier);

    FilterPrompt parent = draft_prompt("are spam or scams");
    if (seed % 2 == 1) {
      // Start from a prompt that already has rubrics so edits are possible.
      const std::string kw = *rule.positive_lexicon.begin();
      parent = apply_rubric_edit(parent, {EditDirection::kAddPositive, std::nullopt, std::nullopt,
                                          "Comments mentioning " + kw + " or anything similar"});
      parent = apply_rubric_edit(parent, {EditDirection::kAddNegative, std::nullopt, std::nullopt,
                                          "Comments that are questions"});
    }
    Guidance guidance = std::monostate{};
    if (seed % 3 == 1) {
      const Evaluation eval = classifier.evaluate(parent, labeled, 0);
      if (!eval.mistakes.empty())
        guidance = ClarifiedMistake{eval.mistakes.front(), "This comment is clearly misjudged by the filter."};
    }
    const RoundResult r = optimizer.optimize_round(parent, labeled, guidance, 4, seed);
    if (!r.candidates.empty()) ++rounds_with_candidates;
    for (const CandidateEdit& c : r.candidates) {
      ++candidates;
      const auto diff = diff_prompts(parent, c.child);
      const std::string tag = "seed " + std::to_string(seed);
      v.expect(diff.size() == 1, tag + ": diff has " + std::to_string(diff.size()) + " entries");
      if (diff.size() != 1) continue;
      v.expect(is_rubric_direction(diff[0].direction), tag + ": non-rubric direction");
      v.expect(diff[0] == c.diff, tag + ": reported diff differs from recomputed diff");
      v.expect(c.child.parent_version == parent.version && c.child.version == parent.version + 1,
               tag + ": lineage");
      v.expect(c.child.description == parent.description && c.child.examples == parent.examples,
               tag + ": description or examples changed");
      const auto rubrics = [](const FilterPrompt& p) { return p.positive_rubrics.size() + p.negative_rubrics.size(); };
      const bool add = diff[0].direction == EditDirection::kAddPositive ||
                       diff[0].direction == EditDirection::kAddNegative;
      v.expect(rubrics(c.child) == rubrics(parent) + (add ? 1 : 0), tag + ": rubric count");
      seen.insert(diff[0].direction);
    }
  }
  v.expect(candidates > 0, "no candidates at all");
  std::string dirs;
  for (EditDirection d : seen) dirs += (dirs.empty() ? "" : ",") + std::string(to_string(d));
  return v.outcome(std::to_string(candidates) + " candidates from " + std::to_string(rounds_with_candidates) +
                   "/100 rounds; directions " + dirs);
}

// --- 4 -----------------------------------------------------------------------

Outcome sampler_ordering() {
  Verdicts v;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 gen(seed);
    const std::size_t n = 5 + gen() % 60;
    std::vector<Prediction> preds;
    std::set<std::string> labeled;
    const double confs[] = {0.6, 0.8, 1.0};
    for (std::size_t i = 0; i < n; ++i) {
      Prediction p;
      p.comment_id = "c" + std::to_string(i);
      p.verdict = gen() % 2 ? Verdict::kCatch : Verdict::kNotCatch;
      p.confidence = confs[gen() % 3];
      preds.push_back(p);
      if (gen() % 5 == 0) labeled.insert(p.comment_id);
    }
    std::shuffle(preds.begin(), preds.end(), gen);
    const std::size_t k = 1 + gen() % n;
    const SamplingPlan plan = select_for_labeling(preds, labeled, k, seed);

    std::map<std::string, const Prediction*> by_id;
    for (const Prediction& p : preds) by_id[p.comment_id] = &p;
    auto rank = [&](const std::string& id) {
      const Prediction& p = *by_id.at(id);
      if (!p.unanimous()) return 0;
      return p.verdict == Verdict::kCatch ? 1 : 2;
    };
    const std::size_t eligible = n - labeled.size();
    const std::string tag = "seed " + std::to_string(seed);
    v.expect(plan.selected.size() == std::min(k, eligible), tag + ": size");
    std::set<std::string> unique(plan.selected.begin(), plan.selected.end());
    v.expect(unique.size() == plan.selected.size(), tag + ": duplicates");
    for (std::size_t i = 0; i < plan.selected.size(); ++i) {
      v.expect(!labeled.count(plan.selected[i]), tag + ": already labeled selected");
      if (i > 0) v.expect(rank(plan.selected[i - 1]) <= rank(plan.selected[i]), tag + ": tier order");
    }
    // Nothing of a better tier may be left out while a worse one is in.
    if (!plan.selected.empty()) {
      const int worst = rank(plan.selected.back());
      for (const Prediction& p : preds)
        if (!labeled.count(p.comment_id) && rank(p.comment_id) < worst)
          v.expect(unique.count(p.comment_id) > 0, tag + ": skipped " + p.comment_id);
    }
  }
  return v.outcome("200 seeds");
}

// --- 5, 6, 8 -----------------------------------------------------------------

ExperimentConfig criterion_config() {
  ExperimentConfig c;
  c.corpus_size = 200;
  c.rule = default_experiment_rule(7);
  c.seed = 7;
  c.iterations = 3;
  return c;
}

Outcome convergence_direction() {
  ExperimentConfig c = criterion_config();
  c.conditions = {"promptimizer"};
  const Json r = run_experiment(c);
  Verdicts v;
  v.expect(!r.at("partial").get<bool>(), "report is partial");
  const auto sizes = r.at("split").at("sizes").get<std::vector<std::size_t>>();
  v.expect(sizes == std::vector<std::size_t>{20, 80, 100}, "split sizes");
  const Json& cond = r.at("conditions").at("promptimizer");
  const double draft = r.at("shared_init").at("draft_test_metrics").at("f1").get<double>();
  const double init = cond.at("post_init").at("test_metrics").at("f1").get<double>();
  const double iter = cond.at("post_iterations").at("test_metrics").at("f1").get<double>();
  v.expect(init - draft >= 0.10, "post-init gain " + fmt(init - draft) + " < 0.10");
  v.expect(iter - init >= 0.05, "iteration gain " + fmt(iter - init) + " < 0.05");
  return v.outcome("test F1 draft " + fmt(draft) + " -> post-init " + fmt(init) + " -> post-iterations " + fmt(iter));
}

Outcome budget_parity() {
  const Json r = run_experiment(criterion_config());
  Verdicts v;
  const Json& p = r.at("conditions").at("promptimizer");
  const Json& q = r.at("conditions").at("protegi");
  std::ostringstream counts;
  v.expect(p.at("init_rounds").size() == q.at("init_rounds").size(), "init round count");
  for (std::size_t i = 0; i < std::min(p.at("init_rounds").size(), q.at("init_rounds").size()); ++i) {
    const auto a = p.at("init_rounds")[i].at("candidates_evaluated").get<std::size_t>();
    const auto b = q.at("init_rounds")[i].at("candidates_evaluated").get<std::size_t>();
    v.expect(a == b, "init round " + std::to_string(i + 1));
    counts << "init" << i + 1 << " " << a << "/" << b << " ";
  }
  v.expect(p.at("iteration_rounds").size() == q.at("iteration_rounds").size(), "iteration round count");
  std::size_t compared = 0;
  for (std::size_t i = 0; i < std::min(p.at("iteration_rounds").size(), q.at("iteration_rounds").size()); ++i) {
    const Json& pr = p.at("iteration_rounds")[i];
    const auto a = pr.at("candidates_evaluated").get<std::size_t>();
    const auto b = q.at("iteration_rounds")[i].at("candidates_evaluated").get<std::size_t>();
    counts << "iter" << i + 1 << " " << a << "/" << b << " ";
    // A round with no mistakes to fix generates nothing in either condition's sense.
    if (pr.at("outcome") != "candidates") continue;
    ++compared;
    v.expect(a == b, "iteration round " + std::to_string(i + 1));
  }
  return v.outcome("evaluations promptimizer/protegi: " + counts.str() + "(" + std::to_string(compared) +
                   " iteration rounds compared)");
}

Outcome replay_determinism() {
  const ExperimentConfig c = criterion_config();
  const std::string a = strip_wall_time(run_experiment(c)).dump();
  const std::string b = strip_wall_time(run_experiment(c)).dump();
  Verdicts v;
  v.expect(a == b, "reports differ");
  return v.outcome(std::to_string(a.size()) + " bytes, identical");
}

// --- 7 -----------------------------------------------------------------------

Outcome baseline_monotonicity() {
  Verdicts v;
  std::size_t rounds = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto rule = default_experiment_rule(seed);
    rule.noise_rate = 0.0;
    const auto corpus = make_synthetic_corpus(rule, 60, 0.5, seed);
    const auto labeled = label_with(corpus);
    llm::Gateway gateway(std::make_shared<llm::SimulationBackend>(rule));
    Classifier classifier(gateway);
    BaselineOptimizer baseline(classifier);
    const FreestylePrompt start{"Catch comments that are spam or scams.", 1, std::nullopt};
    double prev = classifier.evaluate(as_filter_prompt(start), labeled, 0).metrics.accuracy;
    const BaselineResult r = baseline.optimize(start, labeled, {4, 2, 4}, seed);
    v.expect(!r.partial, "seed " + std::to_string(seed) + ": partial run");
    for (const SearchRound& round : r.rounds) {
      ++rounds;
      v.expect(round.best_score >= prev, "seed " + std::to_string(seed) + " round " + std::to_string(round.round));
      prev = round.best_score;
    }
    v.expect(r.best_metrics.accuracy == prev, "seed " + std::to_string(seed) + ": best differs from last round");
  }
  return v.outcome(std::to_string(rounds) + " rounds over 10 noise-free corpora");
}

// --- 9 -----------------------------------------------------------------------

Outcome cache_soundness() {
  const auto rule = default_experiment_rule();
  const auto corpus = make_synthetic_corpus(rule, 40, 0.5, 3);
  llm::Gateway gateway(std::make_shared<llm::SimulationBackend>(rule));
  Classifier classifier(gateway);
  const FilterPrompt v1 = draft_prompt("are spam or scams");
  Verdicts v;

  classifier.classify(v1, corpus.comments, 0);
  auto before = gateway.counts();
  classifier.classify(v1, corpus.comments, 0);
  const auto unchanged = (gateway.counts() - before).completions();
  v.expect(unchanged == 0, "unchanged filter issued " + std::to_string(unchanged) + " calls");

  const FilterPrompt v2 = apply_rubric_edit(
      v1, {EditDirection::kAddPositive, std::nullopt, std::nullopt, "Comments mentioning free money"});
  v.expect(v2.content_hash != v1.content_hash, "edit kept the hash");
  // Warm the new hash for the first 15 comments; only the other 25 may cost calls.
  const std::vector<Comment> head(corpus.comments.begin(), corpus.comments.begin() + 15);
  classifier.classify(v2, head, 0);
  before = gateway.counts();
  classifier.classify(v2, corpus.comments, 0);
  const auto edited = (gateway.counts() - before).completions();
  // 25 uncached comments: 5 batches of five, five runs each.
  v.expect(edited == 25, "edited filter issued " + std::to_string(edited) + " calls, expected 25");
  before = gateway.counts();
  classifier.classify(v2, corpus.comments, 0);
  v.expect((gateway.counts() - before).completions() == 0, "second pass after edit not cached");
  return v.outcome("unchanged: " + std::to_string(unchanged) + " calls; after edit: " + std::to_string(edited) +
                   " calls for 25 uncached comments");
}

// --- 10 ----------------------------------------------------------------------

Outcome split_protocol() {
  const auto rule = default_experiment_rule();
  const auto corpus = make_synthetic_corpus(rule, 200, 0.5, 7);
  llm::Gateway gateway(std::make_shared<llm::SimulationBackend>(rule));
  Classifier classifier(gateway);
  const FilterPrompt probe = draft_prompt("are spam or scams");

  llm::Gateway oracle_gateway(std::make_shared<llm::SimulationBackend>(rule));
  Classifier oracle(oracle_gateway);
  std::set<std::string> uncertain;
  for (const Prediction& p : oracle.classify(probe, corpus.comments, 0))
    if (!p.unanimous()) uncertain.insert(p.comment_id);

  Verdicts v;
  std::size_t min_train_uncertain = 1000;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const DatasetSplit s = split_dataset(classifier, corpus.comments, probe, seed);
    const std::string tag = "seed " + std::to_string(seed);
    v.expect(s.train.size() == 20 && s.audit.size() == 80 && s.test.size() == 100, tag + ": sizes");
    std::set<std::string> ids;
    for (const auto* part : {&s.train, &s.audit, &s.test})
      for (const Comment& c : *part) v.expect(ids.insert(c.id).second, tag + ": overlap on " + c.id);
    v.expect(ids.size() == 200, tag + ": coverage");
    std::size_t train_uncertain = 0;
    for (const Comment& c : s.train) train_uncertain += uncertain.count(c.id);
    min_train_uncertain = std::min(min_train_uncertain, train_uncertain);
    if (uncertain.size() >= 10) v.expect(train_uncertain >= 10, tag + ": uncertain in train");
  }
  return v.outcome(std::to_string(uncertain.size()) + " uncertain in corpus; min uncertain in train " +
                   std::to_string(min_train_uncertain));
}

// --- 11 ----------------------------------------------------------------------

Outcome metrics_identities() {
  Verdicts v;
  std::mt19937_64 gen(2026);
  for (int i = 0; i < 1000; ++i) {
    // Small ranges so empty denominators come up.
    const std::int64_t range = i % 4 == 0 ? 3 : 200;
    const std::int64_t tp = gen() % range, fp = gen() % range, fn = gen() % range, tn = gen() % range;
    const Metrics m = compute_metrics(tp, fp, fn, tn);
    const double total = static_cast<double>(tp + fp + fn + tn);
    const double acc = total == 0 ? 0.0 : (tp + tn) / total;
    const double p = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    // Harmonic mean written as 2tp / (2tp + fp + fn) where both denominators are non-empty.
    double f1 = p + r == 0 ? 0.0 : 2 * p * r / (p + r);
    if (tp + fp > 0 && tp + fn > 0) f1 = 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    const std::string tag = "matrix " + std::to_string(i);
    v.expect(std::abs(m.accuracy - acc) <= 1e-9, tag + ": accuracy");
    v.expect(std::abs(m.precision - p) <= 1e-9, tag + ": precision");
    v.expect(std::abs(m.recall - r) <= 1e-9, tag + ": recall");
    v.expect(std::abs(m.f1 - f1) <= 1e-9, tag + ": f1");
  }
  return v.outcome("1000 confusion matrices");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rubricopt acceptance checks"};
  int only = 0;
  app.add_option("--only", only, "Run a single check (1-11)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  using std::chrono::milliseconds;
  const std::vector<Check> checks = {
      {1, "majority-vote oracle", milliseconds(1000), majority_vote_oracle},
      {2, "batching arithmetic", milliseconds(5000), batching_arithmetic},
      {3, "candidate structural invariant", milliseconds(120000), candidate_structure},
      {4, "sampler ordering", milliseconds(10000), sampler_ordering},
      {5, "convergence direction", milliseconds(60000), convergence_direction},
      {6, "budget parity", milliseconds(120000), budget_parity},
      {7, "baseline monotonicity", milliseconds(60000), baseline_monotonicity},
      {8, "replay determinism", milliseconds(120000), replay_determinism},
      {9, "cache soundness", milliseconds(10000), cache_soundness},
      {10, "split protocol", milliseconds(60000), split_protocol},
      {11, "metrics identities", milliseconds(5000), metrics_identities},
  };

  int failed = 0;
  for (const Check& check : checks) {
    if (only != 0 && check.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = check.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const auto ms = std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - start);
    if (ms > check.limit) {
      outcome.pass = false;
      outcome.detail += "; exceeded time limit";
    }
    failed += !outcome.pass;
    std::printf("%s criterion %d (%s): %s [%lld ms, limit %lld ms]\n", outcome.pass ? "PASS" : "FAIL", check.id,
                check.name.c_str(), outcome.detail.c_str(), static_cast<long long>(ms.count()),
                static_cast<long long>(check.limit.count()));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
