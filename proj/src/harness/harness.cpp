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

#include "rubricopt/harness/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <array>
#include <set>

#include "rubricopt/core/prompt.hpp"
#include "rubricopt/core/rng.hpp"
#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"
#include "rubricopt/optimizer/json.hpp"

namespace rubricopt {

namespace {

constexpr std::array<std::string_view, 6> kPositiveTemplates = {
    "get your free {p} now",        "{p} link in my profile",   "best {p} deal you will ever see",
    "dm me for the {p} details",    "join the {p} channel today", "huge {p} happening right now"};
constexpr std::array<std::string_view, 4> kHardNegativeTemplates = {
    "this {n} of a {p} ad is hilarious", "love the {p} {n} at the end", "the {n} about {p} hype got me",
    "a {n} of every {p} video ever"};
constexpr std::array<std::string_view, 8> kPlainTemplates = {
    "great video thanks",          "the editing here is superb",     "who is watching this in winter",
    "that recipe looks delicious", "this song brings back memories", "i learned so much today",
    "the host is really funny",    "can you review the new phone"};
constexpr std::array<std::string_view, 12> kFiller = {"honestly", "wow",     "lol",    "really",
                                                      "today",    "again",   "friends", "guys",
                                                      "seriously", "tonight", "always", "yesterday"};

std::string fill(std::string_view tmpl, const std::string& p, const std::string& n) {
  std::string out(tmpl);
  for (auto [key, value] : {std::pair<std::string, std::string>{"{p}", p}, {"{n}", n}}) {
    const auto pos = out.find(key);
    if (pos != std::string::npos) out.replace(pos, key.size(), value);
  }
  return out;
}

template <typename Set>
const std::string& pick(const Set& set, KeyedRng& rng) {
  auto it = set.begin();
  std::advance(it, static_cast<long>(rng.below(set.size())));
  return *it;
}

Json counts_json(const llm::CallCounts& c) {
  Json j;
  for (TaskKind k : {TaskKind::kClassify, TaskKind::kReflect, TaskKind::kPropose, TaskKind::kSummarize,
                     TaskKind::kDraft})
    j[std::string(to_string(k))] = c.completions(k);
  j["completions"] = c.completions();
  j["embedding_calls"] = c.embedding_calls;
  j["embedded_texts"] = c.embedded_texts;
  return j;
}

Json ids_json(const std::vector<Comment>& comments) {
  Json out = Json::array();
  for (const auto& c : comments) out.push_back(c.id);
  return out;
}

std::int64_t elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - since).count();
}

// Inputs shared by every condition; read-only once built.
struct SharedStage {
  LabeledCorpus corpus;
  DatasetSplit split;
  std::vector<LabeledComment> train, audit, test;
  InitResult init;
};

struct Seeds {
  std::uint64_t corpus, split, init, iterations;
};

Seeds derive_seeds(std::uint64_t master) {
  return {master, mix_key({master, 0x53504cULL}), mix_key({master, 0x494e49ULL}), mix_key({master, 0x495445ULL})};
}

Json run_promptimizer(const ExperimentConfig& config, const SharedStage& shared, const Seeds& seeds) {
  const auto start = std::chrono::steady_clock::now();
  llm::Gateway gateway(std::make_shared<llm::SimulationBackend>(config.rule));
  Classifier classifier(gateway);
  Optimizer optimizer(classifier);
  const SimulatedUser user(shared.corpus.truth, config.rule, config.policy, config.seed);

  Json out;
  FilterPrompt current = shared.init.search.best;
  out["post_init"] = {{"prompt", current},
                      {"test_metrics", classifier.evaluate(current, shared.test, 0).metrics}};
  out["init_rounds"] = shared.init.search.rounds;

  Json rounds = Json::array();
  for (int r = 1; r <= config.iterations; ++r) {
    const OptimizerCounters before = optimizer.counters();
    const Evaluation incumbent = classifier.evaluate(current, shared.audit, 0);
    const Guidance guidance = user.guidance(incumbent.mistakes, r);
    const RoundResult result = optimizer.optimize_round(current, shared.audit, guidance,
                                                        config.expansions,
                                                        mix_key({seeds.iterations, static_cast<std::uint64_t>(r)}));
    const auto choice = user.choose(result.candidates);
    const OptimizerCounters spent = optimizer.counters() - before;
    Json entry{{"round", r},
               {"outcome", to_string(result.outcome)},
               {"guidance", std::holds_alternative<ClarifiedMistake>(guidance) ? "clarified_mistake"
                            : std::holds_alternative<FailurePattern>(guidance) ? "failure_pattern"
                                                                                : "largest_pattern"},
               {"incumbent_train_score", result.incumbent.accuracy},
               {"candidates_surfaced", result.candidates.size()},
               {"candidates_evaluated", spent.candidate_evaluations},
               {"generation_calls", spent.generation_calls},
               {"accepted", choice.has_value()}};
    if (choice) {
      const CandidateEdit& c = result.candidates[*choice];
      entry["accepted_rank"] = *choice + 1;
      entry["accepted_diff"] = c.diff;
      entry["accepted_train_score"] = c.train_score;
      current = c.child;
    }
    rounds.push_back(std::move(entry));
  }
  out["iteration_rounds"] = std::move(rounds);
  out["post_iterations"] = {{"prompt", current},
                            {"test_metrics", classifier.evaluate(current, shared.test, 0).metrics}};
  out["calls"] = counts_json(gateway.counts());
  out["wall_time_ms"] = elapsed_ms(start);
  return out;
}

Json trail_json(const BaselineResult& r) {
  Json trail = Json::array();
  for (const auto& e : r.trail)
    trail.push_back({{"round", e.round},
                     {"version", e.version},
                     {"parent_version", e.parent_version},
                     {"text", e.text},
                     {"gradient", e.gradient},
                     {"metrics", e.metrics},
                     {"kept", e.kept}});
  return trail;
}

Json run_protegi(const ExperimentConfig& config, const SharedStage& shared, const Seeds& seeds) {
  const auto start = std::chrono::steady_clock::now();
  llm::Gateway gateway(std::make_shared<llm::SimulationBackend>(config.rule));
  Classifier classifier(gateway);
  BaselineOptimizer baseline(classifier);

  Json out;
  const FreestylePrompt draft{shared.init.versions.front().description, 1, std::nullopt};
  const BaselineResult init = baseline.optimize(draft, shared.init.labels, config.init_budget, seeds.init);
  out["post_init"] = {{"prompt", init.best.text},
                      {"test_metrics", classifier.evaluate(as_filter_prompt(init.best), shared.test, 0).metrics}};
  out["init_rounds"] = init.rounds;
  out["init_trail"] = trail_json(init);

  // Iteration starts from the structured initialization, flattened.
  const SearchBudget budget{config.expansions, config.beam_width, config.iterations};
  const BaselineResult iter =
      baseline.optimize(freestyle_from(shared.init.search.best), shared.audit, budget, seeds.iterations);
  out["iteration_rounds"] = iter.rounds;
  out["iteration_trail"] = trail_json(iter);
  out["post_iterations"] = {{"prompt", iter.best.text},
                            {"test_metrics", classifier.evaluate(as_filter_prompt(iter.best), shared.test, 0).metrics}};
  if (init.partial || iter.partial) {
    out["partial"] = true;
    out["error"] = init.partial ? init.error : iter.error;
  }
  out["calls"] = counts_json(gateway.counts());
  out["wall_time_ms"] = elapsed_ms(start);
  return out;
}

}  // namespace

llm::SimulationRule default_experiment_rule(std::uint64_t seed) {
  llm::SimulationRule r;
  r.positive_lexicon = {"crypto", "giveaway", "promo"};
  r.negative_lexicon = {"parody"};
  r.noise_rate = 0.05;
  r.seed = seed;
  return r;
}

LabeledCorpus make_synthetic_corpus(const llm::SimulationRule& rule, std::size_t n, double positive_fraction,
                                    std::uint64_t seed) {
  rule.validate();
  if (n < 10) fail(ErrorCode::kInvalidArgument, "synthetic corpus needs at least 10 comments");
  if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0))
    fail(ErrorCode::kInvalidArgument, "positive_fraction must be in [0, 1]");
  if (rule.positive_lexicon.empty() || rule.negative_lexicon.empty())
    fail(ErrorCode::kInvalidArgument, "synthetic corpus needs both lexicons");

  const auto positives = static_cast<std::size_t>(std::llround(static_cast<double>(n) * positive_fraction));
  const std::size_t hard = (n - positives) / 2;
  // 0 positive, 1 hard negative, 2 plain negative; shuffled into place.
  std::vector<int> kinds(n, 2);
  std::fill(kinds.begin(), kinds.begin() + static_cast<long>(positives), 0);
  std::fill(kinds.begin() + static_cast<long>(positives), kinds.begin() + static_cast<long>(positives + hard), 1);
  seeded_shuffle(kinds, mix_key({seed, 0x4b494eULL}));

  std::vector<std::string_view> filler;
  for (auto w : kFiller)
    if (!rule.in_lexicon(w)) filler.push_back(w);

  LabeledCorpus out;
  const Timestamp base = parse_timestamp("2024-03-01T00:00:00Z");
  for (std::size_t i = 0; i < n; ++i) {
    KeyedRng rng(mix_key({seed, 0x434d54ULL, i}));
    std::string text;
    if (kinds[i] == 0) {
      text = fill(kPositiveTemplates[rng.below(kPositiveTemplates.size())], pick(rule.positive_lexicon, rng), "");
    } else if (kinds[i] == 1) {
      const auto tmpl = kHardNegativeTemplates[rng.below(kHardNegativeTemplates.size())];
      const std::string& p = pick(rule.positive_lexicon, rng);
      text = fill(tmpl, p, pick(rule.negative_lexicon, rng));
    } else {
      text = std::string(kPlainTemplates[rng.below(kPlainTemplates.size())]);
    }
    for (int k = 0; k < 2 && !filler.empty(); ++k) text += " " + std::string(filler[rng.below(filler.size())]);

    const Verdict intended = kinds[i] == 0 ? Verdict::kCatch : Verdict::kNotCatch;
    if (llm::rule_verdict(rule, text) != intended)
      fail(ErrorCode::kInvalidArgument, "rule lexicon collides with template words: " + text);

    Comment c;
    c.id = "s" + std::to_string(10000 + i).substr(1);
    c.text = std::move(text);
    c.author = "user" + std::to_string(rng.below(50));
    c.video_id = "v" + std::to_string(i % 4);
    c.published_at = base + std::chrono::hours(static_cast<long>(i) * 3);
    out.truth[c.id] = intended;
    out.comments.push_back(std::move(c));
  }
  return out;
}

LabeledCorpus load_corpus(const std::string& path, const llm::SimulationRule& rule) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "cannot open corpus " + path);
  LabeledCorpus out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Comment c;
    try {
      c = parse_comment_record(line);
    } catch (const Error& e) {
      fail(ErrorCode::kInvalidArgument, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (out.truth.count(c.id)) fail(ErrorCode::kInvalidArgument, "duplicate comment id " + c.id);
    out.truth[c.id] = llm::rule_verdict(rule, c.text);
    out.comments.push_back(std::move(c));
  }
  return out;
}

DatasetSplit split_dataset(Classifier& classifier, std::span<const Comment> corpus, const FilterPrompt& probe,
                           std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (n < 10) fail(ErrorCode::kInvalidArgument, "corpus needs at least 10 comments to split");
  std::size_t train_n = 20, audit_n = 80, test_n = 100;
  if (n < 200) {
    const std::size_t unit = n / 10;
    train_n = unit;
    audit_n = 4 * unit;
    test_n = 5 * unit;
  }

  const auto predictions = classifier.classify(probe, corpus, 0);
  std::vector<std::size_t> uncertain, rest;
  for (std::size_t i = 0; i < n; ++i) (predictions[i].unanimous() ? rest : uncertain).push_back(i);
  auto by_id = [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; };
  std::sort(uncertain.begin(), uncertain.end(), by_id);
  seeded_shuffle(uncertain, mix_key({seed, 0x554e43ULL}));

  DatasetSplit split;
  split.corpus_uncertain = uncertain.size();
  const std::size_t take = std::min({std::size_t{10}, train_n, uncertain.size()});
  for (std::size_t i = 0; i < take; ++i) split.train.push_back(corpus[uncertain[i]]);
  split.train_uncertain = take;
  rest.insert(rest.end(), uncertain.begin() + static_cast<long>(take), uncertain.end());
  std::sort(rest.begin(), rest.end(), by_id);
  seeded_shuffle(rest, mix_key({seed, 0x524553ULL}));

  std::size_t next = 0;
  auto fill_to = [&](std::vector<Comment>& part, std::size_t size) {
    while (part.size() < size && next < rest.size()) part.push_back(corpus[rest[next++]]);
  };
  fill_to(split.train, train_n);
  fill_to(split.audit, audit_n);
  fill_to(split.test, test_n);
  // Uncertain comments that landed in train through the random fill count too.
  std::set<std::string> unc_ids;
  for (std::size_t i : uncertain) unc_ids.insert(corpus[i].id);
  split.train_uncertain = static_cast<std::size_t>(
      std::count_if(split.train.begin(), split.train.end(), [&](const Comment& c) { return unc_ids.count(c.id); }));
  return split;
}

std::string_view to_string(IterationPolicy p) {
  switch (p) {
    case IterationPolicy::kFirstMistake: return "first_mistake";
    case IterationPolicy::kLargestPattern: return "largest_pattern";
    case IterationPolicy::kRandomMistake: return "random_mistake";
  }
  return "largest_pattern";
}

IterationPolicy parse_iteration_policy(std::string_view text) {
  for (auto p : {IterationPolicy::kFirstMistake, IterationPolicy::kLargestPattern, IterationPolicy::kRandomMistake})
    if (to_string(p) == text) return p;
  fail(ErrorCode::kInvalidArgument, "unknown iteration policy: " + std::string(text));
}

SimulatedUser::SimulatedUser(std::map<std::string, Verdict> truth, llm::SimulationRule rule, IterationPolicy policy,
                             std::uint64_t seed)
    : truth_(std::move(truth)), rule_(std::move(rule)), policy_(policy), seed_(seed) {}

Verdict SimulatedUser::label(const Comment& comment) const {
  auto it = truth_.find(comment.id);
  if (it == truth_.end()) fail(ErrorCode::kNotFound, "no ground truth for comment " + comment.id);
  return it->second;
}

std::vector<LabeledComment> SimulatedUser::label_all(std::span<const Comment> comments) const {
  std::vector<LabeledComment> out;
  out.reserve(comments.size());
  for (const Comment& c : comments) out.push_back({c, label(c)});
  return out;
}

Guidance SimulatedUser::guidance(std::span<const Mistake> mistakes, int round) const {
  if (mistakes.empty() || policy_ == IterationPolicy::kLargestPattern) return std::monostate{};
  std::size_t index = 0;
  if (policy_ == IterationPolicy::kRandomMistake)
    index = static_cast<std::size_t>(mix_key({seed_, 0x524e44ULL, static_cast<std::uint64_t>(round)}) %
                                     mistakes.size());
  return ClarifiedMistake{mistakes[index], clarification(mistakes[index])};
}

std::string SimulatedUser::clarification(const Mistake& mistake) const {
  const bool want_catch = mistake.gold == Verdict::kCatch;
  const auto& lexicon = want_catch ? rule_.positive_lexicon : rule_.negative_lexicon;
  for (const auto& kw : llm::lexicon_keywords(rule_, mistake.comment.text)) {
    if (!lexicon.count(kw)) continue;
    return "Comments mentioning " + kw + (want_catch ? " should be caught." : " should not be caught.");
  }
  return want_catch ? "This comment should be caught." : "This comment is unrelated to what I want caught.";
}

std::optional<std::size_t> SimulatedUser::choose(std::span<const CandidateEdit> candidates) const {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const EditDirection d = candidates[i].diff.direction;
    const bool positive = d == EditDirection::kAddPositive || d == EditDirection::kEditPositive;
    const auto& lexicon = positive ? rule_.positive_lexicon : rule_.negative_lexicon;
    const auto kws = llm::lexicon_keywords(rule_, candidates[i].diff.after_text);
    if (kws.empty()) continue;
    if (std::all_of(kws.begin(), kws.end(), [&](const std::string& kw) { return lexicon.count(kw) > 0; })) return i;
  }
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  rule.validate();
  if (!corpus_path && corpus_size < 10) fail(ErrorCode::kInvalidArgument, "corpus_size must be at least 10");
  if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0))
    fail(ErrorCode::kInvalidArgument, "positive_fraction must be in [0, 1]");
  if (conditions.empty()) fail(ErrorCode::kInvalidArgument, "no conditions requested");
  for (const auto& c : conditions)
    if (c != "promptimizer" && c != "protegi") fail(ErrorCode::kInvalidArgument, "unknown condition: " + c);
  if (iterations < 0) fail(ErrorCode::kInvalidArgument, "iterations must not be negative");
  if (expansions < 1 || beam_width < 1) fail(ErrorCode::kInvalidArgument, "expansions and beam must be positive");
  init_budget.validate();
  if (trim(target_description).empty()) fail(ErrorCode::kInvalidArgument, "target_description is empty");
}

Json to_json(const ExperimentConfig& c) {
  return Json{{"corpus_path", c.corpus_path},
              {"corpus_size", c.corpus_size},
              {"positive_fraction", c.positive_fraction},
              {"rule",
               {{"positive_lexicon", c.rule.positive_lexicon},
                {"negative_lexicon", c.rule.negative_lexicon},
                {"noise_rate", c.rule.noise_rate},
                {"seed", c.rule.seed}}},
              {"target_description", c.target_description},
              {"conditions", c.conditions},
              {"iterations", c.iterations},
              {"init_budget",
               {{"expansions_per_round", c.init_budget.expansions_per_round},
                {"beam_width", c.init_budget.beam_width},
                {"rounds", c.init_budget.rounds}}},
              {"expansions", c.expansions},
              {"beam_width", c.beam_width},
              {"policy", to_string(c.policy)},
              {"seed", c.seed},
              {"parallel_conditions", c.parallel_conditions}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("corpus_path") && !j.at("corpus_path").is_null())
      c.corpus_path = j.at("corpus_path").get<std::string>();
    c.corpus_size = j.value("corpus_size", c.corpus_size);
    c.positive_fraction = j.value("positive_fraction", c.positive_fraction);
    if (j.contains("rule")) {
      const Json& r = j.at("rule");
      c.rule.positive_lexicon = r.at("positive_lexicon").get<std::set<std::string>>();
      c.rule.negative_lexicon = r.at("negative_lexicon").get<std::set<std::string>>();
      c.rule.noise_rate = r.value("noise_rate", c.rule.noise_rate);
      c.rule.seed = r.value("seed", c.rule.seed);
    }
    c.target_description = j.value("target_description", c.target_description);
    c.conditions = j.value("conditions", c.conditions);
    c.iterations = j.value("iterations", c.iterations);
    if (j.contains("init_budget")) {
      const Json& b = j.at("init_budget");
      c.init_budget = {b.at("expansions_per_round").get<int>(), b.at("beam_width").get<int>(),
                       b.at("rounds").get<int>()};
    }
    c.expansions = j.value("expansions", c.expansions);
    c.beam_width = j.value("beam_width", c.beam_width);
    if (j.contains("policy")) c.policy = parse_iteration_policy(j.at("policy").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.parallel_conditions = j.value("parallel_conditions", c.parallel_conditions);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("bad experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

Json run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const Seeds seeds = derive_seeds(config.seed);

  Json report;
  report["schema_version"] = kReportSchemaVersion;
  report["config"] = to_json(config);
  report["seeds"] = {{"master", config.seed},
                     {"corpus", seeds.corpus},
                     {"split", seeds.split},
                     {"init", seeds.init},
                     {"iterations", seeds.iterations},
                     {"rule", config.rule.seed}};
  report["partial"] = false;
  report["errors"] = Json::array();
  report["conditions"] = Json::object();

  SharedStage shared;
  try {
    const auto shared_start = std::chrono::steady_clock::now();
    shared.corpus = config.corpus_path
                        ? load_corpus(*config.corpus_path, config.rule)
                        : make_synthetic_corpus(config.rule, config.corpus_size, config.positive_fraction, seeds.corpus);
    std::size_t positives = 0;
    for (const auto& [id, v] : shared.corpus.truth) positives += v == Verdict::kCatch;
    report["corpus"] = {{"source", config.corpus_path ? *config.corpus_path : std::string("synthetic")},
                        {"size", shared.corpus.comments.size()},
                        {"positives", positives}};

    llm::Gateway gateway(std::make_shared<llm::SimulationBackend>(config.rule));
    Classifier classifier(gateway);
    Optimizer optimizer(classifier);
    const SimulatedUser user(shared.corpus.truth, config.rule, config.policy, config.seed);

    FilterPrompt probe;
    probe.description = config.target_description;
    probe = with_hash(std::move(probe));
    shared.split = split_dataset(classifier, shared.corpus.comments, probe, seeds.split);
    shared.train = user.label_all(shared.split.train);
    shared.audit = user.label_all(shared.split.audit);
    shared.test = user.label_all(shared.split.test);
    report["split"] = {{"sizes", {shared.split.train.size(), shared.split.audit.size(), shared.split.test.size()}},
                       {"corpus_uncertain", shared.split.corpus_uncertain},
                       {"train_uncertain", shared.split.train_uncertain},
                       {"train_ids", ids_json(shared.split.train)},
                       {"audit_ids", ids_json(shared.split.audit)},
                       {"test_ids", ids_json(shared.split.test)}};

    InitOptions options;
    options.labeling_k = std::max<std::size_t>(1, shared.split.train.size());
    options.budget = config.init_budget;
    shared.init = optimizer.initialize_filter("experiment", "experiment", DraftSeed{config.target_description, {}},
                                              shared.split.train,
                                              [&](const Comment& c) { return user.label(c); }, options, seeds.init);
    const FilterPrompt& draft = shared.init.versions.front();
    report["shared_init"] = {{"draft_prompt", draft},
                             {"draft_test_metrics", classifier.evaluate(draft, shared.test, 0).metrics},
                             {"versions", shared.init.versions},
                             {"search_rounds", shared.init.search.rounds},
                             {"calls", counts_json(gateway.counts())},
                             {"wall_time_ms", elapsed_ms(shared_start)}};
  } catch (const std::exception& e) {
    report["partial"] = true;
    report["errors"].push_back({{"stage", "shared"}, {"message", e.what()}});
    report["wall_time_ms"] = elapsed_ms(start);
    return report;
  }

  auto run_condition = [&](const std::string& name) -> Json {
    try {
      return name == "promptimizer" ? run_promptimizer(config, shared, seeds) : run_protegi(config, shared, seeds);
    } catch (const std::exception& e) {
      return Json{{"error", e.what()}};
    }
  };

  std::vector<Json> results(config.conditions.size());
  if (config.parallel_conditions) {
    std::vector<std::future<Json>> futures;
    for (const auto& name : config.conditions)
      futures.push_back(std::async(std::launch::async, run_condition, name));
    for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < config.conditions.size(); ++i) results[i] = run_condition(config.conditions[i]);
  }
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string& name = config.conditions[i];
    if (results[i].contains("error")) {
      report["partial"] = true;
      report["errors"].push_back({{"stage", name}, {"message", results[i].at("error")}});
    }
    report["conditions"][name] = std::move(results[i]);
  }
  report["wall_time_ms"] = elapsed_ms(start);
  return report;
}

Json strip_wall_time(Json report) {
  if (report.is_object()) {
    report.erase("wall_time_ms");
    for (auto& [key, value] : report.items()) value = strip_wall_time(std::move(value));
  } else if (report.is_array()) {
    for (auto& value : report) value = strip_wall_time(std::move(value));
  }
  return report;
}

}  // namespace rubricopt
