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

#include "rubricopt/optimizer/optimizer.hpp"

#include <algorithm>
#include <exception>
#include <set>

#include "rubricopt/core/prompt.hpp"
#include "rubricopt/core/rng.hpp"
#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"
#include "rubricopt/optimizer/cluster.hpp"

namespace rubricopt {

namespace {

constexpr std::size_t kMaxRubricChars = 500;

CommentView view_of(const Mistake& m) { return CommentView{m.comment.text, m.predicted, m.gold}; }

std::vector<CommentView> views_of(std::span<const Mistake> mistakes, std::size_t limit) {
  std::vector<CommentView> out;
  for (const Mistake& m : mistakes) {
    if (out.size() >= limit) break;
    out.push_back(view_of(m));
  }
  return out;
}

// First non-empty line, trimmed and stripped of surrounding quotes.
std::string first_line(const std::string& response) {
  for (const auto& line : split_lines(response)) {
    std::string_view t = trim(line);
    if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front())
      t = trim(t.substr(1, t.size() - 2));
    if (!t.empty()) return std::string(t);
  }
  return {};
}

EditDirection add_direction(Polarity p) {
  return p == Polarity::kPositive ? EditDirection::kAddPositive : EditDirection::kAddNegative;
}

EditDirection edit_direction(Polarity p) {
  return p == Polarity::kPositive ? EditDirection::kEditPositive : EditDirection::kEditNegative;
}

Polarity other(Polarity p) { return p == Polarity::kPositive ? Polarity::kNegative : Polarity::kPositive; }

bool metrics_before(const Metrics& a, const Metrics& b) {
  if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
  return a.f1 > b.f1;
}

}  // namespace

CandidateTarget CandidateTarget::from(const FailurePattern& pattern) {
  CandidateTarget t;
  t.mistakes = pattern.members;
  if (!pattern.summary.empty()) t.notes.push_back(pattern.summary);
  t.notes.insert(t.notes.end(), pattern.reflections.begin(), pattern.reflections.end());
  return t;
}

CandidateTarget CandidateTarget::from(const ClarifiedMistake& clarified) {
  CandidateTarget t;
  t.mistakes.push_back(clarified.mistake);
  if (!trim(clarified.rationale).empty()) t.notes.emplace_back(trim(clarified.rationale));
  return t;
}

Polarity CandidateTarget::polarity() const {
  std::size_t missed = 0, wrong = 0;
  for (const Mistake& m : mistakes) (m.false_positive() ? wrong : missed)++;
  return missed >= wrong ? Polarity::kPositive : Polarity::kNegative;
}

bool ranks_before(const CandidateEdit& a, const CandidateEdit& b) {
  if (a.train_score != b.train_score) return a.train_score > b.train_score;
  if (a.metrics.f1 != b.metrics.f1) return a.metrics.f1 > b.metrics.f1;
  return a.introduced < b.introduced;
}

void SearchBudget::validate() const {
  if (expansions_per_round < 1) fail(ErrorCode::kInvalidArgument, "expansions_per_round must be positive");
  if (beam_width < 1) fail(ErrorCode::kInvalidArgument, "beam_width must be positive");
  if (rounds < 0) fail(ErrorCode::kInvalidArgument, "rounds must not be negative");
}

std::string_view to_string(RoundOutcome o) {
  switch (o) {
    case RoundOutcome::kCandidates: return "candidates";
    case RoundOutcome::kNothingToFix: return "nothing_to_fix";
    case RoundOutcome::kNoViableIteration: return "no_viable_iteration";
  }
  return "candidates";
}

std::vector<FailurePattern> cluster_reflections(std::span<const Reflection> reflections, double eps,
                                                std::size_t min_points) {
  const std::size_t n = reflections.size();
  if (n == 0) return {};
  std::vector<llm::EmbeddingVector> points;
  points.reserve(n);
  for (const auto& r : reflections) points.push_back(r.embedding);
  const auto labels = dbscan(cosine_distance_matrix(points), n, eps, min_points);

  std::map<int, std::vector<std::size_t>> groups;
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) clusters.push_back({i});
    else groups[labels[i]].push_back(i);
  }
  for (auto& [label, members] : groups) clusters.push_back(std::move(members));

  auto min_id = [&](const std::vector<std::size_t>& c) {
    std::string best = reflections[c.front()].mistake.comment.id;
    for (std::size_t i : c) best = std::min(best, reflections[i].mistake.comment.id);
    return best;
  };
  std::vector<std::pair<std::string, std::vector<std::size_t>>> keyed;
  for (auto& c : clusters) {
    std::sort(c.begin(), c.end());
    keyed.emplace_back(min_id(c), std::move(c));
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.second.size() != b.second.size()) return a.second.size() > b.second.size();
    return a.first < b.first;
  });

  std::vector<FailurePattern> out;
  for (std::size_t k = 0; k < keyed.size(); ++k) {
    FailurePattern p;
    p.pattern_id = "fp-" + std::to_string(k + 1);
    for (std::size_t i : keyed[k].second) {
      p.members.push_back(reflections[i].mistake);
      p.reflections.push_back(reflections[i].text);
    }
    out.push_back(std::move(p));
  }
  return out;
}

Optimizer::Optimizer(Classifier& classifier, OptimizerConfig config)
    : classifier_(classifier), config_(config) {
  if (config_.cluster_eps <= 0 || config_.cluster_min_points < 1 || config_.max_surfaced < 1)
    fail(ErrorCode::kInvalidArgument, "invalid optimizer configuration");
}

OptimizerCounters Optimizer::counters() const {
  return {generation_calls_.load(), candidate_evaluations_.load(), reflections_.load()};
}

Evaluation Optimizer::evaluate(const FilterPrompt& prompt, std::span<const LabeledComment> labeled) {
  return classifier_.evaluate(prompt, labeled, config_.evaluation_seed);
}

std::string Optimizer::draft_description(const DraftSeed& seed, std::uint64_t rng_seed) {
  const bool has_description = seed.description && !trim(*seed.description).empty();
  if (!has_description && seed.example_comments.empty())
    fail(ErrorCode::kInvalidArgument, "a draft needs a description or example comments");
  DraftTask task;
  if (has_description) task.description = std::string(trim(*seed.description));
  task.example_comments = seed.example_comments;
  FilterPrompt blank;
  const std::string out(trim(classifier_.gateway().run(blank, task, rng_seed)));
  if (out.empty()) fail(ErrorCode::kProtocol, "draft came back empty");
  return out;
}

Reflection Optimizer::reflect(const FilterPrompt& prompt, const Mistake& mistake, std::uint64_t seed) {
  auto all = reflect_all(prompt, std::span<const Mistake>(&mistake, 1), seed);
  return std::move(all.front());
}

std::vector<Reflection> Optimizer::reflect_all(const FilterPrompt& prompt, std::span<const Mistake> mistakes,
                                               std::uint64_t seed) {
  for (const Mistake& m : mistakes)
    if (m.predicted == m.gold) fail(ErrorCode::kInvalidArgument, "reflect needs a misclassified comment");
  if (mistakes.empty()) return {};

  std::vector<Reflection> out(mistakes.size());
  std::vector<std::exception_ptr> errors(mistakes.size());
  const long n = static_cast<long>(mistakes.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      ReflectTask task;
      task.mode = ReflectTask::Mode::kMistake;
      task.comments.push_back(view_of(mistakes[i]));
      std::string text(trim(classifier_.gateway().run(prompt, task, mix_key({seed, 0x5245ULL,
                                                                              static_cast<std::uint64_t>(i)}))));
      if (text.empty()) fail(ErrorCode::kProtocol, "empty reflection");
      out[i].mistake = mistakes[i];
      out[i].text = std::move(text);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  reflections_ += mistakes.size();

  std::vector<std::string> texts;
  for (const auto& r : out) texts.push_back(r.text);
  auto vectors = classifier_.gateway().embed(texts);
  if (vectors.size() != out.size()) fail(ErrorCode::kProtocol, "embedding count mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) out[i].embedding = std::move(vectors[i]);
  return out;
}

std::string Optimizer::summarize_pattern(const FilterPrompt& prompt, const FailurePattern& pattern,
                                         std::uint64_t seed) {
  if (pattern.members.empty()) fail(ErrorCode::kInvalidArgument, "empty failure pattern");
  SummarizeTask task;
  task.reflections = pattern.reflections;
  task.comments = views_of(pattern.members, config_.max_prompt_comments);
  std::string out(trim(classifier_.gateway().run(prompt, task, seed)));
  if (out.empty() && !pattern.reflections.empty()) out = pattern.reflections.front();
  return out;
}

std::vector<FailurePattern> Optimizer::analyze_failures(const FilterPrompt& prompt,
                                                        std::span<const Mistake> mistakes, std::uint64_t seed) {
  const auto reflections = reflect_all(prompt, mistakes, seed);
  auto patterns = cluster_reflections(reflections, config_.cluster_eps, config_.cluster_min_points);
  for (std::size_t i = 0; i < patterns.size(); ++i)
    patterns[i].summary = summarize_pattern(prompt, patterns[i], mix_key({seed, 0x53554dULL, i}));
  return patterns;
}

std::optional<CandidateEdit> Optimizer::parse_candidate(const FilterPrompt& parent, ProposeTask::Mode mode,
                                                        Polarity polarity, const Rubric* target,
                                                        const std::string& response) {
  const std::string text = first_line(response);
  if (text.empty() || to_lower(text) == "none" || text.size() > kMaxRubricChars) return std::nullopt;
  for (const auto* list : {&parent.positive_rubrics, &parent.negative_rubrics})
    for (const Rubric& r : *list)
      if (r.text == text) return std::nullopt;

  CandidateEdit c;
  if (mode == ProposeTask::Mode::kAddRubric) {
    c.diff.direction = add_direction(polarity);
  } else {
    c.diff.direction = edit_direction(polarity);
    c.diff.rubric_id = target->rubric_id;
    c.diff.before_text = target->text;
  }
  c.diff.after_text = text;
  c.child = apply_rubric_edit(parent, c.diff);
  return c;
}

std::vector<CandidateEdit> Optimizer::generate_candidates(const FilterPrompt& parent,
                                                          const CandidateTarget& target, int expansions,
                                                          std::uint64_t seed) {
  if (expansions < 1) fail(ErrorCode::kInvalidArgument, "expansions must be positive");
  if (target.mistakes.empty()) fail(ErrorCode::kInvalidArgument, "candidate target has no mistakes");

  const FilterPrompt base = parent.content_hash.empty() ? with_hash(parent) : parent;
  const bool add_allowed = base.rubric_count() < config_.rubric_soft_cap;
  const auto comments = views_of(target.mistakes, config_.max_prompt_comments);

  std::vector<CandidateEdit> out;
  std::set<std::string> seen{base.content_hash};
  int call = 0;

  // Slot k of a polarity alternates Add and Edit when both are possible;
  // variants and edit targets rotate so every slot asks for something new.
  auto run_slot = [&](Polarity pol, int k) {
    const auto& existing = base.rubrics(pol);
    ProposeTask task;
    task.polarity = pol;
    task.notes = target.notes;
    task.comments = comments;
    const Rubric* edit_target = nullptr;
    const int n = static_cast<int>(existing.size());
    bool add;
    int index;
    if (add_allowed && n > 0) {
      add = k % 2 == 0;
      index = k / 2;
    } else {
      add = add_allowed;
      index = k;
    }
    if (add) {
      task.mode = ProposeTask::Mode::kAddRubric;
      task.variant = index;
    } else {
      if (n == 0) {
        ++call;
        return false;
      }
      edit_target = &existing[static_cast<std::size_t>(index % n)];
      task.mode = ProposeTask::Mode::kEditRubric;
      task.target_rubric_id = edit_target->rubric_id;
      task.variant = index / n;
    }
    const std::string response =
        classifier_.gateway().run(base, task, mix_key({seed, 0x50524fULL, static_cast<std::uint64_t>(call++)}));
    generation_calls_++;
    auto c = parse_candidate(base, task.mode, pol, edit_target, response);
    if (!c || !seen.insert(c->child.content_hash).second) return false;
    out.push_back(std::move(*c));
    return true;
  };

  const Polarity primary = target.polarity();
  const int first_phase = (expansions + 1) / 2;
  int k = 0;
  for (; k < first_phase; ++k) run_slot(primary, k);
  if (out.size() < std::min<std::size_t>(2, static_cast<std::size_t>(first_phase))) {
    for (int j = 0; k < expansions; ++k, ++j) run_slot(other(primary), j);
  } else {
    for (; k < expansions; ++k) run_slot(primary, k);
  }
  return out;
}

void Optimizer::score_candidates(std::vector<CandidateEdit>& candidates, const Evaluation& incumbent,
                                 std::span<const LabeledComment> labeled) {
  for (CandidateEdit& c : candidates) {
    const Evaluation e = evaluate(c.child, labeled);
    candidate_evaluations_++;
    c.metrics = e.metrics;
    c.train_score = e.metrics.accuracy;
    c.resolved = c.introduced = 0;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      const bool was_right = incumbent.predictions[i].verdict == labeled[i].gold;
      const bool now_right = e.predictions[i].verdict == labeled[i].gold;
      if (!was_right && now_right) ++c.resolved;
      if (was_right && !now_right) ++c.introduced;
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), ranks_before);
}

RoundResult Optimizer::optimize_round(const FilterPrompt& prompt, std::span<const LabeledComment> labeled,
                                      const Guidance& guidance, int expansions, std::uint64_t seed) {
  if (labeled.empty()) fail(ErrorCode::kInvalidArgument, "optimization needs labeled comments");
  const FilterPrompt base = prompt.content_hash.empty() ? with_hash(prompt) : prompt;
  RoundResult result;
  const Evaluation incumbent = evaluate(base, labeled);
  result.incumbent = incumbent.metrics;
  result.incumbent_mistakes = incumbent.mistakes.size();
  if (incumbent.mistakes.empty()) {
    result.outcome = RoundOutcome::kNothingToFix;
    return result;
  }

  CandidateTarget target;
  if (const auto* pattern = std::get_if<FailurePattern>(&guidance)) {
    target = CandidateTarget::from(*pattern);
  } else if (const auto* clarified = std::get_if<ClarifiedMistake>(&guidance)) {
    target = CandidateTarget::from(*clarified);
  } else {
    const auto reflections = reflect_all(base, incumbent.mistakes, seed);
    result.patterns = cluster_reflections(reflections, config_.cluster_eps, config_.cluster_min_points);
    result.patterns.front().summary = summarize_pattern(base, result.patterns.front(), seed);
    target = CandidateTarget::from(result.patterns.front());
  }

  auto candidates = generate_candidates(base, target, expansions, seed);
  score_candidates(candidates, incumbent, labeled);
  result.candidates_evaluated = candidates.size();
  if (candidates.empty()) {
    result.outcome = RoundOutcome::kNoViableIteration;
    return result;
  }
  if (candidates.size() > config_.max_surfaced) candidates.resize(config_.max_surfaced);
  result.candidates = std::move(candidates);
  result.outcome = RoundOutcome::kCandidates;
  return result;
}

SearchResult Optimizer::automatic_search(const FilterPrompt& start, std::span<const LabeledComment> labeled,
                                         const SearchBudget& budget, std::uint64_t seed) {
  budget.validate();
  if (labeled.empty()) fail(ErrorCode::kInvalidArgument, "optimization needs labeled comments");

  struct Member {
    FilterPrompt prompt;
    Evaluation eval;
    std::vector<FilterPrompt> path;
  };
  std::vector<Member> beam;
  {
    FilterPrompt s = start.content_hash.empty() ? with_hash(start) : start;
    Evaluation e = evaluate(s, labeled);
    beam.push_back({std::move(s), std::move(e), {}});
  }

  SearchResult result;
  for (int round = 0; round < budget.rounds; ++round) {
    const OptimizerCounters before = counters();
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < beam.size(); ++i)
      if (!beam[i].eval.mistakes.empty()) active.push_back(i);

    std::vector<Member> children;
    if (!active.empty()) {
      const std::size_t m = active.size();
      const std::size_t b = static_cast<std::size_t>(budget.expansions_per_round);
      for (std::size_t slot = 0; slot < m && slot < b; ++slot) {
        const Member& parent = beam[active[slot]];
        const int share = static_cast<int>(b / m + (slot < b % m ? 1 : 0));
        const std::uint64_t member_seed =
            mix_key({seed, 0x4245414dULL, static_cast<std::uint64_t>(round), slot});
        const auto reflections = reflect_all(parent.prompt, parent.eval.mistakes, member_seed);
        auto patterns = cluster_reflections(reflections, config_.cluster_eps, config_.cluster_min_points);
        patterns.front().summary = summarize_pattern(parent.prompt, patterns.front(), member_seed);
        auto candidates =
            generate_candidates(parent.prompt, CandidateTarget::from(patterns.front()), share, member_seed);
        for (CandidateEdit& c : candidates) {
          Evaluation e = evaluate(c.child, labeled);
          candidate_evaluations_++;
          auto path = parent.path;
          path.push_back(c.child);
          children.push_back({std::move(c.child), std::move(e), std::move(path)});
        }
      }
    }

    // Incumbents come first so a tie never displaces them.
    std::vector<Member> pool = std::move(beam);
    for (auto& c : children) pool.push_back(std::move(c));
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Member& a, const Member& b) { return metrics_before(a.eval.metrics, b.eval.metrics); });
    std::set<std::string> kept;
    beam.clear();
    for (auto& mbr : pool) {
      if (beam.size() >= static_cast<std::size_t>(budget.beam_width)) break;
      if (!kept.insert(mbr.prompt.content_hash).second) continue;
      beam.push_back(std::move(mbr));
    }

    const OptimizerCounters spent = counters() - before;
    result.rounds.push_back({round + 1, static_cast<std::size_t>(spent.candidate_evaluations),
                             static_cast<std::size_t>(spent.generation_calls), beam.front().eval.metrics.accuracy});
  }

  result.best = beam.front().prompt;
  result.best_metrics = beam.front().eval.metrics;
  result.lineage = beam.front().path;
  return result;
}

InitResult Optimizer::initialize_filter(const std::string& filter_id, const std::string& name,
                                        const DraftSeed& seed, std::span<const Comment> pool,
                                        const Labeler& labeler, const InitOptions& options,
                                        std::uint64_t rng_seed) {
  if (pool.empty()) fail(ErrorCode::kInvalidArgument, "initialization needs a comment pool");
  if (!labeler) fail(ErrorCode::kInvalidArgument, "initialization needs a labeler");
  options.budget.validate();

  InitResult result;
  FilterPrompt v1;
  v1.filter_id = filter_id;
  v1.name = name;
  v1.description = draft_description(seed, mix_key({rng_seed, 0x445241ULL}));
  v1.version = 1;
  v1 = with_hash(std::move(v1));
  result.versions.push_back(v1);

  result.draft_predictions = classifier_.classify(v1, pool, config_.evaluation_seed);
  result.plan = select_for_labeling(result.draft_predictions, {}, options.labeling_k, rng_seed);
  std::map<std::string, const Comment*> by_id;
  for (const Comment& c : pool) by_id[c.id] = &c;
  std::vector<LabeledComment> labels;
  for (const auto& id : result.plan.selected) labels.push_back({*by_id.at(id), labeler(*by_id.at(id))});

  InitResult rest = complete_initialization(v1, result.draft_predictions, std::move(labels), options.budget, rng_seed);
  rest.plan = std::move(result.plan);
  rest.draft_predictions = std::move(result.draft_predictions);
  return rest;
}

InitResult Optimizer::complete_initialization(const FilterPrompt& v1, std::span<const Prediction> draft_predictions,
                                              std::vector<LabeledComment> labels, const SearchBudget& budget,
                                              std::uint64_t rng_seed) {
  budget.validate();
  InitResult result;
  result.versions.push_back(v1);
  result.labels = std::move(labels);
  std::map<std::string, const Prediction*> pred_by_id;
  for (const Prediction& p : draft_predictions) pred_by_id[p.comment_id] = &p;
  for (const auto& l : result.labels)
    if (!pred_by_id.count(l.comment.id))
      fail(ErrorCode::kInvalidArgument, "no draft prediction for labeled comment " + l.comment.id);

  // Few-shot examples: the most confident correct draft predictions, two per
  // verdict.
  std::vector<const LabeledComment*> correct;
  for (const auto& l : result.labels)
    if (pred_by_id.at(l.comment.id)->verdict == l.gold) correct.push_back(&l);
  seeded_shuffle(correct, mix_key({rng_seed, 0x455841ULL}));
  std::stable_sort(correct.begin(), correct.end(), [&](const LabeledComment* a, const LabeledComment* b) {
    return pred_by_id.at(a->comment.id)->confidence > pred_by_id.at(b->comment.id)->confidence;
  });
  std::vector<FewShotExample> examples;
  for (Verdict v : {Verdict::kCatch, Verdict::kNotCatch}) {
    int taken = 0;
    for (const LabeledComment* l : correct)
      if (l->gold == v && taken < 2) {
        examples.push_back({l->comment.text, v, std::nullopt});
        ++taken;
      }
  }
  FilterPrompt current = v1;
  if (!examples.empty()) {
    FilterPrompt v2 = v1;
    v2.examples = std::move(examples);
    v2.version = v1.version + 1;
    v2.parent_version = v1.version;
    current = with_hash(std::move(v2));
    result.versions.push_back(current);
  }

  if (result.labels.empty()) {
    result.search.best = current;
    return result;
  }
  result.search = automatic_search(current, result.labels, budget, mix_key({rng_seed, 0x494e4954ULL}));
  for (const auto& v : result.search.lineage) result.versions.push_back(v);
  return result;
}

std::vector<std::string> Optimizer::rationale_candidates(const FilterPrompt& prompt, const Mistake& mistake,
                                                         int n, std::uint64_t seed) {
  if (n < 1 || n > 10) fail(ErrorCode::kInvalidArgument, "n must be between 1 and 10");
  if (mistake.predicted == mistake.gold) fail(ErrorCode::kInvalidArgument, "rationales need a mistake");
  ReflectTask task;
  task.mode = ReflectTask::Mode::kRationale;
  task.alternatives = n;
  task.comments.push_back(view_of(mistake));
  const std::string response = classifier_.gateway().run(prompt, task, seed);
  std::vector<std::string> out;
  for (const auto& line : split_lines(response)) {
    std::string t(trim(line));
    if (t.empty() || std::find(out.begin(), out.end(), t) != out.end()) continue;
    out.push_back(std::move(t));
    if (out.size() == static_cast<std::size_t>(n)) break;
  }
  return out;
}

std::shared_ptr<std::mutex> FilterLocks::get(const std::string& filter_id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto& slot = locks_[filter_id];
  if (!slot) slot = std::make_shared<std::mutex>();
  return slot;
}

}  // namespace rubricopt
