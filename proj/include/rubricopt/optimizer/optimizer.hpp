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

// Rubric optimizer.
//
// One round: evaluate the incumbent on the labeled set, explain each mistake
// with a short reflection, group the reflections into failure patterns,
// then propose single-rubric edits aimed at one pattern (or at one mistake
// the user clarified) and rank them by accuracy on the labeled set.
// Candidates differ from the incumbent by exactly one rubric edit.

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rubricopt/classifier/classifier.hpp"
#include "rubricopt/sampler/sampler.hpp"

namespace rubricopt {

struct Reflection {
  Mistake mistake;
  std::string text;
  llm::EmbeddingVector embedding;
};

struct FailurePattern {
  std::string pattern_id;              // "fp-1", "fp-2", ... by rank
  std::vector<Mistake> members;        // input order
  std::vector<std::string> reflections;  // aligned with members
  std::string summary;

  std::size_t size() const { return members.size(); }
};

// A single mistake plus the user's account of the correct behaviour.
struct ClarifiedMistake {
  Mistake mistake;
  std::string rationale;
};

using Guidance = std::variant<std::monostate, FailurePattern, ClarifiedMistake>;

// What a candidate-generation request is aimed at.
struct CandidateTarget {
  std::vector<Mistake> mistakes;
  std::vector<std::string> notes;

  static CandidateTarget from(const FailurePattern& pattern);
  static CandidateTarget from(const ClarifiedMistake& clarified);
  // Positive when missed catches are at least as common as wrong catches.
  Polarity polarity() const;
};

struct CandidateEdit {
  EditDiff diff;
  FilterPrompt child;
  Metrics metrics;
  double train_score = 0;  // accuracy on the labeled set
  int resolved = 0;        // incumbent mistakes the child gets right
  int introduced = 0;      // incumbent successes the child gets wrong
};

// Higher accuracy, then higher F1, then fewer introduced errors.
bool ranks_before(const CandidateEdit& a, const CandidateEdit& b);

struct SearchBudget {
  int expansions_per_round = 4;
  int beam_width = 2;
  int rounds = 2;

  // Throws Error(kInvalidArgument) for non-positive expansions or beam
  // width, or negative rounds.
  void validate() const;
};

enum class RoundOutcome { kCandidates, kNothingToFix, kNoViableIteration };

std::string_view to_string(RoundOutcome o);

struct RoundResult {
  RoundOutcome outcome = RoundOutcome::kNothingToFix;
  Metrics incumbent;
  std::size_t incumbent_mistakes = 0;
  std::vector<FailurePattern> patterns;  // filled for unguided rounds
  std::vector<CandidateEdit> candidates;  // best first, at most max_surfaced
  std::size_t candidates_evaluated = 0;
};

struct SearchRound {
  int round = 0;
  std::size_t candidates_evaluated = 0;
  std::size_t generation_calls = 0;
  double best_score = 0;
};

struct SearchResult {
  FilterPrompt best;
  Metrics best_metrics;
  std::vector<FilterPrompt> lineage;  // versions after the start, ending at best
  std::vector<SearchRound> rounds;
};

struct DraftSeed {
  std::optional<std::string> description;
  std::vector<std::string> example_comments;
};

struct InitOptions {
  std::size_t labeling_k = kDefaultLabelingK;
  SearchBudget budget{4, 2, 2};
};

using Labeler = std::function<Verdict(const Comment&)>;

struct InitResult {
  std::vector<FilterPrompt> versions;  // v1 draft first, best last
  std::vector<LabeledComment> labels;
  SamplingPlan plan;
  std::vector<Prediction> draft_predictions;  // v1 over the pool
  SearchResult search;
};

struct OptimizerCounters {
  std::uint64_t generation_calls = 0;       // candidate proposals
  std::uint64_t candidate_evaluations = 0;  // full labeled-set evaluations of candidates
  std::uint64_t reflections = 0;

  OptimizerCounters operator-(const OptimizerCounters& rhs) const {
    return {generation_calls - rhs.generation_calls, candidate_evaluations - rhs.candidate_evaluations,
            reflections - rhs.reflections};
  }
};

struct OptimizerConfig {
  double cluster_eps = 0.25;
  std::size_t cluster_min_points = 2;
  std::size_t rubric_soft_cap = 8;  // at this many rubrics only edits are proposed
  std::size_t max_surfaced = 3;
  std::size_t max_prompt_comments = 10;  // mistakes shown per generation request
  std::uint64_t evaluation_seed = 0;
};

// Groups reflections with DBSCAN on cosine distance. Noise points become
// singleton patterns. Patterns are ordered by size, largest first, ties by
// the smallest member comment id. Summaries are left empty.
std::vector<FailurePattern> cluster_reflections(std::span<const Reflection> reflections, double eps = 0.25,
                                                std::size_t min_points = 2);

class Optimizer {
 public:
  explicit Optimizer(Classifier& classifier, OptimizerConfig config = {});

  // One generation call. Throws Error(kInvalidArgument) when the seed has
  // neither a description nor examples.
  std::string draft_description(const DraftSeed& seed, std::uint64_t rng_seed);

  // One generation call and one embedding call. Throws
  // Error(kInvalidArgument) when the mistake is not a mistake.
  Reflection reflect(const FilterPrompt& prompt, const Mistake& mistake, std::uint64_t seed);

  // One generation call per mistake, then a single embedding call.
  std::vector<Reflection> reflect_all(const FilterPrompt& prompt, std::span<const Mistake> mistakes,
                                      std::uint64_t seed);

  // One generation call.
  std::string summarize_pattern(const FilterPrompt& prompt, const FailurePattern& pattern, std::uint64_t seed);

  // Reflect, cluster and summarize every pattern.
  std::vector<FailurePattern> analyze_failures(const FilterPrompt& prompt, std::span<const Mistake> mistakes,
                                               std::uint64_t seed);

  // At most `expansions` generation calls, one per slot. Half the slots go
  // to the target's polarity; the rest switch to the other polarity when
  // fewer than two of those (or none of one) parsed. Unparseable answers and duplicates
  // are dropped. Candidates are not scored.
  std::vector<CandidateEdit> generate_candidates(const FilterPrompt& parent, const CandidateTarget& target,
                                                 int expansions, std::uint64_t seed);

  // Evaluates every candidate on `labeled` and sorts best first.
  void score_candidates(std::vector<CandidateEdit>& candidates, const Evaluation& incumbent,
                        std::span<const LabeledComment> labeled);

  RoundResult optimize_round(const FilterPrompt& prompt, std::span<const LabeledComment> labeled,
                             const Guidance& guidance, int expansions, std::uint64_t seed);

  // Unguided beam search. Each round spends `expansions_per_round`
  // generation calls spread round-robin over the beam members that still
  // make mistakes; the beam keeps the best `beam_width` of members and
  // children. The incumbent is never replaced by a worse prompt.
  SearchResult automatic_search(const FilterPrompt& start, std::span<const LabeledComment> labeled,
                                const SearchBudget& budget, std::uint64_t seed);

  // Draft, classify the pool, label the selected comments, install few-shot
  // examples and run the automatic search.
  InitResult initialize_filter(const std::string& filter_id, const std::string& name, const DraftSeed& seed,
                               std::span<const Comment> pool, const Labeler& labeler,
                               const InitOptions& options, std::uint64_t rng_seed);

  // The part of initialize_filter after labeling: install few-shot examples
  // from `labels` and the draft predictions, then run the automatic search.
  // Every labeled comment needs a draft prediction.
  InitResult complete_initialization(const FilterPrompt& v1, std::span<const Prediction> draft_predictions,
                                     std::vector<LabeledComment> labels, const SearchBudget& budget,
                                     std::uint64_t rng_seed);

  // Up to `n` distinct rationales for a mistake from one generation call.
  std::vector<std::string> rationale_candidates(const FilterPrompt& prompt, const Mistake& mistake, int n,
                                                std::uint64_t seed);

  OptimizerCounters counters() const;
  Classifier& classifier() { return classifier_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  Evaluation evaluate(const FilterPrompt& prompt, std::span<const LabeledComment> labeled);
  std::optional<CandidateEdit> parse_candidate(const FilterPrompt& parent, ProposeTask::Mode mode,
                                               Polarity polarity, const Rubric* target,
                                               const std::string& response);

  Classifier& classifier_;
  OptimizerConfig config_;
  std::atomic<std::uint64_t> generation_calls_{0};
  std::atomic<std::uint64_t> candidate_evaluations_{0};
  std::atomic<std::uint64_t> reflections_{0};
};

// Advisory per-filter locks. Optimization and commits for one filter are
// serialized; different filters proceed independently.
class FilterLocks {
 public:
  std::shared_ptr<std::mutex> get(const std::string& filter_id);

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<std::mutex>> locks_;
};

}  // namespace rubricopt
