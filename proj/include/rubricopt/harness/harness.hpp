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

// Offline experiment harness.
//
// Builds a labeled corpus from a hidden SimulationRule, splits it into
// train/audit/test, and compares the rubric optimizer steered by a scripted
// user against the freestyle baseline. Everything runs on the simulation
// backend, so a report is a pure function of its config.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rubricopt/baseline/baseline.hpp"
#include "rubricopt/core/json.hpp"
#include "rubricopt/llm/simulation.hpp"
#include "rubricopt/optimizer/optimizer.hpp"

namespace rubricopt {

inline constexpr int kReportSchemaVersion = 1;

struct LabeledCorpus {
  std::vector<Comment> comments;
  std::map<std::string, Verdict> truth;
};

// Three positive keywords, one negative, 5% vote noise.
llm::SimulationRule default_experiment_rule(std::uint64_t seed = 7);

// Template comments: positives carry one positive keyword; half the
// negatives pair a positive keyword with a negative one, the rest carry no
// keyword. The positive count is round(n * positive_fraction). Throws
// Error(kInvalidArgument) for n < 10, a fraction outside [0, 1] or an empty
// lexicon.
LabeledCorpus make_synthetic_corpus(const llm::SimulationRule& rule, std::size_t n, double positive_fraction,
                                    std::uint64_t seed);

// Reads JSONL comments and labels them with the rule. Malformed lines are
// errors here; experiments need every comment.
LabeledCorpus load_corpus(const std::string& path, const llm::SimulationRule& rule);

struct DatasetSplit {
  std::vector<Comment> train, audit, test;
  std::size_t corpus_uncertain = 0;  // non-unanimous under the probe prompt
  std::size_t train_uncertain = 0;
};

// (20, 80, 100) for corpora of at least 200 comments, otherwise n/10 units
// in a 1:4:5 ratio. Train takes up to 10 probe-uncertain comments first.
// Throws Error(kInvalidArgument) for fewer than 10 comments.
DatasetSplit split_dataset(Classifier& classifier, std::span<const Comment> corpus, const FilterPrompt& probe,
                           std::uint64_t seed);

enum class IterationPolicy { kFirstMistake, kLargestPattern, kRandomMistake };

std::string_view to_string(IterationPolicy p);
IterationPolicy parse_iteration_policy(std::string_view text);

class SimulatedUser {
 public:
  SimulatedUser(std::map<std::string, Verdict> truth, llm::SimulationRule rule, IterationPolicy policy,
                std::uint64_t seed);

  // Throws Error(kNotFound) for a comment outside the ground truth.
  Verdict label(const Comment& comment) const;
  std::vector<LabeledComment> label_all(std::span<const Comment> comments) const;

  // Guidance for round `round` given the incumbent's mistakes. The
  // largest-pattern policy defers to the optimizer's own clustering.
  Guidance guidance(std::span<const Mistake> mistakes, int round) const;

  // "Comments mentioning <kw> should (not) be caught." built from the rule.
  std::string clarification(const Mistake& mistake) const;

  // First candidate whose edited rubric names only keywords of its own
  // polarity's lexicon, and at least one.
  std::optional<std::size_t> choose(std::span<const CandidateEdit> candidates) const;

 private:
  std::map<std::string, Verdict> truth_;
  llm::SimulationRule rule_;
  IterationPolicy policy_;
  std::uint64_t seed_;
};

struct ExperimentConfig {
  std::optional<std::string> corpus_path;  // synthetic when empty
  std::size_t corpus_size = 200;
  double positive_fraction = 0.5;
  llm::SimulationRule rule = default_experiment_rule();
  std::string target_description = "are spam or scams";
  std::vector<std::string> conditions = {"promptimizer", "protegi"};
  int iterations = 3;
  SearchBudget init_budget{4, 2, 2};
  int expansions = 4;
  int beam_width = 2;
  IterationPolicy policy = IterationPolicy::kLargestPattern;
  std::uint64_t seed = 7;
  bool parallel_conditions = false;

  // Throws Error(kInvalidArgument).
  void validate() const;
};

Json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const Json& j);

// Runs the shared initialization and every requested condition. Stage
// failures are recorded in the report, which is then marked partial.
Json run_experiment(const ExperimentConfig& config);

// Copy with every "wall_time_ms" member removed, for replay comparison.
Json strip_wall_time(Json report);

}  // namespace rubricopt
