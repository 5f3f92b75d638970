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

// Unstructured prompt optimization by textual gradients and beam search.
//
// The prompt is a single free-text block. Each round, every beam member with
// mistakes gets a critique over a small minibatch of them, and the critique
// drives whole-prompt rewrites. Members and rewrites compete on labeled-set
// accuracy; the best `beam_width` survive.

#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rubricopt/classifier/classifier.hpp"
#include "rubricopt/optimizer/optimizer.hpp"

namespace rubricopt {

struct FreestylePrompt {
  std::string text;
  int version = 1;
  std::optional<int> parent_version;

  bool operator==(const FreestylePrompt&) const = default;
};

// The text becomes the description of a prompt with no rubrics or examples.
FilterPrompt as_filter_prompt(const FreestylePrompt& prompt);

// Starting point derived from a structured prompt.
FreestylePrompt freestyle_from(const FilterPrompt& prompt);

struct TextualGradient {
  std::vector<Mistake> minibatch;
  std::string text;
};

struct BaselineAuditEntry {
  int round = 0;
  int version = 0;
  std::optional<int> parent_version;
  std::string text;
  std::string gradient;  // critique that produced the rewrite
  Metrics metrics;
  bool kept = false;  // survived into the next beam
};

struct BaselineResult {
  FreestylePrompt best;
  Metrics best_metrics;
  std::vector<BaselineAuditEntry> trail;  // the initial prompt first, as round 0
  std::vector<SearchRound> rounds;
  bool partial = false;  // a round failed; best and trail cover the completed work
  std::string error;
};

struct BaselineConfig {
  std::size_t gradient_minibatch = 4;
  std::uint64_t evaluation_seed = 0;
};

struct BaselineCounters {
  std::uint64_t gradient_calls = 0;
  std::uint64_t generation_calls = 0;  // rewrites
  std::uint64_t candidate_evaluations = 0;
};

class BaselineOptimizer {
 public:
  explicit BaselineOptimizer(Classifier& classifier, BaselineConfig config = {});

  // Budget semantics match Optimizer::automatic_search: per round,
  // `expansions_per_round` rewrites spread round-robin over the members
  // that still make mistakes. rounds = 0 returns the input unchanged.
  BaselineResult optimize(const FreestylePrompt& initial, std::span<const LabeledComment> labeled,
                          const SearchBudget& budget, std::uint64_t seed);

  // Seeded minibatch of at most `gradient_minibatch` mistakes and one
  // generation call critiquing the prompt against it.
  TextualGradient textual_gradient(const FreestylePrompt& prompt, std::span<const Mistake> mistakes,
                                   std::uint64_t seed);

  // `n` rewrite calls. Empty answers and answers equal to the parent are
  // dropped. Children get versions from `next_version` upwards.
  std::vector<FreestylePrompt> expand(const FreestylePrompt& prompt, const TextualGradient& gradient, int n,
                                      int& next_version, std::uint64_t seed);

  BaselineCounters counters() const;

 private:
  Classifier& classifier_;
  BaselineConfig config_;
  std::atomic<std::uint64_t> gradient_calls_{0};
  std::atomic<std::uint64_t> generation_calls_{0};
  std::atomic<std::uint64_t> candidate_evaluations_{0};
};

}  // namespace rubricopt
