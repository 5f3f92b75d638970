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

// Deterministic offline backend.
//
// A hidden SimulationRule defines which comments "should" be caught: a
// comment is Catch iff it contains a positive-lexicon keyword and no
// negative-lexicon keyword. Prompts are read as keyword predicates: the
// keywords of a rubric are its tokens that belong to either lexicon.
//
// Classification of one comment:
//   1. any negative-rubric keyword present        -> not_catch
//   2. else any positive-rubric keyword present   -> catch
//   3. else no rubric applies and the vague description decides: catch iff
//      the comment has a positive-lexicon keyword; comments carrying any
//      lexicon keyword get an extra 0.25 flip per run.
// Every vote is then flipped with probability noise_rate. Flips are drawn
// from a counter-based hash of (rule.seed, request.seed, comment text), so a
// comment's votes do not depend on its batch or position.
//
// Generation tasks answer with fixed templates built around the most
// relevant uncovered keyword; see sim_respond() for the dispatch table.

#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rubricopt/llm/backend.hpp"

namespace rubricopt::llm {

struct SimulationRule {
  std::set<std::string> positive_lexicon;
  std::set<std::string> negative_lexicon;
  double noise_rate = 0.0;
  std::uint64_t seed = 0;

  // Throws Error(kInvalidArgument) when lexicons overlap or noise >= 0.5.
  void validate() const;
  bool in_lexicon(std::string_view token) const {
    return positive_lexicon.count(std::string(token)) || negative_lexicon.count(std::string(token));
  }
};

inline constexpr double kVagueFlipRate = 0.25;
inline constexpr std::size_t kDefaultEmbeddingDimension = 64;

// Ground truth under the rule.
Verdict rule_verdict(const SimulationRule& rule, std::string_view text);

// Lexicon keywords found in `text`, in order of first appearance.
std::vector<std::string> lexicon_keywords(const SimulationRule& rule, std::string_view text);

// Pure dispatch on the parsed request. Throws Error(kProtocol) for a
// corrupt sentinel or an unknown mode.
std::string sim_respond(const CompletionRequest& request, const SimulationRule& rule);

// Signed feature hashing of non-stopword tokens into `dimension` buckets,
// L2-normalised. Token order does not matter.
EmbeddingVector sim_embed(std::string_view text, std::size_t dimension = kDefaultEmbeddingDimension);

class SimulationBackend final : public Backend {
 public:
  explicit SimulationBackend(SimulationRule rule,
                             std::size_t dimension = kDefaultEmbeddingDimension);

  std::string complete(const CompletionRequest& request) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::size_t embedding_dimension() const override { return dimension_; }
  std::string name() const override { return "simulation"; }

  const SimulationRule& rule() const { return rule_; }

 private:
  SimulationRule rule_;
  std::size_t dimension_;
};

}  // namespace rubricopt::llm
