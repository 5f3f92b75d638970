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

#include "rubricopt/baseline/baseline.hpp"

#include <algorithm>
#include <set>

#include "rubricopt/core/prompt.hpp"
#include "rubricopt/core/rng.hpp"
#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt {

FilterPrompt as_filter_prompt(const FreestylePrompt& prompt) {
  FilterPrompt p;
  p.description = prompt.text;
  p.version = prompt.version;
  p.parent_version = prompt.parent_version;
  return with_hash(std::move(p));
}

FreestylePrompt freestyle_from(const FilterPrompt& prompt) { return {flatten_prompt(prompt), 1, std::nullopt}; }

BaselineOptimizer::BaselineOptimizer(Classifier& classifier, BaselineConfig config)
    : classifier_(classifier), config_(config) {
  if (config_.gradient_minibatch < 1) fail(ErrorCode::kInvalidArgument, "gradient_minibatch must be positive");
}

BaselineCounters BaselineOptimizer::counters() const {
  return {gradient_calls_.load(), generation_calls_.load(), candidate_evaluations_.load()};
}

TextualGradient BaselineOptimizer::textual_gradient(const FreestylePrompt& prompt,
                                                    std::span<const Mistake> mistakes, std::uint64_t seed) {
  if (mistakes.empty()) fail(ErrorCode::kInvalidArgument, "a gradient needs mistakes");
  TextualGradient g;
  g.minibatch.assign(mistakes.begin(), mistakes.end());
  seeded_shuffle(g.minibatch, mix_key({seed, 0x4d42ULL}));
  if (g.minibatch.size() > config_.gradient_minibatch) g.minibatch.resize(config_.gradient_minibatch);

  ReflectTask task;
  task.mode = ReflectTask::Mode::kGradient;
  for (const Mistake& m : g.minibatch) task.comments.push_back({m.comment.text, m.predicted, m.gold});
  gradient_calls_++;
  g.text = std::string(trim(classifier_.gateway().run(as_filter_prompt(prompt), task, seed)));
  if (g.text.empty()) fail(ErrorCode::kProtocol, "empty gradient");
  return g;
}

std::vector<FreestylePrompt> BaselineOptimizer::expand(const FreestylePrompt& prompt, const TextualGradient& gradient,
                                                       int n, int& next_version, std::uint64_t seed) {
  if (n < 1) fail(ErrorCode::kInvalidArgument, "n must be positive");
  std::vector<FreestylePrompt> out;
  for (int j = 0; j < n; ++j) {
    ProposeTask task;
    task.mode = ProposeTask::Mode::kRewrite;
    task.variant = j;
    task.notes = {gradient.text};
    for (const Mistake& m : gradient.minibatch) task.comments.push_back({m.comment.text, m.predicted, m.gold});
    const std::string text(trim(classifier_.gateway().run(as_filter_prompt(prompt), task,
                                                           mix_key({seed, static_cast<std::uint64_t>(j)}))));
    generation_calls_++;
    if (text.empty() || text == prompt.text) continue;
    out.push_back({text, next_version++, prompt.version});
  }
  return out;
}

BaselineResult BaselineOptimizer::optimize(const FreestylePrompt& initial, std::span<const LabeledComment> labeled,
                                           const SearchBudget& budget, std::uint64_t seed) {
  budget.validate();
  if (labeled.empty()) fail(ErrorCode::kInvalidArgument, "optimization needs labeled comments");
  if (trim(initial.text).empty()) fail(ErrorCode::kInvalidArgument, "prompt text is empty");

  struct Member {
    FreestylePrompt prompt;
    Evaluation eval;
  };
  auto evaluate = [&](const FreestylePrompt& p) {
    return classifier_.evaluate(as_filter_prompt(p), labeled, config_.evaluation_seed);
  };

  BaselineResult result;
  std::vector<Member> beam{{initial, evaluate(initial)}};
  result.trail.push_back({0, initial.version, initial.parent_version, initial.text, "", beam.front().eval.metrics,
                          true});
  int next_version = initial.version + 1;

  for (int round = 0; round < budget.rounds; ++round) {
    const BaselineCounters before = counters();
    std::vector<Member> children;
    std::vector<std::size_t> child_trail;
    try {
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < beam.size(); ++i)
        if (!beam[i].eval.mistakes.empty()) active.push_back(i);
      const std::size_t b = static_cast<std::size_t>(budget.expansions_per_round);
      for (std::size_t slot = 0; slot < active.size() && slot < b; ++slot) {
        const Member& parent = beam[active[slot]];
        const int share = static_cast<int>(b / active.size() + (slot < b % active.size() ? 1 : 0));
        const std::uint64_t member_seed = mix_key({seed, 0x50544eULL, static_cast<std::uint64_t>(round), slot});
        const TextualGradient g = textual_gradient(parent.prompt, parent.eval.mistakes, member_seed);
        for (FreestylePrompt& child : expand(parent.prompt, g, share, next_version, member_seed)) {
          Evaluation e = evaluate(child);
          candidate_evaluations_++;
          result.trail.push_back({round + 1, child.version, child.parent_version, child.text, g.text, e.metrics,
                                  false});
          child_trail.push_back(result.trail.size() - 1);
          children.push_back({std::move(child), std::move(e)});
        }
      }
    } catch (const Error& e) {
      result.partial = true;
      result.error = e.what();
      break;
    }

    // Members precede children, so ties keep the incumbent.
    std::vector<Member> pool = std::move(beam);
    const std::size_t members = pool.size();
    for (auto& c : children) pool.push_back(std::move(c));
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Metrics& x = pool[a].eval.metrics;
      const Metrics& y = pool[b].eval.metrics;
      if (x.accuracy != y.accuracy) return x.accuracy > y.accuracy;
      return x.f1 > y.f1;
    });
    beam.clear();
    std::set<std::string> kept;
    for (std::size_t idx : order) {
      if (beam.size() >= static_cast<std::size_t>(budget.beam_width)) break;
      if (!kept.insert(pool[idx].prompt.text).second) continue;
      if (idx >= members) result.trail[child_trail[idx - members]].kept = true;
      beam.push_back(std::move(pool[idx]));
    }

    const BaselineCounters now = counters();
    result.rounds.push_back({round + 1, static_cast<std::size_t>(now.candidate_evaluations -
                                                                 before.candidate_evaluations),
                             static_cast<std::size_t>(now.generation_calls - before.generation_calls),
                             beam.front().eval.metrics.accuracy});
  }

  result.best = beam.front().prompt;
  result.best_metrics = beam.front().eval.metrics;
  return result;
}

}  // namespace rubricopt
