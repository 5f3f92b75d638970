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

#include "rubricopt/sampler/sampler.hpp"

#include <algorithm>

#include "rubricopt/core/rng.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt {

std::string_view to_string(SampleTier t) {
  switch (t) {
    case SampleTier::kUncertain: return "uncertain";
    case SampleTier::kPositivePad: return "positive_pad";
    case SampleTier::kNegativePad: return "negative_pad";
  }
  return "uncertain";
}

SamplingPlan select_for_labeling(std::span<const Prediction> predictions,
                                 const std::set<std::string>& already_labeled, std::size_t k,
                                 std::uint64_t seed) {
  if (k == 0) fail(ErrorCode::kInvalidArgument, "k must be at least 1");

  std::vector<const Prediction*> uncertain, positive, negative;
  for (const Prediction& p : predictions) {
    if (already_labeled.count(p.comment_id)) continue;
    if (!p.unanimous()) uncertain.push_back(&p);
    else if (p.verdict == Verdict::kCatch) positive.push_back(&p);
    else negative.push_back(&p);
  }

  auto by_id = [](const Prediction* a, const Prediction* b) { return a->comment_id < b->comment_id; };
  std::uint64_t tier_index = 0;
  for (auto* tier : {&uncertain, &positive, &negative}) {
    std::sort(tier->begin(), tier->end(), by_id);
    seeded_shuffle(*tier, mix_key({seed, 0x53414dULL, tier_index++}));
  }
  std::stable_sort(uncertain.begin(), uncertain.end(),
                   [](const Prediction* a, const Prediction* b) { return a->confidence < b->confidence; });

  SamplingPlan plan;
  plan.requested_k = k;
  auto take = [&](const std::vector<const Prediction*>& tier, SampleTier tag) {
    for (const Prediction* p : tier) {
      if (plan.selected.size() >= k) return;
      plan.selected.push_back(p->comment_id);
      plan.tiers.push_back(tag);
    }
  };
  take(uncertain, SampleTier::kUncertain);
  take(positive, SampleTier::kPositivePad);
  take(negative, SampleTier::kNegativePad);
  return plan;
}

}  // namespace rubricopt
