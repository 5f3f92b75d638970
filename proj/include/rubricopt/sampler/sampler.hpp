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

#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rubricopt/classifier/classifier.hpp"

namespace rubricopt {

enum class SampleTier { kUncertain, kPositivePad, kNegativePad };

std::string_view to_string(SampleTier t);

inline constexpr std::size_t kDefaultLabelingK = 20;

struct SamplingPlan {
  std::size_t requested_k = kDefaultLabelingK;
  std::vector<std::string> selected;
  std::vector<SampleTier> tiers;  // aligned with selected
};

// Uncertain predictions first (lowest confidence first), then unanimous
// Catch, then unanimous NotCatch. Ties inside a tier are broken by a seeded
// shuffle of the id-sorted tier, so the input order never matters.
// Throws Error(kInvalidArgument) when k == 0.
SamplingPlan select_for_labeling(std::span<const Prediction> predictions,
                                 const std::set<std::string>& already_labeled, std::size_t k,
                                 std::uint64_t seed);

}  // namespace rubricopt
