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

#include <gtest/gtest.h>

#include <map>

#include "rubricopt/core/rng.hpp"
#include "rubricopt/error.hpp"
#include "rubricopt/sampler/sampler.hpp"

namespace rubricopt {
namespace {

Prediction pred(std::string id, Verdict v, double confidence) {
  Prediction p;
  p.comment_id = std::move(id);
  p.verdict = v;
  p.confidence = confidence;
  return p;
}

std::vector<Prediction> random_pool(std::uint64_t seed, std::size_t n) {
  KeyedRng rng(seed);
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double conf = std::vector<double>{0.6, 0.8, 1.0, 1.0}[rng.below(4)];
    out.push_back(pred("c" + std::to_string(i), rng.below(2) ? Verdict::kCatch : Verdict::kNotCatch, conf));
  }
  return out;
}

TEST(Sampler, UncertainThenPositivePads) {
  std::vector<Prediction> pool;
  for (int i = 0; i < 12; ++i) pool.push_back(pred("u" + std::to_string(i), Verdict::kCatch, i % 2 ? 0.6 : 0.8));
  for (int i = 0; i < 15; ++i) pool.push_back(pred("p" + std::to_string(i), Verdict::kCatch, 1.0));
  for (int i = 0; i < 15; ++i) pool.push_back(pred("n" + std::to_string(i), Verdict::kNotCatch, 1.0));
  const auto plan = select_for_labeling(pool, {}, 20, 1);
  ASSERT_EQ(plan.selected.size(), 20u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(plan.tiers[i], SampleTier::kUncertain);
  for (std::size_t i = 12; i < 20; ++i) {
    EXPECT_EQ(plan.tiers[i], SampleTier::kPositivePad);
    EXPECT_EQ(plan.selected[i][0], 'p');
  }
  for (std::size_t i = 0; i < 6; ++i) {
    const int n = std::stoi(plan.selected[i].substr(1));
    EXPECT_EQ(n % 2, 1) << "confidence 0.6 comes first";
  }
}

TEST(Sampler, PoolExhaustion) {
  const auto plan = select_for_labeling(random_pool(3, 7), {}, 20, 1);
  EXPECT_EQ(plan.selected.size(), 7u);
  EXPECT_EQ(plan.requested_k, 20u);
}

TEST(Sampler, EmptyPoolAndBadK) {
  EXPECT_TRUE(select_for_labeling({}, {}, 5, 1).selected.empty());
  EXPECT_THROW(select_for_labeling({}, {}, 0, 1), Error);
}

TEST(Sampler, Deterministic) {
  const auto pool = random_pool(4, 60);
  const auto a = select_for_labeling(pool, {}, 20, 77);
  const auto b = select_for_labeling(pool, {}, 20, 77);
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_EQ(a.tiers, b.tiers);
}

TEST(Sampler, OrderingPropertyOverSeeds) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto pool = random_pool(seed, 10 + seed % 50);
    std::set<std::string> labeled;
    for (std::size_t i = 0; i < pool.size(); i += 7) labeled.insert(pool[i].comment_id);
    const std::size_t k = 1 + seed % 30;
    const auto plan = select_for_labeling(pool, labeled, k, seed);
    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : pool) by_id[p.comment_id] = &p;

    EXPECT_EQ(plan.selected.size(), std::min(k, pool.size() - labeled.size()));
    int stage = 0;  // 0 uncertain(0.6) 1 uncertain(0.8) 2 catch 3 not_catch
    for (const auto& id : plan.selected) {
      EXPECT_FALSE(labeled.count(id));
      const Prediction& p = *by_id.at(id);
      const int s = p.confidence < 0.7 ? 0 : p.confidence < 1.0 ? 1 : p.verdict == Verdict::kCatch ? 2 : 3;
      EXPECT_GE(s, stage) << "seed " << seed;
      stage = s;
    }

    auto shuffled = pool;
    seeded_shuffle(shuffled, seed + 1000);
    const auto again = select_for_labeling(shuffled, labeled, k, seed);
    EXPECT_EQ(again.selected, plan.selected) << "seed " << seed;
  }
}

}  // namespace
}  // namespace rubricopt
