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

// Batched self-consistency classifier.
//
// Comments are split into consecutive batches of at most five. Every batch
// is sent five times, each time in a different seeded order, and the five
// verdicts per comment are reduced by majority vote. The agreement fraction
// is the prediction's confidence.

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rubricopt/core/types.hpp"
#include "rubricopt/llm/gateway.hpp"

namespace rubricopt {

inline constexpr int kDefaultRuns = 5;

struct Prediction {
  std::string comment_id;
  Verdict verdict = Verdict::kNotCatch;
  double confidence = 1.0;
  std::vector<Verdict> votes;  // one per run, in run order
  std::string prompt_hash;
  std::optional<std::string> explanation;

  bool unanimous() const { return confidence >= 1.0; }
  bool operator==(const Prediction&) const = default;
};

struct VoteResult {
  Verdict verdict;
  double confidence;
};

// Mode of `votes`; an even split resolves to NotCatch. Throws
// Error(kInvalidArgument) unless votes.size() == expected_runs.
VoteResult majority_vote(std::span<const Verdict> votes, int expected_runs = kDefaultRuns);

struct Metrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  std::int64_t correct() const { return tp + tn; }
  bool operator==(const Metrics&) const = default;
};

// Catch is the positive class. Empty precision/recall denominators give 1.0;
// f1 is 0 when precision + recall is 0.
Metrics compute_metrics(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn);

struct Mistake {
  Comment comment;
  Verdict predicted;
  Verdict gold;

  bool false_positive() const { return predicted == Verdict::kCatch; }
};

struct LabeledComment {
  Comment comment;
  Verdict gold;
};

struct Evaluation {
  Metrics metrics;
  std::vector<Mistake> mistakes;       // false positives, then false negatives
  std::vector<Prediction> predictions;  // aligned with the labeled input
};

// Storage for predictions and explanations keyed by (prompt hash, comment id).
// Implementations must tolerate concurrent use.
class PredictionCache {
 public:
  virtual ~PredictionCache() = default;
  virtual std::optional<Prediction> get(const std::string& prompt_hash, const std::string& comment_id) = 0;
  virtual void put(const Prediction& prediction) = 0;
  virtual std::optional<std::string> get_explanation(const std::string& prompt_hash,
                                                     const std::string& comment_id) = 0;
  virtual void put_explanation(const std::string& prompt_hash, const std::string& comment_id,
                               const std::string& text) = 0;
};

class MemoryPredictionCache final : public PredictionCache {
 public:
  std::optional<Prediction> get(const std::string& prompt_hash, const std::string& comment_id) override;
  void put(const Prediction& prediction) override;
  std::optional<std::string> get_explanation(const std::string& prompt_hash,
                                             const std::string& comment_id) override;
  void put_explanation(const std::string& prompt_hash, const std::string& comment_id,
                       const std::string& text) override;
  std::size_t size() const;

 private:
  static std::string key(const std::string& h, const std::string& c) { return h + '\x1f' + c; }
  mutable std::mutex mu_;
  std::unordered_map<std::string, Prediction> predictions_;
  std::unordered_map<std::string, std::string> explanations_;
};

struct ClassifierConfig {
  int runs = kDefaultRuns;
  std::size_t batch_size = 5;  // at most kMaxBatchSize
  int max_reparse = 2;         // re-requests of an unparseable run
};

// Parses "<index>: catch|not_catch" lines. Returns nullopt unless every index
// in 1..n appears exactly once and nothing else does.
std::optional<std::vector<Verdict>> parse_classification(std::string_view response, std::size_t n);

class Classifier {
 public:
  // Without a cache the classifier keeps a private in-memory one.
  explicit Classifier(llm::Gateway& gateway, PredictionCache* cache = nullptr, ClassifierConfig config = {});

  // Predictions in input order. Comments with a cache entry for the
  // prompt's hash cost no backend calls. Throws Error(kInvalidArgument) on
  // empty input or duplicate ids and Error(kClassification) when a batch
  // cannot be classified.
  std::vector<Prediction> classify(const FilterPrompt& prompt, std::span<const Comment> comments,
                                   std::uint64_t seed);

  // Single-threaded reference with identical results.
  std::vector<Prediction> classify_serial(const FilterPrompt& prompt, std::span<const Comment> comments,
                                          std::uint64_t seed);

  Evaluation evaluate(const FilterPrompt& prompt, std::span<const LabeledComment> labeled, std::uint64_t seed);

  // One completion at temperature 0, cached per (prompt hash, comment id).
  std::string explain(const FilterPrompt& prompt, const Comment& comment, Verdict verdict);

  llm::Gateway& gateway() { return gateway_; }
  PredictionCache* cache() { return cache_; }
  const ClassifierConfig& config() const { return config_; }

 private:
  std::vector<Prediction> run_classification(const FilterPrompt& prompt, std::span<const Comment> comments,
                                             std::uint64_t seed, bool parallel);
  std::vector<Verdict> run_batch(const FilterPrompt& prompt, std::span<const Comment> batch,
                                 std::size_t batch_index, int run, std::uint64_t seed);

  llm::Gateway& gateway_;
  std::unique_ptr<PredictionCache> owned_cache_;
  PredictionCache* cache_;
  ClassifierConfig config_;
};

}  // namespace rubricopt
