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

#include "rubricopt/classifier/classifier.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <exception>
#include <numeric>
#include <unordered_set>

#include "rubricopt/core/prompt.hpp"
#include "rubricopt/core/rng.hpp"
#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt {

VoteResult majority_vote(std::span<const Verdict> votes, int expected_runs) {
  if (expected_runs < 1 || votes.size() != static_cast<std::size_t>(expected_runs))
    fail(ErrorCode::kInvalidArgument, "expected " + std::to_string(expected_runs) + " votes, got " +
                                          std::to_string(votes.size()));
  const auto catches = std::count(votes.begin(), votes.end(), Verdict::kCatch);
  const auto misses = static_cast<std::ptrdiff_t>(votes.size()) - catches;
  const Verdict v = catches > misses ? Verdict::kCatch : Verdict::kNotCatch;
  const auto top = std::max(catches, misses);
  return {v, static_cast<double>(top) / static_cast<double>(votes.size())};
}

Metrics compute_metrics(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn) {
  if (tp < 0 || fp < 0 || fn < 0 || tn < 0) fail(ErrorCode::kInvalidArgument, "negative confusion count");
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  const auto total = tp + fp + fn + tn;
  m.accuracy = total == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total);
  m.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall == 0 ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

// --- cache -------------------------------------------------------------------

std::optional<Prediction> MemoryPredictionCache::get(const std::string& h, const std::string& c) {
  std::lock_guard lock(mu_);
  auto it = predictions_.find(key(h, c));
  if (it == predictions_.end()) return std::nullopt;
  return it->second;
}

void MemoryPredictionCache::put(const Prediction& p) {
  std::lock_guard lock(mu_);
  predictions_[key(p.prompt_hash, p.comment_id)] = p;
}

std::optional<std::string> MemoryPredictionCache::get_explanation(const std::string& h, const std::string& c) {
  std::lock_guard lock(mu_);
  auto it = explanations_.find(key(h, c));
  if (it == explanations_.end()) return std::nullopt;
  return it->second;
}

void MemoryPredictionCache::put_explanation(const std::string& h, const std::string& c, const std::string& text) {
  std::lock_guard lock(mu_);
  explanations_[key(h, c)] = text;
}

std::size_t MemoryPredictionCache::size() const {
  std::lock_guard lock(mu_);
  return predictions_.size();
}

// --- parsing -----------------------------------------------------------------

std::optional<std::vector<Verdict>> parse_classification(std::string_view response, std::size_t n) {
  std::vector<std::optional<Verdict>> slots(n);
  for (const std::string& raw : split_lines(response)) {
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    const std::string_view num = trim(line.substr(0, colon));
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), index);
    if (ec != std::errc() || ptr != num.data() + num.size() || index < 1 || index > n) return std::nullopt;
    const std::string word = to_lower(trim(line.substr(colon + 1)));
    Verdict v;
    if (word == "catch") v = Verdict::kCatch;
    else if (word == "not_catch" || word == "not catch") v = Verdict::kNotCatch;
    else return std::nullopt;
    if (slots[index - 1]) return std::nullopt;
    slots[index - 1] = v;
  }
  std::vector<Verdict> out;
  out.reserve(n);
  for (const auto& s : slots) {
    if (!s) return std::nullopt;
    out.push_back(*s);
  }
  return out;
}

// --- classifier --------------------------------------------------------------

Classifier::Classifier(llm::Gateway& gateway, PredictionCache* cache, ClassifierConfig config)
    : gateway_(gateway), cache_(cache), config_(config) {
  if (!cache_) {
    owned_cache_ = std::make_unique<MemoryPredictionCache>();
    cache_ = owned_cache_.get();
  }
  if (config_.runs < 1) fail(ErrorCode::kInvalidArgument, "runs must be positive");
  if (config_.batch_size < 1 || config_.batch_size > kMaxBatchSize)
    fail(ErrorCode::kInvalidArgument, "batch_size must be in 1..5");
  if (config_.max_reparse < 0) fail(ErrorCode::kInvalidArgument, "max_reparse must be >= 0");
}

std::vector<Verdict> Classifier::run_batch(const FilterPrompt& prompt, std::span<const Comment> batch,
                                           std::size_t batch_index, int run, std::uint64_t seed) {
  // The request seed depends on the run only, so a comment's votes do not
  // depend on which batch it lands in. The presentation order is shuffled
  // per (batch, run).
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  seeded_shuffle(order, mix_key({seed, 0x5348u, batch_index, static_cast<std::uint64_t>(run)}));
  ClassifyTask task;
  for (std::size_t i : order) task.comments.push_back(batch[i].text);

  llm::CompletionRequest req;
  req.rendered_text = render_prompt(prompt, task);
  req.temperature = llm::default_temperature(TaskKind::kClassify);
  req.max_output_tokens = 16 * static_cast<int>(batch.size()) + 16;
  const std::uint64_t run_seed = mix_key({seed, static_cast<std::uint64_t>(run)});
  for (int attempt = 0; attempt <= config_.max_reparse; ++attempt) {
    req.seed = attempt == 0 ? run_seed : mix_key({run_seed, static_cast<std::uint64_t>(attempt)});
    const std::string response = gateway_.complete(req);
    if (auto parsed = parse_classification(response, batch.size())) {
      std::vector<Verdict> out(batch.size());
      for (std::size_t pos = 0; pos < order.size(); ++pos) out[order[pos]] = (*parsed)[pos];
      return out;
    }
  }
  fail(ErrorCode::kClassification, "batch " + std::to_string(batch_index + 1) + " run " +
                                       std::to_string(run + 1) + " returned no parseable answer after " +
                                       std::to_string(config_.max_reparse + 1) + " attempts");
}

std::vector<Prediction> Classifier::run_classification(const FilterPrompt& prompt,
                                                       std::span<const Comment> comments, std::uint64_t seed,
                                                       bool parallel) {
  if (comments.empty()) fail(ErrorCode::kInvalidArgument, "classify needs at least one comment");
  {
    std::unordered_set<std::string_view> ids;
    for (const Comment& c : comments)
      if (!ids.insert(c.id).second) fail(ErrorCode::kInvalidArgument, "duplicate comment id " + c.id);
  }
  const std::string hash = prompt.content_hash.empty() ? hash_prompt(prompt) : prompt.content_hash;

  std::vector<std::optional<Prediction>> results(comments.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < comments.size(); ++i) {
    results[i] = cache_->get(hash, comments[i].id);
    if (!results[i]) pending.push_back(i);
  }

  if (!pending.empty()) {
    std::vector<Comment> todo;
    todo.reserve(pending.size());
    for (std::size_t i : pending) todo.push_back(comments[i]);
    const std::size_t n_batches = (todo.size() + config_.batch_size - 1) / config_.batch_size;
    const std::size_t runs = static_cast<std::size_t>(config_.runs);
    const std::size_t n_jobs = n_batches * runs;

    // votes[job] holds one verdict per comment of that job's batch.
    std::vector<std::vector<Verdict>> votes(n_jobs);
    std::vector<std::exception_ptr> errors(n_jobs);
    auto do_job = [&](std::size_t j) {
      const std::size_t b = j / runs;
      const int run = static_cast<int>(j % runs);
      const std::size_t begin = b * config_.batch_size;
      const std::size_t len = std::min(config_.batch_size, todo.size() - begin);
      try {
        votes[j] = run_batch(prompt, std::span<const Comment>(todo).subspan(begin, len), b, run, seed);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    };

    if (parallel && n_jobs > 1) {
      const int threads = static_cast<int>(
          std::min<std::size_t>(n_jobs, static_cast<std::size_t>(std::max(omp_get_max_threads(),
                                                                           gateway_.max_concurrency()))));
#pragma omp parallel for schedule(dynamic) num_threads(threads)
      for (std::size_t j = 0; j < n_jobs; ++j) do_job(j);
    } else {
      for (std::size_t j = 0; j < n_jobs; ++j) do_job(j);
    }

    for (std::size_t j = 0; j < n_jobs; ++j) {
      if (!errors[j]) continue;
      try {
        std::rethrow_exception(errors[j]);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kClassification) throw;
        fail(ErrorCode::kClassification,
             "batch " + std::to_string(j / runs + 1) + " failed: " + e.what(), std::string(to_string(e.code())));
      }
    }

    for (std::size_t k = 0; k < todo.size(); ++k) {
      const std::size_t b = k / config_.batch_size;
      const std::size_t pos = k % config_.batch_size;
      Prediction p;
      p.comment_id = todo[k].id;
      p.prompt_hash = hash;
      for (std::size_t r = 0; r < runs; ++r) p.votes.push_back(votes[b * runs + r][pos]);
      const VoteResult vr = majority_vote(p.votes, config_.runs);
      p.verdict = vr.verdict;
      p.confidence = vr.confidence;
      cache_->put(p);
      results[pending[k]] = std::move(p);
    }
  }

  std::vector<Prediction> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

std::vector<Prediction> Classifier::classify(const FilterPrompt& prompt, std::span<const Comment> comments,
                                             std::uint64_t seed) {
  return run_classification(prompt, comments, seed, /*parallel=*/true);
}

std::vector<Prediction> Classifier::classify_serial(const FilterPrompt& prompt,
                                                    std::span<const Comment> comments, std::uint64_t seed) {
  return run_classification(prompt, comments, seed, /*parallel=*/false);
}

Evaluation Classifier::evaluate(const FilterPrompt& prompt, std::span<const LabeledComment> labeled,
                                std::uint64_t seed) {
  if (labeled.empty()) fail(ErrorCode::kInvalidArgument, "evaluate needs at least one labeled comment");
  std::vector<Comment> comments;
  comments.reserve(labeled.size());
  for (const auto& l : labeled) comments.push_back(l.comment);

  Evaluation ev;
  ev.predictions = classify(prompt, comments, seed);
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::vector<Mistake> false_negatives;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const Verdict pred = ev.predictions[i].verdict;
    const Verdict gold = labeled[i].gold;
    if (pred == Verdict::kCatch && gold == Verdict::kCatch) ++tp;
    else if (pred == Verdict::kCatch) {
      ++fp;
      ev.mistakes.push_back({labeled[i].comment, pred, gold});
    } else if (gold == Verdict::kCatch) {
      ++fn;
      false_negatives.push_back({labeled[i].comment, pred, gold});
    } else {
      ++tn;
    }
  }
  ev.mistakes.insert(ev.mistakes.end(), false_negatives.begin(), false_negatives.end());
  ev.metrics = compute_metrics(tp, fp, fn, tn);
  return ev;
}

std::string Classifier::explain(const FilterPrompt& prompt, const Comment& comment, Verdict verdict) {
  const std::string hash = prompt.content_hash.empty() ? hash_prompt(prompt) : prompt.content_hash;
  if (auto hit = cache_->get_explanation(hash, comment.id)) return *hit;
  ReflectTask task;
  task.mode = ReflectTask::Mode::kExplain;
  task.comments = {CommentView{comment.text, verdict, std::nullopt}};
  llm::CompletionRequest req;
  req.rendered_text = render_prompt(prompt, task);
  req.temperature = 0.0;
  req.seed = 0;
  req.max_output_tokens = 128;
  std::string text(trim(gateway_.complete(req)));
  if (text.empty()) fail(ErrorCode::kProtocol, "empty explanation");
  cache_->put_explanation(hash, comment.id, text);
  return text;
}

}  // namespace rubricopt
