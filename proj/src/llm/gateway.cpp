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

#include "rubricopt/llm/gateway.hpp"

#include <cmath>

#include "rubricopt/error.hpp"

namespace rubricopt::llm {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size())
    fail(ErrorCode::kInvalidArgument, "embedding dimensions differ");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double default_temperature(TaskKind kind) {
  return kind == TaskKind::kClassify ? 0.0 : 0.7;
}

std::uint64_t CallCounts::completions() const {
  std::uint64_t total = 0;
  for (auto c : completions_by_task) total += c;
  return total;
}

CallCounts CallCounts::operator-(const CallCounts& rhs) const {
  CallCounts out;
  for (std::size_t i = 0; i < completions_by_task.size(); ++i)
    out.completions_by_task[i] = completions_by_task[i] - rhs.completions_by_task[i];
  out.embedding_calls = embedding_calls - rhs.embedding_calls;
  out.embedded_texts = embedded_texts - rhs.embedded_texts;
  return out;
}

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

}  // namespace

Gateway::Gateway(std::shared_ptr<Backend> backend, int max_concurrency)
    : backend_(std::move(backend)),
      max_concurrency_(max_concurrency),
      in_flight_(max_concurrency) {
  if (!backend_) fail(ErrorCode::kInvalidArgument, "gateway needs a backend");
  if (max_concurrency < 1 || max_concurrency > 1024)
    fail(ErrorCode::kInvalidArgument, "max_concurrency must be in 1..1024");
}

std::string Gateway::complete(const CompletionRequest& request) {
  const auto kind = sniff_task(request.rendered_text);
  if (!kind) fail(ErrorCode::kProtocol, "request lacks a valid task sentinel");
  if (request.temperature < 0) fail(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  if (request.max_output_tokens < 1)
    fail(ErrorCode::kInvalidArgument, "max_output_tokens must be positive");
  completions_[static_cast<std::size_t>(*kind)].fetch_add(1, std::memory_order_relaxed);
  SlotGuard slot(in_flight_);
  return backend_->complete(request);
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) fail(ErrorCode::kInvalidArgument, "embed needs at least one text");
  embedding_calls_.fetch_add(1, std::memory_order_relaxed);
  embedded_texts_.fetch_add(texts.size(), std::memory_order_relaxed);
  SlotGuard slot(in_flight_);
  auto vectors = backend_->embed(texts);
  if (vectors.size() != texts.size())
    fail(ErrorCode::kProtocol, "backend returned " + std::to_string(vectors.size()) +
                                   " embeddings for " + std::to_string(texts.size()) + " texts");
  for (const auto& v : vectors) {
    if (v.dimension() != backend_->embedding_dimension())
      fail(ErrorCode::kProtocol, "embedding dimension mismatch");
    for (double x : v.values)
      if (!std::isfinite(x)) fail(ErrorCode::kProtocol, "non-finite embedding value");
  }
  return vectors;
}

std::string Gateway::run(const FilterPrompt& prompt, const Task& task, std::uint64_t seed) {
  CompletionRequest req;
  req.rendered_text = render_prompt(prompt, task);
  req.temperature = default_temperature(task_kind(task));
  req.seed = seed;
  return complete(req);
}

CallCounts Gateway::counts() const {
  CallCounts c;
  for (std::size_t i = 0; i < completions_.size(); ++i)
    c.completions_by_task[i] = completions_[i].load(std::memory_order_relaxed);
  c.embedding_calls = embedding_calls_.load(std::memory_order_relaxed);
  c.embedded_texts = embedded_texts_.load(std::memory_order_relaxed);
  return c;
}

}  // namespace rubricopt::llm
