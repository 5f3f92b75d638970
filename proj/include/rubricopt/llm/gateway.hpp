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

#include <array>
#include <atomic>
#include <memory>
#include <semaphore>

#include "rubricopt/llm/backend.hpp"

namespace rubricopt::llm {

struct CallCounts {
  std::array<std::uint64_t, 5> completions_by_task{};  // indexed by TaskKind
  std::uint64_t embedding_calls = 0;
  std::uint64_t embedded_texts = 0;

  std::uint64_t completions() const;
  std::uint64_t completions(TaskKind kind) const {
    return completions_by_task[static_cast<std::size_t>(kind)];
  }
  CallCounts operator-(const CallCounts& rhs) const;
};

// Front door to a backend. Validates the task sentinel, caps in-flight
// requests and keeps per-task call counters. Several gateways may share one
// backend; each keeps its own counters.
class Gateway {
 public:
  static constexpr int kDefaultMaxConcurrency = 8;

  explicit Gateway(std::shared_ptr<Backend> backend, int max_concurrency = kDefaultMaxConcurrency);

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  std::string complete(const CompletionRequest& request);
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

  // Renders `task` against `prompt` and completes it at the task's default
  // temperature.
  std::string run(const FilterPrompt& prompt, const Task& task, std::uint64_t seed);

  CallCounts counts() const;
  std::size_t embedding_dimension() const { return backend_->embedding_dimension(); }
  const std::shared_ptr<Backend>& backend() const { return backend_; }
  int max_concurrency() const { return max_concurrency_; }

 private:
  std::shared_ptr<Backend> backend_;
  int max_concurrency_;
  std::counting_semaphore<1024> in_flight_;
  std::array<std::atomic<std::uint64_t>, 5> completions_{};
  std::atomic<std::uint64_t> embedding_calls_{0};
  std::atomic<std::uint64_t> embedded_texts_{0};
};

}  // namespace rubricopt::llm
