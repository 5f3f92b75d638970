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
#include <string>
#include <vector>

#include "rubricopt/core/request.hpp"

namespace rubricopt::llm {

struct CompletionRequest {
  std::string rendered_text;  // output of render_prompt()
  double temperature = 0.0;
  std::uint64_t seed = 0;
  int max_output_tokens = 512;
};

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Generation tasks sample at 0.7; classification and explanations run at 0.
double default_temperature(TaskKind kind);

// A text-completion plus embedding provider. Implementations must be safe
// to call concurrently from many threads.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
  virtual std::size_t embedding_dimension() const = 0;
  virtual std::string name() const = 0;
};

}  // namespace rubricopt::llm
