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

#include <chrono>
#include <string>

#include "rubricopt/llm/backend.hpp"

namespace rubricopt::llm {

struct RemoteConfig {
  std::string base_url = "https://api.openai.com/v1";  // scheme://host[:port][/prefix]
  std::string api_key;
  std::string completion_model = "gpt-4-1106-preview";
  std::string embedding_model = "text-embedding-3-small";
  std::size_t embedding_dimension = 1536;
  std::chrono::milliseconds request_timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
};

// Chat-completion style HTTP provider. Connection failures, 429 and 5xx are
// retried with exponential backoff; other failures are reported at once.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  std::string complete(const CompletionRequest& request) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::size_t embedding_dimension() const override { return config_.embedding_dimension; }
  std::string name() const override { return "remote"; }

  // Upper bound on the wall time of one call, retries and backoff included.
  std::chrono::milliseconds deadline() const;

 private:
  std::string post_json(const std::string& path, const std::string& body);

  RemoteConfig config_;
  std::string origin_;       // scheme://host:port
  std::string path_prefix_;  // e.g. "/v1"
};

}  // namespace rubricopt::llm
