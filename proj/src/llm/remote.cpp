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

#include "rubricopt/llm/remote.hpp"

#include <httplib.h>

#include <algorithm>
#include <thread>

#include "rubricopt/core/json.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt::llm {

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos)
    fail(ErrorCode::kInvalidArgument, "base_url needs a scheme: " + config_.base_url);
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  origin_ = config_.base_url.substr(0, path_start);
  if (path_start != std::string::npos) path_prefix_ = config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (config_.max_retries < 0) fail(ErrorCode::kInvalidArgument, "max_retries must be >= 0");
  if (config_.request_timeout.count() <= 0)
    fail(ErrorCode::kInvalidArgument, "request_timeout must be positive");
  if (config_.embedding_dimension == 0)
    fail(ErrorCode::kInvalidArgument, "embedding_dimension must be positive");
}

std::chrono::milliseconds RemoteBackend::deadline() const {
  // Each attempt may spend one timeout connecting and one reading.
  std::chrono::milliseconds total{0};
  auto backoff = config_.initial_backoff;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    total += 2 * config_.request_timeout;
    if (attempt < config_.max_retries) total += backoff;
    backoff *= 2;
  }
  return total;
}

std::string RemoteBackend::post_json(const std::string& path, const std::string& body) {
  httplib::Client client(origin_);
  const auto timeout = config_.request_timeout;
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(path_prefix_ + path, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      fail(ErrorCode::kProtocol, "provider rejected request with HTTP " + std::to_string(res->status),
           res->body);
    return res->body;
  }
  fail(ErrorCode::kTransport,
       "request to " + origin_ + path_prefix_ + path + " failed after " +
           std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

namespace {

Json parse_payload(const std::string& body) {
  Json j = Json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorCode::kProtocol, "provider payload is not a JSON object");
  return j;
}

}  // namespace

std::string RemoteBackend::complete(const CompletionRequest& request) {
  Json body = {
      {"model", config_.completion_model},
      {"messages", Json::array({{{"role", "user"}, {"content", request.rendered_text}}})},
      {"temperature", request.temperature},
      {"seed", request.seed},
      {"max_tokens", request.max_output_tokens},
  };
  const Json reply = parse_payload(post_json("/chat/completions", body.dump()));
  const auto choices = reply.find("choices");
  if (choices == reply.end() || !choices->is_array() || choices->empty())
    fail(ErrorCode::kProtocol, "completion payload has no choices");
  const Json& first = (*choices)[0];
  if (!first.contains("message") || !first["message"].contains("content") ||
      !first["message"]["content"].is_string())
    fail(ErrorCode::kProtocol, "completion payload has no message content");
  return first["message"]["content"].get<std::string>();
}

std::vector<EmbeddingVector> RemoteBackend::embed(const std::vector<std::string>& texts) {
  Json body = {{"model", config_.embedding_model}, {"input", texts}};
  const Json reply = parse_payload(post_json("/embeddings", body.dump()));
  const auto data = reply.find("data");
  if (data == reply.end() || !data->is_array() || data->size() != texts.size())
    fail(ErrorCode::kProtocol, "embedding payload has the wrong number of items");
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<bool> seen(texts.size(), false);
  for (std::size_t i = 0; i < data->size(); ++i) {
    const Json& item = (*data)[i];
    std::size_t index = i;
    if (item.contains("index")) {
      if (!item["index"].is_number_unsigned()) fail(ErrorCode::kProtocol, "bad embedding index");
      index = item["index"].get<std::size_t>();
    }
    if (index >= texts.size() || seen[index]) fail(ErrorCode::kProtocol, "bad embedding index");
    seen[index] = true;
    if (!item.contains("embedding") || !item["embedding"].is_array())
      fail(ErrorCode::kProtocol, "embedding item lacks a vector");
    for (const Json& x : item["embedding"]) {
      if (!x.is_number()) fail(ErrorCode::kProtocol, "non-numeric embedding value");
      out[index].values.push_back(x.get<double>());
    }
  }
  return out;
}

}  // namespace rubricopt::llm
