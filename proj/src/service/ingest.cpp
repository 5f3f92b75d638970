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

#include "rubricopt/service/ingest.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt {

namespace {

constexpr std::size_t kMaxReportedErrors = 5;

std::vector<std::string> read_lines(const std::string& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) fail(ErrorCode::kNotFound, "not a readable file: " + path);
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::move(line));
  return lines;
}

}  // namespace

std::string source_id(const IngestSource& source) {
  if (const auto* f = std::get_if<JsonlFileSource>(&source)) return "jsonl:" + f->path;
  return "poll:" + std::get<PollingSource>(source).adapter_id;
}

FixtureAdapter::FixtureAdapter(std::string id, std::string path) : id_(std::move(id)), path_(std::move(path)) {}

std::vector<std::string> FixtureAdapter::fetch(std::optional<Timestamp>) { return read_lines(path_); }

Ingestor::Ingestor(Store& store) : store_(store) {}

void Ingestor::register_adapter(std::shared_ptr<PlatformAdapter> adapter) {
  std::lock_guard lock(mu_);
  adapters_[adapter->id()] = std::move(adapter);
}

IngestResult Ingestor::ingest(const IngestSource& source) {
  const std::string id = source_id(source);
  std::vector<std::string> lines;
  if (const auto* f = std::get_if<JsonlFileSource>(&source)) {
    lines = read_lines(f->path);
  } else {
    const auto& p = std::get<PollingSource>(source);
    std::shared_ptr<PlatformAdapter> adapter;
    {
      std::lock_guard lock(mu_);
      auto it = adapters_.find(p.adapter_id);
      if (it == adapters_.end()) fail(ErrorCode::kNotFound, "unknown adapter " + p.adapter_id);
      adapter = it->second;
    }
    const auto record = store_.source(id);
    lines = adapter->fetch(record ? record->high_water : std::nullopt);
  }
  return ingest_lines(id, lines);
}

IngestResult Ingestor::ingest_lines(const std::string& id, const std::vector<std::string>& lines) {
  IngestResult result;
  result.source_id = id;
  const auto record = store_.source(id);
  const std::optional<Timestamp> high_water = record ? record->high_water : std::nullopt;

  std::vector<Comment> parsed;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    ++result.fetched;
    try {
      parsed.push_back(parse_comment_record(lines[i]));
    } catch (const Error& e) {
      ++result.skipped_malformed;
      if (result.errors.size() < kMaxReportedErrors)
        result.errors.push_back("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }

  if (high_water) {
    std::erase_if(parsed, [&](const Comment& c) { return c.published_at < *high_water; });
  } else if (parsed.size() > kFirstSyncCap) {
    std::stable_sort(parsed.begin(), parsed.end(), [](const Comment& a, const Comment& b) {
      return a.published_at != b.published_at ? a.published_at > b.published_at : a.id < b.id;
    });
    result.capped = parsed.size() - kFirstSyncCap;
    parsed.resize(kFirstSyncCap);
  }

  result.added = store_.put_comments(parsed, id);
  result.duplicates = parsed.size() - result.added;

  SourceRecord updated = record.value_or(SourceRecord{id, id.rfind("poll:", 0) == 0 ? "polling" : "jsonl", Json::object(),
                                                      std::nullopt, std::nullopt});
  for (const Comment& c : parsed)
    if (!updated.high_water || c.published_at > *updated.high_water) updated.high_water = c.published_at;
  updated.last_sync = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
  store_.put_source(updated);

  spdlog::info("ingest {}: {} added, {} duplicate, {} malformed, {} capped", id, result.added, result.duplicates,
               result.skipped_malformed, result.capped);
  return result;
}

PollingScheduler::PollingScheduler(Ingestor& ingestor, std::vector<PollingSource> sources, Callback on_result)
    : ingestor_(ingestor), sources_(std::move(sources)), on_result_(std::move(on_result)) {}

PollingScheduler::~PollingScheduler() { stop(); }

void PollingScheduler::start() {
  std::lock_guard lock(mu_);
  if (thread_.joinable() || sources_.empty()) return;
  stopping_ = false;
  thread_ = std::thread([this] { loop(); });
}

void PollingScheduler::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void PollingScheduler::loop() {
  using Clock = std::chrono::steady_clock;
  std::vector<Clock::time_point> due(sources_.size(), Clock::now());
  std::unique_lock lock(mu_);
  while (!stopping_) {
    for (std::size_t i = 0; i < sources_.size(); ++i) {
      if (Clock::now() < due[i]) continue;
      lock.unlock();
      try {
        const IngestResult r = ingestor_.ingest(sources_[i]);
        if (on_result_) on_result_(r);
      } catch (const std::exception& e) {
        spdlog::warn("polling {} failed: {}", sources_[i].adapter_id, e.what());
      }
      lock.lock();
      due[i] = Clock::now() + sources_[i].interval;
    }
    const auto next = *std::min_element(due.begin(), due.end());
    cv_.wait_until(lock, next, [this] { return stopping_; });
  }
}

}  // namespace rubricopt
