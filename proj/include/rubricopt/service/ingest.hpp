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

// Comment ingestion from JSONL files and polled platform adapters.

#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "rubricopt/store/store.hpp"

namespace rubricopt {

inline constexpr std::size_t kFirstSyncCap = 1000;
inline constexpr std::chrono::seconds kDefaultPollInterval{3600};

struct JsonlFileSource {
  std::string path;
};

struct PollingSource {
  std::string adapter_id;
  std::chrono::seconds interval = kDefaultPollInterval;
};

using IngestSource = std::variant<JsonlFileSource, PollingSource>;

// "jsonl:<path>" or "poll:<adapter id>".
std::string source_id(const IngestSource& source);

struct IngestResult {
  std::string source_id;
  std::size_t fetched = 0;  // non-empty records seen
  std::size_t added = 0;
  std::size_t duplicates = 0;
  std::size_t skipped_malformed = 0;
  std::size_t capped = 0;  // dropped by the first-sync cap
  std::vector<std::string> errors;  // first few parse errors
};

// A platform that hands out raw JSONL comment records.
class PlatformAdapter {
 public:
  virtual ~PlatformAdapter() = default;
  virtual std::string id() const = 0;
  // Records published after `since` (all when empty). May return older
  // records too; the ingestor filters by its high-water mark.
  virtual std::vector<std::string> fetch(std::optional<Timestamp> since) = 0;
};

// Replays a JSONL file as if it were a live platform.
class FixtureAdapter final : public PlatformAdapter {
 public:
  FixtureAdapter(std::string id, std::string path);
  std::string id() const override { return id_; }
  std::vector<std::string> fetch(std::optional<Timestamp> since) override;

 private:
  std::string id_;
  std::string path_;
};

// Idempotent by comment id. A source's first sync keeps only its most
// recent kFirstSyncCap comments; later syncs keep records at or after the
// high-water mark.
class Ingestor {
 public:
  explicit Ingestor(Store& store);

  void register_adapter(std::shared_ptr<PlatformAdapter> adapter);

  // Throws Error(kNotFound) for an unreadable file or unknown adapter.
  IngestResult ingest(const IngestSource& source);

 private:
  IngestResult ingest_lines(const std::string& source_id, const std::vector<std::string>& lines);

  Store& store_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<PlatformAdapter>> adapters_;
};

// Runs polling sources on their interval from one background thread.
class PollingScheduler {
 public:
  using Callback = std::function<void(const IngestResult&)>;

  PollingScheduler(Ingestor& ingestor, std::vector<PollingSource> sources, Callback on_result = {});
  ~PollingScheduler();
  PollingScheduler(const PollingScheduler&) = delete;
  PollingScheduler& operator=(const PollingScheduler&) = delete;

  void start();
  void stop();

 private:
  void loop();

  Ingestor& ingestor_;
  std::vector<PollingSource> sources_;
  Callback on_result_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace rubricopt
