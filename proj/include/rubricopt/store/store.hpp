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

// SQLite-backed persistence.
//
// One file holds filters and their version chains, ingested comments,
// labels, the prediction cache, audit events, moderation action records,
// jobs and ingest sources. Every public write runs in its own transaction,
// so after a crash a write is either fully present or absent. All failures
// of the database itself surface as Error(kStorage); "absent" is reported
// through std::optional.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rubricopt/classifier/classifier.hpp"
#include "rubricopt/core/json.hpp"
#include "rubricopt/core/types.hpp"

struct sqlite3;

namespace rubricopt {

inline constexpr int kStoreSchemaVersion = 1;
inline constexpr int kFilterExportFormatVersion = 1;

struct StoredVersion {
  FilterPrompt prompt;
  std::vector<EditDiff> diff;  // against the parent; empty for v1
  Timestamp created_at{};
};

struct FilterRecord {
  std::string filter_id;
  std::string name;
  Timestamp created_at{};
  std::vector<StoredVersion> versions;  // ascending; versions[i].version == i + 1

  const FilterPrompt& latest() const { return versions.back().prompt; }
};

struct FilterSummary {
  std::string filter_id;
  std::string name;
  int latest_version = 0;
};

struct AuditEvent {
  std::string filter_id;
  std::string comment_id;
  Verdict user_verdict = Verdict::kNotCatch;
  Verdict predicted_verdict = Verdict::kNotCatch;
  int version = 0;  // filter version whose prediction was audited
  Timestamp at{};
};

// Bounds on comment published_at, both inclusive.
struct TimeWindow {
  std::optional<Timestamp> from;
  std::optional<Timestamp> to;

  bool contains(Timestamp t) const { return (!from || t >= *from) && (!to || t <= *to); }
};

struct DailyCount {
  std::string day;  // YYYY-MM-DD, UTC
  std::int64_t caught = 0;
  bool operator==(const DailyCount&) const = default;
};

struct AuditStats {
  std::int64_t false_positives = 0;
  std::int64_t false_negatives = 0;
  std::int64_t correct = 0;
  std::int64_t caught_total = 0;    // under the latest version, cached predictions only
  std::int64_t uncaught_total = 0;
  std::vector<DailyCount> daily_caught_series;  // ascending by day
};

enum class ActionKind { kDoNothing, kHoldForReview, kDelete, kPublish, kReplyWithTemplate };

std::string_view to_string(ActionKind k);
ActionKind parse_action_kind(std::string_view text);

struct ModerationAction {
  ActionKind kind = ActionKind::kDoNothing;
  std::optional<std::string> template_id;  // kReplyWithTemplate only
};

enum class ActionStatus { kSucceeded, kFailed };

struct ActionRecord {
  std::int64_t action_id = 0;  // assigned by the store
  std::string filter_id;
  std::string comment_id;
  ModerationAction action;
  Timestamp executed_at{};
  ActionStatus status = ActionStatus::kSucceeded;
  std::string sink_result;
};

// Jobs are persisted in serialized form; the service owns their meaning.
struct JobRecord {
  std::string job_id;
  std::string filter_id;
  std::string kind;
  std::string state;
  double progress = 0.0;
  Json params = Json::object();
  Json result;  // null until the job produces output
  std::string error;
  bool resumable = false;
  Timestamp created_at{};
  Timestamp updated_at{};
};

struct SourceRecord {
  std::string source_id;
  std::string kind;  // "jsonl" or "polling"
  Json config = Json::object();
  std::optional<Timestamp> high_water;
  std::optional<Timestamp> last_sync;
};

struct PredictionQuery {
  std::optional<Verdict> verdict;
  double min_confidence = 0.0;
  double max_confidence = 1.0;
  std::optional<bool> audited;
  std::optional<std::string> text;  // case-insensitive substring
  std::size_t offset = 0;
  std::size_t limit = 50;

  // Throws Error(kInvalidArgument).
  void validate() const;
};

struct PredictionRow {
  Comment comment;
  Prediction prediction;
  std::optional<Verdict> audited_verdict;  // latest audit for this filter
};

struct PredictionPage {
  std::vector<PredictionRow> items;  // published_at desc, comment id asc
  std::size_t total = 0;             // rows matching the query
  std::optional<std::size_t> next_offset;
};

class Store final : public PredictionCache {
 public:
  // Opens or creates the database; ":memory:" gives a private in-memory
  // store. Throws Error(kStorage).
  static std::unique_ptr<Store> open(const std::string& path);
  ~Store() override;
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  // --- filters --------------------------------------------------------------

  // Appends a version. The first put of a filter must have no parent and
  // gets version 1; later puts must name the current latest version as
  // parent. The stored prompt carries the assigned version and a fresh hash.
  // Throws Error(kInvalidArgument) for an invalid prompt or an absent parent,
  // Error(kConflict) for a parent that is no longer the latest.
  int put_filter_version(const std::string& filter_id, FilterPrompt prompt);

  std::optional<FilterRecord> filter(const std::string& filter_id);
  std::optional<FilterPrompt> latest_version(const std::string& filter_id);
  std::optional<FilterPrompt> version(const std::string& filter_id, int version);
  std::vector<FilterSummary> list_filters();
  // Throws Error(kNotFound) for an unknown filter.
  void require_filter(const std::string& filter_id);

  // --- comments -------------------------------------------------------------

  // Inserts comments whose id is new; returns how many were added.
  std::size_t put_comments(std::span<const Comment> comments, const std::string& source_id = {});
  std::optional<Comment> comment(const std::string& comment_id);
  std::vector<Comment> comments_by_ids(std::span<const std::string> ids);
  // Newest first, then by id.
  std::vector<Comment> all_comments();
  std::size_t comment_count();

  // --- labels ---------------------------------------------------------------

  // Replaces the current label for (filter, comment), archiving the old one.
  // Throws Error(kNotFound) for an unknown filter or comment.
  void put_label(const std::string& filter_id, const Label& label);
  std::vector<Label> labels(const std::string& filter_id);
  // Archived labels, oldest first, followed by the current one.
  std::vector<Label> label_history(const std::string& filter_id, const std::string& comment_id);
  std::vector<LabeledComment> labeled_comments(const std::string& filter_id);

  // --- prediction cache -----------------------------------------------------

  std::optional<Prediction> get(const std::string& prompt_hash, const std::string& comment_id) override;
  void put(const Prediction& prediction) override;
  std::optional<std::string> get_explanation(const std::string& prompt_hash,
                                             const std::string& comment_id) override;
  void put_explanation(const std::string& prompt_hash, const std::string& comment_id,
                       const std::string& text) override;

  void put_predictions(std::span<const Prediction> predictions);
  std::size_t cache_size();
  void scan_cache(const std::function<void(const Prediction&)>& visit);

  // Drops cache entries and explanations whose hash belongs to no stored
  // version, then vacuums. Returns the number of entries removed.
  std::size_t compact();

  // --- audits ---------------------------------------------------------------

  // Throws Error(kNotFound) for an unknown filter or comment.
  void record_audit(const AuditEvent& event);
  std::vector<AuditEvent> audits(const std::string& filter_id);

  // The latest audit per comment is joined with the verdict it audited.
  // Caught/uncaught totals and the daily series come from cached
  // predictions of the latest version for comments inside the window.
  // Throws Error(kNotFound) for an unknown filter.
  AuditStats audit_stats(const std::string& filter_id, const TimeWindow& window = {});

  // Cached predictions of `prompt_hash` joined with comments.
  PredictionPage query_predictions(const std::string& filter_id, const std::string& prompt_hash,
                                   const PredictionQuery& query);

  // --- actions, jobs, sources -----------------------------------------------

  std::int64_t record_action(ActionRecord record);
  void update_action(const ActionRecord& record);
  std::optional<ActionRecord> action(std::int64_t action_id);
  std::vector<ActionRecord> actions(const std::string& filter_id);

  void put_job(const JobRecord& job);
  std::optional<JobRecord> job(const std::string& job_id);
  std::vector<JobRecord> jobs();

  void put_source(const SourceRecord& source);
  std::optional<SourceRecord> source(const std::string& source_id);
  std::vector<SourceRecord> sources();

  // --- export / import ------------------------------------------------------

  // {"format", "format_version", "filter_id", "name", "versions", "labels",
  // "comments"}. Throws Error(kNotFound).
  Json export_filter(const std::string& filter_id);
  // Replays the lineage under `as_filter_id` (or the exported id) and
  // restores labels and the comments they reference. Throws
  // Error(kConflict) when the filter exists, Error(kInvalidArgument) for a
  // malformed document. All-or-nothing.
  std::string import_filter(const Json& document, const std::optional<std::string>& as_filter_id = std::nullopt);

 private:
  explicit Store(sqlite3* db);
  class Tx;
  class Stmt;

  void migrate();
  bool filter_exists_locked(const std::string& filter_id);
  bool comment_exists_locked(const std::string& comment_id);
  int put_filter_version_locked(const std::string& filter_id, FilterPrompt prompt);
  std::optional<FilterRecord> filter_locked(const std::string& filter_id);
  void put_label_locked(const std::string& filter_id, const Label& label);
  std::size_t put_comments_locked(std::span<const Comment> comments, const std::string& source_id);

  sqlite3* db_;
  std::recursive_mutex mu_;
};

}  // namespace rubricopt
