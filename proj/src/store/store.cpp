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

#include "rubricopt/store/store.hpp"

#include <sqlite3.h>

#include <chrono>
#include <map>
#include <set>

#include "rubricopt/core/prompt.hpp"
#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"
#include "rubricopt/optimizer/json.hpp"

namespace rubricopt {

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS filters (
  filter_id TEXT PRIMARY KEY, name TEXT NOT NULL, created_at INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS versions (
  filter_id TEXT NOT NULL REFERENCES filters(filter_id), version INTEGER NOT NULL,
  parent_version INTEGER, content_hash TEXT NOT NULL, prompt TEXT NOT NULL, diff TEXT NOT NULL,
  created_at INTEGER NOT NULL, PRIMARY KEY (filter_id, version));
CREATE INDEX IF NOT EXISTS versions_hash ON versions(content_hash);
CREATE TABLE IF NOT EXISTS comments (
  comment_id TEXT PRIMARY KEY, text TEXT NOT NULL, author TEXT, thread_id TEXT, video_id TEXT,
  published_at INTEGER NOT NULL, like_count INTEGER, source_id TEXT NOT NULL DEFAULT '');
CREATE INDEX IF NOT EXISTS comments_order ON comments(published_at DESC, comment_id);
CREATE TABLE IF NOT EXISTS labels (
  filter_id TEXT NOT NULL, comment_id TEXT NOT NULL, verdict TEXT NOT NULL, source TEXT NOT NULL,
  labeled_at INTEGER NOT NULL, PRIMARY KEY (filter_id, comment_id));
CREATE TABLE IF NOT EXISTS label_history (
  seq INTEGER PRIMARY KEY AUTOINCREMENT, filter_id TEXT NOT NULL, comment_id TEXT NOT NULL,
  verdict TEXT NOT NULL, source TEXT NOT NULL, labeled_at INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS predictions (
  prompt_hash TEXT NOT NULL, comment_id TEXT NOT NULL, verdict TEXT NOT NULL,
  confidence REAL NOT NULL, body TEXT NOT NULL, PRIMARY KEY (prompt_hash, comment_id));
CREATE TABLE IF NOT EXISTS explanations (
  prompt_hash TEXT NOT NULL, comment_id TEXT NOT NULL, text TEXT NOT NULL,
  PRIMARY KEY (prompt_hash, comment_id));
CREATE TABLE IF NOT EXISTS audits (
  seq INTEGER PRIMARY KEY AUTOINCREMENT, filter_id TEXT NOT NULL, comment_id TEXT NOT NULL,
  user_verdict TEXT NOT NULL, predicted_verdict TEXT NOT NULL, version INTEGER NOT NULL,
  at INTEGER NOT NULL);
CREATE INDEX IF NOT EXISTS audits_filter ON audits(filter_id, comment_id, seq);
CREATE TABLE IF NOT EXISTS actions (
  action_id INTEGER PRIMARY KEY AUTOINCREMENT, filter_id TEXT NOT NULL, comment_id TEXT NOT NULL,
  kind TEXT NOT NULL, template_id TEXT, executed_at INTEGER NOT NULL, status TEXT NOT NULL,
  sink_result TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS jobs (
  job_id TEXT PRIMARY KEY, filter_id TEXT NOT NULL, kind TEXT NOT NULL, state TEXT NOT NULL,
  progress REAL NOT NULL, params TEXT NOT NULL, result TEXT NOT NULL, error TEXT NOT NULL,
  resumable INTEGER NOT NULL, created_at INTEGER NOT NULL, updated_at INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS sources (
  source_id TEXT PRIMARY KEY, kind TEXT NOT NULL, config TEXT NOT NULL, high_water INTEGER,
  last_sync INTEGER);
)sql";

std::int64_t to_epoch(Timestamp t) { return t.time_since_epoch().count(); }
Timestamp from_epoch(std::int64_t s) { return Timestamp(std::chrono::seconds(s)); }

Timestamp now_utc() { return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()); }

[[noreturn]] void storage_error(sqlite3* db, const std::string& what) {
  fail(ErrorCode::kStorage, what + ": " + (db ? sqlite3_errmsg(db) : "no database"));
}

Json parse_json_column(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kStorage, std::string("corrupt JSON column: ") + e.what());
  }
}

}  // namespace

// Prepared statement with positional binding.
class Store::Stmt {
 public:
  Stmt(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) storage_error(db, "prepare");
  }
  ~Stmt() { sqlite3_finalize(stmt_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  Stmt& bind(int i, const std::string& v) {
    check(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
    return *this;
  }
  Stmt& bind(int i, const char* v) { return bind(i, std::string(v)); }
  Stmt& bind(int i, std::int64_t v) {
    check(sqlite3_bind_int64(stmt_, i, v));
    return *this;
  }
  Stmt& bind(int i, int v) { return bind(i, static_cast<std::int64_t>(v)); }
  Stmt& bind(int i, double v) {
    check(sqlite3_bind_double(stmt_, i, v));
    return *this;
  }
  Stmt& bind_null(int i) {
    check(sqlite3_bind_null(stmt_, i));
    return *this;
  }
  template <typename T>
  Stmt& bind(int i, const std::optional<T>& v) {
    return v ? bind(i, *v) : bind_null(i);
  }

  // True while a row is available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    storage_error(db_, "step");
  }
  void run() {
    while (step()) {
    }
  }

  bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }
  std::string text(int col) const {
    const auto* p = sqlite3_column_text(stmt_, col);
    return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
             : std::string();
  }
  std::optional<std::string> opt_text(int col) const {
    return is_null(col) ? std::nullopt : std::optional<std::string>(text(col));
  }
  std::int64_t i64(int col) const { return sqlite3_column_int64(stmt_, col); }
  std::optional<std::int64_t> opt_i64(int col) const {
    return is_null(col) ? std::nullopt : std::optional<std::int64_t>(i64(col));
  }
  double real(int col) const { return sqlite3_column_double(stmt_, col); }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) storage_error(db_, "bind");
  }
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

// BEGIN IMMEDIATE on construction, ROLLBACK unless commit() ran.
class Store::Tx {
 public:
  explicit Tx(sqlite3* db) : db_(db) { exec("BEGIN IMMEDIATE"); }
  ~Tx() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    exec("COMMIT");
    done_ = true;
  }

 private:
  void exec(const char* sql) {
    if (sqlite3_exec(db_, sql, nullptr, nullptr, nullptr) != SQLITE_OK) storage_error(db_, sql);
  }
  sqlite3* db_;
  bool done_ = false;
};

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::kDoNothing: return "do_nothing";
    case ActionKind::kHoldForReview: return "hold_for_review";
    case ActionKind::kDelete: return "delete";
    case ActionKind::kPublish: return "publish";
    case ActionKind::kReplyWithTemplate: return "reply_with_template";
  }
  return "do_nothing";
}

ActionKind parse_action_kind(std::string_view text) {
  for (auto k : {ActionKind::kDoNothing, ActionKind::kHoldForReview, ActionKind::kDelete, ActionKind::kPublish,
                 ActionKind::kReplyWithTemplate})
    if (to_string(k) == text) return k;
  fail(ErrorCode::kInvalidArgument, "unknown action: " + std::string(text));
}

void PredictionQuery::validate() const {
  if (!(min_confidence >= 0.0 && max_confidence <= 1.0 && min_confidence <= max_confidence))
    fail(ErrorCode::kInvalidArgument, "confidence range must satisfy 0 <= min <= max <= 1");
  if (limit == 0 || limit > 500) fail(ErrorCode::kInvalidArgument, "limit must be in 1..500");
}

std::unique_ptr<Store> Store::open(const std::string& path) {
  sqlite3* db = nullptr;
  const int rc = sqlite3_open_v2(path.c_str(), &db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                                 nullptr);
  if (rc != SQLITE_OK) {
    const std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close(db);
    fail(ErrorCode::kStorage, "cannot open " + path + ": " + msg);
  }
  sqlite3_busy_timeout(db, 5000);
  std::unique_ptr<Store> store(new Store(db));
  store->migrate();
  return store;
}

Store::Store(sqlite3* db) : db_(db) {}

Store::~Store() { sqlite3_close(db_); }

void Store::migrate() {
  std::lock_guard lock(mu_);
  for (const char* pragma : {"PRAGMA journal_mode=WAL", "PRAGMA synchronous=FULL", "PRAGMA foreign_keys=ON"})
    sqlite3_exec(db_, pragma, nullptr, nullptr, nullptr);
  char* err = nullptr;
  if (sqlite3_exec(db_, kSchema, nullptr, nullptr, &err) != SQLITE_OK) {
    const std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    fail(ErrorCode::kStorage, "schema: " + msg);
  }
  Stmt read(db_, "SELECT value FROM meta WHERE key = 'schema_version'");
  if (read.step()) {
    if (read.text(0) != std::to_string(kStoreSchemaVersion))
      fail(ErrorCode::kStorage, "unsupported schema version " + read.text(0));
  } else {
    Stmt(db_, "INSERT INTO meta(key, value) VALUES ('schema_version', ?)")
        .bind(1, std::to_string(kStoreSchemaVersion))
        .run();
  }
}

// --- filters ------------------------------------------------------------------

bool Store::filter_exists_locked(const std::string& filter_id) {
  Stmt s(db_, "SELECT 1 FROM filters WHERE filter_id = ?");
  s.bind(1, filter_id);
  return s.step();
}

bool Store::comment_exists_locked(const std::string& comment_id) {
  Stmt s(db_, "SELECT 1 FROM comments WHERE comment_id = ?");
  s.bind(1, comment_id);
  return s.step();
}

int Store::put_filter_version(const std::string& filter_id, FilterPrompt prompt) {
  std::lock_guard lock(mu_);
  Tx tx(db_);
  const int v = put_filter_version_locked(filter_id, std::move(prompt));
  tx.commit();
  return v;
}

int Store::put_filter_version_locked(const std::string& filter_id, FilterPrompt prompt) {
  if (filter_id.empty()) fail(ErrorCode::kInvalidArgument, "filter_id is empty");
  if (const auto violations = validate_prompt(prompt); !violations.empty())
    fail(ErrorCode::kInvalidArgument, "invalid prompt: " + violations.front());

  std::optional<int> latest;
  {
    Stmt s(db_, "SELECT MAX(version) FROM versions WHERE filter_id = ?");
    s.bind(1, filter_id);
    if (s.step() && !s.is_null(0)) latest = static_cast<int>(s.i64(0));
  }
  prompt.filter_id = filter_id;
  std::vector<EditDiff> diff;
  const Timestamp now = now_utc();
  if (!latest) {
    if (prompt.parent_version)
      fail(ErrorCode::kInvalidArgument,
           "lineage break: parent version " + std::to_string(*prompt.parent_version) + " does not exist");
    prompt.version = 1;
    if (!filter_exists_locked(filter_id))
      Stmt(db_, "INSERT INTO filters(filter_id, name, created_at) VALUES (?, ?, ?)")
          .bind(1, filter_id)
          .bind(2, prompt.name)
          .bind(3, to_epoch(now))
          .run();
  } else {
    if (!prompt.parent_version || *prompt.parent_version < 1 || *prompt.parent_version > *latest)
      fail(ErrorCode::kInvalidArgument,
           "lineage break: parent version " +
               (prompt.parent_version ? std::to_string(*prompt.parent_version) : std::string("none")) +
               " does not exist");
    if (*prompt.parent_version != *latest)
      fail(ErrorCode::kConflict, "parent version " + std::to_string(*prompt.parent_version) +
                                     " is stale; latest is " + std::to_string(*latest));
    prompt.version = *latest + 1;
    Stmt s(db_, "SELECT prompt FROM versions WHERE filter_id = ? AND version = ?");
    s.bind(1, filter_id).bind(2, *latest);
    s.step();
    const FilterPrompt parent = parse_json_column(s.text(0)).get<FilterPrompt>();
    diff = diff_prompts(parent, prompt);
  }
  prompt = with_hash(std::move(prompt));
  Stmt(db_,
       "INSERT INTO versions(filter_id, version, parent_version, content_hash, prompt, diff, created_at) "
       "VALUES (?, ?, ?, ?, ?, ?, ?)")
      .bind(1, filter_id)
      .bind(2, prompt.version)
      .bind(3, prompt.parent_version)
      .bind(4, prompt.content_hash)
      .bind(5, Json(prompt).dump())
      .bind(6, Json(diff).dump())
      .bind(7, to_epoch(now))
      .run();
  return prompt.version;
}

std::optional<FilterRecord> Store::filter(const std::string& filter_id) {
  std::lock_guard lock(mu_);
  return filter_locked(filter_id);
}

std::optional<FilterRecord> Store::filter_locked(const std::string& filter_id) {
  Stmt head(db_, "SELECT name, created_at FROM filters WHERE filter_id = ?");
  head.bind(1, filter_id);
  if (!head.step()) return std::nullopt;
  FilterRecord rec;
  rec.filter_id = filter_id;
  rec.name = head.text(0);
  rec.created_at = from_epoch(head.i64(1));
  Stmt s(db_, "SELECT prompt, diff, created_at FROM versions WHERE filter_id = ? ORDER BY version");
  s.bind(1, filter_id);
  while (s.step()) {
    StoredVersion v;
    v.prompt = parse_json_column(s.text(0)).get<FilterPrompt>();
    v.diff = parse_json_column(s.text(1)).get<std::vector<EditDiff>>();
    v.created_at = from_epoch(s.i64(2));
    rec.versions.push_back(std::move(v));
  }
  return rec;
}

std::optional<FilterPrompt> Store::latest_version(const std::string& filter_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT prompt FROM versions WHERE filter_id = ? ORDER BY version DESC LIMIT 1");
  s.bind(1, filter_id);
  if (!s.step()) return std::nullopt;
  return parse_json_column(s.text(0)).get<FilterPrompt>();
}

std::optional<FilterPrompt> Store::version(const std::string& filter_id, int version) {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT prompt FROM versions WHERE filter_id = ? AND version = ?");
  s.bind(1, filter_id).bind(2, version);
  if (!s.step()) return std::nullopt;
  return parse_json_column(s.text(0)).get<FilterPrompt>();
}

std::vector<FilterSummary> Store::list_filters() {
  std::lock_guard lock(mu_);
  Stmt s(db_,
         "SELECT f.filter_id, f.name, COALESCE(MAX(v.version), 0) FROM filters f "
         "LEFT JOIN versions v ON v.filter_id = f.filter_id GROUP BY f.filter_id ORDER BY f.filter_id");
  std::vector<FilterSummary> out;
  while (s.step()) out.push_back({s.text(0), s.text(1), static_cast<int>(s.i64(2))});
  return out;
}

void Store::require_filter(const std::string& filter_id) {
  std::lock_guard lock(mu_);
  if (!filter_exists_locked(filter_id)) fail(ErrorCode::kNotFound, "unknown filter " + filter_id);
}

// --- comments -----------------------------------------------------------------

std::size_t Store::put_comments(std::span<const Comment> comments, const std::string& source_id) {
  std::lock_guard lock(mu_);
  Tx tx(db_);
  const std::size_t added = put_comments_locked(comments, source_id);
  tx.commit();
  return added;
}

std::size_t Store::put_comments_locked(std::span<const Comment> comments, const std::string& source_id) {
  std::size_t added = 0;
  for (const Comment& c : comments) {
    if (c.id.empty() || trim(c.text).empty()) fail(ErrorCode::kInvalidArgument, "comment needs an id and text");
    Stmt(db_,
         "INSERT OR IGNORE INTO comments(comment_id, text, author, thread_id, video_id, published_at, "
         "like_count, source_id) VALUES (?, ?, ?, ?, ?, ?, ?, ?)")
        .bind(1, c.id)
        .bind(2, c.text)
        .bind(3, c.author)
        .bind(4, c.thread_id)
        .bind(5, c.video_id)
        .bind(6, to_epoch(c.published_at))
        .bind(7, c.like_count)
        .bind(8, source_id)
        .run();
    added += static_cast<std::size_t>(sqlite3_changes(db_));
  }
  return added;
}

namespace {

constexpr const char* kCommentColumns =
    "c.comment_id, c.text, c.author, c.thread_id, c.video_id, c.published_at, c.like_count";

// Reads the seven kCommentColumns starting at `base`.
template <typename S>
Comment row_to_comment(const S& s, int base) {
  return Comment{s.text(base),          s.text(base + 1),
                 s.opt_text(base + 2),  s.opt_text(base + 3),
                 s.opt_text(base + 4),  from_epoch(s.i64(base + 5)),
                 s.opt_i64(base + 6)};
}

}  // namespace

std::optional<Comment> Store::comment(const std::string& comment_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_, (std::string("SELECT ") + kCommentColumns + " FROM comments c WHERE c.comment_id = ?").c_str());
  s.bind(1, comment_id);
  if (!s.step()) return std::nullopt;
  return row_to_comment(s, 0);
}

std::vector<Comment> Store::comments_by_ids(std::span<const std::string> ids) {
  std::vector<Comment> out;
  for (const auto& id : ids) {
    auto c = comment(id);
    if (!c) fail(ErrorCode::kNotFound, "unknown comment " + id);
    out.push_back(std::move(*c));
  }
  return out;
}

std::vector<Comment> Store::all_comments() {
  std::lock_guard lock(mu_);
  Stmt s(db_, (std::string("SELECT ") + kCommentColumns +
               " FROM comments c ORDER BY c.published_at DESC, c.comment_id")
                  .c_str());
  std::vector<Comment> out;
  while (s.step()) out.push_back(row_to_comment(s, 0));
  return out;
}

std::size_t Store::comment_count() {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT COUNT(*) FROM comments");
  s.step();
  return static_cast<std::size_t>(s.i64(0));
}

// --- labels -------------------------------------------------------------------

void Store::put_label(const std::string& filter_id, const Label& label) {
  std::lock_guard lock(mu_);
  Tx tx(db_);
  put_label_locked(filter_id, label);
  tx.commit();
}

void Store::put_label_locked(const std::string& filter_id, const Label& label) {
  if (!filter_exists_locked(filter_id)) fail(ErrorCode::kNotFound, "unknown filter " + filter_id);
  if (!comment_exists_locked(label.comment_id)) fail(ErrorCode::kNotFound, "unknown comment " + label.comment_id);
  Stmt(db_,
       "INSERT INTO label_history(filter_id, comment_id, verdict, source, labeled_at) "
       "SELECT filter_id, comment_id, verdict, source, labeled_at FROM labels WHERE filter_id = ? AND comment_id = ?")
      .bind(1, filter_id)
      .bind(2, label.comment_id)
      .run();
  Stmt(db_,
       "INSERT OR REPLACE INTO labels(filter_id, comment_id, verdict, source, labeled_at) VALUES (?, ?, ?, ?, ?)")
      .bind(1, filter_id)
      .bind(2, label.comment_id)
      .bind(3, std::string(to_string(label.verdict)))
      .bind(4, std::string(to_string(label.source)))
      .bind(5, to_epoch(label.labeled_at))
      .run();
}

std::vector<Label> Store::labels(const std::string& filter_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT comment_id, verdict, source, labeled_at FROM labels WHERE filter_id = ? ORDER BY comment_id");
  s.bind(1, filter_id);
  std::vector<Label> out;
  while (s.step())
    out.push_back({s.text(0), parse_verdict(s.text(1)), parse_label_source(s.text(2)), from_epoch(s.i64(3))});
  return out;
}

std::vector<Label> Store::label_history(const std::string& filter_id, const std::string& comment_id) {
  std::lock_guard lock(mu_);
  std::vector<Label> out;
  Stmt h(db_,
         "SELECT verdict, source, labeled_at FROM label_history WHERE filter_id = ? AND comment_id = ? ORDER BY seq");
  h.bind(1, filter_id).bind(2, comment_id);
  while (h.step()) out.push_back({comment_id, parse_verdict(h.text(0)), parse_label_source(h.text(1)), from_epoch(h.i64(2))});
  Stmt c(db_, "SELECT verdict, source, labeled_at FROM labels WHERE filter_id = ? AND comment_id = ?");
  c.bind(1, filter_id).bind(2, comment_id);
  if (c.step()) out.push_back({comment_id, parse_verdict(c.text(0)), parse_label_source(c.text(1)), from_epoch(c.i64(2))});
  return out;
}

std::vector<LabeledComment> Store::labeled_comments(const std::string& filter_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_, (std::string("SELECT ") + kCommentColumns +
               ", l.verdict FROM labels l JOIN comments c ON c.comment_id = l.comment_id "
               "WHERE l.filter_id = ? ORDER BY c.comment_id")
                  .c_str());
  s.bind(1, filter_id);
  std::vector<LabeledComment> out;
  while (s.step()) out.push_back({row_to_comment(s, 0), parse_verdict(s.text(7))});
  return out;
}

// --- prediction cache ---------------------------------------------------------

std::optional<Prediction> Store::get(const std::string& prompt_hash, const std::string& comment_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT body FROM predictions WHERE prompt_hash = ? AND comment_id = ?");
  s.bind(1, prompt_hash).bind(2, comment_id);
  if (!s.step()) return std::nullopt;
  return parse_json_column(s.text(0)).get<Prediction>();
}

void Store::put(const Prediction& prediction) { put_predictions(std::span(&prediction, 1)); }

void Store::put_predictions(std::span<const Prediction> predictions) {
  std::lock_guard lock(mu_);
  Tx tx(db_);
  for (const Prediction& p : predictions) {
    if (p.prompt_hash.empty()) fail(ErrorCode::kInvalidArgument, "prediction without prompt hash");
    Stmt(db_,
         "INSERT OR REPLACE INTO predictions(prompt_hash, comment_id, verdict, confidence, body) "
         "VALUES (?, ?, ?, ?, ?)")
        .bind(1, p.prompt_hash)
        .bind(2, p.comment_id)
        .bind(3, std::string(to_string(p.verdict)))
        .bind(4, p.confidence)
        .bind(5, Json(p).dump())
        .run();
  }
  tx.commit();
}

std::optional<std::string> Store::get_explanation(const std::string& prompt_hash, const std::string& comment_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT text FROM explanations WHERE prompt_hash = ? AND comment_id = ?");
  s.bind(1, prompt_hash).bind(2, comment_id);
  if (!s.step()) return std::nullopt;
  return s.text(0);
}

void Store::put_explanation(const std::string& prompt_hash, const std::string& comment_id, const std::string& text) {
  std::lock_guard lock(mu_);
  Stmt(db_, "INSERT OR REPLACE INTO explanations(prompt_hash, comment_id, text) VALUES (?, ?, ?)")
      .bind(1, prompt_hash)
      .bind(2, comment_id)
      .bind(3, text)
      .run();
}

std::size_t Store::cache_size() {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT COUNT(*) FROM predictions");
  s.step();
  return static_cast<std::size_t>(s.i64(0));
}

void Store::scan_cache(const std::function<void(const Prediction&)>& visit) {
  std::vector<Prediction> all;
  {
    std::lock_guard lock(mu_);
    Stmt s(db_, "SELECT body FROM predictions ORDER BY prompt_hash, comment_id");
    while (s.step()) all.push_back(parse_json_column(s.text(0)).get<Prediction>());
  }
  for (const auto& p : all) visit(p);
}

std::size_t Store::compact() {
  std::lock_guard lock(mu_);
  std::size_t removed = 0;
  {
    Tx tx(db_);
    for (const char* sql : {"DELETE FROM predictions WHERE prompt_hash NOT IN (SELECT content_hash FROM versions)",
                            "DELETE FROM explanations WHERE prompt_hash NOT IN (SELECT content_hash FROM versions)"}) {
      Stmt(db_, sql).run();
      removed += static_cast<std::size_t>(sqlite3_changes(db_));
    }
    tx.commit();
  }
  if (sqlite3_exec(db_, "VACUUM", nullptr, nullptr, nullptr) != SQLITE_OK) storage_error(db_, "VACUUM");
  return removed;
}

// --- audits -------------------------------------------------------------------

void Store::record_audit(const AuditEvent& e) {
  std::lock_guard lock(mu_);
  Tx tx(db_);
  if (!filter_exists_locked(e.filter_id)) fail(ErrorCode::kNotFound, "unknown filter " + e.filter_id);
  if (!comment_exists_locked(e.comment_id)) fail(ErrorCode::kNotFound, "unknown comment " + e.comment_id);
  Stmt(db_,
       "INSERT INTO audits(filter_id, comment_id, user_verdict, predicted_verdict, version, at) "
       "VALUES (?, ?, ?, ?, ?, ?)")
      .bind(1, e.filter_id)
      .bind(2, e.comment_id)
      .bind(3, std::string(to_string(e.user_verdict)))
      .bind(4, std::string(to_string(e.predicted_verdict)))
      .bind(5, e.version)
      .bind(6, to_epoch(e.at))
      .run();
  tx.commit();
}

std::vector<AuditEvent> Store::audits(const std::string& filter_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_,
         "SELECT comment_id, user_verdict, predicted_verdict, version, at FROM audits WHERE filter_id = ? "
         "ORDER BY seq");
  s.bind(1, filter_id);
  std::vector<AuditEvent> out;
  while (s.step())
    out.push_back({filter_id, s.text(0), parse_verdict(s.text(1)), parse_verdict(s.text(2)),
                   static_cast<int>(s.i64(3)), from_epoch(s.i64(4))});
  return out;
}

AuditStats Store::audit_stats(const std::string& filter_id, const TimeWindow& window) {
  std::lock_guard lock(mu_);
  if (!filter_exists_locked(filter_id)) fail(ErrorCode::kNotFound, "unknown filter " + filter_id);
  AuditStats stats;

  // Latest event per comment: the highest seq wins.
  Stmt a(db_,
         "SELECT a.user_verdict, a.predicted_verdict, c.published_at FROM audits a "
         "JOIN comments c ON c.comment_id = a.comment_id "
         "WHERE a.filter_id = ? AND a.seq = (SELECT MAX(seq) FROM audits b "
         "WHERE b.filter_id = a.filter_id AND b.comment_id = a.comment_id)");
  a.bind(1, filter_id);
  while (a.step()) {
    if (!window.contains(from_epoch(a.i64(2)))) continue;
    const Verdict user = parse_verdict(a.text(0));
    const Verdict predicted = parse_verdict(a.text(1));
    if (user == predicted) ++stats.correct;
    else if (predicted == Verdict::kCatch) ++stats.false_positives;
    else ++stats.false_negatives;
  }

  Stmt h(db_, "SELECT content_hash FROM versions WHERE filter_id = ? ORDER BY version DESC LIMIT 1");
  h.bind(1, filter_id);
  if (!h.step()) return stats;
  Stmt p(db_,
         "SELECT p.verdict, c.published_at FROM predictions p JOIN comments c ON c.comment_id = p.comment_id "
         "WHERE p.prompt_hash = ? ORDER BY c.published_at");
  p.bind(1, h.text(0));
  std::map<std::string, std::int64_t> daily;
  while (p.step()) {
    const Timestamp t = from_epoch(p.i64(1));
    if (!window.contains(t)) continue;
    auto& bucket = daily[format_day(t)];
    if (parse_verdict(p.text(0)) == Verdict::kCatch) {
      ++stats.caught_total;
      ++bucket;
    } else {
      ++stats.uncaught_total;
    }
  }
  for (const auto& [day, n] : daily) stats.daily_caught_series.push_back({day, n});
  return stats;
}

PredictionPage Store::query_predictions(const std::string& filter_id, const std::string& prompt_hash,
                                        const PredictionQuery& query) {
  query.validate();
  std::lock_guard lock(mu_);
  if (!filter_exists_locked(filter_id)) fail(ErrorCode::kNotFound, "unknown filter " + filter_id);
  Stmt s(db_, (std::string("SELECT ") + kCommentColumns +
               ", p.body, (SELECT a.user_verdict FROM audits a WHERE a.filter_id = ? AND a.comment_id = c.comment_id "
               "ORDER BY a.seq DESC LIMIT 1) FROM predictions p JOIN comments c ON c.comment_id = p.comment_id "
               "WHERE p.prompt_hash = ? AND p.confidence >= ? AND p.confidence <= ? "
               "ORDER BY c.published_at DESC, c.comment_id")
                  .c_str());
  // Confidences are multiples of 1/runs; the epsilon keeps "<= 0.8" inclusive.
  s.bind(1, filter_id).bind(2, prompt_hash).bind(3, query.min_confidence - 1e-9).bind(4, query.max_confidence + 1e-9);
  PredictionPage page;
  while (s.step()) {
    PredictionRow row{row_to_comment(s, 0), parse_json_column(s.text(7)).get<Prediction>(), std::nullopt};
    if (!s.is_null(8)) row.audited_verdict = parse_verdict(s.text(8));
    if (query.verdict && row.prediction.verdict != *query.verdict) continue;
    if (query.audited && row.audited_verdict.has_value() != *query.audited) continue;
    if (query.text && !contains_case_insensitive(row.comment.text, *query.text)) continue;
    if (page.total >= query.offset && page.items.size() < query.limit) page.items.push_back(std::move(row));
    ++page.total;
  }
  if (query.offset + page.items.size() < page.total) page.next_offset = query.offset + page.items.size();
  return page;
}

// --- actions, jobs, sources ---------------------------------------------------

namespace {

constexpr const char* kActionColumns =
    "action_id, filter_id, comment_id, kind, template_id, executed_at, status, sink_result";

template <typename S>
ActionRecord row_to_action(const S& s) {
  return ActionRecord{s.i64(0),
                      s.text(1),
                      s.text(2),
                      ModerationAction{parse_action_kind(s.text(3)), s.opt_text(4)},
                      from_epoch(s.i64(5)),
                      s.text(6) == "failed" ? ActionStatus::kFailed : ActionStatus::kSucceeded,
                      s.text(7)};
}

}  // namespace

std::int64_t Store::record_action(ActionRecord r) {
  std::lock_guard lock(mu_);
  Tx tx(db_);
  Stmt(db_,
       "INSERT INTO actions(filter_id, comment_id, kind, template_id, executed_at, status, sink_result) "
       "VALUES (?, ?, ?, ?, ?, ?, ?)")
      .bind(1, r.filter_id)
      .bind(2, r.comment_id)
      .bind(3, std::string(to_string(r.action.kind)))
      .bind(4, r.action.template_id)
      .bind(5, to_epoch(r.executed_at))
      .bind(6, r.status == ActionStatus::kFailed ? "failed" : "succeeded")
      .bind(7, r.sink_result)
      .run();
  const std::int64_t id = sqlite3_last_insert_rowid(db_);
  tx.commit();
  return id;
}

void Store::update_action(const ActionRecord& r) {
  std::lock_guard lock(mu_);
  Stmt(db_, "UPDATE actions SET executed_at = ?, status = ?, sink_result = ? WHERE action_id = ?")
      .bind(1, to_epoch(r.executed_at))
      .bind(2, r.status == ActionStatus::kFailed ? "failed" : "succeeded")
      .bind(3, r.sink_result)
      .bind(4, r.action_id)
      .run();
  if (sqlite3_changes(db_) == 0) fail(ErrorCode::kNotFound, "unknown action " + std::to_string(r.action_id));
}

std::optional<ActionRecord> Store::action(std::int64_t action_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_, (std::string("SELECT ") + kActionColumns + " FROM actions WHERE action_id = ?").c_str());
  s.bind(1, action_id);
  if (!s.step()) return std::nullopt;
  return row_to_action(s);
}

std::vector<ActionRecord> Store::actions(const std::string& filter_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_, (std::string("SELECT ") + kActionColumns + " FROM actions WHERE filter_id = ? ORDER BY action_id").c_str());
  s.bind(1, filter_id);
  std::vector<ActionRecord> out;
  while (s.step()) out.push_back(row_to_action(s));
  return out;
}

void Store::put_job(const JobRecord& j) {
  std::lock_guard lock(mu_);
  Stmt(db_,
       "INSERT OR REPLACE INTO jobs(job_id, filter_id, kind, state, progress, params, result, error, resumable, "
       "created_at, updated_at) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)")
      .bind(1, j.job_id)
      .bind(2, j.filter_id)
      .bind(3, j.kind)
      .bind(4, j.state)
      .bind(5, j.progress)
      .bind(6, j.params.dump())
      .bind(7, j.result.dump())
      .bind(8, j.error)
      .bind(9, j.resumable ? 1 : 0)
      .bind(10, to_epoch(j.created_at))
      .bind(11, to_epoch(j.updated_at))
      .run();
}

namespace {

constexpr const char* kJobColumns =
    "job_id, filter_id, kind, state, progress, params, result, error, resumable, created_at, updated_at";

template <typename S>
JobRecord row_to_job(const S& s) {
  return JobRecord{s.text(0),
                   s.text(1),
                   s.text(2),
                   s.text(3),
                   s.real(4),
                   parse_json_column(s.text(5)),
                   parse_json_column(s.text(6)),
                   s.text(7),
                   s.i64(8) != 0,
                   from_epoch(s.i64(9)),
                   from_epoch(s.i64(10))};
}

}  // namespace

std::optional<JobRecord> Store::job(const std::string& job_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_, (std::string("SELECT ") + kJobColumns + " FROM jobs WHERE job_id = ?").c_str());
  s.bind(1, job_id);
  if (!s.step()) return std::nullopt;
  return row_to_job(s);
}

std::vector<JobRecord> Store::jobs() {
  std::lock_guard lock(mu_);
  Stmt s(db_, (std::string("SELECT ") + kJobColumns + " FROM jobs ORDER BY created_at, job_id").c_str());
  std::vector<JobRecord> out;
  while (s.step()) out.push_back(row_to_job(s));
  return out;
}

void Store::put_source(const SourceRecord& src) {
  std::lock_guard lock(mu_);
  std::optional<std::int64_t> hw, ls;
  if (src.high_water) hw = to_epoch(*src.high_water);
  if (src.last_sync) ls = to_epoch(*src.last_sync);
  Stmt(db_, "INSERT OR REPLACE INTO sources(source_id, kind, config, high_water, last_sync) VALUES (?, ?, ?, ?, ?)")
      .bind(1, src.source_id)
      .bind(2, src.kind)
      .bind(3, src.config.dump())
      .bind(4, hw)
      .bind(5, ls)
      .run();
}

namespace {

template <typename S>
SourceRecord row_to_source(const S& s) {
  SourceRecord r{s.text(0), s.text(1), parse_json_column(s.text(2)), std::nullopt, std::nullopt};
  if (auto v = s.opt_i64(3)) r.high_water = from_epoch(*v);
  if (auto v = s.opt_i64(4)) r.last_sync = from_epoch(*v);
  return r;
}

}  // namespace

std::optional<SourceRecord> Store::source(const std::string& source_id) {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT source_id, kind, config, high_water, last_sync FROM sources WHERE source_id = ?");
  s.bind(1, source_id);
  if (!s.step()) return std::nullopt;
  return row_to_source(s);
}

std::vector<SourceRecord> Store::sources() {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT source_id, kind, config, high_water, last_sync FROM sources ORDER BY source_id");
  std::vector<SourceRecord> out;
  while (s.step()) out.push_back(row_to_source(s));
  return out;
}

// --- export / import ----------------------------------------------------------

Json Store::export_filter(const std::string& filter_id) {
  std::lock_guard lock(mu_);
  const auto rec = filter_locked(filter_id);
  if (!rec) fail(ErrorCode::kNotFound, "unknown filter " + filter_id);
  Json versions = Json::array();
  for (const auto& v : rec->versions) versions.push_back(v.prompt);
  Json labels = Json::array();
  Json comments = Json::array();
  for (const Label& l : this->labels(filter_id)) {
    labels.push_back(l);
    if (auto c = comment(l.comment_id)) comments.push_back(*c);
  }
  return Json{{"format", "rubricopt-filter"},
              {"format_version", kFilterExportFormatVersion},
              {"filter_id", rec->filter_id},
              {"name", rec->name},
              {"versions", versions},
              {"labels", labels},
              {"comments", comments}};
}

std::string Store::import_filter(const Json& document, const std::optional<std::string>& as_filter_id) {
  std::string filter_id;
  std::vector<FilterPrompt> versions;
  std::vector<Label> labels;
  std::vector<Comment> comments;
  try {
    if (document.at("format") != "rubricopt-filter")
      fail(ErrorCode::kInvalidArgument, "not a filter export document");
    if (document.at("format_version").get<int>() != kFilterExportFormatVersion)
      fail(ErrorCode::kInvalidArgument, "unsupported filter export version");
    filter_id = as_filter_id.value_or(document.at("filter_id").get<std::string>());
    versions = document.at("versions").get<std::vector<FilterPrompt>>();
    labels = document.value("labels", Json::array()).get<std::vector<Label>>();
    comments = document.value("comments", Json::array()).get<std::vector<Comment>>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed filter export: ") + e.what());
  }
  if (versions.empty()) fail(ErrorCode::kInvalidArgument, "filter export has no versions");

  std::lock_guard lock(mu_);
  Tx tx(db_);
  if (filter_exists_locked(filter_id)) fail(ErrorCode::kConflict, "filter " + filter_id + " already exists");
  for (std::size_t i = 0; i < versions.size(); ++i) {
    FilterPrompt p = versions[i];
    if (p.version != static_cast<int>(i) + 1)
      fail(ErrorCode::kInvalidArgument, "versions must be numbered 1..n in order");
    const std::string exported_hash = p.content_hash;
    put_filter_version_locked(filter_id, std::move(p));
    if (!exported_hash.empty() && exported_hash != hash_prompt(versions[i]))
      fail(ErrorCode::kInvalidArgument, "content hash mismatch in version " + std::to_string(i + 1));
  }
  put_comments_locked(comments, "import");
  for (const Label& l : labels) put_label_locked(filter_id, l);
  tx.commit();
  return filter_id;
}

}  // namespace rubricopt
