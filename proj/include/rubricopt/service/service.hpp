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

// Filter workflows behind the /v1 API: create, label, initialize, iterate,
// audit and moderate.
//
// Filter versions change only through jobs or a manual prompt edit, and
// every change lands as a new store version. Jobs for one filter run one at
// a time. An optimize-round job stops in AwaitingUserChoice with its ranked
// candidates; resuming commits the chosen one or nothing.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rubricopt/baseline/baseline.hpp"
#include "rubricopt/core/json.hpp"
#include "rubricopt/llm/gateway.hpp"
#include "rubricopt/llm/remote.hpp"
#include "rubricopt/llm/simulation.hpp"
#include "rubricopt/optimizer/optimizer.hpp"
#include "rubricopt/sampler/sampler.hpp"
#include "rubricopt/service/ingest.hpp"
#include "rubricopt/store/store.hpp"

namespace rubricopt {

enum class JobKind { kInitialize, kOptimizeRound, kBaselineRun, kReclassify };
enum class JobState { kQueued, kRunning, kAwaitingUserChoice, kDone, kFailed };

std::string_view to_string(JobKind k);  // "initialize", "optimize-round", "baseline", "reclassify"
JobKind parse_job_kind(std::string_view text);
std::string_view to_string(JobState s);
JobState parse_job_state(std::string_view text);

// Forward only, except AwaitingUserChoice -> Running on resume.
bool transition_allowed(JobState from, JobState to);

struct Job {
  std::string job_id;
  std::string filter_id;
  JobKind kind = JobKind::kReclassify;
  JobState state = JobState::kQueued;
  double progress = 0.0;
  Json params = Json::object();
  Json result;
  std::string error;
  bool resumable = false;  // set when a restart interrupted the job
  Timestamp created_at{};
  Timestamp updated_at{};
};

Json to_json(const Job& job);

// Receives moderation actions. Throws on failure; the record is then kept
// as failed and can be retried.
class ActionSink {
 public:
  virtual ~ActionSink() = default;
  virtual std::string execute(const ActionRecord& record) = 0;
};

// Records actions and performs nothing outside the process.
class LoggingSink final : public ActionSink {
 public:
  std::string execute(const ActionRecord& record) override;
  std::vector<ActionRecord> executed() const;

 private:
  mutable std::mutex mu_;
  std::vector<ActionRecord> executed_;
};

// Delete > HoldForReview > ReplyWithTemplate > Publish > DoNothing.
int restrictiveness(ActionKind kind);

struct FixtureSourceConfig {
  std::string adapter_id;
  std::string path;
  std::chrono::seconds interval = kDefaultPollInterval;
};

struct ServiceConfig {
  std::string db_path = "rubricopt.db";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string backend = "simulation";  // or "remote"
  llm::SimulationRule simulation;
  llm::RemoteConfig remote;
  int max_concurrency = llm::Gateway::kDefaultMaxConcurrency;
  std::size_t labeling_k = kDefaultLabelingK;
  SearchBudget init_budget{4, 2, 2};
  int expansions = 4;
  std::uint64_t seed = 0;
  std::vector<std::string> reply_templates = {"polite-warning"};
  std::vector<FixtureSourceConfig> fixture_sources;

  // Throws Error(kInvalidArgument).
  void validate() const;
};

// Missing members keep their defaults. Throws Error(kInvalidArgument).
ServiceConfig service_config_from_json(const Json& j);
ServiceConfig load_service_config(const std::string& path);

struct FilterDraft {
  std::string name;
  std::optional<std::string> description;
  std::vector<std::string> example_comments;
  std::optional<std::string> filter_id;  // generated when absent
  std::uint64_t seed = 0;
};

struct LabelInput {
  std::string comment_id;
  Verdict verdict = Verdict::kCatch;
  LabelSource source = LabelSource::kInitialization;
};

struct PlanItem {
  Comment comment;
  Prediction prediction;
  SampleTier tier;
};

struct ManualEditResult {
  FilterPrompt prompt;
  std::string reclassify_job_id;
};

class Service {
 public:
  // `backend` overrides the one named by the config; `sink` defaults to a
  // LoggingSink. Jobs left Queued or Running by a previous process become
  // Failed with the resumable marker set.
  explicit Service(ServiceConfig config, std::shared_ptr<llm::Backend> backend = nullptr,
                   std::shared_ptr<ActionSink> sink = nullptr);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // --- filters ----------------------------------------------------------------

  // Drafts the description with one generation call and stores it as v1.
  // Starts a reclassify job when comments exist.
  FilterPrompt create_filter(const FilterDraft& draft);
  std::vector<StoredVersion> versions(const std::string& filter_id);
  FilterPrompt latest(const std::string& filter_id);

  // A new version from a hand-edited prompt whose parent_version must be
  // the latest version. Starts a reclassify job.
  ManualEditResult put_prompt(const std::string& filter_id, FilterPrompt edited);

  // --- labeling ---------------------------------------------------------------

  // Classifies every ingested comment with the latest version and selects
  // up to k comments not yet labeled.
  std::vector<PlanItem> labeling_plan(const std::string& filter_id, std::optional<std::size_t> k,
                                      std::uint64_t seed);

  // Audit-sourced labels also record an audit event against the latest
  // version's prediction. Returns the number stored.
  std::size_t add_labels(const std::string& filter_id, const std::vector<LabelInput>& labels);

  // --- jobs -------------------------------------------------------------------

  // Throws Error(kInvalidArgument) for bad params, Error(kNotFound) for an
  // unknown filter.
  Job start_job(const std::string& filter_id, JobKind kind, const Json& params);
  Job poll_job(const std::string& job_id);
  // {"candidate": <1-based rank>} or {"reject_all": true}. Throws
  // Error(kConflict) unless the job is awaiting a choice.
  Job resume_job(const std::string& job_id, const Json& choice);
  // Starts a fresh job with the params of a failed resumable one.
  Job retry_job(const std::string& job_id);
  // Blocks until the job leaves Queued/Running or the timeout expires.
  Job wait_job(const std::string& job_id, std::chrono::milliseconds timeout = std::chrono::seconds(60));
  std::vector<Job> jobs();

  // --- audit ------------------------------------------------------------------

  PredictionPage list_predictions(const std::string& filter_id, const PredictionQuery& query,
                                  bool with_explanations);
  std::string explain(const std::string& filter_id, const std::string& comment_id);
  std::vector<FailurePattern> failure_patterns(const std::string& filter_id, std::uint64_t seed);
  // Throws Error(kInvalidArgument) when the latest version does not
  // misclassify the labeled comment.
  std::vector<std::string> rationales(const std::string& filter_id, const std::string& comment_id, int n,
                                      std::uint64_t seed);
  AuditStats stats(const std::string& filter_id, const TimeWindow& window);

  // --- moderation -------------------------------------------------------------

  // Throws Error(kInvalidArgument) for an unknown template or an action on a
  // comment the filter did not catch (DoNothing is always allowed).
  ActionRecord apply_action(const std::string& filter_id, const std::string& comment_id,
                            const ModerationAction& action);
  ActionRecord retry_action(const std::string& filter_id, std::int64_t action_id);

  // --- ingestion --------------------------------------------------------------

  // Ingests and starts a reclassify job for every filter when comments
  // were added.
  IngestResult ingest(const IngestSource& source);
  void start_polling();
  void stop_polling();

  Store& store() { return *store_; }
  llm::Gateway& gateway() { return *gateway_; }
  const ServiceConfig& config() const { return config_; }

 private:
  Job load_job(const std::string& job_id);
  void save_job(Job& job);
  void set_state(Job& job, JobState to);
  void launch(const std::string& job_id);
  void run_job(const std::string& job_id);
  Json run_initialize(Job& job);
  Json run_optimize_round(Job& job);
  Json run_baseline(Job& job);
  Json run_reclassify(Job& job);
  void commit_choice(Job& job, const Json& choice);
  Json reclassify_latest(const std::string& filter_id);
  std::vector<Prediction> classify_all(const FilterPrompt& prompt);
  Prediction prediction_for(const FilterPrompt& prompt, const Comment& comment);
  Guidance guidance_from(const std::string& filter_id, const FilterPrompt& prompt, const Json& request,
                         std::uint64_t seed);
  std::string new_job_id();

  ServiceConfig config_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<llm::Gateway> gateway_;
  std::unique_ptr<Classifier> classifier_;
  std::unique_ptr<Optimizer> optimizer_;
  std::shared_ptr<ActionSink> sink_;
  Ingestor ingestor_;
  std::unique_ptr<PollingScheduler> scheduler_;
  FilterLocks filter_locks_;

  std::mutex jobs_mu_;
  std::mutex resume_mu_;
  std::condition_variable jobs_cv_;
  std::map<std::string, std::thread> workers_;
  std::atomic<std::uint64_t> job_counter_{0};
  std::atomic<std::uint64_t> filter_counter_{0};
  bool shutting_down_ = false;
};

}  // namespace rubricopt
