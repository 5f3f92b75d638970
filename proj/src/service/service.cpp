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

#include "rubricopt/service/service.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>

#include "rubricopt/core/prompt.hpp"
#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"
#include "rubricopt/optimizer/json.hpp"

namespace rubricopt {

namespace {

Timestamp now() { return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()); }

JobRecord to_record(const Job& j) {
  return JobRecord{j.job_id,  j.filter_id, std::string(to_string(j.kind)), std::string(to_string(j.state)),
                   j.progress, j.params,   j.result,
                   j.error,    j.resumable, j.created_at,
                   j.updated_at};
}

Job from_record(const JobRecord& r) {
  return Job{r.job_id,     r.filter_id, parse_job_kind(r.kind), parse_job_state(r.state),
             r.progress,   r.params,    r.result,
             r.error,      r.resumable, r.created_at,
             r.updated_at};
}

std::string slugify(const std::string& name) {
  std::string out;
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
    else if (!out.empty() && out.back() != '-') out += '-';
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  if (out.size() > 40) out.resize(40);
  return out.empty() ? "filter" : out;
}

SearchBudget budget_from(const Json& params, SearchBudget budget) {
  budget.expansions_per_round = params.value("expansions_per_round", budget.expansions_per_round);
  budget.beam_width = params.value("beam_width", budget.beam_width);
  budget.rounds = params.value("rounds", budget.rounds);
  budget.validate();
  return budget;
}

template <typename F>
auto with_json_errors(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string(what) + ": " + e.what());
  }
}

std::optional<Mistake> find_mistake(const Evaluation& eval, const std::string& comment_id) {
  for (const Mistake& m : eval.mistakes)
    if (m.comment.id == comment_id) return m;
  return std::nullopt;
}

}  // namespace

// --- enums -------------------------------------------------------------------

std::string_view to_string(JobKind k) {
  switch (k) {
    case JobKind::kInitialize: return "initialize";
    case JobKind::kOptimizeRound: return "optimize-round";
    case JobKind::kBaselineRun: return "baseline";
    case JobKind::kReclassify: return "reclassify";
  }
  return "reclassify";
}

JobKind parse_job_kind(std::string_view text) {
  for (JobKind k : {JobKind::kInitialize, JobKind::kOptimizeRound, JobKind::kBaselineRun, JobKind::kReclassify})
    if (to_string(k) == text) return k;
  fail(ErrorCode::kInvalidArgument, "unknown job kind: " + std::string(text));
}

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kAwaitingUserChoice: return "awaiting_user_choice";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "failed";
}

JobState parse_job_state(std::string_view text) {
  for (JobState s : {JobState::kQueued, JobState::kRunning, JobState::kAwaitingUserChoice, JobState::kDone,
                     JobState::kFailed})
    if (to_string(s) == text) return s;
  fail(ErrorCode::kInvalidArgument, "unknown job state: " + std::string(text));
}

bool transition_allowed(JobState from, JobState to) {
  switch (from) {
    case JobState::kQueued: return to == JobState::kRunning || to == JobState::kFailed;
    case JobState::kRunning:
      return to == JobState::kAwaitingUserChoice || to == JobState::kDone || to == JobState::kFailed;
    case JobState::kAwaitingUserChoice: return to == JobState::kRunning || to == JobState::kFailed;
    case JobState::kDone:
    case JobState::kFailed: return false;
  }
  return false;
}

Json to_json(const Job& job) {
  return Json{{"job_id", job.job_id},
              {"filter_id", job.filter_id},
              {"kind", to_string(job.kind)},
              {"state", to_string(job.state)},
              {"progress", job.progress},
              {"params", job.params},
              {"result", job.result},
              {"error", job.error.empty() ? Json(nullptr) : Json(job.error)},
              {"resumable", job.resumable},
              {"created_at", format_timestamp(job.created_at)},
              {"updated_at", format_timestamp(job.updated_at)}};
}

// --- actions -----------------------------------------------------------------

std::string LoggingSink::execute(const ActionRecord& record) {
  std::lock_guard lock(mu_);
  executed_.push_back(record);
  spdlog::info("action {} on {} for filter {}", to_string(record.action.kind), record.comment_id,
               record.filter_id);
  return "logged";
}

std::vector<ActionRecord> LoggingSink::executed() const {
  std::lock_guard lock(mu_);
  return executed_;
}

int restrictiveness(ActionKind kind) {
  switch (kind) {
    case ActionKind::kDoNothing: return 0;
    case ActionKind::kPublish: return 1;
    case ActionKind::kReplyWithTemplate: return 2;
    case ActionKind::kHoldForReview: return 3;
    case ActionKind::kDelete: return 4;
  }
  return 0;
}

// --- config ------------------------------------------------------------------

void ServiceConfig::validate() const {
  if (db_path.empty()) fail(ErrorCode::kInvalidArgument, "db_path is empty");
  if (port < 0 || port > 65535) fail(ErrorCode::kInvalidArgument, "port out of range");
  if (backend != "simulation" && backend != "remote")
    fail(ErrorCode::kInvalidArgument, "backend must be simulation or remote");
  if (backend == "simulation") simulation.validate();
  if (max_concurrency < 1) fail(ErrorCode::kInvalidArgument, "max_concurrency must be positive");
  if (labeling_k == 0) fail(ErrorCode::kInvalidArgument, "labeling_k must be positive");
  init_budget.validate();
  if (expansions < 1) fail(ErrorCode::kInvalidArgument, "expansions must be positive");
  for (const auto& s : fixture_sources)
    if (s.adapter_id.empty() || s.path.empty() || s.interval.count() <= 0)
      fail(ErrorCode::kInvalidArgument, "fixture source needs adapter_id, path and a positive interval");
}

ServiceConfig service_config_from_json(const Json& j) {
  ServiceConfig c;
  with_json_errors("bad service config", [&] {
    c.db_path = j.value("db_path", c.db_path);
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.backend = j.value("backend", c.backend);
    if (j.contains("simulation")) {
      const Json& r = j.at("simulation");
      c.simulation.positive_lexicon = r.value("positive_lexicon", c.simulation.positive_lexicon);
      c.simulation.negative_lexicon = r.value("negative_lexicon", c.simulation.negative_lexicon);
      c.simulation.noise_rate = r.value("noise_rate", c.simulation.noise_rate);
      c.simulation.seed = r.value("seed", c.simulation.seed);
    }
    if (j.contains("remote")) {
      const Json& r = j.at("remote");
      c.remote.base_url = r.value("base_url", c.remote.base_url);
      c.remote.api_key = r.value("api_key", c.remote.api_key);
      if (const char* env = std::getenv("RUBRICOPT_API_KEY"); env && c.remote.api_key.empty())
        c.remote.api_key = env;
      c.remote.completion_model = r.value("completion_model", c.remote.completion_model);
      c.remote.embedding_model = r.value("embedding_model", c.remote.embedding_model);
      c.remote.embedding_dimension = r.value("embedding_dimension", c.remote.embedding_dimension);
      c.remote.request_timeout = std::chrono::milliseconds(
          r.value("request_timeout_ms", static_cast<std::int64_t>(c.remote.request_timeout.count())));
      c.remote.max_retries = r.value("max_retries", c.remote.max_retries);
      c.remote.initial_backoff = std::chrono::milliseconds(
          r.value("initial_backoff_ms", static_cast<std::int64_t>(c.remote.initial_backoff.count())));
    }
    c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
    c.labeling_k = j.value("labeling_k", c.labeling_k);
    if (j.contains("init_budget")) c.init_budget = budget_from(j.at("init_budget"), c.init_budget);
    c.expansions = j.value("expansions", c.expansions);
    c.seed = j.value("seed", c.seed);
    c.reply_templates = j.value("reply_templates", c.reply_templates);
    for (const Json& s : j.value("fixture_sources", Json::array()))
      c.fixture_sources.push_back(
          {s.at("adapter_id").get<std::string>(), s.at("path").get<std::string>(),
           std::chrono::seconds(s.value("interval_seconds", static_cast<std::int64_t>(kDefaultPollInterval.count())))});
    return 0;
  });
  c.validate();
  return c;
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "cannot read config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidArgument, "config is not JSON: " + std::string(e.what()));
  }
  return service_config_from_json(j);
}

// --- service -----------------------------------------------------------------

Service::Service(ServiceConfig config, std::shared_ptr<llm::Backend> backend, std::shared_ptr<ActionSink> sink)
    : config_((config.validate(), std::move(config))), store_(Store::open(config_.db_path)), ingestor_(*store_) {
  if (!backend) {
    if (config_.backend == "remote") backend = std::make_shared<llm::RemoteBackend>(config_.remote);
    else backend = std::make_shared<llm::SimulationBackend>(config_.simulation);
  }
  gateway_ = std::make_unique<llm::Gateway>(std::move(backend), config_.max_concurrency);
  classifier_ = std::make_unique<Classifier>(*gateway_, store_.get());
  optimizer_ = std::make_unique<Optimizer>(*classifier_);
  sink_ = sink ? std::move(sink) : std::make_shared<LoggingSink>();

  std::vector<PollingSource> polled;
  for (const auto& s : config_.fixture_sources) {
    ingestor_.register_adapter(std::make_shared<FixtureAdapter>(s.adapter_id, s.path));
    polled.push_back({s.adapter_id, s.interval});
  }
  scheduler_ = std::make_unique<PollingScheduler>(ingestor_, std::move(polled), [this](const IngestResult& r) {
    if (r.added == 0) return;
    for (const auto& f : store_->list_filters()) start_job(f.filter_id, JobKind::kReclassify, Json::object());
  });

  for (const JobRecord& r : store_->jobs()) {
    if (r.state != "queued" && r.state != "running") continue;
    Job job = from_record(r);
    job.state = JobState::kFailed;
    job.resumable = true;
    job.error = "interrupted by restart";
    save_job(job);
    spdlog::warn("job {} was interrupted by a restart", job.job_id);
  }
}

Service::~Service() {
  stop_polling();
  std::map<std::string, std::thread> workers;
  {
    std::lock_guard lock(jobs_mu_);
    shutting_down_ = true;
    workers.swap(workers_);
  }
  for (auto& [id, t] : workers)
    if (t.joinable()) t.join();
}

// --- filters -----------------------------------------------------------------

FilterPrompt Service::create_filter(const FilterDraft& draft) {
  if (trim(draft.name).empty()) fail(ErrorCode::kInvalidArgument, "filter name is empty");
  std::string id;
  if (draft.filter_id) {
    id = *draft.filter_id;
    if (trim(id).empty()) fail(ErrorCode::kInvalidArgument, "filter_id is empty");
    if (store_->filter(id)) fail(ErrorCode::kConflict, "filter exists: " + id);
  } else {
    const std::string base = slugify(draft.name);
    do {
      id = base + "-" + std::to_string(++filter_counter_);
    } while (store_->filter(id));
  }
  const std::string description =
      optimizer_->draft_description(DraftSeed{draft.description, draft.example_comments}, draft.seed);

  FilterPrompt v1;
  v1.filter_id = id;
  v1.name = draft.name;
  v1.description = description;
  store_->put_filter_version(id, v1);
  spdlog::info("created filter {}", id);
  if (store_->comment_count() > 0) start_job(id, JobKind::kReclassify, Json::object());
  return *store_->latest_version(id);
}

std::vector<StoredVersion> Service::versions(const std::string& filter_id) {
  auto rec = store_->filter(filter_id);
  if (!rec) fail(ErrorCode::kNotFound, "unknown filter " + filter_id);
  return rec->versions;
}

FilterPrompt Service::latest(const std::string& filter_id) {
  auto p = store_->latest_version(filter_id);
  if (!p) fail(ErrorCode::kNotFound, "unknown filter " + filter_id);
  return *p;
}

ManualEditResult Service::put_prompt(const std::string& filter_id, FilterPrompt edited) {
  FilterPrompt committed;
  {
    auto lock_ptr = filter_locks_.get(filter_id);
    std::lock_guard lock(*lock_ptr);
    const FilterPrompt current = latest(filter_id);
    if (!edited.parent_version) fail(ErrorCode::kInvalidArgument, "parent_version is required");
    if (*edited.parent_version != current.version)
      fail(ErrorCode::kConflict, "parent_version " + std::to_string(*edited.parent_version) +
                                     " is not the latest version " + std::to_string(current.version));
    edited.filter_id = filter_id;
    if (trim(edited.name).empty()) edited.name = current.name;
    edited.version = current.version + 1;
    store_->put_filter_version(filter_id, with_hash(std::move(edited)));
    committed = latest(filter_id);
  }
  const Job job = start_job(filter_id, JobKind::kReclassify, Json::object());
  return {committed, job.job_id};
}

// --- labeling ----------------------------------------------------------------

std::vector<PlanItem> Service::labeling_plan(const std::string& filter_id, std::optional<std::size_t> k,
                                             std::uint64_t seed) {
  const FilterPrompt prompt = latest(filter_id);
  const std::size_t want = k.value_or(config_.labeling_k);
  if (want == 0) fail(ErrorCode::kInvalidArgument, "k must be positive");
  const std::vector<Prediction> preds = classify_all(prompt);
  std::set<std::string> labeled;
  for (const Label& l : store_->labels(filter_id)) labeled.insert(l.comment_id);
  const SamplingPlan plan = select_for_labeling(preds, labeled, want, seed);

  std::map<std::string, const Prediction*> by_id;
  for (const Prediction& p : preds) by_id[p.comment_id] = &p;
  const auto comments = store_->comments_by_ids(plan.selected);
  std::map<std::string, const Comment*> comment_by_id;
  for (const Comment& c : comments) comment_by_id[c.id] = &c;

  std::vector<PlanItem> items;
  for (std::size_t i = 0; i < plan.selected.size(); ++i) {
    const std::string& id = plan.selected[i];
    items.push_back({*comment_by_id.at(id), *by_id.at(id), plan.tiers[i]});
  }
  return items;
}

std::size_t Service::add_labels(const std::string& filter_id, const std::vector<LabelInput>& labels) {
  const FilterPrompt prompt = latest(filter_id);
  for (const LabelInput& in : labels)
    if (!store_->comment(in.comment_id)) fail(ErrorCode::kNotFound, "unknown comment " + in.comment_id);
  for (const LabelInput& in : labels) {
    const Timestamp at = now();
    store_->put_label(filter_id, Label{in.comment_id, in.verdict, in.source, at});
    if (in.source == LabelSource::kAudit) {
      const Prediction p = prediction_for(prompt, *store_->comment(in.comment_id));
      store_->record_audit(AuditEvent{filter_id, in.comment_id, in.verdict, p.verdict, prompt.version, at});
    }
  }
  return labels.size();
}

// --- jobs --------------------------------------------------------------------

std::string Service::new_job_id() {
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count();
  std::string id;
  do {
    id = "job-" + std::to_string(ms) + "-" + std::to_string(++job_counter_);
  } while (store_->job(id));
  return id;
}

Job Service::load_job(const std::string& job_id) {
  auto r = store_->job(job_id);
  if (!r) fail(ErrorCode::kNotFound, "unknown job " + job_id);
  return from_record(*r);
}

void Service::save_job(Job& job) {
  job.updated_at = now();
  {
    std::lock_guard lock(jobs_mu_);
    store_->put_job(to_record(job));
  }
  jobs_cv_.notify_all();
}

void Service::set_state(Job& job, JobState to) {
  if (!transition_allowed(job.state, to))
    fail(ErrorCode::kInternal, "illegal job transition " + std::string(to_string(job.state)) + " -> " +
                                   std::string(to_string(to)));
  job.state = to;
  save_job(job);
}

Job Service::start_job(const std::string& filter_id, JobKind kind, const Json& params) {
  store_->require_filter(filter_id);
  if (!params.is_object()) fail(ErrorCode::kInvalidArgument, "params must be an object");
  with_json_errors("bad job params", [&] {
    if (params.contains("seed")) (void)params.at("seed").get<std::uint64_t>();
    if (kind == JobKind::kInitialize) budget_from(params, config_.init_budget);
    if (kind == JobKind::kBaselineRun) budget_from(params, {config_.expansions, 2, 3});
    if (kind == JobKind::kOptimizeRound) {
      if (params.value("expansions", config_.expansions) < 1)
        fail(ErrorCode::kInvalidArgument, "expansions must be positive");
      const Json g = params.value("guidance", Json{{"type", "none"}});
      const std::string type = g.value("type", "none");
      if (type == "clarified_mistake") {
        (void)g.at("comment_id").get<std::string>();
        if (trim(g.at("rationale").get<std::string>()).empty())
          fail(ErrorCode::kInvalidArgument, "rationale is empty");
      } else if (type == "failure_pattern") {
        (void)g.at("pattern_id").get<std::string>();
      } else if (type != "none") {
        fail(ErrorCode::kInvalidArgument, "unknown guidance type: " + type);
      }
    }
    return 0;
  });

  Job job;
  job.job_id = new_job_id();
  job.filter_id = filter_id;
  job.kind = kind;
  job.params = params;
  job.created_at = now();
  save_job(job);
  launch(job.job_id);
  return job;
}

Job Service::poll_job(const std::string& job_id) { return load_job(job_id); }

std::vector<Job> Service::jobs() {
  std::vector<Job> out;
  for (const JobRecord& r : store_->jobs()) out.push_back(from_record(r));
  return out;
}

Job Service::wait_job(const std::string& job_id, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::unique_lock lock(jobs_mu_);
  for (;;) {
    auto r = store_->job(job_id);
    if (!r) fail(ErrorCode::kNotFound, "unknown job " + job_id);
    if (r->state != "queued" && r->state != "running") return from_record(*r);
    if (jobs_cv_.wait_until(lock, deadline) == std::cv_status::timeout) return from_record(*store_->job(job_id));
  }
}

Job Service::resume_job(const std::string& job_id, const Json& choice) {
  std::lock_guard resume_lock(resume_mu_);
  Job job = load_job(job_id);
  if (job.state != JobState::kAwaitingUserChoice)
    fail(ErrorCode::kConflict, "job " + job_id + " is " + std::string(to_string(job.state)) + ", not awaiting a choice");
  if (!choice.is_object()) fail(ErrorCode::kInvalidArgument, "choice must be an object");
  const std::size_t n = job.result.at("candidates").size();
  if (choice.value("reject_all", false)) {
    if (choice.contains("candidate")) fail(ErrorCode::kInvalidArgument, "give either candidate or reject_all");
  } else {
    if (!choice.contains("candidate") || !choice.at("candidate").is_number_integer())
      fail(ErrorCode::kInvalidArgument, "choice needs candidate (1-based) or reject_all");
    const auto k = choice.at("candidate").get<std::int64_t>();
    if (k < 1 || static_cast<std::size_t>(k) > n)
      fail(ErrorCode::kInvalidArgument, "candidate must be in 1.." + std::to_string(n));
    const FilterPrompt current = latest(job.filter_id);
    if (current.version != job.result.at("base_version").get<int>())
      fail(ErrorCode::kConflict, "filter moved to version " + std::to_string(current.version) +
                                     " since the candidates were generated");
  }
  job.params["choice"] = choice;
  set_state(job, JobState::kRunning);
  launch(job.job_id);
  return job;
}

Job Service::retry_job(const std::string& job_id) {
  const Job old = load_job(job_id);
  if (old.state != JobState::kFailed) fail(ErrorCode::kConflict, "only failed jobs can be retried");
  Json params = old.params;
  params.erase("choice");
  return start_job(old.filter_id, old.kind, params);
}

void Service::launch(const std::string& job_id) {
  std::lock_guard lock(jobs_mu_);
  if (shutting_down_) return;
  // Reap finished workers of earlier jobs.
  for (auto it = workers_.begin(); it != workers_.end();) {
    auto r = store_->job(it->first);
    const bool active = r && (r->state == "queued" || r->state == "running");
    if (!active && it->first != job_id) {
      if (it->second.joinable()) it->second.join();
      it = workers_.erase(it);
    } else {
      ++it;
    }
  }
  std::thread old;
  if (auto it = workers_.find(job_id); it != workers_.end()) old = std::move(it->second);
  workers_[job_id] = std::thread([this, job_id, prev = std::move(old)]() mutable {
    if (prev.joinable()) prev.join();
    run_job(job_id);
  });
}

void Service::run_job(const std::string& job_id) {
  Job job = load_job(job_id);
  auto lock_ptr = filter_locks_.get(job.filter_id);
  std::lock_guard lock(*lock_ptr);
  try {
    if (job.state == JobState::kQueued) set_state(job, JobState::kRunning);
    if (job.params.contains("choice")) {
      commit_choice(job, job.params.at("choice"));
      return;
    }
    Json result;
    switch (job.kind) {
      case JobKind::kInitialize: result = run_initialize(job); break;
      case JobKind::kOptimizeRound: result = run_optimize_round(job); break;
      case JobKind::kBaselineRun: result = run_baseline(job); break;
      case JobKind::kReclassify: result = run_reclassify(job); break;
    }
    job.result = std::move(result);
    job.progress = 1.0;
    const bool awaiting = job.kind == JobKind::kOptimizeRound && !job.result.at("candidates").empty();
    set_state(job, awaiting ? JobState::kAwaitingUserChoice : JobState::kDone);
  } catch (const std::exception& e) {
    spdlog::error("job {} failed: {}", job.job_id, e.what());
    const auto* err = dynamic_cast<const Error*>(&e);
    job.error = std::string(err ? to_string(err->code()) : "internal") + ": " + e.what();
    if (transition_allowed(job.state, JobState::kFailed)) set_state(job, JobState::kFailed);
  }
}

Json Service::run_initialize(Job& job) {
  const std::uint64_t seed = job.params.value("seed", config_.seed);
  const SearchBudget budget = budget_from(job.params, config_.init_budget);
  const FilterPrompt v1 = latest(job.filter_id);
  std::vector<LabeledComment> labeled = store_->labeled_comments(job.filter_id);
  if (labeled.empty()) fail(ErrorCode::kInvalidArgument, "initialization needs labeled comments");

  std::vector<Comment> comments;
  for (const auto& l : labeled) comments.push_back(l.comment);
  const std::vector<Prediction> draft = classifier_->classify(v1, comments, 0);
  job.progress = 0.2;
  save_job(job);

  InitResult init = optimizer_->complete_initialization(v1, draft, std::move(labeled), budget, seed);
  job.progress = 0.8;
  save_job(job);

  Json committed = Json::array();
  for (std::size_t i = 1; i < init.versions.size(); ++i) {
    committed.push_back(store_->put_filter_version(job.filter_id, init.versions[i]));
  }
  Json rounds = Json::array();
  for (const SearchRound& r : init.search.rounds) rounds.push_back(r);
  return Json{{"committed_versions", committed},
              {"best_version", latest(job.filter_id).version},
              {"best_train_metrics", init.search.best_metrics},
              {"search_rounds", rounds},
              {"reclassified", reclassify_latest(job.filter_id)}};
}

Guidance Service::guidance_from(const std::string& filter_id, const FilterPrompt& prompt, const Json& request,
                                std::uint64_t seed) {
  const std::string type = request.value("type", "none");
  if (type == "none") return std::monostate{};
  const auto labeled = store_->labeled_comments(filter_id);
  const Evaluation eval = classifier_->evaluate(prompt, labeled, 0);
  if (type == "clarified_mistake") {
    const std::string cid = request.at("comment_id").get<std::string>();
    auto m = find_mistake(eval, cid);
    if (!m) fail(ErrorCode::kInvalidArgument, "comment " + cid + " is not a current mistake");
    return ClarifiedMistake{*m, request.at("rationale").get<std::string>()};
  }
  const std::string pid = request.at("pattern_id").get<std::string>();
  for (FailurePattern& p : optimizer_->analyze_failures(prompt, eval.mistakes, seed))
    if (p.pattern_id == pid) return std::move(p);
  fail(ErrorCode::kNotFound, "unknown failure pattern " + pid);
}

Json Service::run_optimize_round(Job& job) {
  const std::uint64_t seed = job.params.value("seed", config_.seed);
  const int expansions = job.params.value("expansions", config_.expansions);
  const FilterPrompt prompt = latest(job.filter_id);
  const auto labeled = store_->labeled_comments(job.filter_id);
  if (labeled.empty()) fail(ErrorCode::kInvalidArgument, "an optimization round needs labeled comments");
  const Guidance guidance =
      guidance_from(job.filter_id, prompt, job.params.value("guidance", Json{{"type", "none"}}), seed);
  job.progress = 0.2;
  save_job(job);

  const RoundResult r = optimizer_->optimize_round(prompt, labeled, guidance, expansions, seed);
  Json candidates = Json::array();
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    Json c = r.candidates[i];
    c["rank"] = i + 1;
    candidates.push_back(std::move(c));
  }
  Json patterns = Json::array();
  for (const FailurePattern& p : r.patterns) patterns.push_back(p);
  return Json{{"outcome", to_string(r.outcome)},
              {"base_version", prompt.version},
              {"incumbent_metrics", r.incumbent},
              {"incumbent_mistakes", r.incumbent_mistakes},
              {"patterns", patterns},
              {"candidates", candidates},
              {"candidates_evaluated", r.candidates_evaluated}};
}

void Service::commit_choice(Job& job, const Json& choice) {
  if (choice.value("reject_all", false)) {
    job.result["committed_version"] = nullptr;
    job.result["choice"] = "reject_all";
  } else {
    const auto k = choice.at("candidate").get<std::size_t>();
    const CandidateEdit cand = job.result.at("candidates").at(k - 1).get<CandidateEdit>();
    const FilterPrompt current = latest(job.filter_id);
    if (current.version != job.result.at("base_version").get<int>())
      fail(ErrorCode::kConflict, "filter moved on since the candidates were generated");
    const int v = store_->put_filter_version(job.filter_id, cand.child);
    job.result["committed_version"] = v;
    job.result["choice"] = k;
    job.result["committed_diff"] = store_->filter(job.filter_id)->versions.back().diff;
    job.result["reclassified"] = reclassify_latest(job.filter_id);
  }
  job.progress = 1.0;
  set_state(job, JobState::kDone);
}

Json Service::run_baseline(Job& job) {
  const std::uint64_t seed = job.params.value("seed", config_.seed);
  const SearchBudget budget = budget_from(job.params, {config_.expansions, 2, 3});
  const auto labeled = store_->labeled_comments(job.filter_id);
  if (labeled.empty()) fail(ErrorCode::kInvalidArgument, "a baseline run needs labeled comments");
  BaselineOptimizer baseline(*classifier_);
  const BaselineResult r = baseline.optimize(freestyle_from(latest(job.filter_id)), labeled, budget, seed);
  Json trail = Json::array();
  for (const BaselineAuditEntry& e : r.trail)
    trail.push_back(Json{{"round", e.round},
                         {"version", e.version},
                         {"parent_version", e.parent_version},
                         {"text", e.text},
                         {"gradient", e.gradient},
                         {"metrics", e.metrics},
                         {"kept", e.kept}});
  Json rounds = Json::array();
  for (const SearchRound& s : r.rounds) rounds.push_back(s);
  return Json{{"best_text", r.best.text}, {"best_metrics", r.best_metrics}, {"trail", trail},
              {"rounds", rounds},         {"partial", r.partial},          {"error", r.error}};
}

Json Service::run_reclassify(Job& job) { return reclassify_latest(job.filter_id); }

Json Service::reclassify_latest(const std::string& filter_id) {
  const FilterPrompt prompt = latest(filter_id);
  const auto comments = store_->all_comments();
  std::size_t misses = 0;
  for (const Comment& c : comments)
    if (!store_->get(prompt.content_hash, c.id)) ++misses;
  std::size_t caught = 0;
  for (const Prediction& p : classify_all(prompt))
    if (p.verdict == Verdict::kCatch) ++caught;
  return Json{{"version", prompt.version},
              {"classified", comments.size()},
              {"newly_classified", misses},
              {"caught", caught}};
}

std::vector<Prediction> Service::classify_all(const FilterPrompt& prompt) {
  const auto comments = store_->all_comments();
  if (comments.empty()) return {};
  return classifier_->classify(prompt, comments, 0);
}

Prediction Service::prediction_for(const FilterPrompt& prompt, const Comment& comment) {
  if (auto p = store_->get(prompt.content_hash, comment.id)) return *p;
  return classifier_->classify(prompt, std::span<const Comment>(&comment, 1), 0).front();
}

// --- audit -------------------------------------------------------------------

PredictionPage Service::list_predictions(const std::string& filter_id, const PredictionQuery& query,
                                         bool with_explanations) {
  query.validate();
  const FilterPrompt prompt = latest(filter_id);
  PredictionPage page = store_->query_predictions(filter_id, prompt.content_hash, query);
  if (with_explanations)
    for (PredictionRow& row : page.items)
      row.prediction.explanation = classifier_->explain(prompt, row.comment, row.prediction.verdict);
  return page;
}

std::string Service::explain(const std::string& filter_id, const std::string& comment_id) {
  const FilterPrompt prompt = latest(filter_id);
  auto c = store_->comment(comment_id);
  if (!c) fail(ErrorCode::kNotFound, "unknown comment " + comment_id);
  return classifier_->explain(prompt, *c, prediction_for(prompt, *c).verdict);
}

std::vector<FailurePattern> Service::failure_patterns(const std::string& filter_id, std::uint64_t seed) {
  const FilterPrompt prompt = latest(filter_id);
  const auto labeled = store_->labeled_comments(filter_id);
  if (labeled.empty()) return {};
  const Evaluation eval = classifier_->evaluate(prompt, labeled, 0);
  if (eval.mistakes.empty()) return {};
  return optimizer_->analyze_failures(prompt, eval.mistakes, seed);
}

std::vector<std::string> Service::rationales(const std::string& filter_id, const std::string& comment_id, int n,
                                             std::uint64_t seed) {
  if (n < 1) fail(ErrorCode::kInvalidArgument, "n must be positive");
  const FilterPrompt prompt = latest(filter_id);
  const auto labeled = store_->labeled_comments(filter_id);
  const bool is_labeled =
      std::any_of(labeled.begin(), labeled.end(), [&](const LabeledComment& l) { return l.comment.id == comment_id; });
  if (!is_labeled) fail(ErrorCode::kNotFound, "comment " + comment_id + " has no label for this filter");
  const Evaluation eval = classifier_->evaluate(prompt, labeled, 0);
  auto m = find_mistake(eval, comment_id);
  if (!m) fail(ErrorCode::kInvalidArgument, "comment " + comment_id + " is not a current mistake");
  return optimizer_->rationale_candidates(prompt, *m, n, seed);
}

AuditStats Service::stats(const std::string& filter_id, const TimeWindow& window) {
  return store_->audit_stats(filter_id, window);
}

// --- moderation --------------------------------------------------------------

ActionRecord Service::apply_action(const std::string& filter_id, const std::string& comment_id,
                                   const ModerationAction& action) {
  const FilterPrompt prompt = latest(filter_id);
  auto comment = store_->comment(comment_id);
  if (!comment) fail(ErrorCode::kNotFound, "unknown comment " + comment_id);
  if (action.kind == ActionKind::kReplyWithTemplate) {
    if (!action.template_id) fail(ErrorCode::kInvalidArgument, "reply_with_template needs template_id");
    if (std::find(config_.reply_templates.begin(), config_.reply_templates.end(), *action.template_id) ==
        config_.reply_templates.end())
      fail(ErrorCode::kInvalidArgument, "unknown template " + *action.template_id);
  } else if (action.template_id) {
    fail(ErrorCode::kInvalidArgument, "template_id is only valid for reply_with_template");
  }
  if (action.kind != ActionKind::kDoNothing && prediction_for(prompt, *comment).verdict != Verdict::kCatch)
    fail(ErrorCode::kInvalidArgument, "filter " + filter_id + " did not catch comment " + comment_id);

  ActionRecord record{0, filter_id, comment_id, action, now(), ActionStatus::kSucceeded, {}};

  // Another filter may already have acted on this comment; the most
  // restrictive action stands.
  std::optional<ActionRecord> stronger;
  for (const FilterSummary& f : store_->list_filters()) {
    if (f.filter_id == filter_id) continue;
    for (const ActionRecord& a : store_->actions(f.filter_id)) {
      if (a.comment_id != comment_id || a.status != ActionStatus::kSucceeded) continue;
      if (restrictiveness(a.action.kind) > restrictiveness(action.kind) &&
          (!stronger || restrictiveness(a.action.kind) > restrictiveness(stronger->action.kind)))
        stronger = a;
      else if (restrictiveness(a.action.kind) < restrictiveness(action.kind))
        spdlog::warn("conflict on {}: {} from {} overrides {} from {}", comment_id, to_string(action.kind),
                     filter_id, to_string(a.action.kind), f.filter_id);
    }
  }
  if (stronger) {
    record.sink_result = "superseded by " + std::string(to_string(stronger->action.kind)) + " from filter " +
                         stronger->filter_id;
    spdlog::warn("conflict on {}: {}", comment_id, record.sink_result);
  } else {
    try {
      record.sink_result = sink_->execute(record);
    } catch (const std::exception& e) {
      record.status = ActionStatus::kFailed;
      record.sink_result = e.what();
      spdlog::error("action on {} failed: {}", comment_id, e.what());
    }
  }
  record.action_id = store_->record_action(record);
  return record;
}

ActionRecord Service::retry_action(const std::string& filter_id, std::int64_t action_id) {
  auto record = store_->action(action_id);
  if (!record || record->filter_id != filter_id) fail(ErrorCode::kNotFound, "unknown action " + std::to_string(action_id));
  if (record->status != ActionStatus::kFailed) fail(ErrorCode::kConflict, "only failed actions can be retried");
  record->executed_at = now();
  try {
    record->sink_result = sink_->execute(*record);
    record->status = ActionStatus::kSucceeded;
  } catch (const std::exception& e) {
    record->sink_result = e.what();
  }
  store_->update_action(*record);
  return *record;
}

// --- ingestion ---------------------------------------------------------------

IngestResult Service::ingest(const IngestSource& source) {
  IngestResult r = ingestor_.ingest(source);
  if (r.added > 0)
    for (const auto& f : store_->list_filters()) start_job(f.filter_id, JobKind::kReclassify, Json::object());
  return r;
}

void Service::start_polling() { scheduler_->start(); }

void Service::stop_polling() {
  if (scheduler_) scheduler_->stop();
}

}  // namespace rubricopt
