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

#include "rubricopt/service/http.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <functional>
#include <utility>

#include "rubricopt/optimizer/json.hpp"

namespace rubricopt {

namespace {

struct Reply {
  int status = 200;
  Json body;
};

using Handler = std::function<Reply(const httplib::Request&)>;

void send(httplib::Response& res, const Reply& reply) {
  res.status = reply.status;
  res.set_content(reply.body.dump(), "application/json");
}

httplib::Server::Handler wrap(Handler handler) {
  return [handler = std::move(handler)](const httplib::Request& req, httplib::Response& res) {
    try {
      send(res, handler(req));
    } catch (const Error& e) {
      send(res, {http_status(e.code()), error_envelope(e)});
    } catch (const Json::exception& e) {
      send(res, {400, error_envelope(Error(ErrorCode::kInvalidArgument, std::string("bad request body: ") + e.what()))});
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send(res, {500, error_envelope(Error(ErrorCode::kInternal, e.what()))});
    }
  };
}

Json body_of(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::kInvalidArgument, "request body is not JSON");
  if (!j.is_object()) fail(ErrorCode::kInvalidArgument, "request body must be a JSON object");
  return j;
}

const std::string& path_param(const httplib::Request& req, const char* name) {
  return req.path_params.at(name);
}

std::optional<std::string> query(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

template <typename T>
T parse_number(const std::string& text, const char* name) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) fail(ErrorCode::kInvalidArgument, std::string(name) + " is not a number");
  return value;
}

double parse_double(const std::string& text, const char* name) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kInvalidArgument, std::string(name) + " is not a number");
}

bool parse_bool(const std::string& text, const char* name) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  fail(ErrorCode::kInvalidArgument, std::string(name) + " must be true or false");
}

// Accepts a full timestamp or a bare day; a bare day bound covers the whole day.
Timestamp parse_bound(const std::string& text, bool upper) {
  if (text.size() == 10) return parse_timestamp(text + (upper ? "T23:59:59Z" : "T00:00:00Z"));
  return parse_timestamp(text);
}

std::uint64_t seed_of(const httplib::Request& req, const Json& body, std::uint64_t fallback) {
  if (auto s = query(req, "seed")) return parse_number<std::uint64_t>(*s, "seed");
  return body.value("seed", fallback);
}

Json version_json(const StoredVersion& v) {
  return Json{{"version", v.prompt.version},
              {"prompt", v.prompt},
              {"diff", v.diff},
              {"created_at", format_timestamp(v.created_at)}};
}

Json action_json(const ActionRecord& a) {
  Json action{{"kind", to_string(a.action.kind)}};
  if (a.action.template_id) action["template_id"] = *a.action.template_id;
  return Json{{"action_id", a.action_id},
              {"filter_id", a.filter_id},
              {"comment_id", a.comment_id},
              {"action", action},
              {"executed_at", format_timestamp(a.executed_at)},
              {"status", a.status == ActionStatus::kSucceeded ? "succeeded" : "failed"},
              {"sink_result", a.sink_result}};
}

Json ingest_json(const IngestResult& r) {
  return Json{{"source_id", r.source_id}, {"fetched", r.fetched},
              {"added", r.added},         {"duplicates", r.duplicates},
              {"skipped_malformed", r.skipped_malformed}, {"capped", r.capped},
              {"errors", r.errors}};
}

Json stats_json(const AuditStats& s) {
  Json series = Json::array();
  for (const DailyCount& d : s.daily_caught_series) series.push_back(Json{{"day", d.day}, {"caught", d.caught}});
  return Json{{"false_positives", s.false_positives}, {"false_negatives", s.false_negatives},
              {"correct", s.correct},                 {"caught_total", s.caught_total},
              {"uncaught_total", s.uncaught_total},   {"daily_caught_series", series}};
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kCancelled: return 499;
    case ErrorCode::kTransport:
    case ErrorCode::kProtocol:
    case ErrorCode::kClassification: return 502;
    case ErrorCode::kStorage:
    case ErrorCode::kInternal: return 500;
  }
  return 500;
}

Json error_envelope(const Error& error) {
  Json details = nullptr;
  if (!error.details().empty()) {
    details = Json::parse(error.details(), nullptr, false);
    if (details.is_discarded()) details = error.details();
  }
  return Json{{"code", to_string(error.code())}, {"message", error.what()}, {"details", details}};
}

void register_routes(httplib::Server& server, Service& service) {
  Service& svc = service;

  server.Get("/v1/health", wrap([&svc](const httplib::Request&) {
               return Reply{200, Json{{"status", "ok"},
                                      {"backend", svc.config().backend},
                                      {"filters", svc.store().list_filters().size()},
                                      {"comments", svc.store().comment_count()}}};
             }));

  // --- filters ---------------------------------------------------------------

  server.Post("/v1/filters", wrap([&svc](const httplib::Request& req) {
                const Json body = body_of(req);
                FilterDraft draft;
                draft.name = body.at("name").get<std::string>();
                if (body.contains("description")) draft.description = body.at("description").get<std::string>();
                draft.example_comments = body.value("example_comments", std::vector<std::string>{});
                if (body.contains("filter_id")) draft.filter_id = body.at("filter_id").get<std::string>();
                draft.seed = body.value("seed", svc.config().seed);
                return Reply{201, svc.create_filter(draft)};
              }));

  server.Get("/v1/filters", wrap([&svc](const httplib::Request&) {
               Json items = Json::array();
               for (const FilterSummary& f : svc.store().list_filters())
                 items.push_back(
                     Json{{"filter_id", f.filter_id}, {"name", f.name}, {"latest_version", f.latest_version}});
               return Reply{200, Json{{"filters", items}}};
             }));

  server.Get("/v1/filters/:id", wrap([&svc](const httplib::Request& req) {
               const auto versions = svc.versions(path_param(req, "id"));
               const FilterPrompt& latest = versions.back().prompt;
               return Reply{200, Json{{"filter_id", latest.filter_id},
                                      {"name", latest.name},
                                      {"latest", latest},
                                      {"version_count", versions.size()}}};
             }));

  server.Get("/v1/filters/:id/versions", wrap([&svc](const httplib::Request& req) {
               Json items = Json::array();
               for (const StoredVersion& v : svc.versions(path_param(req, "id"))) items.push_back(version_json(v));
               return Reply{200, Json{{"versions", items}}};
             }));

  server.Put("/v1/filters/:id/prompt", wrap([&svc](const httplib::Request& req) {
               const Json body = body_of(req);
               const Json& p = body.contains("prompt") ? body.at("prompt") : body;
               const ManualEditResult r = svc.put_prompt(path_param(req, "id"), p.get<FilterPrompt>());
               return Reply{200, Json{{"prompt", r.prompt}, {"reclassify_job_id", r.reclassify_job_id}}};
             }));

  // --- labeling --------------------------------------------------------------

  server.Post("/v1/filters/:id/labeling-plan", wrap([&svc](const httplib::Request& req) {
                const Json body = body_of(req);
                std::optional<std::size_t> k;
                if (body.contains("k")) k = body.at("k").get<std::size_t>();
                const auto items = svc.labeling_plan(path_param(req, "id"), k, seed_of(req, body, svc.config().seed));
                Json out = Json::array();
                for (const PlanItem& it : items)
                  out.push_back(Json{{"comment", it.comment}, {"prediction", it.prediction}, {"tier", to_string(it.tier)}});
                return Reply{200, Json{{"items", out}}};
              }));

  server.Post("/v1/filters/:id/labels", wrap([&svc](const httplib::Request& req) {
                const Json body = body_of(req);
                std::vector<LabelInput> labels;
                for (const Json& l : body.at("labels"))
                  labels.push_back({l.at("comment_id").get<std::string>(),
                                    parse_verdict(l.at("verdict").get<std::string>()),
                                    parse_label_source(l.value("source", std::string("initialization")))});
                return Reply{201, Json{{"stored", svc.add_labels(path_param(req, "id"), labels)}}};
              }));

  // --- jobs ------------------------------------------------------------------

  server.Post("/v1/filters/:id/jobs", wrap([&svc](const httplib::Request& req) {
                const Json body = body_of(req);
                const JobKind kind = parse_job_kind(body.at("kind").get<std::string>());
                const Job job = svc.start_job(path_param(req, "id"), kind, body.value("params", Json::object()));
                return Reply{202, to_json(job)};
              }));

  server.Get("/v1/jobs", wrap([&svc](const httplib::Request& req) {
               const auto filter = query(req, "filter_id");
               Json items = Json::array();
               for (const Job& j : svc.jobs())
                 if (!filter || j.filter_id == *filter) items.push_back(to_json(j));
               return Reply{200, Json{{"jobs", items}}};
             }));

  server.Get("/v1/jobs/:id", wrap([&svc](const httplib::Request& req) {
               return Reply{200, to_json(svc.poll_job(path_param(req, "id")))};
             }));

  server.Post("/v1/jobs/:id/resume", wrap([&svc](const httplib::Request& req) {
                return Reply{202, to_json(svc.resume_job(path_param(req, "id"), body_of(req)))};
              }));

  server.Post("/v1/jobs/:id/retry", wrap([&svc](const httplib::Request& req) {
                return Reply{202, to_json(svc.retry_job(path_param(req, "id")))};
              }));

  // --- audit -----------------------------------------------------------------

  server.Get("/v1/filters/:id/predictions", wrap([&svc](const httplib::Request& req) {
               PredictionQuery q;
               if (auto v = query(req, "verdict")) q.verdict = parse_verdict(*v);
               if (auto v = query(req, "min_confidence")) q.min_confidence = parse_double(*v, "min_confidence");
               if (auto v = query(req, "max_confidence")) q.max_confidence = parse_double(*v, "max_confidence");
               if (auto v = query(req, "audited")) q.audited = parse_bool(*v, "audited");
               if (auto v = query(req, "q")) q.text = *v;
               if (auto v = query(req, "offset")) q.offset = parse_number<std::size_t>(*v, "offset");
               if (auto v = query(req, "limit")) q.limit = parse_number<std::size_t>(*v, "limit");
               const bool explain = query(req, "explain") ? parse_bool(*query(req, "explain"), "explain") : false;
               const PredictionPage page = svc.list_predictions(path_param(req, "id"), q, explain);
               Json items = Json::array();
               for (const PredictionRow& row : page.items) {
                 Json item{{"comment", row.comment}, {"prediction", row.prediction}};
                 item["audited_verdict"] =
                     row.audited_verdict ? Json(to_string(*row.audited_verdict)) : Json(nullptr);
                 items.push_back(std::move(item));
               }
               return Reply{200, Json{{"items", items},
                                      {"total", page.total},
                                      {"next_offset", page.next_offset ? Json(*page.next_offset) : Json(nullptr)}}};
             }));

  server.Get("/v1/filters/:id/predictions/:cid/explanation", wrap([&svc](const httplib::Request& req) {
               return Reply{200, Json{{"comment_id", path_param(req, "cid")},
                                      {"explanation", svc.explain(path_param(req, "id"), path_param(req, "cid"))}}};
             }));

  server.Get("/v1/filters/:id/failure-patterns", wrap([&svc](const httplib::Request& req) {
               const auto patterns =
                   svc.failure_patterns(path_param(req, "id"), seed_of(req, Json::object(), svc.config().seed));
               Json items = Json::array();
               for (const FailurePattern& p : patterns) items.push_back(p);
               return Reply{200, Json{{"patterns", items}}};
             }));

  server.Post("/v1/filters/:id/mistakes/:cid/rationales", wrap([&svc](const httplib::Request& req) {
                const Json body = body_of(req);
                const auto r = svc.rationales(path_param(req, "id"), path_param(req, "cid"), body.value("n", 3),
                                              seed_of(req, body, svc.config().seed));
                return Reply{200, Json{{"rationales", r}}};
              }));

  server.Get("/v1/filters/:id/stats", wrap([&svc](const httplib::Request& req) {
               TimeWindow w;
               if (auto v = query(req, "from")) w.from = parse_bound(*v, false);
               if (auto v = query(req, "to")) w.to = parse_bound(*v, true);
               return Reply{200, stats_json(svc.stats(path_param(req, "id"), w))};
             }));

  // --- moderation ------------------------------------------------------------

  server.Post("/v1/filters/:id/actions", wrap([&svc](const httplib::Request& req) {
                const Json body = body_of(req);
                const Json& a = body.contains("action") ? body.at("action") : body;
                ModerationAction action;
                action.kind = parse_action_kind(a.at("kind").get<std::string>());
                if (a.contains("template_id")) action.template_id = a.at("template_id").get<std::string>();
                const ActionRecord r =
                    svc.apply_action(path_param(req, "id"), body.at("comment_id").get<std::string>(), action);
                return Reply{201, action_json(r)};
              }));

  server.Get("/v1/filters/:id/actions", wrap([&svc](const httplib::Request& req) {
               const std::string& id = path_param(req, "id");
               svc.store().require_filter(id);
               Json items = Json::array();
               for (const ActionRecord& a : svc.store().actions(id)) items.push_back(action_json(a));
               return Reply{200, Json{{"actions", items}}};
             }));

  server.Post("/v1/filters/:id/actions/:aid/retry", wrap([&svc](const httplib::Request& req) {
                const auto aid = parse_number<std::int64_t>(path_param(req, "aid"), "action id");
                return Reply{200, action_json(svc.retry_action(path_param(req, "id"), aid))};
              }));

  // --- ingestion -------------------------------------------------------------

  server.Post("/v1/ingest", wrap([&svc](const httplib::Request& req) {
                const Json body = body_of(req);
                IngestSource source;
                if (body.contains("jsonl_path")) source = JsonlFileSource{body.at("jsonl_path").get<std::string>()};
                else if (body.contains("adapter_id")) source = PollingSource{body.at("adapter_id").get<std::string>()};
                else fail(ErrorCode::kInvalidArgument, "give jsonl_path or adapter_id");
                return Reply{200, ingest_json(svc.ingest(source))};
              }));

  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const ErrorCode code = res.status == 404 ? ErrorCode::kNotFound : ErrorCode::kInvalidArgument;
    res.set_content(error_envelope(Error(code, "no route for " + req.method + " " + req.path)).dump(),
                    "application/json");
  });
}

HttpServer::HttpServer(Service& service) : server_(std::make_unique<httplib::Server>()) {
  register_routes(*server_, service);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) fail(ErrorCode::kInvalidArgument, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port))
    fail(ErrorCode::kInvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::serve() { server_->listen_after_bind(); }

void HttpServer::start() {
  thread_ = std::thread([this] { serve(); });
  server_->wait_until_ready();
}

void HttpServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace rubricopt
