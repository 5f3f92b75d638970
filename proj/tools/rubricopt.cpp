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

// Command-line entry point: serve, ingest, experiment, export-filter,
// import-filter, compact, synth-corpus.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>

#include "rubricopt/error.hpp"
#include "rubricopt/harness/harness.hpp"
#include "rubricopt/service/http.hpp"
#include "rubricopt/service/service.hpp"
#include "rubricopt/store/store.hpp"

namespace {

using namespace rubricopt;

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "cannot read " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::kInvalidArgument, path + " is not JSON");
  return j;
}

void write_json(const Json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kStorage, "cannot write " + path);
  out << j.dump(2) << "\n";
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct Globals {
  std::string config_path;
  std::string db_path;
};

ServiceConfig service_config(const Globals& g) {
  ServiceConfig c = g.config_path.empty() ? ServiceConfig{} : load_service_config(g.config_path);
  if (!g.db_path.empty()) c.db_path = g.db_path;
  c.validate();
  return c;
}

int serve(const Globals& g, const std::string& host, int port) {
  ServiceConfig config = service_config(g);
  if (!host.empty()) config.host = host;
  if (port >= 0) config.port = port;

  // Signals go to a dedicated thread so the server can be stopped cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(config);
  HttpServer server(service);
  const int bound = server.bind(config.host, config.port);
  service.start_polling();
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {}, shutting down", sig);
    server.stop();
  });
  spdlog::info("listening on {}:{} ({} backend, db {})", config.host, bound, config.backend, config.db_path);
  std::cout << "listening on " << config.host << ":" << bound << std::endl;
  server.serve();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  service.stop_polling();
  return 0;
}

int ingest(const Globals& g, const std::string& source, const std::string& adapter) {
  Service service(service_config(g));
  IngestSource src;
  if (!adapter.empty()) src = PollingSource{adapter};
  else src = JsonlFileSource{source};
  const IngestResult r = service.ingest(src);
  for (const Job& j : service.jobs())
    if (j.state == JobState::kQueued || j.state == JobState::kRunning) service.wait_job(j.job_id);
  write_json(Json{{"source_id", r.source_id},
                  {"fetched", r.fetched},
                  {"added", r.added},
                  {"duplicates", r.duplicates},
                  {"skipped_malformed", r.skipped_malformed},
                  {"capped", r.capped},
                  {"errors", r.errors}},
             "-");
  return 0;
}

struct ExperimentArgs {
  std::string config_path;
  std::string corpus = "synthetic";
  std::string conditions;
  int iterations = -1;
  std::optional<std::uint64_t> seed;
  std::size_t size = 0;
  bool parallel = false;
  std::string out;
};

int experiment(const ExperimentArgs& a) {
  ExperimentConfig c = a.config_path.empty() ? ExperimentConfig{} : experiment_config_from_json(read_json_file(a.config_path));
  if (a.corpus != "synthetic") c.corpus_path = a.corpus;
  if (!a.conditions.empty()) c.conditions = split_csv(a.conditions);
  if (a.iterations >= 0) c.iterations = a.iterations;
  if (a.seed) c.seed = *a.seed;
  if (a.size > 0) c.corpus_size = a.size;
  if (a.parallel) c.parallel_conditions = true;
  c.validate();
  const Json report = run_experiment(c);
  write_json(report, a.out);
  if (!a.out.empty() && a.out != "-") {
    std::cout << "report written to " << a.out << "\n";
    for (const auto& [name, cond] : report.at("conditions").items()) {
      if (!cond.contains("post_iterations")) continue;
      std::cout << name << ": test F1 post-init " << cond.at("post_init").at("test_metrics").at("f1").get<double>()
                << ", post-iterations " << cond.at("post_iterations").at("test_metrics").at("f1").get<double>()
                << "\n";
    }
  }
  return report.at("partial").get<bool>() ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rubricopt: interactive comment filters with rubric-based prompt optimization"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Service config (JSON)");
  app.add_option("--db", g.db_path, "Database path, overrides the config");

  std::string host;
  int port = -1;
  auto* serve_cmd = app.add_subcommand("serve", "Run the /v1 HTTP API");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));

  std::string source, adapter;
  auto* ingest_cmd = app.add_subcommand("ingest", "Ingest comments once");
  auto* src_opt = ingest_cmd->add_option("--source", source, "JSONL file of comment records");
  auto* adapter_opt = ingest_cmd->add_option("--adapter", adapter, "Fixture adapter id from the config");
  src_opt->excludes(adapter_opt);

  ExperimentArgs ex;
  auto* exp_cmd = app.add_subcommand("experiment", "Run the offline comparison on the simulation backend");
  exp_cmd->add_option("--experiment-config", ex.config_path, "Experiment config (JSON)");
  exp_cmd->add_option("--corpus", ex.corpus, "JSONL corpus path or 'synthetic'");
  exp_cmd->add_option("--conditions", ex.conditions, "Comma-separated: promptimizer,protegi");
  exp_cmd->add_option("--iterations", ex.iterations, "Simulated-user iterations")->check(CLI::NonNegativeNumber);
  exp_cmd->add_option("--seed", ex.seed, "Master seed");
  exp_cmd->add_option("--size", ex.size, "Synthetic corpus size");
  exp_cmd->add_flag("--parallel", ex.parallel, "Run conditions concurrently");
  exp_cmd->add_option("--out", ex.out, "Report path ('-' for stdout)");

  std::string filter_id, out_path, in_path, as_id;
  auto* export_cmd = app.add_subcommand("export-filter", "Write a filter's lineage, labels and comments");
  export_cmd->add_option("--id", filter_id, "Filter id")->required();
  export_cmd->add_option("--out", out_path, "Output path ('-' for stdout)");
  auto* import_cmd = app.add_subcommand("import-filter", "Restore an exported filter");
  import_cmd->add_option("--in", in_path, "Export document")->required();
  import_cmd->add_option("--as", as_id, "Import under a different id");

  auto* compact_cmd = app.add_subcommand("compact", "Drop cache entries of vanished versions and vacuum");

  std::size_t synth_size = 200;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth-corpus", "Write a synthetic JSONL corpus for the default rule");
  synth_cmd->add_option("--size", synth_size, "Number of comments")->check(CLI::Range(10, 1000000));
  synth_cmd->add_option("--seed", synth_seed, "Corpus seed");
  synth_cmd->add_option("--out", synth_out, "Output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(g, host, port);
    if (*ingest_cmd) {
      if (source.empty() && adapter.empty()) fail(ErrorCode::kInvalidArgument, "give --source or --adapter");
      return ingest(g, source, adapter);
    }
    if (*exp_cmd) return experiment(ex);
    if (*export_cmd) {
      auto store = Store::open(service_config(g).db_path);
      write_json(store->export_filter(filter_id), out_path);
      return 0;
    }
    if (*import_cmd) {
      auto store = Store::open(service_config(g).db_path);
      const std::string id =
          store->import_filter(read_json_file(in_path), as_id.empty() ? std::nullopt : std::optional(as_id));
      std::cout << "imported " << id << "\n";
      return 0;
    }
    if (*synth_cmd) {
      const auto corpus = make_synthetic_corpus(default_experiment_rule(), synth_size, 0.5, synth_seed);
      std::ofstream out(synth_out);
      if (!out) fail(ErrorCode::kStorage, "cannot write " + synth_out);
      for (const Comment& c : corpus.comments) out << Json(c).dump() << "\n";
      std::cout << "wrote " << corpus.comments.size() << " comments to " << synth_out << "\n";
      return 0;
    }
    if (*compact_cmd) {
      auto store = Store::open(service_config(g).db_path);
      std::cout << "removed " << store->compact() << " cache entries\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
