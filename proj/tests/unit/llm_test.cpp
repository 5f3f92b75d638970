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

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include "rubricopt/core/json.hpp"
#include "rubricopt/core/prompt.hpp"
#include "rubricopt/core/text.hpp"
#include "rubricopt/llm/gateway.hpp"
#include "rubricopt/llm/remote.hpp"
#include "rubricopt/llm/simulation.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt::llm {
namespace {

SimulationRule scam_rule(double noise = 0.0) {
  SimulationRule r;
  r.positive_lexicon = {"scam", "giveaway"};
  r.negative_lexicon = {"parody"};
  r.noise_rate = noise;
  r.seed = 1;
  return r;
}

FilterPrompt prompt_with(std::vector<std::string> pos, std::vector<std::string> neg = {}) {
  FilterPrompt p;
  p.description = "Catch comments that are scams.";
  for (std::size_t i = 0; i < pos.size(); ++i)
    p.positive_rubrics.push_back({"pos-" + std::to_string(i + 1), Polarity::kPositive, pos[i], std::nullopt});
  for (std::size_t i = 0; i < neg.size(); ++i)
    p.negative_rubrics.push_back({"neg-" + std::to_string(i + 1), Polarity::kNegative, neg[i], std::nullopt});
  return with_hash(p);
}

std::string classify_one(const FilterPrompt& p, const std::string& text, const SimulationRule& rule,
                         std::uint64_t seed = 0) {
  CompletionRequest req{render_prompt(p, ClassifyTask{{text}}), 0.0, seed, 64};
  return sim_respond(req, rule);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInternal;
}

// --- simulation: classify ----------------------------------------------------

TEST(SimulationClassify, RubricKeywordCatches) {
  EXPECT_EQ(classify_one(prompt_with({"catch scam"}), "this is a scam", scam_rule()), "1: catch\n");
}

TEST(SimulationClassify, NoRubricsNoMatchIsNotCatch) {
  EXPECT_EQ(classify_one(prompt_with({}), "lovely recipe video", scam_rule()), "1: not_catch\n");
}

TEST(SimulationClassify, NegativeRubricWins) {
  const auto p = prompt_with({"Catch scam posts"}, {"Do not catch parody"});
  EXPECT_EQ(classify_one(p, "a scam parody", scam_rule()), "1: not_catch\n");
  EXPECT_EQ(classify_one(p, "a scam", scam_rule()), "1: catch\n");
  EXPECT_EQ(classify_one(p, "nice song", scam_rule()), "1: not_catch\n");
}

TEST(SimulationClassify, UncoveredKeywordFallsBackToDescription) {
  const auto rule = scam_rule();
  const auto p = prompt_with({"Catch scam posts"}, {"Do not catch parody"});
  int flips = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i)
    if (classify_one(p, "giveaway number " + std::to_string(i), rule) == "1: not_catch\n") ++flips;
  EXPECT_NEAR(static_cast<double>(flips) / n, kVagueFlipRate, 0.03);
}

TEST(SimulationClassify, HandEvaluatedCorpus) {
  // Rubrics covering exactly the rule, noise 0: verdicts equal the rule.
  const auto rule = scam_rule();
  const auto p = prompt_with({"Catch scam and giveaway comments"}, {"Exempt parody"});
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"huge giveaway now", "catch"},      {"scam alert", "catch"},
      {"parody of a scam", "not_catch"},   {"nice song", "not_catch"},
      {"GIVEAWAY!!!", "catch"},            {"giveaways everywhere", "not_catch"},
      {"parody", "not_catch"},             {"scam giveaway combo", "catch"},
      {"the scammer", "not_catch"},        {"giveaway parody", "not_catch"}};
  for (const auto& [text, want] : cases) {
    EXPECT_EQ(classify_one(p, text, rule), "1: " + want + "\n") << text;
    EXPECT_EQ(std::string(to_string(rule_verdict(rule, text))), want) << text;
  }
}

TEST(SimulationClassify, DeterministicAndPositionIndependent) {
  const auto rule = scam_rule(0.3);
  const auto p = prompt_with({});
  std::vector<std::string> batch = {"scam one", "giveaway two", "plain three", "parody scam", "x"};
  CompletionRequest req{render_prompt(p, ClassifyTask{batch}), 0.0, 42, 64};
  const std::string a = sim_respond(req, rule);
  EXPECT_EQ(a, sim_respond(req, rule));
  std::reverse(batch.begin(), batch.end());
  CompletionRequest rev{render_prompt(p, ClassifyTask{batch}), 0.0, 42, 64};
  const std::string b = sim_respond(rev, rule);
  const auto la = split_lines(a), lb = split_lines(b);
  ASSERT_EQ(la.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i)
    EXPECT_EQ(la[i].substr(3), lb[4 - i].substr(3));
}

TEST(SimulationClassify, NoiseRateIsRespected) {
  const auto rule = scam_rule(0.2);
  const auto p = prompt_with({"scam"});
  int flips = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i)
    if (classify_one(p, "scam number " + std::to_string(i), rule) == "1: not_catch\n") ++flips;
  EXPECT_NEAR(static_cast<double>(flips) / n, 0.2, 0.03);
}

TEST(SimulationClassify, VagueDescriptionAddsFlips) {
  const auto rule = scam_rule();
  const auto p = prompt_with({});
  int flips = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i)
    if (classify_one(p, "scam number " + std::to_string(i), rule) == "1: not_catch\n") ++flips;
  EXPECT_NEAR(static_cast<double>(flips) / n, kVagueFlipRate, 0.03);
}

TEST(SimulationRule, Validation) {
  auto r = scam_rule();
  EXPECT_NO_THROW(r.validate());
  r.negative_lexicon.insert("scam");
  EXPECT_EQ(code_of([&] { r.validate(); }), ErrorCode::kInvalidArgument);
  r = scam_rule(0.5);
  EXPECT_EQ(code_of([&] { r.validate(); }), ErrorCode::kInvalidArgument);
}

// --- simulation: generation --------------------------------------------------

TEST(SimulationGenerate, ReflectNamesUncoveredKeyword) {
  ReflectTask t;
  t.comments = {{"join the giveaway today", Verdict::kNotCatch, Verdict::kCatch}};
  CompletionRequest req{render_prompt(prompt_with({"scam"}), t), 0.7, 3, 256};
  const std::string out = sim_respond(req, scam_rule());
  EXPECT_NE(out.find("giveaway"), std::string::npos);
  EXPECT_NE(out.find("lacks a rubric covering"), std::string::npos);
}

TEST(SimulationGenerate, ExplainMentionsMatchedRubric) {
  ReflectTask t;
  t.mode = ReflectTask::Mode::kExplain;
  t.comments = {{"scam link here", Verdict::kCatch, std::nullopt}};
  const auto p = prompt_with({"Catch scam links"});
  std::string out = sim_respond({render_prompt(p, t), 0.0, 0, 128}, scam_rule());
  EXPECT_NE(out.find("Catch scam links"), std::string::npos);
  t.comments = {{"nice video", Verdict::kNotCatch, std::nullopt}};
  out = sim_respond({render_prompt(p, t), 0.0, 0, 128}, scam_rule());
  EXPECT_NE(out.find("no rubric matched"), std::string::npos);
}

TEST(SimulationGenerate, ProposeUsesMostFrequentUncoveredKeyword) {
  ProposeTask t;
  t.polarity = Polarity::kPositive;
  t.comments = {{"giveaway!", Verdict::kNotCatch, Verdict::kCatch},
                {"another giveaway", Verdict::kNotCatch, Verdict::kCatch},
                {"scam", Verdict::kNotCatch, Verdict::kCatch}};
  const std::string out = sim_respond({render_prompt(prompt_with({}), t), 0.7, 0, 128}, scam_rule());
  EXPECT_EQ(out, "Catch comments mentioning giveaway");
  t.variant = 1;
  EXPECT_EQ(sim_respond({render_prompt(prompt_with({}), t), 0.7, 0, 128}, scam_rule()),
            "Catch comments mentioning scam");
  t.polarity = Polarity::kNegative;
  t.variant = 0;
  EXPECT_EQ(sim_respond({render_prompt(prompt_with({}), t), 0.7, 0, 128}, scam_rule()),
            "Do not catch comments mentioning parody");
  EXPECT_EQ(sim_respond({render_prompt(prompt_with({}, {"parody"}), t), 0.7, 0, 128}, scam_rule()), "NONE");
}

TEST(SimulationGenerate, SummarizeAndDraft) {
  SummarizeTask s;
  s.reflections = {"The filter lacks a rubric covering giveaway, so giveaway comments are misjudged."};
  EXPECT_EQ(sim_respond({render_prompt(prompt_with({}), s), 0.7, 0, 128}, scam_rule()),
            "Comments mentioning giveaway are misclassified.");
  DraftTask d;
  d.description = "spam";
  EXPECT_EQ(sim_respond({render_prompt(FilterPrompt{}, d), 0.7, 0, 128}, scam_rule()),
            "Catch comments that spam");
  DraftTask e;
  e.example_comments = {"win a free phone"};
  const auto out = sim_respond({render_prompt(FilterPrompt{}, e), 0.7, 0, 128}, scam_rule());
  EXPECT_EQ(out.rfind("Catch comments that ", 0), 0u);
}

TEST(SimulationGenerate, CorruptSentinelIsProtocolError) {
  EXPECT_EQ(code_of([] { sim_respond({"#TASK dance v1\n", 0, 0, 8}, scam_rule()); }), ErrorCode::kProtocol);
  EXPECT_EQ(code_of([] { sim_respond({"hello", 0, 0, 8}, scam_rule()); }), ErrorCode::kProtocol);
}

// --- simulation: embeddings --------------------------------------------------

TEST(SimulationEmbed, Determinism) {
  const auto a = sim_embed("abc"), b = sim_embed("abc");
  EXPECT_EQ(a, b);
  EXPECT_NEAR(cosine_similarity(a, b), 1.0, 1e-9);
  EXPECT_EQ(a.dimension(), kDefaultEmbeddingDimension);
}

TEST(SimulationEmbed, BagOfWords) {
  EXPECT_EQ(sim_embed("spam scam link"), sim_embed("link spam scam"));
}

TEST(SimulationEmbed, SharedTokensAreCloser) {
  const auto base = sim_embed("refund spam scam");
  const double shared = cosine_similarity(base, sim_embed("spam scam link"));
  const double unrelated = cosine_similarity(base, sim_embed("lovely recipe"));
  // Values computed with this embedding: 2 of 3 tokens shared -> ~2/3.
  EXPECT_NEAR(shared, 2.0 / 3.0, 0.34);
  EXPECT_GT(shared, unrelated);
}

// --- gateway -----------------------------------------------------------------

TEST(Gateway, CountsPerTask) {
  Gateway gw(std::make_shared<SimulationBackend>(scam_rule()));
  gw.run(prompt_with({}), ClassifyTask{{"a", "b"}}, 1);
  gw.run(prompt_with({}), DraftTask{std::string("x"), {}}, 1);
  gw.embed({"a", "b", "c"});
  const auto c = gw.counts();
  EXPECT_EQ(c.completions(), 2u);
  EXPECT_EQ(c.completions(TaskKind::kClassify), 1u);
  EXPECT_EQ(c.completions(TaskKind::kDraft), 1u);
  EXPECT_EQ(c.embedding_calls, 1u);
  EXPECT_EQ(c.embedded_texts, 3u);
}

TEST(Gateway, RejectsBadRequests) {
  Gateway gw(std::make_shared<SimulationBackend>(scam_rule()));
  EXPECT_EQ(code_of([&] { gw.complete({"no sentinel", 0, 0, 8}); }), ErrorCode::kProtocol);
  EXPECT_EQ(code_of([&] { gw.complete({"#TASK draft v1\n", -1, 0, 8}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { gw.embed({}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(gw.counts().completions(), 0u);
}

class CountingBackend : public Backend {
 public:
  std::string complete(const CompletionRequest&) override {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    return "ok";
  }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& t) override {
    return std::vector<EmbeddingVector>(t.size(), EmbeddingVector{{1.0, 0.0}});
  }
  std::size_t embedding_dimension() const override { return 3; }
  std::string name() const override { return "counting"; }
  std::atomic<int> in_flight{0}, peak{0};
};

TEST(Gateway, CapsConcurrencyAndValidatesEmbeddings) {
  auto backend = std::make_shared<CountingBackend>();
  Gateway gw(backend, 2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { gw.complete({"#TASK draft v1\n", 0, 0, 8}); });
  for (auto& t : threads) t.join();
  EXPECT_LE(backend->peak.load(), 2);
  EXPECT_EQ(code_of([&] { gw.embed({"x"}); }), ErrorCode::kProtocol);  // dimension 2 != 3
}

// --- remote backend ----------------------------------------------------------

class MockProvider {
 public:
  MockProvider() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth = req.get_header_value("Authorization");
      last_body = req.body;
      if (fail_next > 0) {
        --fail_next;
        res.status = 503;
        return;
      }
      res.status = status;
      res.set_content(reply, "application/json");
    });
    server_.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = Json::parse(req.body);
      Json data = Json::array();
      // Reverse order with explicit indices.
      for (std::size_t i = body["input"].size(); i-- > 0;)
        data.push_back({{"index", i}, {"embedding", {static_cast<double>(i), 1.0}}});
      res.set_content(Json{{"data", data}}.dump(), "application/json");
    });
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockProvider() {
    server_.stop();
    thread_.join();
  }

  RemoteConfig config() const {
    RemoteConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    c.api_key = "secret";
    c.embedding_dimension = 2;
    c.max_retries = 2;
    c.initial_backoff = std::chrono::milliseconds(1);
    c.request_timeout = std::chrono::milliseconds(2000);
    return c;
  }

  int port = 0;
  int status = 200;
  int fail_next = 0;
  std::string reply = R"({"choices":[{"message":{"role":"assistant","content":"1: catch"}}]})";
  std::string last_auth, last_body;

 private:
  httplib::Server server_;
  std::thread thread_;
};

TEST(RemoteBackend, CompletesAndSendsChatRequest) {
  MockProvider mock;
  RemoteBackend backend(mock.config());
  EXPECT_EQ(backend.complete({"#TASK classify v1\n", 0.0, 9, 32}), "1: catch");
  EXPECT_EQ(mock.last_auth, "Bearer secret");
  const auto body = Json::parse(mock.last_body);
  EXPECT_EQ(body["messages"][0]["content"], "#TASK classify v1\n");
  EXPECT_EQ(body["seed"], 9);
  EXPECT_EQ(body["max_tokens"], 32);
}

TEST(RemoteBackend, RetriesTransientFailures) {
  MockProvider mock;
  mock.fail_next = 2;
  RemoteBackend backend(mock.config());
  EXPECT_EQ(backend.complete({"#TASK classify v1\n", 0.0, 0, 32}), "1: catch");
  mock.fail_next = 3;
  EXPECT_EQ(code_of([&] { backend.complete({"#TASK classify v1\n", 0.0, 0, 32}); }), ErrorCode::kTransport);
}

TEST(RemoteBackend, MalformedPayloadIsProtocolError) {
  MockProvider mock;
  RemoteBackend backend(mock.config());
  mock.reply = R"({"choices":[]})";
  EXPECT_EQ(code_of([&] { backend.complete({"#TASK draft v1\n", 0.7, 0, 32}); }), ErrorCode::kProtocol);
  mock.reply = "<html>";
  EXPECT_EQ(code_of([&] { backend.complete({"#TASK draft v1\n", 0.7, 0, 32}); }), ErrorCode::kProtocol);
  mock.status = 400;
  EXPECT_EQ(code_of([&] { backend.complete({"#TASK draft v1\n", 0.7, 0, 32}); }), ErrorCode::kProtocol);
}

TEST(RemoteBackend, EmbeddingsFollowIndices) {
  MockProvider mock;
  RemoteBackend backend(mock.config());
  const auto v = backend.embed({"a", "b", "c"});
  ASSERT_EQ(v.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(v[i].values[0], static_cast<double>(i));
}

TEST(RemoteBackend, UnreachableHostIsTransportErrorWithinDeadline) {
  RemoteConfig c;
  c.base_url = "http://127.0.0.1:1/v1";
  c.max_retries = 2;
  c.initial_backoff = std::chrono::milliseconds(1);
  c.request_timeout = std::chrono::milliseconds(300);
  RemoteBackend backend(c);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(code_of([&] { backend.complete({"#TASK draft v1\n", 0.7, 0, 32}); }), ErrorCode::kTransport);
  EXPECT_LE(std::chrono::steady_clock::now() - start, backend.deadline());
}

}  // namespace
}  // namespace rubricopt::llm
