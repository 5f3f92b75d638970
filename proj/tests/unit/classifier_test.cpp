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

#include <functional>

#include "rubricopt/classifier/classifier.hpp"
#include "rubricopt/core/prompt.hpp"
#include "rubricopt/core/rng.hpp"
#include "rubricopt/error.hpp"
#include "rubricopt/llm/simulation.hpp"

namespace rubricopt {
namespace {

constexpr Verdict C = Verdict::kCatch;
constexpr Verdict N = Verdict::kNotCatch;

llm::SimulationRule rule(double noise = 0.0) {
  llm::SimulationRule r;
  r.positive_lexicon = {"scam", "giveaway"};
  r.negative_lexicon = {"parody"};
  r.noise_rate = noise;
  r.seed = 9;
  return r;
}

FilterPrompt prompt(std::vector<std::string> pos = {}, std::vector<std::string> neg = {}) {
  FilterPrompt p;
  p.description = "Catch comments that are scams.";
  for (std::size_t i = 0; i < pos.size(); ++i)
    p.positive_rubrics.push_back({"pos-" + std::to_string(i + 1), Polarity::kPositive, pos[i], std::nullopt});
  for (std::size_t i = 0; i < neg.size(); ++i)
    p.negative_rubrics.push_back({"neg-" + std::to_string(i + 1), Polarity::kNegative, neg[i], std::nullopt});
  return with_hash(p);
}

std::vector<Comment> corpus(std::size_t n) {
  const std::vector<std::string> texts = {"huge giveaway now", "scam alert", "parody of a scam",
                                          "nice song",         "great video", "giveaway parody",
                                          "scam giveaway",     "lol",         "the scam is real",
                                          "cooking tips"};
  std::vector<Comment> out;
  for (std::size_t i = 0; i < n; ++i) {
    Comment c;
    c.id = "c" + std::to_string(100 + i);
    c.text = texts[i % texts.size()] + " #" + std::to_string(i);
    c.published_at = parse_timestamp("2024-01-01T00:00:00Z") + std::chrono::hours(i);
    out.push_back(c);
  }
  return out;
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

// --- majority vote -----------------------------------------------------------

TEST(MajorityVote, Examples) {
  const std::vector<Verdict> a = {C, C, N, C, N};
  const auto r = majority_vote(a);
  EXPECT_EQ(r.verdict, C);
  EXPECT_DOUBLE_EQ(r.confidence, 0.6);
  const std::vector<Verdict> b = {N, N, N, N, N};
  EXPECT_EQ(majority_vote(b).verdict, N);
  EXPECT_DOUBLE_EQ(majority_vote(b).confidence, 1.0);
}

TEST(MajorityVote, ExhaustiveAgainstCounter) {
  for (unsigned mask = 0; mask < 32; ++mask) {
    std::vector<Verdict> v;
    int catches = 0;
    for (int bit = 0; bit < 5; ++bit) {
      const bool c = (mask >> bit) & 1u;
      v.push_back(c ? C : N);
      catches += c;
    }
    const auto r = majority_vote(v);
    EXPECT_EQ(r.verdict, catches >= 3 ? C : N) << mask;
    const int top = catches >= 3 ? catches : 5 - catches;
    EXPECT_EQ(r.confidence, top / 5.0) << mask;
    EXPECT_TRUE(r.confidence == 0.6 || r.confidence == 0.8 || r.confidence == 1.0);
  }
}

TEST(MajorityVote, WrongCountAndEvenTies) {
  const std::vector<Verdict> four = {C, C, N, N};
  EXPECT_EQ(code_of([&] { majority_vote(four); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(majority_vote(four, 4).verdict, N);
  EXPECT_DOUBLE_EQ(majority_vote(four, 4).confidence, 0.5);
}

// --- metrics -----------------------------------------------------------------

TEST(Metrics, Example) {
  const Metrics m = compute_metrics(3, 1, 2, 4);
  EXPECT_NEAR(m.accuracy, 0.7, 1e-9);
  EXPECT_NEAR(m.precision, 0.75, 1e-9);
  EXPECT_NEAR(m.recall, 0.6, 1e-9);
  EXPECT_NEAR(m.f1, 2 * 0.75 * 0.6 / 1.35, 1e-9);
  EXPECT_NEAR(m.f1, 0.6667, 1e-4);
}

TEST(Metrics, EmptyDenominators) {
  const Metrics m = compute_metrics(0, 0, 0, 5);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  const Metrics z = compute_metrics(0, 3, 2, 0);
  EXPECT_EQ(z.f1, 0.0);
}

TEST(Metrics, RandomMatrices) {
  KeyedRng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto tp = static_cast<std::int64_t>(rng.below(50)), fp = static_cast<std::int64_t>(rng.below(50));
    const auto fn = static_cast<std::int64_t>(rng.below(50)), tn = static_cast<std::int64_t>(rng.below(50)) + 1;
    const Metrics m = compute_metrics(tp, fp, fn, tn);
    const double p = tp + fp ? double(tp) / double(tp + fp) : 1.0;
    const double r = tp + fn ? double(tp) / double(tp + fn) : 1.0;
    EXPECT_NEAR(m.accuracy, double(tp + tn) / double(tp + fp + fn + tn), 1e-9);
    EXPECT_NEAR(m.precision, p, 1e-9);
    EXPECT_NEAR(m.recall, r, 1e-9);
    EXPECT_NEAR(m.f1, p + r > 0 ? 2 * p * r / (p + r) : 0.0, 1e-9);
  }
}

// --- parsing -----------------------------------------------------------------

TEST(ParseClassification, AcceptsAnyLineOrder) {
  const auto v = parse_classification("2: not_catch\n1: CATCH\n", 2);
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(*v, (std::vector<Verdict>{C, N}));
  EXPECT_FALSE(parse_classification("1: catch\n", 2));
  EXPECT_FALSE(parse_classification("1: catch\n1: catch\n2: catch", 2));
  EXPECT_FALSE(parse_classification("1: maybe\n", 1));
  EXPECT_FALSE(parse_classification("3: catch\n", 1));
  EXPECT_FALSE(parse_classification("sure! 1: catch", 1));
}

// --- classify ----------------------------------------------------------------

TEST(Classify, TwelveCommentsCostFifteenCalls) {
  llm::Gateway gw(std::make_shared<llm::SimulationBackend>(rule()));
  Classifier clf(gw);
  const auto comments = corpus(12);
  const auto preds = clf.classify(prompt({"scam"}), comments, 1);
  EXPECT_EQ(preds.size(), 12u);
  EXPECT_EQ(gw.counts().completions(TaskKind::kClassify), 15u);
  clf.classify(prompt({"scam"}), comments, 1);
  EXPECT_EQ(gw.counts().completions(TaskKind::kClassify), 15u);
}

TEST(Classify, EmptyAndDuplicateInputRejected) {
  llm::Gateway gw(std::make_shared<llm::SimulationBackend>(rule()));
  Classifier clf(gw);
  EXPECT_EQ(code_of([&] { clf.classify(prompt(), {}, 1); }), ErrorCode::kInvalidArgument);
  auto c = corpus(2);
  c[1].id = c[0].id;
  EXPECT_EQ(code_of([&] { clf.classify(prompt(), c, 1); }), ErrorCode::kInvalidArgument);
}

TEST(Classify, CoveringRubricsMatchRuleUnanimously) {
  llm::Gateway gw(std::make_shared<llm::SimulationBackend>(rule()));
  Classifier clf(gw);
  const auto comments = corpus(10);
  const auto preds = clf.classify(prompt({"Catch scam and giveaway comments"}, {"Exempt parody"}), comments, 3);
  for (std::size_t i = 0; i < comments.size(); ++i) {
    EXPECT_EQ(preds[i].verdict, llm::rule_verdict(rule(), comments[i].text)) << comments[i].text;
    EXPECT_EQ(preds[i].confidence, 1.0);
    EXPECT_EQ(preds[i].votes.size(), 5u);
    EXPECT_EQ(preds[i].comment_id, comments[i].id);
  }
}

TEST(Classify, ParallelMatchesSerialAndReplays) {
  auto backend = std::make_shared<llm::SimulationBackend>(rule(0.2));
  llm::Gateway g1(backend), g2(backend), g3(backend);
  Classifier a(g1), b(g2), c(g3);
  const auto comments = corpus(37);
  const auto p = prompt();
  const auto pa = a.classify(p, comments, 11);
  EXPECT_EQ(pa, b.classify_serial(p, comments, 11));
  EXPECT_EQ(pa, c.classify(p, comments, 11));
  bool any_uncertain = false;
  for (const auto& x : pa) any_uncertain = any_uncertain || !x.unanimous();
  EXPECT_TRUE(any_uncertain);
}

TEST(Classify, VotesIndependentOfBatchPlacement) {
  auto backend = std::make_shared<llm::SimulationBackend>(rule(0.2));
  llm::Gateway g1(backend), g2(backend);
  Classifier a(g1), b(g2);
  auto comments = corpus(23);
  const auto forward = a.classify(prompt(), comments, 5);
  std::reverse(comments.begin(), comments.end());
  const auto backward = b.classify(prompt(), comments, 5);
  for (std::size_t i = 0; i < forward.size(); ++i) {
    const auto& f = forward[i];
    const auto& r = backward[forward.size() - 1 - i];
    ASSERT_EQ(f.comment_id, r.comment_id);
    EXPECT_EQ(f.votes, r.votes);
  }
}

class ScriptedBackend : public llm::Backend {
 public:
  explicit ScriptedBackend(int garbage_before_answer) : garbage_(garbage_before_answer) {}
  std::string complete(const llm::CompletionRequest& req) override {
    const auto parsed = parse_request(req.rendered_text);
    if (calls_++ < garbage_) return "I think these are fine.";
    std::string out;
    for (const auto& [i, c] : parsed.comments) out += std::to_string(i) + ": catch\n";
    return out;
  }
  std::vector<llm::EmbeddingVector> embed(const std::vector<std::string>&) override { return {}; }
  std::size_t embedding_dimension() const override { return 1; }
  std::string name() const override { return "scripted"; }

 private:
  std::atomic<int> garbage_;
  std::atomic<int> calls_{0};
};

TEST(Classify, UnparseableRunsAreRerequested) {
  llm::Gateway gw(std::make_shared<ScriptedBackend>(2));
  Classifier clf(gw, nullptr, ClassifierConfig{5, 5, 2});
  const auto comments = corpus(1);
  const auto preds = clf.classify_serial(prompt(), comments, 1);
  EXPECT_EQ(preds[0].verdict, C);
  EXPECT_EQ(gw.counts().completions(), 7u);
}

TEST(Classify, ExhaustedReparsesFailTheBatch) {
  llm::Gateway gw(std::make_shared<ScriptedBackend>(1000));
  Classifier clf(gw);
  const auto comments = corpus(3);
  try {
    clf.classify(prompt(), comments, 1);
    FAIL() << "expected classification error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kClassification);
    EXPECT_NE(std::string(e.what()).find("batch 1"), std::string::npos);
  }
}

// --- evaluate / explain ------------------------------------------------------

TEST(Evaluate, MistakesOrderedFalsePositivesFirst) {
  llm::Gateway gw(std::make_shared<llm::SimulationBackend>(rule()));
  Classifier clf(gw);
  // Prompt catches "scam" only; gold follows the rule.
  const auto comments = corpus(10);
  std::vector<LabeledComment> labeled;
  for (const auto& c : comments) labeled.push_back({c, llm::rule_verdict(rule(), c.text)});
  const auto ev = clf.evaluate(prompt({"scam"}), labeled, 1);
  ASSERT_FALSE(ev.mistakes.empty());
  bool seen_fn = false;
  std::size_t last_index = 0;
  for (const auto& m : ev.mistakes) {
    const std::size_t idx = static_cast<std::size_t>(
        std::find_if(comments.begin(), comments.end(), [&](const Comment& c) { return c.id == m.comment.id; }) -
        comments.begin());
    if (m.false_positive()) {
      EXPECT_FALSE(seen_fn);
    } else if (!seen_fn) {
      seen_fn = true;
      last_index = 0;
    }
    EXPECT_GE(idx, last_index);
    last_index = idx;
    EXPECT_NE(m.predicted, m.gold);
  }
  EXPECT_EQ(static_cast<std::int64_t>(ev.mistakes.size()), ev.metrics.fp + ev.metrics.fn);

  const auto perfect = clf.evaluate(prompt({"scam giveaway"}, {"parody"}), labeled, 1);
  EXPECT_TRUE(perfect.mistakes.empty());
  EXPECT_EQ(perfect.metrics.accuracy, 1.0);
}

TEST(Explain, MentionsRubricAndCaches) {
  llm::Gateway gw(std::make_shared<llm::SimulationBackend>(rule()));
  Classifier clf(gw);
  const auto p = prompt({"Catch scam links"});
  Comment c = corpus(2)[1];  // "scam alert"
  const std::string e = clf.explain(p, c, C);
  EXPECT_NE(e.find("Catch scam links"), std::string::npos);
  const auto before = gw.counts().completions();
  EXPECT_EQ(clf.explain(p, c, C), e);
  EXPECT_EQ(gw.counts().completions(), before);

  Comment other = corpus(4)[3];  // "nice song"
  EXPECT_NE(clf.explain(p, other, N).find("no rubric matched"), std::string::npos);
}

}  // namespace
}  // namespace rubricopt
