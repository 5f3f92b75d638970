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
#include <map>
#include <numeric>
#include <set>

#include "rubricopt/core/json.hpp"
#include "rubricopt/core/prompt.hpp"
#include "rubricopt/core/request.hpp"
#include "rubricopt/core/rng.hpp"
#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt {
namespace {

FilterPrompt sample_prompt() {
  FilterPrompt p;
  p.filter_id = "f1";
  p.name = "scams";
  p.description = "Catch comments that push scams.";
  p.positive_rubrics = {{"pos-1", Polarity::kPositive, "Catch scam links", std::nullopt}};
  p.negative_rubrics = {{"neg-1", Polarity::kNegative, "Do not catch jokes about scams", 2}};
  p.examples = {{"free crypto here", Verdict::kCatch, "obvious scam"},
                {"nice video", Verdict::kNotCatch, std::nullopt}};
  return with_hash(p);
}

FilterPrompt child_of(const FilterPrompt& parent) {
  FilterPrompt c = parent;
  c.version = parent.version + 1;
  c.parent_version = parent.version;
  return c;
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

// --- validate_prompt ---------------------------------------------------------

TEST(ValidatePrompt, FiveExamplesViolatesMaximum) {
  FilterPrompt p = sample_prompt();
  p.examples.assign(5, FewShotExample{"x", Verdict::kCatch, std::nullopt});
  p = with_hash(p);
  EXPECT_EQ(validate_prompt(p), std::vector<std::string>{"examples exceed maximum of 4"});
}

TEST(ValidatePrompt, DescriptionOnlyIsValid) {
  FilterPrompt p;
  p.description = "Catch comments that are rude.";
  EXPECT_TRUE(validate_prompt(p).empty());
  EXPECT_TRUE(validate_prompt(with_hash(p)).empty());
}

TEST(ValidatePrompt, EmptyDescription) {
  FilterPrompt p;
  p.description = "";
  EXPECT_EQ(validate_prompt(p), std::vector<std::string>{"description empty"});
}

TEST(ValidatePrompt, ReportsEachBrokenInvariant) {
  FilterPrompt p = sample_prompt();
  p.version = 2;
  p.parent_version = 3;
  p.positive_rubrics.push_back({"pos-1", Polarity::kPositive, "dup", std::nullopt});
  p.negative_rubrics.push_back({"neg-2", Polarity::kPositive, "", std::nullopt});
  const auto v = validate_prompt(p);
  EXPECT_GE(v.size(), 4u);
  EXPECT_NE(std::find(v.begin(), v.end(), "version must exceed parent_version"), v.end());
  EXPECT_NE(std::find(v.begin(), v.end(), "content_hash does not match content"), v.end());
}

// --- hashing -----------------------------------------------------------------

TEST(HashPrompt, Deterministic) {
  EXPECT_EQ(hash_prompt(sample_prompt()), hash_prompt(sample_prompt()));
  EXPECT_EQ(hash_prompt(sample_prompt()).size(), 64u);
}

TEST(HashPrompt, RubricTextChangesHash) {
  FilterPrompt a = sample_prompt();
  FilterPrompt b = a;
  b.positive_rubrics[0].text = "Catch scam link";
  EXPECT_NE(hash_prompt(a), hash_prompt(b));
}

TEST(HashPrompt, ExcludesNonContentFields) {
  FilterPrompt a = sample_prompt();
  FilterPrompt b = a;
  b.name = "another name";
  b.filter_id = "f2";
  b.version = 9;
  b.parent_version = 8;
  b.positive_rubrics[0].rubric_id = "renamed";
  b.positive_rubrics[0].origin_version = 5;
  EXPECT_EQ(hash_prompt(a), hash_prompt(b));
}

TEST(HashPrompt, CanonicalHeader) {
  FilterPrompt p;
  p.description = "x";
  EXPECT_EQ(canonical_serialization(p).substr(0, 19), "rubricopt-prompt/1\n");
}

TEST(HashPrompt, EqualIffCanonicalEqual) {
  // Property: random small prompts; hash equality tracks serialization equality.
  const std::vector<std::string> words = {"a", "b", "a b", "", "b\na", "#x"};
  std::vector<FilterPrompt> prompts;
  KeyedRng rng(11);
  for (int i = 0; i < 300; ++i) {
    FilterPrompt p;
    p.description = words[rng.below(words.size())] + "d";
    const auto np = rng.below(3), nn = rng.below(2);
    for (std::uint64_t k = 0; k < np; ++k)
      p.positive_rubrics.push_back({"p" + std::to_string(k), Polarity::kPositive,
                                    words[rng.below(words.size())] + "r", std::nullopt});
    for (std::uint64_t k = 0; k < nn; ++k)
      p.negative_rubrics.push_back({"n" + std::to_string(k), Polarity::kNegative,
                                    words[rng.below(words.size())] + "r", std::nullopt});
    if (rng.below(2))
      p.examples.push_back({words[rng.below(words.size())] + "e",
                            rng.below(2) ? Verdict::kCatch : Verdict::kNotCatch,
                            rng.below(2) ? std::optional<std::string>("why") : std::nullopt});
    prompts.push_back(p);
  }
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    for (std::size_t j = i; j < prompts.size(); ++j) {
      const bool same_bytes =
          canonical_serialization(prompts[i]) == canonical_serialization(prompts[j]);
      EXPECT_EQ(same_bytes, hash_prompt(prompts[i]) == hash_prompt(prompts[j]));
    }
  }
}

TEST(HashPrompt, FieldBoundariesAreUnambiguous) {
  FilterPrompt a, b;
  a.description = "ab";
  a.positive_rubrics = {{"p", Polarity::kPositive, "c", std::nullopt}};
  b.description = "a";
  b.positive_rubrics = {{"p", Polarity::kPositive, "bc", std::nullopt}};
  EXPECT_NE(hash_prompt(a), hash_prompt(b));
  FilterPrompt c = a;
  c.negative_rubrics = std::move(c.positive_rubrics);
  c.positive_rubrics.clear();
  c.negative_rubrics[0].polarity = Polarity::kNegative;
  EXPECT_NE(hash_prompt(a), hash_prompt(c));
}

// --- diff_prompts ------------------------------------------------------------

// Independent oracle: classify rubric ids by set membership.
std::vector<EditDiff> oracle_rubric_diff(const FilterPrompt& parent, const FilterPrompt& child) {
  std::vector<EditDiff> out;
  for (Polarity pol : {Polarity::kPositive, Polarity::kNegative}) {
    std::map<std::string, std::string> before, after;
    for (const auto& r : parent.rubrics(pol)) before[r.rubric_id] = r.text;
    for (const auto& r : child.rubrics(pol)) after[r.rubric_id] = r.text;
    const bool positive = pol == Polarity::kPositive;
    for (const auto& r : child.rubrics(pol)) {
      auto it = before.find(r.rubric_id);
      if (it == before.end()) {
        out.push_back({positive ? EditDirection::kAddPositive : EditDirection::kAddNegative,
                       std::nullopt, std::nullopt, r.text});
      } else if (it->second != r.text) {
        out.push_back({positive ? EditDirection::kEditPositive : EditDirection::kEditNegative,
                       r.rubric_id, it->second, r.text});
      }
    }
    for (const auto& r : parent.rubrics(pol))
      if (!after.count(r.rubric_id))
        out.push_back({positive ? EditDirection::kEditPositive : EditDirection::kEditNegative,
                       r.rubric_id, r.text, ""});
  }
  return out;
}

TEST(DiffPrompts, AddedRubric) {
  FilterPrompt parent = sample_prompt();
  FilterPrompt child = child_of(parent);
  child.positive_rubrics.push_back({"pos-2", Polarity::kPositive, "Catch giveaways", 2});
  const auto d = diff_prompts(parent, with_hash(child));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].direction, EditDirection::kAddPositive);
  EXPECT_FALSE(d[0].before_text.has_value());
  EXPECT_EQ(d[0].after_text, "Catch giveaways");
}

TEST(DiffPrompts, ReflexiveIsEmpty) {
  const FilterPrompt p = sample_prompt();
  EXPECT_TRUE(diff_prompts(p, p).empty());
}

TEST(DiffPrompts, EditedRubricMatchesOracle) {
  FilterPrompt parent = sample_prompt();
  FilterPrompt child = child_of(parent);
  child.positive_rubrics[0].text = "Catch scam links and phishing";
  const auto d = diff_prompts(parent, with_hash(child));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].direction, EditDirection::kEditPositive);
  EXPECT_EQ(d[0].rubric_id, "pos-1");
  EXPECT_EQ(d[0].before_text, "Catch scam links");
  EXPECT_EQ(d[0].after_text, "Catch scam links and phishing");
  EXPECT_EQ(d, oracle_rubric_diff(parent, child));
}

TEST(DiffPrompts, RandomRubricEditsMatchOracle) {
  KeyedRng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    FilterPrompt parent;
    parent.description = "d";
    for (int i = 0; i < 4; ++i) {
      if (rng.below(2))
        parent.positive_rubrics.push_back({"p" + std::to_string(i), Polarity::kPositive,
                                           "text" + std::to_string(rng.below(3)), std::nullopt});
      if (rng.below(2))
        parent.negative_rubrics.push_back({"n" + std::to_string(i), Polarity::kNegative,
                                           "text" + std::to_string(rng.below(3)), std::nullopt});
    }
    parent = with_hash(parent);
    FilterPrompt child = child_of(parent);
    for (auto* list : {&child.positive_rubrics, &child.negative_rubrics}) {
      std::vector<Rubric> kept;
      for (auto r : *list) {
        const auto roll = rng.below(4);
        if (roll == 0) continue;                          // drop
        if (roll == 1) r.text += "!";                     // edit
        kept.push_back(r);
      }
      if (rng.below(2)) {
        const Polarity pol = list == &child.positive_rubrics ? Polarity::kPositive : Polarity::kNegative;
        kept.push_back({"new" + std::to_string(trial), pol, "fresh", std::nullopt});
      }
      *list = kept;
    }
    child = with_hash(child);
    EXPECT_EQ(diff_prompts(parent, child), oracle_rubric_diff(parent, child)) << "trial " << trial;
  }
}

TEST(DiffPrompts, DescriptionAndExampleChanges) {
  FilterPrompt parent = sample_prompt();
  FilterPrompt child = child_of(parent);
  child.description = "Catch scams.";
  child.examples.pop_back();
  const auto d = diff_prompts(parent, with_hash(child));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].direction, EditDirection::kDescriptionEdit);
  EXPECT_EQ(d[0].before_text, parent.description);
  EXPECT_EQ(d[1].direction, EditDirection::kExampleChange);
}

TEST(DiffPrompts, LineageMismatchThrows) {
  FilterPrompt parent = sample_prompt();
  FilterPrompt child = child_of(parent);
  child.parent_version = 7;
  child.description = "changed";
  EXPECT_EQ(code_of([&] { diff_prompts(parent, with_hash(child)); }), ErrorCode::kInvalidArgument);
}

TEST(ApplyRubricEdit, AddAndEditProduceSingleDiff) {
  const FilterPrompt parent = sample_prompt();
  const FilterPrompt added =
      apply_rubric_edit(parent, {EditDirection::kAddNegative, std::nullopt, std::nullopt, "Exempt memes"});
  EXPECT_EQ(added.version, parent.version + 1);
  EXPECT_EQ(added.parent_version, parent.version);
  EXPECT_EQ(added.negative_rubrics.back().rubric_id, "neg-2");
  EXPECT_EQ(added.negative_rubrics.back().origin_version, added.version);
  EXPECT_EQ(diff_prompts(parent, added).size(), 1u);

  const FilterPrompt edited =
      apply_rubric_edit(parent, {EditDirection::kEditPositive, "pos-1", "Catch scam links", "Catch scam URLs"});
  const auto d = diff_prompts(parent, edited);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].direction, EditDirection::kEditPositive);
  EXPECT_TRUE(validate_prompt(edited).empty());
}

TEST(ApplyRubricEdit, RejectsBadDiffs) {
  const FilterPrompt parent = sample_prompt();
  EXPECT_EQ(code_of([&] {
              apply_rubric_edit(parent, {EditDirection::kDescriptionEdit, std::nullopt, std::nullopt, "x"});
            }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] {
              apply_rubric_edit(parent, {EditDirection::kEditPositive, "pos-9", std::nullopt, "x"});
            }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] {
              apply_rubric_edit(parent, {EditDirection::kAddPositive, std::nullopt, std::nullopt, "  "});
            }),
            ErrorCode::kInvalidArgument);
}

TEST(FlattenPrompt, IncludesEveryRubric) {
  const std::string flat = flatten_prompt(sample_prompt());
  EXPECT_NE(flat.find("Catch comments that push scams."), std::string::npos);
  EXPECT_NE(flat.find("Catch scam links"), std::string::npos);
  EXPECT_NE(flat.find("Do not catch jokes about scams"), std::string::npos);
}

// --- render / parse ----------------------------------------------------------

std::vector<std::string> five_comments() {
  return {"first", "second #hash", "#starts with hash", "\\backslash", "multi\nline"};
}

TEST(RenderPrompt, FiveIndexedCommentBlocks) {
  const std::string text = render_prompt(sample_prompt(), ClassifyTask{five_comments()});
  EXPECT_EQ(text.rfind("#TASK classify v1\n", 0), 0u);
  for (int i = 1; i <= 5; ++i)
    EXPECT_NE(text.find("#COMMENT " + std::to_string(i) + "\n"), std::string::npos);
  EXPECT_EQ(text.find("#COMMENT 6"), std::string::npos);
  EXPECT_NE(text.find("Catch scam links"), std::string::npos);
  EXPECT_NE(text.find("free crypto here"), std::string::npos);
}

TEST(RenderPrompt, Deterministic) {
  EXPECT_EQ(render_prompt(sample_prompt(), ClassifyTask{five_comments()}),
            render_prompt(sample_prompt(), ClassifyTask{five_comments()}));
}

TEST(RenderPrompt, SixCommentsRejected) {
  auto six = five_comments();
  six.push_back("sixth");
  EXPECT_EQ(code_of([&] { render_prompt(sample_prompt(), ClassifyTask{six}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { render_prompt(sample_prompt(), ClassifyTask{{}}); }),
            ErrorCode::kInvalidArgument);
}

TEST(ParseRequest, RoundTripsClassify) {
  const FilterPrompt p = sample_prompt();
  const ParsedRequest r = parse_request(render_prompt(p, ClassifyTask{five_comments()}));
  EXPECT_EQ(r.kind, TaskKind::kClassify);
  EXPECT_EQ(r.description, p.description);
  ASSERT_EQ(r.positive_rubrics.size(), 1u);
  EXPECT_EQ(r.positive_rubrics[0].rubric_id, "pos-1");
  EXPECT_EQ(r.positive_rubrics[0].text, "Catch scam links");
  ASSERT_EQ(r.negative_rubrics.size(), 1u);
  ASSERT_EQ(r.examples.size(), 2u);
  EXPECT_EQ(r.examples[0].rationale, "obvious scam");
  ASSERT_EQ(r.comments.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(r.comments[static_cast<std::size_t>(i)].first, i + 1);
    EXPECT_EQ(r.comments[static_cast<std::size_t>(i)].second.text, five_comments()[static_cast<std::size_t>(i)]);
  }
}

TEST(ParseRequest, RoundTripsPropose) {
  ProposeTask t;
  t.mode = ProposeTask::Mode::kEditRubric;
  t.polarity = Polarity::kNegative;
  t.target_rubric_id = "neg-1";
  t.variant = 3;
  t.notes = {"note one", "#note two"};
  t.comments = {{"c1", Verdict::kCatch, Verdict::kNotCatch}};
  const ParsedRequest r = parse_request(render_prompt(sample_prompt(), t));
  EXPECT_EQ(r.kind, TaskKind::kPropose);
  EXPECT_EQ(r.mode, "edit");
  EXPECT_EQ(r.polarity, Polarity::kNegative);
  EXPECT_EQ(r.target_rubric_id, "neg-1");
  EXPECT_EQ(r.variant, 3);
  EXPECT_EQ(r.notes, t.notes);
  ASSERT_EQ(r.comments.size(), 1u);
  EXPECT_EQ(r.comments[0].second, t.comments[0]);
}

TEST(ParseRequest, RoundTripsReflectAndDraft) {
  ReflectTask t;
  t.mode = ReflectTask::Mode::kRationale;
  t.alternatives = 3;
  t.comments = {{"a giveaway", Verdict::kNotCatch, Verdict::kCatch}};
  ParsedRequest r = parse_request(render_prompt(sample_prompt(), t));
  EXPECT_EQ(r.mode, "rationale");
  EXPECT_EQ(r.alternatives, 3);

  DraftTask d;
  d.description = "spam";
  r = parse_request(render_prompt(FilterPrompt{}, d));
  EXPECT_EQ(r.kind, TaskKind::kDraft);
  EXPECT_EQ(r.seed_description, "spam");
}

TEST(ParseRequest, CorruptSentinelIsProtocolError) {
  std::string text = render_prompt(sample_prompt(), ClassifyTask{{"x"}});
  text[1] = 'X';
  EXPECT_EQ(code_of([&] { parse_request(text); }), ErrorCode::kProtocol);
  EXPECT_FALSE(sniff_task(text).has_value());
  EXPECT_EQ(code_of([&] { parse_request("#TASK classify v2\n"); }), ErrorCode::kProtocol);
  EXPECT_EQ(code_of([&] { parse_request("#TASK classify v1\n#COMMENT 1\nunterminated\n"); }),
            ErrorCode::kProtocol);
  EXPECT_EQ(code_of([&] { parse_request("#TASK classify v1\n#RUBRIC sideways r1\nx\n"); }),
            ErrorCode::kProtocol);
}

// --- types, text, json -------------------------------------------------------

TEST(Types, VerdictLiterals) {
  EXPECT_EQ(to_string(Verdict::kCatch), "catch");
  EXPECT_EQ(to_string(Verdict::kNotCatch), "not_catch");
  EXPECT_EQ(parse_verdict("not_catch"), Verdict::kNotCatch);
  EXPECT_EQ(code_of([] { parse_verdict("Catch"); }), ErrorCode::kInvalidArgument);
  for (auto d : {EditDirection::kAddPositive, EditDirection::kAddNegative, EditDirection::kEditPositive,
                 EditDirection::kEditNegative, EditDirection::kDescriptionEdit, EditDirection::kExampleChange})
    EXPECT_EQ(parse_edit_direction(to_string(d)), d);
}

TEST(Types, Timestamps) {
  const Timestamp t = parse_timestamp("2024-03-05T10:20:30Z");
  EXPECT_EQ(format_timestamp(t), "2024-03-05T10:20:30Z");
  EXPECT_EQ(format_day(t), "2024-03-05");
  EXPECT_EQ(parse_timestamp("2024-03-05T12:20:30.123+02:00"), t);
  EXPECT_EQ(code_of([] { parse_timestamp("2024-13-05T10:20:30Z"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_timestamp("yesterday"); }), ErrorCode::kInvalidArgument);
}

TEST(Text, TokenizeLowercasesAlnumRuns) {
  EXPECT_EQ(tokenize("Free GIVEAWAY!! click-here 2day"),
            (std::vector<std::string>{"free", "giveaway", "click", "here", "2day"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
}

TEST(Json, PromptRoundTrip) {
  const FilterPrompt p = sample_prompt();
  const Json j = p;
  EXPECT_EQ(j.get<FilterPrompt>(), p);
  EXPECT_EQ(Json::parse(j.dump()).get<FilterPrompt>(), p);
}

TEST(Json, CommentRecordParsing) {
  const Comment c = parse_comment_record(
      R"({"id":"c1","text":"hi","published_at":"2024-01-02T03:04:05Z","like_count":3,"author":"a"})");
  EXPECT_EQ(c.id, "c1");
  EXPECT_EQ(c.like_count, 3);
  EXPECT_EQ(c.author, "a");
  EXPECT_FALSE(c.video_id.has_value());
  for (const char* bad : {R"({"id":"c1","text":"hi"})", R"({"id":"","text":"hi","published_at":"2024-01-02T03:04:05Z"})",
                          R"({"id":"c1","text":"  ","published_at":"2024-01-02T03:04:05Z"})",
                          R"({"id":"c1","text":"hi","published_at":"2024-01-02T03:04:05Z","like_count":-1})",
                          "not json"})
    EXPECT_EQ(code_of([&] { parse_comment_record(bad); }), ErrorCode::kInvalidArgument) << bad;
}

TEST(Rng, ShuffleIsPermutationAndSeeded) {
  std::vector<int> a(20), b;
  std::iota(a.begin(), a.end(), 0);
  b = a;
  seeded_shuffle(a, 3);
  seeded_shuffle(b, 3);
  EXPECT_EQ(a, b);
  std::set<int> s(a.begin(), a.end());
  EXPECT_EQ(s.size(), 20u);
  EXPECT_NE(a, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19}));
}

}  // namespace
}  // namespace rubricopt
