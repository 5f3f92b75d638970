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

#include "rubricopt/llm/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <unordered_set>

#include "rubricopt/core/rng.hpp"
#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt::llm {

void SimulationRule::validate() const {
  for (const auto& kw : positive_lexicon) {
    if (negative_lexicon.count(kw))
      fail(ErrorCode::kInvalidArgument, "keyword in both lexicons: " + kw);
  }
  for (const auto* lex : {&positive_lexicon, &negative_lexicon}) {
    for (const auto& kw : *lex) {
      if (kw.empty() || kw != to_lower(kw) || tokenize(kw).size() != 1 || tokenize(kw)[0] != kw)
        fail(ErrorCode::kInvalidArgument, "lexicon entries must be single lowercase tokens: " + kw);
    }
  }
  if (!(noise_rate >= 0.0 && noise_rate < 0.5))
    fail(ErrorCode::kInvalidArgument, "noise_rate must be in [0, 0.5)");
}

std::vector<std::string> lexicon_keywords(const SimulationRule& rule, std::string_view text) {
  std::vector<std::string> out;
  for (auto& tok : tokenize(text)) {
    if (rule.in_lexicon(tok) && std::find(out.begin(), out.end(), tok) == out.end())
      out.push_back(std::move(tok));
  }
  return out;
}

Verdict rule_verdict(const SimulationRule& rule, std::string_view text) {
  bool pos = false, neg = false;
  for (const auto& tok : tokenize(text)) {
    pos = pos || rule.positive_lexicon.count(tok) > 0;
    neg = neg || rule.negative_lexicon.count(tok) > 0;
  }
  return pos && !neg ? Verdict::kCatch : Verdict::kNotCatch;
}

namespace {

using KeywordSet = std::unordered_set<std::string>;

struct PromptKeywords {
  KeywordSet positive;  // keywords named by positive rubrics
  KeywordSet negative;

  bool covers(const std::string& kw) const { return positive.count(kw) || negative.count(kw); }
};

PromptKeywords prompt_keywords(const ParsedRequest& req, const SimulationRule& rule) {
  PromptKeywords pk;
  for (const Rubric& r : req.positive_rubrics)
    for (auto& kw : lexicon_keywords(rule, r.text)) pk.positive.insert(std::move(kw));
  for (const Rubric& r : req.negative_rubrics)
    for (auto& kw : lexicon_keywords(rule, r.text)) pk.negative.insert(std::move(kw));
  return pk;
}

const std::set<std::string>& lexicon_for(const SimulationRule& rule, Polarity p) {
  return p == Polarity::kPositive ? rule.positive_lexicon : rule.negative_lexicon;
}

// --- classify ---------------------------------------------------------------

Verdict classify_one(const std::string& text, const PromptKeywords& pk,
                     const SimulationRule& rule, std::uint64_t request_seed) {
  const auto tokens = tokenize(text);
  auto any_in = [&](const auto& set) {
    return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) { return set.count(t) > 0; });
  };

  Verdict base;
  bool vague = false;
  if (any_in(pk.negative)) {
    base = Verdict::kNotCatch;
  } else if (any_in(pk.positive)) {
    base = Verdict::kCatch;
  } else {
    // Nothing in the prompt's rubrics applies; the description decides.
    base = any_in(rule.positive_lexicon) ? Verdict::kCatch : Verdict::kNotCatch;
    vague = any_in(rule.positive_lexicon) || any_in(rule.negative_lexicon);
  }

  const std::uint64_t identity = fnv1a64(text);
  Verdict v = base;
  if (unit_interval(mix_key({rule.seed, request_seed, identity, 1})) < rule.noise_rate) v = flip(v);
  if (vague && unit_interval(mix_key({rule.seed, request_seed, identity, 2})) < kVagueFlipRate)
    v = flip(v);
  return v;
}

std::string respond_classify(const ParsedRequest& req, const SimulationRule& rule,
                             std::uint64_t seed) {
  const PromptKeywords pk = prompt_keywords(req, rule);
  std::string out;
  for (const auto& [index, comment] : req.comments) {
    out += std::to_string(index);
    out += ": ";
    out += to_string(classify_one(comment.text, pk, rule, seed));
    out += '\n';
  }
  return out;
}

// --- reflect ----------------------------------------------------------------

// First keyword of `text` not covered by the prompt, preferring the lexicon
// that matches the error type (missed catch -> positive lexicon, wrong catch
// -> negative lexicon).
std::optional<std::string> uncovered_keyword(const std::string& text, const CommentView& view,
                                             const PromptKeywords& pk,
                                             const SimulationRule& rule) {
  std::vector<std::string> uncovered;
  for (auto& kw : lexicon_keywords(rule, text))
    if (!pk.covers(kw)) uncovered.push_back(std::move(kw));
  if (uncovered.empty()) return std::nullopt;
  if (view.gold) {
    const Polarity preferred = *view.gold == Verdict::kCatch ? Polarity::kPositive : Polarity::kNegative;
    for (const auto& kw : uncovered)
      if (lexicon_for(rule, preferred).count(kw)) return kw;
  }
  return uncovered.front();
}

std::string lacks_rubric_sentence(const std::string& kw) {
  return "The filter lacks a rubric covering " + kw + ", so " + kw + " comments are misjudged.";
}

std::string respond_reflect(const ParsedRequest& req, const SimulationRule& rule) {
  const PromptKeywords pk = prompt_keywords(req, rule);
  const std::string mode = req.mode.value_or("mistake");
  if (req.comments.empty()) fail(ErrorCode::kProtocol, "reflect request without comments");

  if (mode == "mistake") {
    const CommentView& c = req.comments.front().second;
    if (auto kw = uncovered_keyword(c.text, c, pk, rule)) return lacks_rubric_sentence(*kw);
    if (c.gold == Verdict::kCatch)
      return "The filter's criteria are too narrow to recognize this comment.";
    return "The filter's criteria are too broad and over-match this comment.";
  }

  if (mode == "explain") {
    const CommentView& c = req.comments.front().second;
    const auto tokens = tokenize(c.text);
    auto matches = [&](const Rubric& r) {
      for (const auto& kw : lexicon_keywords(rule, r.text))
        if (std::find(tokens.begin(), tokens.end(), kw) != tokens.end()) return true;
      return false;
    };
    if (c.predicted == Verdict::kCatch) {
      for (const Rubric& r : req.positive_rubrics)
        if (matches(r)) return "Caught because it matches the rubric \"" + r.text + "\".";
      return "Caught because it fits the description \"" + req.description + "\".";
    }
    for (const Rubric& r : req.negative_rubrics)
      if (matches(r)) return "Not caught because the rubric \"" + r.text + "\" exempts it.";
    return "Not caught: no rubric matched this comment.";
  }

  if (mode == "gradient") {
    // Keywords already spelled out in the free-text description count as
    // addressed for critique purposes.
    PromptKeywords addressed = pk;
    for (auto& kw : lexicon_keywords(rule, req.description)) addressed.positive.insert(std::move(kw));
    std::map<std::string, int> freq;
    std::vector<std::string> order;
    for (const auto& [idx, c] : req.comments) {
      if (auto kw = uncovered_keyword(c.text, c, addressed, rule)) {
        if (freq[*kw]++ == 0) order.push_back(*kw);
      }
    }
    if (order.empty())
      return "The prompt is too vague; it does not say clearly which comments to catch.";
    const std::string best = *std::max_element(order.begin(), order.end(), [&](const auto& a, const auto& b) {
      return freq[a] < freq[b];
    });
    return "The prompt does not address " + best + "; comments mentioning " + best +
           " are misjudged.";
  }

  if (mode == "rationale") {
    const CommentView& c = req.comments.front().second;
    const bool want_catch = c.gold.value_or(Verdict::kCatch) == Verdict::kCatch;
    std::vector<std::string> kws = lexicon_keywords(rule, c.text);
    const Polarity preferred = want_catch ? Polarity::kPositive : Polarity::kNegative;
    std::stable_partition(kws.begin(), kws.end(),
                          [&](const std::string& kw) { return lexicon_for(rule, preferred).count(kw) > 0; });
    std::vector<std::string> lines;
    for (const auto& kw : kws) {
      if (want_catch) {
        lines.push_back("Comments mentioning " + kw + " should be caught.");
        lines.push_back("I want this filter to catch comments about " + kw + ".");
      } else {
        lines.push_back("Comments mentioning " + kw + " should not be caught.");
        lines.push_back("Comments about " + kw + " are fine and should be left alone.");
      }
    }
    lines.push_back(want_catch ? "This comment should be caught."
                               : "This comment is unrelated to what I want caught.");
    std::string out;
    for (int i = 0; i < req.alternatives; ++i) {
      out += lines[std::min<std::size_t>(static_cast<std::size_t>(i), lines.size() - 1)];
      out += '\n';
    }
    return out;
  }

  fail(ErrorCode::kProtocol, "unknown reflect mode: " + mode);
}

// --- propose ----------------------------------------------------------------

// Uncovered keywords of `polarity` ranked by frequency across notes and
// comments (ties: first appearance), followed by the remaining uncovered
// lexicon entries in lexicon order.
std::vector<std::string> ranked_candidates(const ParsedRequest& req, const PromptKeywords& pk,
                                           const SimulationRule& rule, Polarity polarity,
                                           const KeywordSet& also_covered) {
  const auto& lex = lexicon_for(rule, polarity);
  std::map<std::string, int> freq;
  std::vector<std::string> order;
  auto count_text = [&](const std::string& text) {
    for (const auto& kw : lexicon_keywords(rule, text)) {
      if (!lex.count(kw) || pk.covers(kw) || also_covered.count(kw)) continue;
      if (freq[kw]++ == 0) order.push_back(kw);
    }
  };
  for (const auto& note : req.notes) count_text(note);
  for (const auto& [idx, c] : req.comments) count_text(c.text);
  std::stable_sort(order.begin(), order.end(),
                   [&](const auto& a, const auto& b) { return freq[a] > freq[b]; });
  for (const auto& kw : lex) {
    if (pk.covers(kw) || also_covered.count(kw)) continue;
    if (std::find(order.begin(), order.end(), kw) == order.end()) order.push_back(kw);
  }
  return order;
}

constexpr std::array<std::string_view, 4> kAddPositive = {
    "Catch comments mentioning {}", "Catch comments that talk about {}",
    "Catch comments referring to {}", "Catch any comment discussing {}"};
constexpr std::array<std::string_view, 4> kAddNegative = {
    "Do not catch comments mentioning {}", "Exempt comments that talk about {}",
    "Do not catch comments referring to {}", "Exempt any comment discussing {}"};
constexpr std::array<std::string_view, 4> kEditSuffix = {
    ", and also comments mentioning {}", "; this also covers {}",
    ", including comments referring to {}", ", as well as any comment discussing {}"};
constexpr std::array<std::string_view, 4> kRewriteCatch = {
    "Also catch comments mentioning {}.", "Comments that talk about {} should be caught.",
    "Make sure comments referring to {} are caught.", "Catch any comment discussing {}."};
constexpr std::array<std::string_view, 4> kRewriteExempt = {
    "Do not catch comments mentioning {}.", "Comments that talk about {} should not be caught.",
    "Leave comments referring to {} alone.", "Exempt any comment discussing {}."};
constexpr std::array<std::string_view, 4> kRewriteVague = {
    "Be precise about what counts.", "Only catch comments that clearly fit.",
    "Ignore comments that merely touch the topic.", "Prefer clear evidence over hunches."};

std::string fill(std::string_view tmpl, const std::string& kw) {
  std::string out(tmpl);
  const auto pos = out.find("{}");
  if (pos != std::string::npos) out.replace(pos, 2, kw);
  return out;
}

std::string respond_propose(const ParsedRequest& req, const SimulationRule& rule) {
  const PromptKeywords pk = prompt_keywords(req, rule);
  const std::string mode = req.mode.value_or("add");
  const int variant = std::max(0, req.variant);

  if (mode == "rewrite") {
    KeywordSet addressed;
    for (auto& kw : lexicon_keywords(rule, req.description)) addressed.insert(std::move(kw));
    std::vector<std::string> kws;
    for (const auto& note : req.notes)
      for (auto& kw : lexicon_keywords(rule, note))
        if (!addressed.count(kw) && std::find(kws.begin(), kws.end(), kw) == kws.end())
          kws.push_back(std::move(kw));
    std::string sentence;
    if (kws.empty()) {
      sentence = std::string(kRewriteVague[static_cast<std::size_t>(variant) % kRewriteVague.size()]);
    } else {
      const auto& kw = kws[static_cast<std::size_t>(variant) % kws.size()];
      const std::size_t t = (static_cast<std::size_t>(variant) / kws.size()) % 4;
      sentence = fill(rule.negative_lexicon.count(kw) ? kRewriteExempt[t] : kRewriteCatch[t], kw);
    }
    return req.description + " " + sentence;
  }

  if (!req.polarity) fail(ErrorCode::kProtocol, "propose request without polarity");
  const Polarity polarity = *req.polarity;

  if (mode == "add" || mode == "edit") {
    const Rubric* target = nullptr;
    if (mode == "edit") {
      if (!req.target_rubric_id) fail(ErrorCode::kProtocol, "edit request without target rubric");
      for (const auto* list : {&req.positive_rubrics, &req.negative_rubrics})
        for (const auto& r : *list)
          if (r.rubric_id == *req.target_rubric_id) target = &r;
      if (!target) fail(ErrorCode::kProtocol, "edit target not in prompt: " + *req.target_rubric_id);
    }
    const auto kws = ranked_candidates(req, pk, rule, polarity, {});
    if (kws.empty()) return "NONE";
    const auto& kw = kws[static_cast<std::size_t>(variant) % kws.size()];
    const std::size_t t = (static_cast<std::size_t>(variant) / kws.size()) % 4;
    if (target) return target->text + fill(kEditSuffix[t], kw);
    return fill(polarity == Polarity::kPositive ? kAddPositive[t] : kAddNegative[t], kw);
  }

  fail(ErrorCode::kProtocol, "unknown propose mode: " + mode);
}

// --- summarize / draft ------------------------------------------------------

std::string respond_summarize(const ParsedRequest& req, const SimulationRule& rule) {
  std::map<std::string, int> freq;
  std::vector<std::string> order;
  auto count_text = [&](const std::string& text) {
    for (const auto& kw : lexicon_keywords(rule, text))
      if (freq[kw]++ == 0) order.push_back(kw);
  };
  for (const auto& note : req.notes) count_text(note);
  if (order.empty())
    for (const auto& [idx, c] : req.comments) count_text(c.text);
  if (order.empty()) return "Comments without a distinctive topic are misclassified.";
  std::stable_sort(order.begin(), order.end(),
                   [&](const auto& a, const auto& b) { return freq[a] > freq[b]; });
  return "Comments mentioning " + order.front() + " are misclassified.";
}

std::string respond_draft(const ParsedRequest& req) {
  constexpr std::string_view kPrefix = "Catch comments that ";
  if (req.seed_description && !trim(*req.seed_description).empty()) {
    const std::string seed(trim(*req.seed_description));
    if (seed.rfind(kPrefix, 0) == 0) return seed;
    return std::string(kPrefix) + seed;
  }
  if (req.comments.empty()) fail(ErrorCode::kProtocol, "draft request without a seed");
  std::string out(kPrefix);
  out += "resemble ";
  for (std::size_t i = 0; i < req.comments.size(); ++i) {
    if (i) out += " or ";
    out += "\"" + std::string(trim(req.comments[i].second.text)) + "\"";
  }
  out += ".";
  return out;
}

}  // namespace

std::string sim_respond(const CompletionRequest& request, const SimulationRule& rule) {
  const ParsedRequest req = parse_request(request.rendered_text);
  switch (req.kind) {
    case TaskKind::kClassify: return respond_classify(req, rule, request.seed);
    case TaskKind::kReflect: return respond_reflect(req, rule);
    case TaskKind::kPropose: return respond_propose(req, rule);
    case TaskKind::kSummarize: return respond_summarize(req, rule);
    case TaskKind::kDraft: return respond_draft(req);
  }
  fail(ErrorCode::kProtocol, "unknown task");
}

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",    "an",   "the",  "and",  "or",   "but", "of",   "to",    "in",   "on",
      "at",   "for",  "with", "by",   "from", "as",  "is",   "are",   "was",  "were",
      "be",   "been", "it",   "its",  "this", "that", "these", "those", "so",  "s",
      "i",    "you",  "he",   "she",  "we",   "they", "my",   "your",  "our",  "their",
      "not",  "no",   "do",   "does", "did",  "has",  "have", "had",   "will", "would"};
  return words;
}

}  // namespace

EmbeddingVector sim_embed(std::string_view text, std::size_t dimension) {
  EmbeddingVector v;
  v.values.assign(dimension, 0.0);
  auto tokens = tokenize(text);
  std::vector<std::string> content;
  for (auto& t : tokens)
    if (!stopwords().count(t)) content.push_back(t);
  if (content.empty()) content = tokens;
  if (content.empty()) content.emplace_back(trim(text));
  for (const auto& t : content) {
    const std::uint64_t h = splitmix64(fnv1a64(t));
    const std::size_t bucket = static_cast<std::size_t>(h % dimension);
    v.values[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0;
  for (double x : v.values) norm += x * x;
  if (norm > 0) {
    norm = std::sqrt(norm);
    for (double& x : v.values) x /= norm;
  }
  return v;
}

SimulationBackend::SimulationBackend(SimulationRule rule, std::size_t dimension)
    : rule_(std::move(rule)), dimension_(dimension) {
  rule_.validate();
  if (dimension_ == 0) fail(ErrorCode::kInvalidArgument, "embedding dimension must be positive");
}

std::string SimulationBackend::complete(const CompletionRequest& request) {
  return sim_respond(request, rule_);
}

std::vector<EmbeddingVector> SimulationBackend::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(sim_embed(t, dimension_));
  return out;
}

}  // namespace rubricopt::llm
