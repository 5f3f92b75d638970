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

#include "rubricopt/core/prompt.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <memory>
#include <set>
#include <sstream>

#include "rubricopt/core/json.hpp"
#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt {

std::vector<std::string> validate_prompt(const FilterPrompt& prompt) {
  std::vector<std::string> violations;
  if (trim(prompt.description).empty()) violations.emplace_back("description empty");
  if (prompt.examples.size() > kMaxFewShotExamples)
    violations.emplace_back("examples exceed maximum of 4");
  if (prompt.version < 1) violations.emplace_back("version must be positive");
  if (prompt.parent_version && prompt.version <= *prompt.parent_version)
    violations.emplace_back("version must exceed parent_version");

  std::set<std::string> seen;
  for (Polarity pol : {Polarity::kPositive, Polarity::kNegative}) {
    for (const Rubric& r : prompt.rubrics(pol)) {
      if (r.rubric_id.empty()) violations.emplace_back("rubric id empty");
      else if (!seen.insert(r.rubric_id).second)
        violations.push_back("rubric id " + r.rubric_id + " duplicated");
      if (r.polarity != pol)
        violations.push_back("rubric " + r.rubric_id + " listed under wrong polarity");
      if (trim(r.text).empty()) violations.push_back("rubric " + r.rubric_id + " text empty");
    }
  }
  for (std::size_t i = 0; i < prompt.examples.size(); ++i) {
    if (trim(prompt.examples[i].comment_text).empty())
      violations.push_back("example " + std::to_string(i + 1) + " text empty");
  }
  if (!prompt.content_hash.empty() && prompt.content_hash != hash_prompt(prompt))
    violations.emplace_back("content_hash does not match content");
  return violations;
}

namespace {

void put_field(std::string& out, std::string_view tag, std::string_view value) {
  out.append(tag);
  out.push_back(' ');
  out.append(std::to_string(value.size()));
  out.push_back('\n');
  out.append(value);
  out.push_back('\n');
}

}  // namespace

std::string canonical_serialization(const FilterPrompt& prompt) {
  std::string out = "rubricopt-prompt/1\n";
  put_field(out, "description", prompt.description);
  for (Polarity pol : {Polarity::kPositive, Polarity::kNegative}) {
    const auto& list = prompt.rubrics(pol);
    out.append(to_string(pol));
    out.append(" count ");
    out.append(std::to_string(list.size()));
    out.push_back('\n');
    for (const Rubric& r : list) put_field(out, "rubric", r.text);
  }
  out.append("examples count ");
  out.append(std::to_string(prompt.examples.size()));
  out.push_back('\n');
  for (const FewShotExample& e : prompt.examples) {
    put_field(out, to_string(e.verdict), e.comment_text);
    if (e.rationale) put_field(out, "rationale", *e.rationale);
    else out.append("rationale none\n");
  }
  return out;
}

std::string hash_prompt(const FilterPrompt& prompt) {
  const std::string bytes = canonical_serialization(prompt);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    fail(ErrorCode::kInternal, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xf]);
  }
  return hex;
}

FilterPrompt with_hash(FilterPrompt prompt) {
  prompt.content_hash = hash_prompt(prompt);
  return prompt;
}

namespace {

EditDirection add_direction(Polarity p) {
  return p == Polarity::kPositive ? EditDirection::kAddPositive : EditDirection::kAddNegative;
}
EditDirection edit_direction(Polarity p) {
  return p == Polarity::kPositive ? EditDirection::kEditPositive : EditDirection::kEditNegative;
}

std::string examples_text(const std::vector<FewShotExample>& examples) {
  return Json(examples).dump();
}

}  // namespace

std::vector<EditDiff> diff_prompts(const FilterPrompt& parent, const FilterPrompt& child) {
  const std::string parent_hash = parent.content_hash.empty() ? hash_prompt(parent) : parent.content_hash;
  const std::string child_hash = child.content_hash.empty() ? hash_prompt(child) : child.content_hash;
  if (parent.version == child.version && parent_hash == child_hash) return {};
  if (child.parent_version != parent.version) {
    fail(ErrorCode::kInvalidArgument,
         "lineage mismatch: child v" + std::to_string(child.version) + " does not descend from v" +
             std::to_string(parent.version));
  }

  std::vector<EditDiff> diffs;
  if (parent.description != child.description) {
    diffs.push_back({EditDirection::kDescriptionEdit, std::nullopt, parent.description,
                     child.description});
  }
  for (Polarity pol : {Polarity::kPositive, Polarity::kNegative}) {
    const auto& before = parent.rubrics(pol);
    const auto& after = child.rubrics(pol);
    for (const Rubric& r : after) {
      const Rubric* old = nullptr;
      for (const Rubric& b : before)
        if (b.rubric_id == r.rubric_id) old = &b;
      if (!old) {
        diffs.push_back({add_direction(pol), std::nullopt, std::nullopt, r.text});
      } else if (old->text != r.text) {
        diffs.push_back({edit_direction(pol), r.rubric_id, old->text, r.text});
      }
    }
    for (const Rubric& b : before) {
      bool kept = false;
      for (const Rubric& r : after) kept = kept || r.rubric_id == b.rubric_id;
      if (!kept) diffs.push_back({edit_direction(pol), b.rubric_id, b.text, ""});
    }
  }
  if (parent.examples != child.examples) {
    diffs.push_back({EditDirection::kExampleChange, std::nullopt, examples_text(parent.examples),
                     examples_text(child.examples)});
  }
  return diffs;
}

std::string next_rubric_id(const FilterPrompt& prompt, Polarity polarity) {
  const std::string prefix = polarity == Polarity::kPositive ? "pos-" : "neg-";
  int highest = 0;
  for (const Rubric& r : prompt.rubrics(polarity)) {
    if (r.rubric_id.rfind(prefix, 0) != 0) continue;
    int n = 0;
    const char* first = r.rubric_id.data() + prefix.size();
    const char* last = r.rubric_id.data() + r.rubric_id.size();
    auto [ptr, ec] = std::from_chars(first, last, n);
    if (ec == std::errc{} && ptr == last) highest = std::max(highest, n);
  }
  std::string id = prefix + std::to_string(highest + 1);
  while (prompt.find_rubric(id)) id += "b";
  return id;
}

FilterPrompt apply_rubric_edit(const FilterPrompt& parent, const EditDiff& diff) {
  if (!is_rubric_direction(diff.direction))
    fail(ErrorCode::kInvalidArgument, "not a rubric edit: " + std::string(to_string(diff.direction)));
  if (trim(diff.after_text).empty()) fail(ErrorCode::kInvalidArgument, "rubric text empty");

  FilterPrompt child = parent;
  child.version = parent.version + 1;
  child.parent_version = parent.version;
  const Polarity pol = (diff.direction == EditDirection::kAddPositive ||
                        diff.direction == EditDirection::kEditPositive)
                           ? Polarity::kPositive
                           : Polarity::kNegative;
  auto& list = child.rubrics(pol);
  if (diff.direction == EditDirection::kAddPositive || diff.direction == EditDirection::kAddNegative) {
    list.push_back(Rubric{next_rubric_id(parent, pol), pol, diff.after_text, child.version});
  } else {
    if (!diff.rubric_id) fail(ErrorCode::kInvalidArgument, "edit without rubric id");
    bool found = false;
    for (Rubric& r : list) {
      if (r.rubric_id == *diff.rubric_id) {
        r.text = diff.after_text;
        r.origin_version = child.version;
        found = true;
      }
    }
    if (!found) fail(ErrorCode::kInvalidArgument, "edit references unknown rubric " + *diff.rubric_id);
  }
  return with_hash(std::move(child));
}

std::string flatten_prompt(const FilterPrompt& prompt) {
  std::ostringstream out;
  out << prompt.description;
  for (const Rubric& r : prompt.positive_rubrics) out << " Catch: " << r.text << ".";
  for (const Rubric& r : prompt.negative_rubrics) out << " Do not catch: " << r.text << ".";
  return out.str();
}

}  // namespace rubricopt
