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

#include "rubricopt/core/json.hpp"

#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt {

namespace {

template <typename T>
void get_optional(const Json& j, const char* key, std::optional<T>& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) out.reset();
  else out = it->get<T>();
}

}  // namespace

void to_json(Json& j, const Comment& c) {
  j = Json{{"id", c.id}, {"text", c.text}, {"published_at", format_timestamp(c.published_at)}};
  if (c.author) j["author"] = *c.author;
  if (c.thread_id) j["thread_id"] = *c.thread_id;
  if (c.video_id) j["video_id"] = *c.video_id;
  if (c.like_count) j["like_count"] = *c.like_count;
}

void from_json(const Json& j, Comment& c) {
  c.id = j.at("id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.published_at = parse_timestamp(j.at("published_at").get<std::string>());
  get_optional(j, "author", c.author);
  get_optional(j, "thread_id", c.thread_id);
  get_optional(j, "video_id", c.video_id);
  get_optional(j, "like_count", c.like_count);
}

void to_json(Json& j, const Label& l) {
  j = Json{{"comment_id", l.comment_id},
           {"verdict", to_string(l.verdict)},
           {"source", to_string(l.source)},
           {"labeled_at", format_timestamp(l.labeled_at)}};
}

void from_json(const Json& j, Label& l) {
  l.comment_id = j.at("comment_id").get<std::string>();
  l.verdict = parse_verdict(j.at("verdict").get<std::string>());
  l.source = parse_label_source(j.value("source", std::string("initialization")));
  l.labeled_at = j.contains("labeled_at")
                     ? parse_timestamp(j.at("labeled_at").get<std::string>())
                     : Timestamp{};
}

void to_json(Json& j, const Rubric& r) {
  j = Json{{"rubric_id", r.rubric_id},
           {"polarity", to_string(r.polarity)},
           {"text", r.text},
           {"origin_version", r.origin_version}};
}

void from_json(const Json& j, Rubric& r) {
  r.rubric_id = j.at("rubric_id").get<std::string>();
  r.polarity = parse_polarity(j.at("polarity").get<std::string>());
  r.text = j.at("text").get<std::string>();
  get_optional(j, "origin_version", r.origin_version);
}

void to_json(Json& j, const FewShotExample& e) {
  j = Json{{"comment_text", e.comment_text},
           {"verdict", to_string(e.verdict)},
           {"rationale", e.rationale}};
}

void from_json(const Json& j, FewShotExample& e) {
  e.comment_text = j.at("comment_text").get<std::string>();
  e.verdict = parse_verdict(j.at("verdict").get<std::string>());
  get_optional(j, "rationale", e.rationale);
}

void to_json(Json& j, const FilterPrompt& p) {
  j = Json{{"filter_id", p.filter_id},
           {"name", p.name},
           {"description", p.description},
           {"positive_rubrics", p.positive_rubrics},
           {"negative_rubrics", p.negative_rubrics},
           {"examples", p.examples},
           {"version", p.version},
           {"parent_version", p.parent_version},
           {"content_hash", p.content_hash}};
}

void from_json(const Json& j, FilterPrompt& p) {
  p.filter_id = j.value("filter_id", std::string());
  p.name = j.value("name", std::string());
  p.description = j.at("description").get<std::string>();
  p.positive_rubrics = j.value("positive_rubrics", std::vector<Rubric>{});
  p.negative_rubrics = j.value("negative_rubrics", std::vector<Rubric>{});
  p.examples = j.value("examples", std::vector<FewShotExample>{});
  p.version = j.value("version", 1);
  get_optional(j, "parent_version", p.parent_version);
  p.content_hash = j.value("content_hash", std::string());
}

void to_json(Json& j, const EditDiff& d) {
  j = Json{{"direction", to_string(d.direction)},
           {"rubric_id", d.rubric_id},
           {"before_text", d.before_text},
           {"after_text", d.after_text}};
}

void from_json(const Json& j, EditDiff& d) {
  d.direction = parse_edit_direction(j.at("direction").get<std::string>());
  get_optional(j, "rubric_id", d.rubric_id);
  get_optional(j, "before_text", d.before_text);
  d.after_text = j.at("after_text").get<std::string>();
}

Comment parse_comment_record(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("record is not JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kInvalidArgument, "record is not an object");

  auto require_string = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
      fail(ErrorCode::kInvalidArgument, std::string("missing or non-string field: ") + key);
    return it->get<std::string>();
  };
  auto optional_string = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string())
      fail(ErrorCode::kInvalidArgument, std::string("non-string field: ") + key);
    return it->get<std::string>();
  };

  Comment c;
  c.id = require_string("id");
  c.text = require_string("text");
  c.published_at = parse_timestamp(require_string("published_at"));
  c.author = optional_string("author");
  c.thread_id = optional_string("thread_id");
  c.video_id = optional_string("video_id");
  if (auto it = j.find("like_count"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
      fail(ErrorCode::kInvalidArgument, "like_count must be a non-negative integer");
    c.like_count = it->get<std::int64_t>();
  }
  if (c.id.empty()) fail(ErrorCode::kInvalidArgument, "id empty");
  if (trim(c.text).empty()) fail(ErrorCode::kInvalidArgument, "text empty");
  return c;
}

}  // namespace rubricopt
