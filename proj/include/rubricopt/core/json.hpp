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

// nlohmann/json adapters for the core types.

#pragma once

#include <optional>
#include <string_view>

#include <json.hpp>
#include "rubricopt/core/types.hpp"

namespace rubricopt {

using Json = nlohmann::json;

void to_json(Json& j, const Comment& c);
void from_json(const Json& j, Comment& c);
void to_json(Json& j, const Label& l);
void from_json(const Json& j, Label& l);
void to_json(Json& j, const Rubric& r);
void from_json(const Json& j, Rubric& r);
void to_json(Json& j, const FewShotExample& e);
void from_json(const Json& j, FewShotExample& e);
void to_json(Json& j, const FilterPrompt& p);
void from_json(const Json& j, FilterPrompt& p);
void to_json(Json& j, const EditDiff& d);
void from_json(const Json& j, EditDiff& d);

// Parses one JSONL comment record. Required: id, text, published_at. Throws
// Error(kInvalidArgument) naming the offending field.
Comment parse_comment_record(std::string_view line);

}  // namespace rubricopt

namespace nlohmann {

template <typename T>
struct adl_serializer<std::optional<T>> {
  static void to_json(json& j, const std::optional<T>& v) {
    if (v) j = *v;
    else j = nullptr;
  }
  static void from_json(const json& j, std::optional<T>& v) {
    if (j.is_null()) v.reset();
    else v = j.get<T>();
  }
};

}  // namespace nlohmann
