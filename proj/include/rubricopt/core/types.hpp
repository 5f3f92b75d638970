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

// Shared domain types. Everything here is a plain value type; once built,
// instances are never mutated in place and can be shared across threads.

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rubricopt {

using Timestamp = std::chrono::sys_seconds;

// ISO-8601 UTC, e.g. "2024-03-01T12:00:00Z". Offsets (+hh:mm) are accepted
// on input and normalised to UTC. Throws Error(kInvalidArgument).
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);
// "YYYY-MM-DD" of the UTC day containing `ts`.
std::string format_day(Timestamp ts);

struct Comment {
  std::string id;
  std::string text;
  std::optional<std::string> author;
  std::optional<std::string> thread_id;
  std::optional<std::string> video_id;
  Timestamp published_at{};
  std::optional<std::int64_t> like_count;

  bool operator==(const Comment&) const = default;
};

enum class Verdict { kCatch, kNotCatch };

std::string_view to_string(Verdict v);  // "catch" / "not_catch"
Verdict parse_verdict(std::string_view text);
inline Verdict flip(Verdict v) {
  return v == Verdict::kCatch ? Verdict::kNotCatch : Verdict::kCatch;
}

enum class LabelSource { kInitialization, kAudit, kIterationReview };

std::string_view to_string(LabelSource s);
LabelSource parse_label_source(std::string_view text);

struct Label {
  std::string comment_id;
  Verdict verdict = Verdict::kNotCatch;
  LabelSource source = LabelSource::kInitialization;
  Timestamp labeled_at{};

  bool operator==(const Label&) const = default;
};

enum class Polarity { kPositive, kNegative };

std::string_view to_string(Polarity p);
Polarity parse_polarity(std::string_view text);

struct Rubric {
  std::string rubric_id;
  Polarity polarity = Polarity::kPositive;
  std::string text;
  // Empty for rubrics present at creation; otherwise the version that
  // introduced or last edited the rubric.
  std::optional<int> origin_version;

  bool operator==(const Rubric&) const = default;
};

struct FewShotExample {
  std::string comment_text;
  Verdict verdict = Verdict::kCatch;
  std::optional<std::string> rationale;

  bool operator==(const FewShotExample&) const = default;
};

inline constexpr std::size_t kMaxFewShotExamples = 4;

struct FilterPrompt {
  std::string filter_id;
  std::string name;
  std::string description;
  std::vector<Rubric> positive_rubrics;
  std::vector<Rubric> negative_rubrics;
  std::vector<FewShotExample> examples;
  int version = 1;
  std::optional<int> parent_version;
  std::string content_hash;  // filled by with_hash()

  const std::vector<Rubric>& rubrics(Polarity p) const {
    return p == Polarity::kPositive ? positive_rubrics : negative_rubrics;
  }
  std::vector<Rubric>& rubrics(Polarity p) {
    return p == Polarity::kPositive ? positive_rubrics : negative_rubrics;
  }
  std::size_t rubric_count() const {
    return positive_rubrics.size() + negative_rubrics.size();
  }
  const Rubric* find_rubric(std::string_view rubric_id) const;

  bool operator==(const FilterPrompt&) const = default;
};

enum class EditDirection {
  kAddPositive,
  kAddNegative,
  kEditPositive,
  kEditNegative,
  kDescriptionEdit,
  kExampleChange,
};

std::string_view to_string(EditDirection d);
EditDirection parse_edit_direction(std::string_view text);
inline bool is_rubric_direction(EditDirection d) {
  return d == EditDirection::kAddPositive || d == EditDirection::kAddNegative ||
         d == EditDirection::kEditPositive || d == EditDirection::kEditNegative;
}

struct EditDiff {
  EditDirection direction = EditDirection::kAddPositive;
  std::optional<std::string> rubric_id;  // Edit* only
  std::optional<std::string> before_text;
  std::string after_text;

  bool operator==(const EditDiff&) const = default;
};

}  // namespace rubricopt
