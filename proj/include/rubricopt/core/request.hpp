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

// Rendered request framing.
//
// Every request starts with a sentinel line `#TASK <kind> v1`. The body is a
// sequence of header lines (starting with '#') each followed by zero or more
// body lines. Comments are framed as `#COMMENT <index>` ... `#END`. Body lines
// that would start with '#' or '\' are escaped with a leading '\'.
//
//   #TASK classify v1
//   #SYSTEM
//   <fixed instructions>
//   #DESCRIPTION
//   <description>
//   #RUBRIC positive pos-1
//   <rubric text>
//   #EXAMPLE catch
//   <comment text>
//   #COMMENT 1
//   <comment text>
//   #END
//   #FORMAT
//   <answer format>
//
// The same grammar is parsed back by parse_request(), which the simulation
// backend uses to dispatch.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rubricopt/core/types.hpp"

namespace rubricopt {

enum class TaskKind { kClassify, kReflect, kPropose, kSummarize, kDraft };

std::string_view to_string(TaskKind k);

inline constexpr std::size_t kMaxBatchSize = 5;

// A comment as shown to the model. When `predicted` (and optionally `gold`)
// is set the block is preceded by `#VERDICTS predicted=<v> [gold=<v>]`.
struct CommentView {
  std::string text;
  std::optional<Verdict> predicted;
  std::optional<Verdict> gold;

  bool operator==(const CommentView&) const = default;
};

struct ClassifyTask {
  std::vector<std::string> comments;  // 1..5, in the order to present them
};

struct ReflectTask {
  enum class Mode {
    kMistake,    // why was this comment misclassified
    kExplain,    // why did the filter reach `verdict` on this comment
    kGradient,   // critique of the whole prompt over a minibatch
    kRationale,  // candidate user rationales for a mistake
  };
  Mode mode = Mode::kMistake;
  std::vector<CommentView> comments;
  int alternatives = 1;  // kRationale only
};

struct ProposeTask {
  enum class Mode { kAddRubric, kEditRubric, kRewrite };
  Mode mode = Mode::kAddRubric;
  Polarity polarity = Polarity::kPositive;
  std::optional<std::string> target_rubric_id;  // kEditRubric
  int variant = 0;
  std::vector<std::string> notes;  // reflections, summaries, rationale, gradient
  std::vector<CommentView> comments;
};

struct SummarizeTask {
  std::vector<std::string> reflections;
  std::vector<CommentView> comments;
};

struct DraftTask {
  std::optional<std::string> description;
  std::vector<std::string> example_comments;
};

using Task =
    std::variant<ClassifyTask, ReflectTask, ProposeTask, SummarizeTask, DraftTask>;

TaskKind task_kind(const Task& task);

/// Deterministic rendering of `task` against `prompt`. Throws
/// Error(kInvalidArgument) for a classify batch outside 1..5 comments.
std::string render_prompt(const FilterPrompt& prompt, const Task& task);

// Result of parsing a rendered request back into structure.
struct ParsedRequest {
  TaskKind kind = TaskKind::kClassify;
  std::string description;
  std::vector<Rubric> positive_rubrics;
  std::vector<Rubric> negative_rubrics;
  std::vector<FewShotExample> examples;
  std::vector<std::pair<int, CommentView>> comments;  // (index, comment)
  std::vector<std::string> notes;
  std::optional<std::string> mode;
  std::optional<Polarity> polarity;
  std::optional<std::string> target_rubric_id;
  int variant = 0;
  int alternatives = 1;
  std::optional<std::string> seed_description;
};

/// Throws Error(kProtocol) on a missing/corrupt sentinel or broken framing.
ParsedRequest parse_request(std::string_view rendered);

/// Cheap sentinel check: returns the task kind if the first line is a valid
/// sentinel.
std::optional<TaskKind> sniff_task(std::string_view rendered);

}  // namespace rubricopt
