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

#pragma once

#include <string>
#include <vector>

#include "rubricopt/core/types.hpp"

namespace rubricopt {

/// Returns one human-readable violation per broken invariant; empty when the
/// prompt is valid. Never throws.
std::vector<std::string> validate_prompt(const FilterPrompt& prompt);

/// Canonical byte serialization of the hashed content: description, rubrics
/// (polarity + text, list order) and examples (list order). Identifiers,
/// names and version numbers are excluded.
std::string canonical_serialization(const FilterPrompt& prompt);

/// Lower-case hex SHA-256 of canonical_serialization().
std::string hash_prompt(const FilterPrompt& prompt);

/// Copy of `prompt` with content_hash recomputed.
FilterPrompt with_hash(FilterPrompt prompt);

/// Rubric-level edit script from `parent` to `child`. Rubrics are aligned by
/// rubric_id: ids new in the child become Add*, ids present in both with a
/// changed text become Edit*, ids dropped by the child become Edit* with an
/// empty after_text. Description and example changes are reported as
/// DescriptionEdit / ExampleChange.
///
/// Requires child.parent_version == parent.version, except that a prompt
/// diffed against itself (same version, same hash) yields an empty list.
std::vector<EditDiff> diff_prompts(const FilterPrompt& parent,
                                   const FilterPrompt& child);

/// Applies a single rubric-direction diff to `parent`, producing the child at
/// version parent.version + 1. New rubric ids are derived from the polarity
/// and the next free ordinal.
FilterPrompt apply_rubric_edit(const FilterPrompt& parent, const EditDiff& diff);

/// Next unused rubric id for the given polarity ("pos-3", "neg-1", ...).
std::string next_rubric_id(const FilterPrompt& prompt, Polarity polarity);

/// Flattens a structured prompt into free text (used to seed unstructured
/// optimizers).
std::string flatten_prompt(const FilterPrompt& prompt);

}  // namespace rubricopt
