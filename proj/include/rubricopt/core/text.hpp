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
#include <string_view>
#include <vector>

namespace rubricopt {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// Lower-cased maximal runs of ASCII alphanumerics; bytes >= 0x80 count as
// word characters so UTF-8 words stay intact.
std::vector<std::string> tokenize(std::string_view text);

std::vector<std::string> split_lines(std::string_view text);

bool contains_case_insensitive(std::string_view haystack, std::string_view needle);

}  // namespace rubricopt
