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

// JSON adapters for classifier and optimizer results.

#pragma once

#include "rubricopt/core/json.hpp"
#include "rubricopt/optimizer/optimizer.hpp"

namespace rubricopt {

void to_json(Json& j, const Metrics& m);
void from_json(const Json& j, Metrics& m);
void to_json(Json& j, const Prediction& p);
void from_json(const Json& j, Prediction& p);
void to_json(Json& j, const Mistake& m);
void to_json(Json& j, const FailurePattern& p);
void to_json(Json& j, const CandidateEdit& c);
void from_json(const Json& j, CandidateEdit& c);
void to_json(Json& j, const SearchRound& r);

}  // namespace rubricopt
