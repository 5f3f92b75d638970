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

#include "rubricopt/optimizer/json.hpp"

namespace rubricopt {

void to_json(Json& j, const Metrics& m) {
  j = Json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
           {"tp", m.tp},             {"fp", m.fp},               {"fn", m.fn},         {"tn", m.tn}};
}

void from_json(const Json& j, Metrics& m) {
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.tp = j.at("tp").get<std::int64_t>();
  m.fp = j.at("fp").get<std::int64_t>();
  m.fn = j.at("fn").get<std::int64_t>();
  m.tn = j.at("tn").get<std::int64_t>();
}

void to_json(Json& j, const Prediction& p) {
  Json votes = Json::array();
  for (Verdict v : p.votes) votes.push_back(to_string(v));
  j = Json{{"comment_id", p.comment_id},
           {"verdict", to_string(p.verdict)},
           {"confidence", p.confidence},
           {"votes", votes},
           {"prompt_hash", p.prompt_hash}};
  if (p.explanation) j["explanation"] = *p.explanation;
}

void from_json(const Json& j, Prediction& p) {
  p.comment_id = j.at("comment_id").get<std::string>();
  p.verdict = parse_verdict(j.at("verdict").get<std::string>());
  p.confidence = j.at("confidence").get<double>();
  p.votes.clear();
  for (const auto& v : j.value("votes", Json::array())) p.votes.push_back(parse_verdict(v.get<std::string>()));
  p.prompt_hash = j.value("prompt_hash", std::string());
  if (j.contains("explanation") && !j.at("explanation").is_null())
    p.explanation = j.at("explanation").get<std::string>();
  else
    p.explanation.reset();
}

void to_json(Json& j, const Mistake& m) {
  j = Json{{"comment", m.comment}, {"predicted", to_string(m.predicted)}, {"gold", to_string(m.gold)}};
}

void to_json(Json& j, const FailurePattern& p) {
  Json ids = Json::array();
  for (const auto& m : p.members) ids.push_back(m.comment.id);
  j = Json{{"pattern_id", p.pattern_id},
           {"size", p.size()},
           {"summary", p.summary},
           {"member_comment_ids", ids},
           {"reflections", p.reflections}};
}

void to_json(Json& j, const CandidateEdit& c) {
  j = Json{{"diff", c.diff},
           {"child", c.child},
           {"metrics", c.metrics},
           {"train_score", c.train_score},
           {"resolved", c.resolved},
           {"introduced", c.introduced}};
}

void from_json(const Json& j, CandidateEdit& c) {
  c.diff = j.at("diff").get<EditDiff>();
  c.child = j.at("child").get<FilterPrompt>();
  c.metrics = j.at("metrics").get<Metrics>();
  c.train_score = j.at("train_score").get<double>();
  c.resolved = j.at("resolved").get<int>();
  c.introduced = j.at("introduced").get<int>();
}

void to_json(Json& j, const SearchRound& r) {
  j = Json{{"round", r.round},
           {"candidates_evaluated", r.candidates_evaluated},
           {"generation_calls", r.generation_calls},
           {"best_score", r.best_score}};
}

}  // namespace rubricopt
