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

#include "rubricopt/core/types.hpp"

#include <charconv>
#include <cstdio>

#include "rubricopt/error.hpp"

namespace rubricopt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kTransport: return "transport_error";
    case ErrorCode::kProtocol: return "protocol_error";
    case ErrorCode::kClassification: return "classification_error";
    case ErrorCode::kStorage: return "storage_error";
    case ErrorCode::kCancelled: return "cancelled";
    case ErrorCode::kInternal: return "internal";
  }
  return "internal";
}

namespace {

int parse_fixed(std::string_view s, std::size_t pos, std::size_t len,
                std::string_view whole) {
  int value = 0;
  if (pos + len > s.size()) fail(ErrorCode::kInvalidArgument, "bad timestamp: " + std::string(whole));
  auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, value);
  if (ec != std::errc{} || ptr != s.data() + pos + len)
    fail(ErrorCode::kInvalidArgument, "bad timestamp: " + std::string(whole));
  return value;
}

void expect_char(std::string_view s, std::size_t pos, char c, std::string_view whole) {
  if (pos >= s.size() || s[pos] != c)
    fail(ErrorCode::kInvalidArgument, "bad timestamp: " + std::string(whole));
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  // YYYY-MM-DDTHH:MM:SS[.frac](Z|+hh:mm|-hh:mm)
  const int y = parse_fixed(text, 0, 4, text);
  expect_char(text, 4, '-', text);
  const int mo = parse_fixed(text, 5, 2, text);
  expect_char(text, 7, '-', text);
  const int d = parse_fixed(text, 8, 2, text);
  if (text.size() <= 10 || (text[10] != 'T' && text[10] != 't' && text[10] != ' '))
    fail(ErrorCode::kInvalidArgument, "bad timestamp: " + std::string(text));
  const int h = parse_fixed(text, 11, 2, text);
  expect_char(text, 13, ':', text);
  const int mi = parse_fixed(text, 14, 2, text);
  expect_char(text, 16, ':', text);
  const int s = parse_fixed(text, 17, 2, text);
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
  }
  int offset_minutes = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    const int sign = text[pos] == '+' ? 1 : -1;
    const int oh = parse_fixed(text, pos + 1, 2, text);
    expect_char(text, pos + 3, ':', text);
    const int om = parse_fixed(text, pos + 4, 2, text);
    offset_minutes = sign * (oh * 60 + om);
    pos += 6;
  } else {
    fail(ErrorCode::kInvalidArgument, "timestamp lacks a UTC designator: " + std::string(text));
  }
  if (pos != text.size())
    fail(ErrorCode::kInvalidArgument, "bad timestamp: " + std::string(text));

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60)
    fail(ErrorCode::kInvalidArgument, "timestamp out of range: " + std::string(text));
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto day_point = floor<days>(ts);
  const year_month_day ymd{day_point};
  const hh_mm_ss<seconds> tod{ts - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

std::string format_day(Timestamp ts) { return format_timestamp(ts).substr(0, 10); }

std::string_view to_string(Verdict v) { return v == Verdict::kCatch ? "catch" : "not_catch"; }

Verdict parse_verdict(std::string_view text) {
  if (text == "catch") return Verdict::kCatch;
  if (text == "not_catch") return Verdict::kNotCatch;
  fail(ErrorCode::kInvalidArgument, "unknown verdict: " + std::string(text));
}

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::kInitialization: return "initialization";
    case LabelSource::kAudit: return "audit";
    case LabelSource::kIterationReview: return "iteration_review";
  }
  return "initialization";
}

LabelSource parse_label_source(std::string_view text) {
  if (text == "initialization") return LabelSource::kInitialization;
  if (text == "audit") return LabelSource::kAudit;
  if (text == "iteration_review") return LabelSource::kIterationReview;
  fail(ErrorCode::kInvalidArgument, "unknown label source: " + std::string(text));
}

std::string_view to_string(Polarity p) { return p == Polarity::kPositive ? "positive" : "negative"; }

Polarity parse_polarity(std::string_view text) {
  if (text == "positive") return Polarity::kPositive;
  if (text == "negative") return Polarity::kNegative;
  fail(ErrorCode::kInvalidArgument, "unknown polarity: " + std::string(text));
}

std::string_view to_string(EditDirection d) {
  switch (d) {
    case EditDirection::kAddPositive: return "add_positive";
    case EditDirection::kAddNegative: return "add_negative";
    case EditDirection::kEditPositive: return "edit_positive";
    case EditDirection::kEditNegative: return "edit_negative";
    case EditDirection::kDescriptionEdit: return "description_edit";
    case EditDirection::kExampleChange: return "example_change";
  }
  return "add_positive";
}

EditDirection parse_edit_direction(std::string_view text) {
  for (auto d : {EditDirection::kAddPositive, EditDirection::kAddNegative,
                 EditDirection::kEditPositive, EditDirection::kEditNegative,
                 EditDirection::kDescriptionEdit, EditDirection::kExampleChange}) {
    if (to_string(d) == text) return d;
  }
  fail(ErrorCode::kInvalidArgument, "unknown edit direction: " + std::string(text));
}

const Rubric* FilterPrompt::find_rubric(std::string_view rubric_id) const {
  for (const auto* list : {&positive_rubrics, &negative_rubrics})
    for (const auto& r : *list)
      if (r.rubric_id == rubric_id) return &r;
  return nullptr;
}

}  // namespace rubricopt
