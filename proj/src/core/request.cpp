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

#include "rubricopt/core/request.hpp"

#include <charconv>

#include "rubricopt/core/text.hpp"
#include "rubricopt/error.hpp"

namespace rubricopt {

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kClassify: return "classify";
    case TaskKind::kReflect: return "reflect";
    case TaskKind::kPropose: return "propose";
    case TaskKind::kSummarize: return "summarize";
    case TaskKind::kDraft: return "draft";
  }
  return "classify";
}

TaskKind task_kind(const Task& task) {
  return static_cast<TaskKind>(task.index());
}

namespace {

constexpr std::string_view kClassifySystem =
    "You are a content classifier working for one user. Decide for every comment whether the "
    "user's filter should catch it. A comment is caught when it fits the description and at "
    "least one positive rubric, unless a negative rubric exempts it. Judge each comment on its "
    "own; the order of comments carries no meaning.";
constexpr std::string_view kClassifyFormat =
    "Answer with exactly one line per comment in the form `<index>: catch` or "
    "`<index>: not_catch`, and nothing else.";

constexpr std::string_view kReflectSystem =
    "You are reviewing a personal content filter. Reason about how the filter's description "
    "and rubrics relate to the comments below.";

constexpr std::string_view kProposeSystem =
    "You are improving a personal content filter. Make the smallest change that addresses the "
    "failures below while keeping the filter easy to read.";

constexpr std::string_view kSummarizeSystem =
    "You are grouping filter failures. The reflections below share a cause; state it.";
constexpr std::string_view kSummarizeFormat =
    "Answer with at most two sentences describing the shared failure.";

constexpr std::string_view kDraftSystem =
    "You help a user describe which comments their filter should catch. Write a clear, "
    "specific description of the user's intent.";
constexpr std::string_view kDraftFormat =
    "Answer with one to three sentences that start with \"Catch comments that\".";

std::string_view reflect_mode_name(ReflectTask::Mode m) {
  switch (m) {
    case ReflectTask::Mode::kMistake: return "mistake";
    case ReflectTask::Mode::kExplain: return "explain";
    case ReflectTask::Mode::kGradient: return "gradient";
    case ReflectTask::Mode::kRationale: return "rationale";
  }
  return "mistake";
}

std::string_view reflect_format(ReflectTask::Mode m) {
  switch (m) {
    case ReflectTask::Mode::kMistake:
      return "Answer with one sentence explaining why the filter got this comment wrong.";
    case ReflectTask::Mode::kExplain:
      return "Answer with at most two sentences explaining the verdict, quoting the rubric "
             "that applies if there is one.";
    case ReflectTask::Mode::kGradient:
      return "Answer with a short critique of the prompt's flaws with respect to these "
             "comments.";
    case ReflectTask::Mode::kRationale:
      return "Answer with the requested number of alternative one-sentence rationales the user "
             "might hold, one per line.";
  }
  return "";
}

std::string_view propose_mode_name(ProposeTask::Mode m) {
  switch (m) {
    case ProposeTask::Mode::kAddRubric: return "add";
    case ProposeTask::Mode::kEditRubric: return "edit";
    case ProposeTask::Mode::kRewrite: return "rewrite";
  }
  return "add";
}

std::string_view propose_format(ProposeTask::Mode m) {
  switch (m) {
    case ProposeTask::Mode::kAddRubric:
      return "Answer with the text of one new rubric on a single line, or NONE if no rubric of "
             "this polarity would help.";
    case ProposeTask::Mode::kEditRubric:
      return "Answer with the full revised text of the target rubric on a single line, or NONE "
             "if editing it would not help.";
    case ProposeTask::Mode::kRewrite:
      return "Answer with the complete rewritten prompt, moving it in the opposite direction "
             "of the critique.";
  }
  return "";
}

class Writer {
 public:
  explicit Writer(TaskKind kind) {
    out_ = "#TASK ";
    out_.append(to_string(kind));
    out_.append(" v1\n");
  }

  void header(std::string_view h) {
    out_.push_back('#');
    out_.append(h);
    out_.push_back('\n');
  }

  void body(std::string_view text) {
    std::size_t start = 0;
    while (true) {
      const std::size_t nl = text.find('\n', start);
      const std::string_view line =
          text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
      if (!line.empty() && (line.front() == '#' || line.front() == '\\')) out_.push_back('\\');
      out_.append(line);
      out_.push_back('\n');
      if (nl == std::string_view::npos) break;
      start = nl + 1;
    }
  }

  void block(std::string_view h, std::string_view text) {
    header(h);
    body(text);
  }

  void comment(int index, const CommentView& c) {
    if (c.predicted) {
      std::string h = "VERDICTS predicted=";
      h.append(to_string(*c.predicted));
      if (c.gold) {
        h.append(" gold=");
        h.append(to_string(*c.gold));
      }
      header(h);
    }
    header("COMMENT " + std::to_string(index));
    body(c.text);
    header("END");
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

void write_filter(Writer& w, const FilterPrompt& prompt) {
  w.block("DESCRIPTION", prompt.description);
  for (Polarity pol : {Polarity::kPositive, Polarity::kNegative}) {
    for (const Rubric& r : prompt.rubrics(pol)) {
      w.block("RUBRIC " + std::string(to_string(pol)) + " " + r.rubric_id, r.text);
    }
  }
  for (const FewShotExample& e : prompt.examples) {
    w.block("EXAMPLE " + std::string(to_string(e.verdict)), e.comment_text);
    if (e.rationale) w.block("EXAMPLE-RATIONALE", *e.rationale);
  }
}

}  // namespace

std::string render_prompt(const FilterPrompt& prompt, const Task& task) {
  Writer w(task_kind(task));
  if (const auto* t = std::get_if<ClassifyTask>(&task)) {
    if (t->comments.empty() || t->comments.size() > kMaxBatchSize) {
      fail(ErrorCode::kInvalidArgument, "classify batch must hold 1.." +
                                            std::to_string(kMaxBatchSize) + " comments, got " +
                                            std::to_string(t->comments.size()));
    }
    w.block("SYSTEM", kClassifySystem);
    write_filter(w, prompt);
    for (std::size_t i = 0; i < t->comments.size(); ++i)
      w.comment(static_cast<int>(i + 1), CommentView{t->comments[i], {}, {}});
    w.block("FORMAT", kClassifyFormat);
  } else if (const auto* t = std::get_if<ReflectTask>(&task)) {
    w.block("SYSTEM", kReflectSystem);
    write_filter(w, prompt);
    w.header("MODE " + std::string(reflect_mode_name(t->mode)));
    if (t->mode == ReflectTask::Mode::kRationale)
      w.header("ALTERNATIVES " + std::to_string(t->alternatives));
    for (std::size_t i = 0; i < t->comments.size(); ++i)
      w.comment(static_cast<int>(i + 1), t->comments[i]);
    w.block("FORMAT", reflect_format(t->mode));
  } else if (const auto* t = std::get_if<ProposeTask>(&task)) {
    w.block("SYSTEM", kProposeSystem);
    write_filter(w, prompt);
    w.header("MODE " + std::string(propose_mode_name(t->mode)));
    w.header("POLARITY " + std::string(to_string(t->polarity)));
    if (t->target_rubric_id) w.header("TARGET-RUBRIC " + *t->target_rubric_id);
    w.header("VARIANT " + std::to_string(t->variant));
    for (const std::string& note : t->notes) w.block("NOTE", note);
    for (std::size_t i = 0; i < t->comments.size(); ++i)
      w.comment(static_cast<int>(i + 1), t->comments[i]);
    w.block("FORMAT", propose_format(t->mode));
  } else if (const auto* t = std::get_if<SummarizeTask>(&task)) {
    w.block("SYSTEM", kSummarizeSystem);
    write_filter(w, prompt);
    for (const std::string& r : t->reflections) w.block("NOTE", r);
    for (std::size_t i = 0; i < t->comments.size(); ++i)
      w.comment(static_cast<int>(i + 1), t->comments[i]);
    w.block("FORMAT", kSummarizeFormat);
  } else if (const auto* t = std::get_if<DraftTask>(&task)) {
    w.block("SYSTEM", kDraftSystem);
    if (t->description) w.block("SEED", *t->description);
    for (std::size_t i = 0; i < t->example_comments.size(); ++i)
      w.comment(static_cast<int>(i + 1), CommentView{t->example_comments[i], {}, {}});
    w.block("FORMAT", kDraftFormat);
  }
  return w.take();
}

std::optional<TaskKind> sniff_task(std::string_view rendered) {
  const std::size_t nl = rendered.find('\n');
  std::string_view first = rendered.substr(0, nl);
  if (!first.empty() && first.back() == '\r') first.remove_suffix(1);
  for (TaskKind k : {TaskKind::kClassify, TaskKind::kReflect, TaskKind::kPropose,
                     TaskKind::kSummarize, TaskKind::kDraft}) {
    std::string expected = "#TASK ";
    expected.append(to_string(k));
    expected.append(" v1");
    if (first == expected) return k;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void framing_error(const std::string& what) {
  fail(ErrorCode::kProtocol, "malformed request framing: " + what);
}

int parse_int(std::string_view s, const std::string& what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) framing_error("bad integer in " + what);
  return v;
}

std::string_view after_space(std::string_view s) {
  const std::size_t sp = s.find(' ');
  return sp == std::string_view::npos ? std::string_view{} : s.substr(sp + 1);
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out.append(lines[i]);
  }
  return out;
}

}  // namespace

namespace {

ParsedRequest parse_framed(std::string_view rendered, TaskKind kind) {
  ParsedRequest req;
  req.kind = kind;
  const std::vector<std::string> lines = split_lines(rendered);

  std::string header;  // current block header without '#'
  std::vector<std::string> body;
  bool in_comment = false;
  int comment_index = 0;
  std::optional<Verdict> pending_predicted;
  std::optional<Verdict> pending_gold;

  auto finish_block = [&]() {
    if (header.empty()) return;
    const std::string text = join(body);
    if (header == "DESCRIPTION") {
      req.description = text;
    } else if (header.rfind("RUBRIC ", 0) == 0) {
      const std::string_view rest = after_space(header);
      const std::size_t sp = rest.find(' ');
      if (sp == std::string_view::npos) framing_error("rubric header");
      Rubric r{std::string(rest.substr(sp + 1)), parse_polarity(rest.substr(0, sp)), text, {}};
      (r.polarity == Polarity::kPositive ? req.positive_rubrics : req.negative_rubrics)
          .push_back(std::move(r));
    } else if (header.rfind("EXAMPLE ", 0) == 0) {
      req.examples.push_back(FewShotExample{text, parse_verdict(after_space(header)), {}});
    } else if (header == "EXAMPLE-RATIONALE") {
      if (req.examples.empty()) framing_error("rationale without example");
      req.examples.back().rationale = text;
    } else if (header == "NOTE") {
      req.notes.push_back(text);
    } else if (header == "SEED") {
      req.seed_description = text;
    }
    header.clear();
    body.clear();
  };

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (in_comment) {
      if (line == "#END") {
        req.comments.emplace_back(comment_index,
                                  CommentView{join(body), pending_predicted, pending_gold});
        pending_predicted.reset();
        pending_gold.reset();
        body.clear();
        in_comment = false;
      } else if (!line.empty() && line.front() == '#') {
        framing_error("comment " + std::to_string(comment_index) + " lacks #END");
      } else {
        body.push_back(!line.empty() && line.front() == '\\' ? line.substr(1) : line);
      }
      continue;
    }
    if (!line.empty() && line.front() == '#') {
      finish_block();
      const std::string h = line.substr(1);
      if (h.rfind("COMMENT ", 0) == 0) {
        comment_index = parse_int(after_space(h), "comment index");
        in_comment = true;
      } else if (h == "END") {
        framing_error("#END outside a comment");
      } else if (h.rfind("MODE ", 0) == 0) {
        req.mode = std::string(after_space(h));
      } else if (h.rfind("POLARITY ", 0) == 0) {
        req.polarity = parse_polarity(after_space(h));
      } else if (h.rfind("TARGET-RUBRIC ", 0) == 0) {
        req.target_rubric_id = std::string(after_space(h));
      } else if (h.rfind("VARIANT ", 0) == 0) {
        req.variant = parse_int(after_space(h), "variant");
      } else if (h.rfind("ALTERNATIVES ", 0) == 0) {
        req.alternatives = parse_int(after_space(h), "alternatives");
      } else if (h.rfind("VERDICTS ", 0) == 0) {
        for (const std::string& tok : [&] {
               std::vector<std::string> parts;
               std::string_view rest = after_space(h);
               while (!rest.empty()) {
                 const std::size_t sp = rest.find(' ');
                 parts.emplace_back(rest.substr(0, sp));
                 if (sp == std::string_view::npos) break;
                 rest.remove_prefix(sp + 1);
               }
               return parts;
             }()) {
          if (tok.rfind("predicted=", 0) == 0) pending_predicted = parse_verdict(tok.substr(10));
          else if (tok.rfind("gold=", 0) == 0) pending_gold = parse_verdict(tok.substr(5));
          else framing_error("verdicts header");
        }
      } else {
        header = h;
      }
      continue;
    }
    if (header.empty()) framing_error("body line outside a block");
    body.push_back(!line.empty() && line.front() == '\\' ? line.substr(1) : line);
  }
  if (in_comment) framing_error("comment " + std::to_string(comment_index) + " lacks #END");
  finish_block();
  return req;
}

}  // namespace

ParsedRequest parse_request(std::string_view rendered) {
  const auto kind = sniff_task(rendered);
  if (!kind) fail(ErrorCode::kProtocol, "missing or corrupt task sentinel");
  try {
    return parse_framed(rendered, *kind);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument)
      fail(ErrorCode::kProtocol, std::string("malformed request framing: ") + e.what());
    throw;
  }
}

}  // namespace rubricopt
