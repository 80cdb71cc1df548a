// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polyshot/datamodel.hpp"

namespace polyshot {

/// A named instruction line for one task. All templates share the same
/// block layout; only the instruction differs.
struct PromptTemplate {
  std::string id;
  TaskId task;
  std::string instruction;
};

/// The four shipped wordings per task: "mcsqa-1".."mcsqa-4", "tydi-1".."tydi-4".
/// The "-1" variants are the defaults.
const std::vector<PromptTemplate>& prompt_templates();
const PromptTemplate& find_template(std::string_view id);
const PromptTemplate& default_template(TaskId task);

TaskSpec make_task(const PromptTemplate& tpl, std::size_t k);

enum class AnswerFormat { letter, text };
AnswerFormat parse_answer_format(std::string_view s);

struct PromptOptions {
  AnswerFormat answer_format = AnswerFormat::letter;
  /// When false and no examples are given, the prompt is the query block alone.
  bool instruction_without_examples = true;
};

/// Demonstration block including its filled answer line.
///   mcsqa: "Question: q\na. A\nb. B\nc. C\nd. D\ne. E\nAnswer: ans"
///   tydi:  "Context: c\nQuestion: q\nAnswer: ans"
std::string render_example(TaskId task, const ExampleRecord& record, const PromptOptions& opts = {});

/// The same block for a pool record with the answer left open ("Answer: ").
std::string render_source(TaskId task, const ExampleRecord& record);

/// Query block ending in "Answer: " (one trailing space, no newline).
std::string render_query(TaskId task, const QueryInstance& query);

/// Answer text of a record as it appears in a demonstration.
std::string render_answer(TaskId task, const ExampleRecord& record, AnswerFormat fmt);

/// instruction, blank line, example blocks separated by blank lines, blank
/// line, query block. Throws ValidationError if examples.size() != task.k.
std::string build_prompt(const TaskSpec& task, std::span<const ExampleRecord> examples, const QueryInstance& query,
                         const PromptOptions& opts = {});

}  // namespace polyshot
