// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include "polyshot/prompting.hpp"

#include "polyshot/error.hpp"

namespace polyshot {
namespace {

constexpr std::string_view kContext = "Context: ";
constexpr std::string_view kQuestion = "Question: ";
constexpr std::string_view kAnswer = "Answer: ";

struct ReadingItem {
  std::string context;
  std::string question;
};

// Reading-comprehension items carry the passage either in a dedicated field
// or inline as "Context: ...\nQuestion: ...".
ReadingItem split_reading(const std::string& source, const std::optional<std::string>& context,
                          std::string_view owner) {
  if (context && !context->empty()) return {*context, source};
  if (source.starts_with(kContext)) {
    const auto q = source.find(std::string("\n") + std::string(kQuestion));
    if (q != std::string::npos) {
      return {source.substr(kContext.size(), q - kContext.size()), source.substr(q + 1 + kQuestion.size())};
    }
  }
  throw ValidationError("\"" + std::string(owner) + "\": reading-comprehension item has no context");
}

std::string choice_lines(const std::vector<Choice>& choices, std::string_view owner) {
  if (choices.empty()) throw ValidationError("\"" + std::string(owner) + "\": multiple-choice item has no choices");
  validate_choices(choices, owner);
  std::string out;
  for (const auto& c : choices) {
    out += c.label;
    out += ". ";
    out += c.text;
    out += '\n';
  }
  return out;
}

std::string open_block(TaskId task, const std::string& source, const std::vector<Choice>& choices,
                       const std::optional<std::string>& context, std::string_view owner) {
  std::string out;
  if (task == TaskId::mcsqa) {
    out += kQuestion;
    out += source;
    out += '\n';
    out += choice_lines(choices, owner);
  } else {
    const auto item = split_reading(source, context, owner);
    out += kContext;
    out += item.context;
    out += '\n';
    out += kQuestion;
    out += item.question;
    out += '\n';
  }
  out += kAnswer;
  return out;
}

}  // namespace

const std::vector<PromptTemplate>& prompt_templates() {
  static const std::vector<PromptTemplate> kTemplates = {
      {"mcsqa-1", TaskId::mcsqa, "Answer the question."},
      {"mcsqa-2", TaskId::mcsqa, "Provide a response to the question."},
      {"mcsqa-3", TaskId::mcsqa, "Please answer the question."},
      {"mcsqa-4", TaskId::mcsqa, "Respond to the question."},
      {"tydi-1", TaskId::tydi, "Answer the question using the context."},
      {"tydi-2", TaskId::tydi, "Provide an answer to the question based on the context."},
      {"tydi-3", TaskId::tydi, "Please give an answer to the question using the provided context."},
      {"tydi-4", TaskId::tydi, "Please answer the question by utilizing the context."},
  };
  return kTemplates;
}

const PromptTemplate& find_template(std::string_view id) {
  for (const auto& t : prompt_templates()) {
    if (t.id == id) return t;
  }
  throw ConfigError("unknown prompt template \"" + std::string(id) + "\"");
}

const PromptTemplate& default_template(TaskId task) {
  return find_template(task == TaskId::mcsqa ? "mcsqa-1" : "tydi-1");
}

TaskSpec make_task(const PromptTemplate& tpl, std::size_t k) { return {tpl.task, tpl.instruction, k}; }

AnswerFormat parse_answer_format(std::string_view s) {
  if (s == "letter") return AnswerFormat::letter;
  if (s == "text") return AnswerFormat::text;
  throw ConfigError("unknown answer format \"" + std::string(s) + "\" (expected letter or text)");
}

std::string render_answer(TaskId task, const ExampleRecord& record, AnswerFormat fmt) {
  if (task == TaskId::mcsqa && fmt == AnswerFormat::text) {
    for (const auto& c : record.choices) {
      if (c.label == record.reference) return c.text;
    }
  }
  return record.reference;
}

std::string render_source(TaskId task, const ExampleRecord& record) {
  return open_block(task, record.source, record.choices, record.context, record.id);
}

std::string render_example(TaskId task, const ExampleRecord& record, const PromptOptions& opts) {
  return render_source(task, record) + render_answer(task, record, opts.answer_format);
}

std::string render_query(TaskId task, const QueryInstance& query) {
  return open_block(task, query.input, query.choices, query.context, query.id);
}

std::string build_prompt(const TaskSpec& task, std::span<const ExampleRecord> examples, const QueryInstance& query,
                         const PromptOptions& opts) {
  validate_task(task);
  if (examples.size() != task.k) {
    throw ValidationError("prompt expects " + std::to_string(task.k) + " examples, got " +
                          std::to_string(examples.size()));
  }
  std::string out;
  if (!examples.empty() || opts.instruction_without_examples) {
    out += task.instruction;
    out += "\n\n";
  }
  for (const auto& e : examples) {
    out += render_example(task.task, e, opts);
    out += "\n\n";
  }
  out += render_query(task.task, query);
  return out;
}

}  // namespace polyshot
