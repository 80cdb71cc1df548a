// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "polyshot/error.hpp"
#include "polyshot/prompting.hpp"
#include "polyshot/util.hpp"
#include "prompt_parser.hpp"
#include "toy.hpp"

using namespace polyshot;
using namespace polyshot::testing;

namespace {

const std::string kFixtures = POLYSHOT_FIXTURE_DIR;

ExampleRecord mc_record(std::string id, std::string q, std::string ans) {
  auto r = record(std::move(id), "en", std::move(q), std::move(ans));
  r.choices = five_choices({"one", "two", "three", "four", "five"});
  return r;
}

QueryInstance mc_query() {
  auto q = query("q", "en", "Which?");
  q.choices = five_choices({"red", "green", "blue", "cyan", "pink"});
  return q;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Templates, DefaultsAndAlternates) {
  EXPECT_EQ(default_template(TaskId::mcsqa).instruction, "Answer the question.");
  EXPECT_EQ(default_template(TaskId::tydi).instruction, "Answer the question using the context.");
  EXPECT_EQ(find_template("mcsqa-3").instruction, "Please answer the question.");
  EXPECT_EQ(find_template("tydi-4").instruction, "Please answer the question by utilizing the context.");
  EXPECT_EQ(prompt_templates().size(), 8u);
  EXPECT_THROW(find_template("mcsqa-9"), ConfigError);
}

TEST(RenderExample, Mcsqa) {
  EXPECT_EQ(render_example(TaskId::mcsqa, mc_record("r", "Pick one", "c")),
            "Question: Pick one\na. one\nb. two\nc. three\nd. four\ne. five\nAnswer: c");
}

TEST(RenderExample, McsqaTextAnswer) {
  PromptOptions o;
  o.answer_format = AnswerFormat::text;
  EXPECT_EQ(render_answer(TaskId::mcsqa, mc_record("r", "Pick", "c"), AnswerFormat::text), "three");
  EXPECT_TRUE(render_example(TaskId::mcsqa, mc_record("r", "Pick", "c"), o).ends_with("\nAnswer: three"));
}

TEST(RenderExample, Tydi) {
  auto r = record("t", "en", "Who?", "Ada");
  r.context = "Ada wrote it.";
  EXPECT_EQ(render_example(TaskId::tydi, r), "Context: Ada wrote it.\nQuestion: Who?\nAnswer: Ada");
  auto inline_ctx = record("t2", "en", "Context: Ada wrote it.\nQuestion: Who?", "Ada");
  EXPECT_EQ(render_example(TaskId::tydi, inline_ctx), render_example(TaskId::tydi, r));
}

TEST(RenderExample, Errors) {
  auto four = mc_record("r", "q", "a");
  four.choices.pop_back();
  EXPECT_THROW(render_example(TaskId::mcsqa, four), ValidationError);
  EXPECT_THROW(render_example(TaskId::mcsqa, record("r", "en")), ValidationError);
  EXPECT_THROW(render_example(TaskId::tydi, record("r", "en")), ValidationError);
}

TEST(BuildPrompt, ZeroShot) {
  const TaskSpec t{TaskId::mcsqa, "Answer the question.", 0};
  const auto p = build_prompt(t, {}, mc_query());
  EXPECT_EQ(p, "Answer the question.\n\nQuestion: Which?\na. red\nb. green\nc. blue\nd. cyan\ne. pink\nAnswer: ");
  PromptOptions bare;
  bare.instruction_without_examples = false;
  EXPECT_TRUE(build_prompt(t, {}, mc_query(), bare).starts_with("Question: Which?"));
}

TEST(BuildPrompt, TwoShotTydi) {
  const TaskSpec t{TaskId::tydi, default_template(TaskId::tydi).instruction, 2};
  auto a = record("a", "en", "Q1?", "A1");
  a.context = "C1";
  auto b = record("b", "en", "Q2?", "A2");
  b.context = "C2";
  auto q = query("q", "en", "Q3?");
  q.context = "C3";
  const std::vector<ExampleRecord> ex{a, b};
  EXPECT_EQ(build_prompt(t, ex, q),
            "Answer the question using the context.\n\n"
            "Context: C1\nQuestion: Q1?\nAnswer: A1\n\n"
            "Context: C2\nQuestion: Q2?\nAnswer: A2\n\n"
            "Context: C3\nQuestion: Q3?\nAnswer: ");
}

TEST(BuildPrompt, WrongCount) {
  const TaskSpec t{TaskId::mcsqa, "Answer the question.", 2};
  const std::vector<ExampleRecord> one{mc_record("a", "q", "a")};
  EXPECT_THROW(build_prompt(t, one, mc_query()), ValidationError);
}

namespace {

void check_golden(TaskId task, const std::string& stem) {
  const IngestOptions ingest;
  const auto pool = load_pool(kFixtures + "/" + stem + "_golden_pool.jsonl", ingest);
  const auto queries = load_queries(kFixtures + "/" + stem + "_golden_query.jsonl", ingest);
  ASSERT_EQ(pool.size(), 8u);
  ASSERT_EQ(queries.size(), 1u);
  const auto t = make_task(default_template(task), 8);
  const auto prompt = build_prompt(t, pool.records(), queries[0]);
  EXPECT_EQ(prompt, read_file(kFixtures + "/golden/" + stem + "_8shot.txt"));
}

}  // namespace

TEST(Golden, Mcsqa8Shot) { check_golden(TaskId::mcsqa, "mcsqa"); }
TEST(Golden, Tydi8Shot) { check_golden(TaskId::tydi, "tydi"); }

TEST(Properties, AnswerLinesAndRoundTrip) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = rng() % 9;
    std::vector<ExampleRecord> ex;
    for (std::size_t i = 0; i < k; ++i) {
      ex.push_back(mc_record("r" + std::to_string(i), "Question number " + std::to_string(rng() % 1000),
                             std::string(1, "abcde"[rng() % 5])));
    }
    const TaskSpec t{TaskId::mcsqa, find_template("mcsqa-" + std::to_string(1 + trial % 4)).instruction, k};
    const auto p = build_prompt(t, ex, mc_query());
    EXPECT_EQ(count(p, "\nAnswer: "), k + 1);
    EXPECT_TRUE(p.ends_with("Answer: "));
    const auto parsed = parse_prompt(p);
    ASSERT_TRUE(parsed.instruction.has_value());
    EXPECT_EQ(*parsed.instruction, t.instruction);
    ASSERT_EQ(parsed.examples.size(), k);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_EQ(parsed.examples[i], render_example(TaskId::mcsqa, ex[i]));
      EXPECT_EQ(block_answer(parsed.examples[i]), ex[i].reference);
    }
    EXPECT_EQ(parsed.query, render_query(TaskId::mcsqa, mc_query()));
  }
}

TEST(Properties, OrderInjective) {
  const TaskSpec t{TaskId::mcsqa, "Answer the question.", 2};
  const std::vector<ExampleRecord> ab{mc_record("a", "first", "a"), mc_record("b", "second", "b")};
  const std::vector<ExampleRecord> ba{ab[1], ab[0]};
  EXPECT_NE(build_prompt(t, ab, mc_query()), build_prompt(t, ba, mc_query()));
}
