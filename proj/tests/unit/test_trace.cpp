#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qaguide/error.hpp"
#include "qaguide/trace.hpp"

using namespace qaguide;
using namespace qaguide::testing;

TEST(ParseTrace, FullFormatLine) {
  auto f = parse_trace("Q1: Who is Demon? E1: He tells the story. A1: The narrator T1: Role");
  ASSERT_EQ(f.items.size(), 1u);
  EXPECT_EQ(f.items[0].question, "Who is Demon?");
  EXPECT_EQ(f.items[0].explanation, "He tells the story.");
  EXPECT_EQ(f.items[0].answer, "The narrator");
  EXPECT_EQ(f.items[0].qtype, QuestionType::kRole);
  EXPECT_TRUE(f.warnings.empty());
}

TEST(ParseTrace, NoneSentinel) {
  auto f = parse_trace("  None \n");
  EXPECT_TRUE(f.is_none);
  EXPECT_TRUE(f.items.empty());
  EXPECT_EQ(serialize_trace(std::vector<QaItem>{}), "None");
}

TEST(ParseTrace, TypeIsCaseInsensitive) {
  auto f = parse_trace("Q1: q E1: e A1: a T1: personality");
  ASSERT_EQ(f.items.size(), 1u);
  EXPECT_EQ(f.items[0].qtype, QuestionType::kPersonality);
}

TEST(ParseTrace, UnknownTypeBecomesOtherWithWarning) {
  auto f = parse_trace("Q1: q E1: e A1: a T1: Motivation");
  ASSERT_EQ(f.items.size(), 1u);
  EXPECT_EQ(f.items[0].qtype, QuestionType::kOther);
  EXPECT_EQ(f.warnings.size(), 1u);
}

TEST(ParseTrace, MissingAnswerDropsItem) {
  auto f = parse_trace("Q1: q E1: e T1: Role\nQ2: q2 E2: e2 A2: a2 T2: Event");
  ASSERT_EQ(f.items.size(), 1u);
  EXPECT_EQ(f.items[0].question, "q2");
  EXPECT_FALSE(f.warnings.empty());
}

TEST(ParseTrace, LongAnswerKeptWithWarning) {
  auto f = parse_trace("Q1: q E1: e A1: one two three four five six seven eight nine T1: Event");
  ASSERT_EQ(f.items.size(), 1u);
  EXPECT_EQ(f.warnings.size(), 1u);
}

TEST(ParseTrace, MarkdownDecorationStripped) {
  auto f = parse_trace("**Q1:** Who? **E1:** Because. **A1:** Her **T1:** Role");
  ASSERT_EQ(f.items.size(), 1u);
  EXPECT_EQ(f.items[0].question, "Who?");
  EXPECT_EQ(f.items[0].answer, "Her");
}

TEST(ParseTrace, GarbageYieldsNoItemsAndWarning) {
  auto f = parse_trace("I could not find anything useful.");
  EXPECT_FALSE(f.is_none);
  EXPECT_TRUE(f.items.empty());
  EXPECT_FALSE(f.warnings.empty());
}

TEST(ParseTrace, AblatedFormatsDoNotRequireDroppedFields) {
  TraceFormat qa_only{false, false, true};
  auto f = parse_trace("Q1: Who? A1: Her", qa_only);
  ASSERT_EQ(f.items.size(), 1u);
  EXPECT_EQ(f.items[0].answer, "Her");
  TraceFormat q_only{false, false, false};
  auto g = parse_trace("Q1: Who?\nQ2: Where?", q_only);
  EXPECT_EQ(g.items.size(), 2u);
}

TEST(SerializeTrace, RenumbersFromOne) {
  std::vector<QaItem> items{{"a?", "b", "c", QuestionType::kEvent}, {"d?", "e", "f", QuestionType::kOther}};
  EXPECT_EQ(serialize_trace(items),
            "Q1: a? E1: b A1: c T1: Event\nQ2: d? E2: e A2: f T2: Other");
}

TEST(SerializeTrace, RoundTripProperty) {
  Rng rng(11);
  for (const auto& format : all_trace_formats()) {
    for (int trial = 0; trial < 100; ++trial) {
      auto items = random_items(rng, 8);
      for (auto& it : items) it = project(it, format);
      auto text = serialize_trace(items, format);
      auto parsed = parse_trace(text, format);
      ASSERT_EQ(parsed.is_none, items.empty()) << text;
      ASSERT_EQ(parsed.items, items) << text;
      if (!items.empty()) {
        ASSERT_NE(text, "None");
      }
    }
  }
}

TEST(ConcatTraces, PreservesOrderAndProvenance) {
  std::vector<ChunkFragment> fragments(3);
  fragments[0] = {0, std::vector<QaItem>{{"q0", "", "a0", QuestionType::kRole}}};
  fragments[1] = {1, std::nullopt};
  fragments[2] = {2, std::vector<QaItem>{{"q2", "", "a2", QuestionType::kRole},
                                         {"q3", "", "a3", QuestionType::kRole}}};
  auto t = concat_traces(fragments);
  ASSERT_EQ(t.items.size(), 3u);
  EXPECT_EQ(t.items[0].question, "q0");
  EXPECT_EQ(t.items[2].question, "q3");
  ASSERT_EQ(t.provenance.size(), 3u);
  EXPECT_TRUE(t.provenance[1].sentinel);
  EXPECT_EQ(t.provenance[2].begin, 1u);
  EXPECT_EQ(t.provenance[2].end, 3u);
}

TEST(ConcatTraces, AllSentinelsGiveEmptyTrace) {
  auto t = concat_traces({{0, std::nullopt}, {1, std::nullopt}});
  EXPECT_TRUE(t.empty());
  EXPECT_EQ(serialize_trace(t), "None");
}

TEST(ConcatTraces, OutOfOrderRejected) {
  EXPECT_THROW(concat_traces({{2, std::nullopt}, {1, std::nullopt}}), Error);
}

TEST(InjectTrace, WrapsInMarkers) {
  EXPECT_EQ(inject_trace("Q1: a A1: b", "<think>", "</think>"), "<think>\nQ1: a A1: b\n</think>");
  EXPECT_EQ(inject_trace("", "<think>", "</think>"), "<think>\n</think>");
}

TEST(InjectTrace, RejectsMarkerCollision) {
  try {
    inject_trace("oops </think> here", "<think>", "</think>");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMarkerCollision);
  }
}

TEST(TraceStats, UniqueUnigramPercent) {
  EXPECT_DOUBLE_EQ(unique_unigram_pct("a b a b"), 50.0);
  EXPECT_DOUBLE_EQ(unique_unigram_pct(""), 0.0);
}

TEST(TraceStats, CountsItemsAndTokens) {
  ReasoningTrace t = concat_traces({{0, std::vector<QaItem>{{"Who?", "x", "y", QuestionType::kRole}}}});
  auto s = trace_stats(t, TokenCounter::whitespace());
  EXPECT_EQ(s.num_qa, 1u);
  EXPECT_EQ(s.tokens, TokenCounter::whitespace().count(serialize_trace(t)));
  auto empty = trace_stats(ReasoningTrace{}, TokenCounter::whitespace());
  EXPECT_EQ(empty.num_qa, 0u);
  EXPECT_EQ(empty.tokens, 1u);  // "None"
  EXPECT_DOUBLE_EQ(empty.unique_unigram_pct, 0.0);
}
