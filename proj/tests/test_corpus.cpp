#include <gtest/gtest.h>

#include <algorithm>

#include "cwms/corpus.hpp"
#include "cwms/error.hpp"
#include "cwms/text.hpp"
#include "support.hpp"

namespace cwms {
namespace {

using testing::TempDir;
using testing::write_file;

TEST(LoadCorpus, ReadsValidFile) {
  TempDir dir("corpus");
  write_file(dir / "c.jsonl",
             R"({"id":"d1","text":"First Doc"})"
             "\n"
             R"({"id":"d2","text":"second"})"
             "\n"
             R"({"id":"d3","text":"third  one"})"
             "\n");
  const Corpus c = load_corpus(dir / "c.jsonl");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.at("d1").text, "first doc");
  EXPECT_EQ(c.at("d3").text, "third one");
  EXPECT_EQ(c[1].id, "d2");
  EXPECT_EQ(c.position("d3"), 2u);
}

TEST(LoadCorpus, DuplicateIdNamesIdAndLine) {
  TempDir dir("corpus");
  write_file(dir / "c.jsonl",
             R"({"id":"d1","text":"a"})"
             "\n"
             R"({"id":"d2","text":"b"})"
             "\n"
             R"({"id":"d3","text":"c"})"
             "\n"
             R"({"id":"d1","text":"d"})"
             "\n");
  try {
    load_corpus(dir / "c.jsonl");
    FAIL() << "expected duplicate-id error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("\"d1\""), std::string::npos) << msg;
    EXPECT_NE(msg.find(":4:"), std::string::npos) << msg;
  }
}

TEST(LoadCorpus, MalformedLineNamesLine) {
  TempDir dir("corpus");
  write_file(dir / "c.jsonl", R"({"id":"d1","text":"a"})"
                              "\n{not json\n");
  try {
    load_corpus(dir / "c.jsonl");
    FAIL() << "expected format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(LoadCorpus, FullwidthTextIsStoredInNfcAndIsAFixedPoint) {
  TempDir dir("corpus");
  // U+FF21 stays U+FF21 under NFC; A + combining ring composes to U+00C5.
  write_file(dir / "c.jsonl", "{\"id\":\"d1\",\"text\":\"\xef\xbc\xa1\"}\n"
                              "{\"id\":\"d2\",\"text\":\"A\xcc\x8a\"}\n");
  const Corpus c = load_corpus(dir / "c.jsonl");
  EXPECT_EQ(c.at("d1").text, "\xef\xbc\xa1");
  EXPECT_EQ(c.at("d2").text, "\xc3\x85");
  save_corpus(c, dir / "again.jsonl");
  EXPECT_EQ(load_corpus(dir / "again.jsonl"), c);
}

TEST(Corpus, RoundTrip) {
  TempDir dir("corpus");
  const Corpus c({{"a", "x y"}, {"b", "\xe4\xb8\xad\xe6\x96\x87"}, {"c", "quote \" and \\"}});
  save_corpus(c, dir / "c.jsonl");
  const Corpus back = load_corpus(dir / "c.jsonl");
  ASSERT_EQ(back.size(), c.size());
  for (const auto& d : c) EXPECT_EQ(back.at(d.id).text, d.text);
}

TEST(Corpus, RejectsEmptyAndDuplicateIdsAndReportsUnknown) {
  EXPECT_THROW(Corpus(std::vector<Document>{{"", "x"}}), Error);
  EXPECT_THROW(Corpus(std::vector<Document>{{"a", "x"}, {"a", "y"}}), Error);
  const Corpus c(std::vector<Document>{{"a", "x"}});
  try {
    c.at("zz");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotFound);
  }
}

TEST(Qrels, TrecLayoutWithBinaryGrades) {
  TempDir dir("qrels");
  write_file(dir / "q.txt", "q1 0 d1 1\nq1 0 d2 0\nq2 0 d3 2\n");
  const Qrels q = load_qrels(dir / "q.txt");
  EXPECT_TRUE(q.is_relevant("q1", "d1"));
  EXPECT_FALSE(q.is_relevant("q1", "d2"));
  EXPECT_TRUE(q.is_relevant("q2", "d3"));
  EXPECT_FALSE(q.has_judgments("q3"));
  EXPECT_TRUE(q.relevant("q3").empty());
  save_qrels(q, dir / "back.txt");
  EXPECT_EQ(load_qrels(dir / "back.txt"), q);
}

TEST(Qrels, ValidateAgainstCorpusRejectsUnknownDocs) {
  Qrels q;
  q.add("q1", "d9");
  EXPECT_THROW(q.validate_against(Corpus(std::vector<Document>{{"d1", "x"}})), Error);
}

TEST(TrainingExample, InvariantsAreChecked) {
  TrainingExample ok{"q", "text", "d1", {"d2", "d3"}, StageTag::Stage2};
  EXPECT_NO_THROW(validate_example(ok));
  TrainingExample self = ok;
  self.hard_negative_ids.push_back("d1");
  EXPECT_THROW(validate_example(self), Error);
  TrainingExample dup = ok;
  dup.hard_negative_ids.push_back("d2");
  EXPECT_THROW(validate_example(dup), Error);
}

TEST(Examples, RoundTrip) {
  TempDir dir("ex");
  const std::vector<TrainingExample> ex{{"q1", "abc", "d1", {"d2"}, StageTag::Stage3},
                                        {"w0", "xyz", "d2", {}, StageTag::Stage1}};
  save_examples(ex, dir / "e.jsonl");
  EXPECT_EQ(load_examples(dir / "e.jsonl"), ex);
}

TEST(WeakPairs, ExactCountTaggedStage1WithNoNegatives) {
  const Corpus c({{"d1", "the quick brown fox jumps over the lazy dog"}, {"d2", "short text here"}});
  const auto pairs = generate_weak_pairs(c, 5, 42);
  ASSERT_EQ(pairs.size(), 5u);
  for (const auto& p : pairs) {
    EXPECT_TRUE(c.contains(p.positive_id));
    EXPECT_TRUE(p.hard_negative_ids.empty());
    EXPECT_EQ(p.stage_tag, StageTag::Stage1);
  }
  EXPECT_EQ(generate_weak_pairs(c, 5, 42), pairs);
  EXPECT_NE(generate_weak_pairs(c, 5, 43), pairs);
}

TEST(WeakPairs, SpansOfShortDocumentAreClippedSubstrings) {
  const std::string text = "abcdefghij";
  const Corpus c(std::vector<Document>{{"only", text}});
  for (const auto& p : generate_weak_pairs(c, 100, 9)) {
    EXPECT_NE(text.find(p.query_text), std::string::npos) << p.query_text;
    EXPECT_GE(p.query_text.size(), 8u);
    EXPECT_LE(p.query_text.size(), 10u);
  }
}

TEST(WeakPairs, SpansAreCodePointAlignedSubstrings) {
  const std::string text = "\xe4\xb8\xad\xe6\x96\x87\xe6\xb3\x95\xe5\xbe\x8b\xe6\xa3\x80\xe7\xb4\xa2"
                           "\xe7\xb3\xbb\xe7\xbb\x9f\xe6\xb5\x8b\xe8\xaf\x95\xe6\x95\xb0\xe6\x8d\xae";
  const Corpus c(std::vector<Document>{{"zh", text}});
  for (const auto& p : generate_weak_pairs(c, 50, 3)) {
    EXPECT_NE(text.find(p.query_text), std::string::npos);
    EXPECT_NO_THROW(normalize_text(p.query_text));  // still valid UTF-8
    EXPECT_GE(char_length(p.query_text), 8u);
  }
}

TEST(WeakPairs, RejectsEmptyCorpusAndZeroCount) {
  EXPECT_THROW(generate_weak_pairs(Corpus{}, 3, 1), Error);
  EXPECT_THROW(generate_weak_pairs(Corpus(std::vector<Document>{{"a", "text"}}), 0, 1), Error);
}

TEST(Stage3Filter, MatchesBruteForcePredicates) {
  std::vector<Query> qs;
  Qrels qrels;
  const char* texts[] = {"long enough query", "abc", "abcd", "x", "another query",
                         "q", "four", "judged but short", "unjudged text", "ok!!"};
  for (int i = 0; i < 10; ++i) {
    qs.push_back({"q" + std::to_string(i), texts[i]});
    if (i % 3 != 2) qrels.add("q" + std::to_string(i), "d" + std::to_string(i));
  }
  const QuerySet queries(qs);
  const QuerySet kept = filter_stage3_queries(queries, qrels);

  std::vector<std::string> oracle;
  for (const auto& q : qs) {
    if (!qrels.relevant(q.id).empty() && char_length(q.text) >= 4) oracle.push_back(q.id);
  }
  std::vector<std::string> got;
  for (const auto& q : kept) got.push_back(q.id);
  EXPECT_EQ(got, oracle);
}

TEST(Stage3Filter, KeepsJudgedLongQueryAndDropsUnjudged) {
  Qrels qrels;
  qrels.add("a", "d1");
  qrels.add("a", "d2");
  const QuerySet qs({{"a", "a twenty char query!"}, {"b", "no judgments at all"}});
  const QuerySet kept = filter_stage3_queries(qs, qrels);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].id, "a");
}

TEST(SupervisedExamples, OnePerRelevantDocumentSkippingUnjudged) {
  Qrels qrels;
  qrels.add("a", "d2");
  qrels.add("a", "d1");
  const QuerySet qs({{"a", "query a"}, {"b", "query b"}});
  const auto ex = supervised_examples(qs, qrels, StageTag::Stage2);
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_EQ(ex[0].query_id, "a");
  EXPECT_EQ(ex[0].positive_id, "d1");
  EXPECT_EQ(ex[1].positive_id, "d2");
  EXPECT_EQ(ex[0].stage_tag, StageTag::Stage2);
}

}  // namespace
}  // namespace cwms
