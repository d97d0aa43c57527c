#include <gtest/gtest.h>

#include <json.hpp>
#include <random>
#include <sstream>

#include "cwms/abtest.hpp"
#include "cwms/checkpoint_io.hpp"
#include "cwms/error.hpp"
#include "cwms/text.hpp"
#include "support.hpp"

namespace cwms {
namespace {

ABPair make_pair(const std::string& id, bool auto_tie = false) {
  ABPair p;
  p.pair_id = id;
  p.query_id = "q-" + id;
  p.query_text = "query " + id;
  p.dataset = "default";
  p.left = {{"d1", "left text"}};
  p.right = {{auto_tie ? "d1" : "d2", auto_tie ? "left text" : "right text"}};
  p.auto_tie = auto_tie;
  return p;
}

// The judge's choice that makes `winner` win given where system A sits.
Choice choice_for(System winner, Side a_side) {
  const bool a_left = a_side == Side::Left;
  return (winner == System::A) == a_left ? Choice::Left : Choice::Right;
}

// Planted session: `wins_b` candidate wins, `wins_a` baseline wins, `judged`
// judged ties and `auto_ties` auto-tie pairs, in shuffled order.
ABSession planted(std::size_t wins_b, std::size_t wins_a, std::size_t judged, std::size_t auto_ties,
                  std::uint64_t seed) {
  std::vector<int> kinds;
  kinds.insert(kinds.end(), wins_b, 0);
  kinds.insert(kinds.end(), wins_a, 1);
  kinds.insert(kinds.end(), judged, 2);
  kinds.insert(kinds.end(), auto_ties, 3);
  std::mt19937_64 rng(seed);
  std::shuffle(kinds.begin(), kinds.end(), rng);
  ABSession s;
  s.session_id = "planted";
  s.candidate = System::B;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const std::string id = "p" + std::to_string(i);
    const Side side = (rng() & 1) ? Side::Left : Side::Right;
    s.add_pair(make_pair(id, kinds[i] == 3), {side, 1.5, 1.6});
  }
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const std::string id = "p" + std::to_string(i);
    const Side side = s.sealed(id).system_a_side;
    if (kinds[i] == 0) s.record_judgment(id, choice_for(System::B, side));
    if (kinds[i] == 1) s.record_judgment(id, choice_for(System::A, side));
    if (kinds[i] == 2) s.record_judgment(id, Choice::Tie);
  }
  return s;
}

TEST(Aggregate, PlantedPreferenceCounts) {
  // 72 ties split arbitrarily between judged and automatic.
  const ABReport r = aggregate(planted(173, 144, 50, 22, 1));
  EXPECT_EQ(r.totals.wins_b, 173u);
  EXPECT_EQ(r.totals.wins_a, 144u);
  EXPECT_EQ(r.totals.ties(), 72u);
  EXPECT_EQ(r.totals.pairs, 389u);
  EXPECT_FALSE(r.partial);
  ASSERT_TRUE(r.win_rate_excluding_ties);
  EXPECT_DOUBLE_EQ(*r.win_rate_excluding_ties, 173.0 / 317.0);
  EXPECT_NEAR(*r.win_rate_excluding_ties, 0.546, 0.001);
  EXPECT_NEAR(r.latency.per_query_delta, 0.1, 1e-12);
}

TEST(Aggregate, AllTiesLeavesRateAbsent) {
  const ABReport r = aggregate(planted(0, 0, 5, 7, 2));
  EXPECT_FALSE(r.win_rate_excluding_ties);
  EXPECT_EQ(r.totals.ties(), r.totals.pairs);
  EXPECT_FALSE(win_rate(0, 0));
  EXPECT_EQ(*win_rate(1, 3), 0.25);
  const auto j = nlohmann::json::parse(report_json(r));
  EXPECT_TRUE(j.at("win_rate_excluding_ties").is_null());
}

TEST(Aggregate, MatchesBruteForceRecountOverJudgmentLog) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    ABSession s;
    s.candidate = trial % 2 ? System::A : System::B;
    std::map<std::string, Side> planted_sides;
    const std::size_t n = 1 + rng() % 60;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "x" + std::to_string(i);
      const Side side = (rng() & 1) ? Side::Left : Side::Right;
      planted_sides[id] = side;
      s.add_pair(make_pair(id, rng() % 7 == 0), {side, 0, 0});
    }
    for (const auto& p : s.pairs()) {
      if (p.auto_tie || rng() % 5 == 0) continue;  // leave some pending
      s.record_judgment(p.pair_id, static_cast<Choice>(rng() % 3));
    }
    std::size_t a = 0, b = 0, ties = 0, pending = 0;
    for (const auto& p : s.pairs()) {
      if (p.auto_tie) {
        ++ties;
        continue;
      }
      const auto it = s.judgments().find(p.pair_id);
      if (it == s.judgments().end()) {
        ++pending;
      } else if (it->second == Choice::Tie) {
        ++ties;
      } else {
        const bool picked_left = it->second == Choice::Left;
        ((planted_sides[p.pair_id] == Side::Left) == picked_left ? a : b)++;
      }
    }
    const ABReport r = aggregate(s);
    ASSERT_EQ(r.totals.wins_a, a);
    ASSERT_EQ(r.totals.wins_b, b);
    ASSERT_EQ(r.totals.ties(), ties);
    ASSERT_EQ(r.pending, pending);
    ASSERT_EQ(r.partial, pending > 0);
    if (a + b > 0) {
      const double cand = s.candidate == System::A ? a : b;
      ASSERT_DOUBLE_EQ(*r.win_rate_excluding_ties, cand / static_cast<double>(a + b));
    }
  }
}

TEST(Aggregate, InvariantUnderJudgmentArrivalOrder) {
  const ABSession ref = planted(20, 15, 5, 3, 4);
  std::vector<std::pair<std::string, Choice>> log(ref.judgments().begin(), ref.judgments().end());
  std::mt19937_64 rng(9);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(log.begin(), log.end(), rng);
    ABSession s;
    s.session_id = ref.session_id;
    for (const auto& p : ref.pairs()) s.add_pair(p, ref.sealed(p.pair_id));
    for (const auto& [id, c] : log) s.record_judgment(id, c);
    EXPECT_EQ(report_json(aggregate(s)), report_json(aggregate(ref)));
  }
}

TEST(RecordJudgment, Errors) {
  ABSession s;
  s.add_pair(make_pair("a"), {Side::Left, 0, 0});
  s.add_pair(make_pair("t", true), {Side::Right, 0, 0});
  s.record_judgment("a", Choice::Left);
  EXPECT_EQ(s.judgments().at("a"), Choice::Left);
  const auto kind_of = [&](const std::string& id) -> std::optional<ErrorKind> {
    try {
      s.record_judgment(id, Choice::Right);
    } catch (const Error& e) {
      return e.kind();
    }
    return std::nullopt;
  };
  EXPECT_EQ(kind_of("a"), ErrorKind::Conflict);
  EXPECT_EQ(kind_of("t"), ErrorKind::Conflict);
  EXPECT_EQ(kind_of("nope"), ErrorKind::NotFound);
  EXPECT_EQ(s.judgments().at("a"), Choice::Left);
  EXPECT_TRUE(s.complete());
  EXPECT_EQ(s.next_unjudged(), nullptr);
}

TEST(ParseChoice, AcceptsTheThreeChoices) {
  EXPECT_EQ(parse_choice("left"), Choice::Left);
  EXPECT_EQ(parse_choice("right"), Choice::Right);
  EXPECT_EQ(parse_choice("tie"), Choice::Tie);
  EXPECT_FALSE(parse_choice("both"));
  EXPECT_EQ(to_string(Choice::Right), "right");
}

TEST(DrawAssignment, DeterministicAndFair) {
  std::size_t left = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::string id = "p" + std::to_string(i);
    const Side s = draw_assignment(20240611, id);
    ASSERT_EQ(draw_assignment(20240611, id), s);
    left += s == Side::Left;
  }
  EXPECT_GE(left, 4800u);
  EXPECT_LE(left, 5200u);
}

struct SessionFixture : ::testing::Test {
  Benchmark bench = generate_benchmark(testing::tiny_spec(13));
  EmbedderCheckpoint emb_a = EmbedderCheckpoint::initialize(1, 16, 1 << 14);
  EmbedderCheckpoint emb_b = EmbedderCheckpoint::initialize(2, 16, 1 << 14);
  Index idx_a = build_index(emb_a, bench.corpus);
  Index idx_b = build_index(emb_b, bench.corpus);
  RerankerCheckpoint rr_a = RerankerCheckpoint::initialize(1, fingerprint(emb_a));
  RerankerCheckpoint rr_b = RerankerCheckpoint::initialize(1, fingerprint(emb_b));
  Pipeline sys_a{bench.corpus, emb_a, idx_a, rr_a, emb_a, idx_a, 60, 10};
  Pipeline sys_b{bench.corpus, emb_b, idx_b, rr_b, emb_b, idx_b, 60, 10};
};

TEST_F(SessionFixture, IdenticalSystemsGiveOnlyAutoTies) {
  const ABSession s = build_session(sys_a, "a", sys_a, "a2", bench.test, bench.corpus, 5, "same");
  EXPECT_EQ(s.pairs().size(), bench.test.size());
  EXPECT_EQ(s.judgeable_count(), 0u);
  EXPECT_TRUE(s.complete());
  const ABReport r = aggregate(s);
  EXPECT_EQ(r.totals.auto_ties, bench.test.size());
  EXPECT_FALSE(r.win_rate_excluding_ties);
}

TEST_F(SessionFixture, PairsCarrySnippetsAndSameSeedGivesSameSession) {
  const ABSession s = build_session(sys_a, "a", sys_b, "b", bench.test, bench.corpus, 5, "s");
  EXPECT_GT(s.judgeable_count(), 0u);
  for (const auto& p : s.pairs()) {
    const Side side = s.sealed(p.pair_id).system_a_side;
    EXPECT_EQ(side, draw_assignment(5, p.pair_id));
    const RetrievalResult ra = sys_a.run(bench.test.at(p.query_id));
    const auto& a_payload = side == Side::Left ? p.left : p.right;
    ASSERT_EQ(a_payload.size(), ra.final_list.size());
    for (std::size_t i = 0; i < a_payload.size(); ++i) {
      EXPECT_EQ(a_payload[i].doc_id, ra.final_list[i].id);
      const std::string& full = bench.corpus.at(a_payload[i].doc_id).text;
      EXPECT_EQ(a_payload[i].text, std::string(prefix_chars(full, kSnippetChars)));
    }
  }
  ABSession again = build_session(sys_a, "a", sys_b, "b", bench.test, bench.corpus, 5, "s");
  for (const auto& p : s.pairs()) EXPECT_EQ(again.sealed(p.pair_id).system_a_side, s.sealed(p.pair_id).system_a_side);
  EXPECT_EQ(again.pairs(), s.pairs());
}

TEST_F(SessionFixture, JournalRoundTripAndAppend) {
  testing::TempDir dir("journal");
  ABSession s = build_session(sys_a, "a", sys_b, "b", bench.test, bench.corpus, 5, "s1");
  const auto path = dir / "s1.jsonl";
  SessionJournal::create(path, s);
  EXPECT_EQ(SessionJournal::load(path), s);

  const ABPair* first = s.next_unjudged();
  ASSERT_NE(first, nullptr);
  const std::string id = first->pair_id;
  SessionJournal::append_judgment(path, s, id, Choice::Tie);
  EXPECT_EQ(s.judgments().at(id), Choice::Tie);
  EXPECT_EQ(SessionJournal::load(path), s);
  // A rejected judgment leaves both the file and the session unchanged.
  const std::string before = testing::read_file(path);
  EXPECT_THROW(SessionJournal::append_judgment(path, s, id, Choice::Left), Error);
  EXPECT_EQ(testing::read_file(path), before);
  EXPECT_EQ(s.judgments().at(id), Choice::Tie);

  // Sequence numbers strictly increase; a corrupted sequence is refused.
  std::istringstream lines(before);
  long last = -1;
  for (std::string line; std::getline(lines, line);) {
    const long seq = nlohmann::json::parse(line).at("seq").get<long>();
    EXPECT_GT(seq, last);
    last = seq;
  }
  testing::write_file(dir / "bad.jsonl", before + before.substr(before.rfind('{')));
  EXPECT_THROW(SessionJournal::load(dir / "bad.jsonl"), Error);
}

TEST_F(SessionFixture, JudgeFacingRecordsHaveNoAssignment) {
  const ABSession s = build_session(sys_a, "a", sys_b, "b", bench.test, bench.corpus, 5, "blind");
  for (const auto& p : s.pairs()) {
    const auto j = nlohmann::json::parse(judge_view_json(p));
    for (const auto& [key, value] : j.items()) {
      EXPECT_TRUE(judge_view_fields().contains(key)) << key;
    }
    const std::string text = j.dump();
    for (const char* leak : {"system", "latency", "manifest", "\"a\"", "\"b\""}) {
      EXPECT_EQ(text.find(leak), std::string::npos) << leak;
    }
  }
  for (const char* forbidden : {"system_a_side", "assignment", "manifest_a", "manifest_b"}) {
    EXPECT_FALSE(judge_view_fields().contains(forbidden));
  }
}

}  // namespace
}  // namespace cwms
