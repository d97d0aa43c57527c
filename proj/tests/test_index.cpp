#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cwms/error.hpp"
#include "cwms/index.hpp"
#include "oracles.hpp"

namespace cwms {
namespace {

using testing::full_sort_oracle;

TEST(BuildIndex, ColumnsAreDocumentEmbeddings) {
  const auto emb = EmbedderCheckpoint::initialize(4, 16, 4096);
  const Corpus c({{"a", "first text"}, {"b", "second text"}, {"c", ""}});
  const Index idx = build_index(emb, c);
  ASSERT_EQ(idx.size(), 3u);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Embedding e = embed(emb, c[i].text);
    for (std::uint32_t r = 0; r < 16; ++r) EXPECT_EQ(idx.vector(i)[r], e[r]);
  }
  EXPECT_EQ(build_index(emb, c), idx);
  EXPECT_EQ(build_index(emb, Corpus(std::vector<Document>{{"x", "y z"}})).size(), 1u);
  EXPECT_THROW(build_index(emb, Corpus{}), Error);
}

TEST(Retrieve, KBeyondCorpusReturnsEverythingSorted) {
  const auto emb = EmbedderCheckpoint::initialize(4, 16, 4096);
  const Corpus c({{"a", "alpha"}, {"b", "beta"}, {"c", "gamma"}});
  const Index idx = build_index(emb, c);
  const Embedding q = embed(emb, "alphabet");
  const auto r = retrieve(idx, q, 10);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_TRUE(std::is_sorted(r.begin(), r.end(), ranks_before));
  EXPECT_THROW(retrieve(idx, q, 0), Error);
}

TEST(Retrieve, BitEqualScoresBreakTiesByAscendingId) {
  // Same vector under several ids, inserted in descending-id order.
  std::vector<double> v{0.6, 0.8, 0.6, 0.8, 0.6, 0.8, 1.0, 0.0};
  const Index idx({"z", "m", "a", "q"}, 2, v, "test");
  const std::vector<double> q{0.6, 0.8};
  const auto r = retrieve(idx, q, 4);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[0].id, "a");
  EXPECT_EQ(r[1].id, "m");
  EXPECT_EQ(r[2].id, "z");
  EXPECT_EQ(r[3].id, "q");
}

TEST(Retrieve, MatchesFullSortOracleOnRandomIndices) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> q;
    const Index idx = testing::random_tied_index(rng, q);
    const std::size_t k = 1 + rng() % (idx.size() + 10);
    ASSERT_EQ(retrieve(idx, q, k), full_sort_oracle(idx, q, k)) << "trial " << trial;
  }
}

}  // namespace
}  // namespace cwms
