#include <gtest/gtest.h>

#include <algorithm>

#include "cwms/checkpoint_io.hpp"
#include "cwms/error.hpp"
#include "cwms/pipeline.hpp"
#include "support.hpp"

namespace cwms {
namespace {

struct PipelineFixture : ::testing::Test {
  Benchmark bench = generate_benchmark(testing::tiny_spec(21));
  EmbedderCheckpoint emb = EmbedderCheckpoint::initialize(4, 16, 1 << 14);
  EmbedderCheckpoint other = EmbedderCheckpoint::initialize(5, 16, 1 << 14);
  Index index = build_index(emb, bench.corpus);
  Index other_index = build_index(other, bench.corpus);
  RerankerCheckpoint reranker{{0.75, 0.5, -0.25, 0.375, 0.125}, StageTag::Stage2, 1, fingerprint(emb)};
};

TEST_F(PipelineFixture, FinalListIsRerankOfCandidates) {
  const Pipeline p(bench.corpus, emb, index, reranker, emb, index, 60, 10);
  const CorpusStats stats = CorpusStats::of(bench.corpus);
  for (const auto& q : bench.test) {
    const RetrievalResult r = p.run(q);
    const auto expected_candidates = retrieve(index, embed(emb, q.text), 60);
    ASSERT_EQ(r.candidates, expected_candidates);
    std::vector<ScoredDoc> oracle;
    for (const auto& c : expected_candidates) {
      oracle.push_back({c.id, score(reranker, cross_features(q, bench.corpus.at(c.id), emb, stats))});
    }
    std::sort(oracle.begin(), oracle.end(), ranks_before);
    oracle.resize(10);
    ASSERT_EQ(r.final_list.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
      EXPECT_EQ(r.final_list[i].id, oracle[i].id);
      EXPECT_NEAR(r.final_list[i].score, oracle[i].score, 1e-12);
    }
    EXPECT_GE(r.timing.embed_seconds, 0.0);
    EXPECT_GE(r.timing.rerank_seconds, 0.0);
  }
}

TEST_F(PipelineFixture, FinalIdsAreSubsetOfCandidates) {
  const Pipeline p(bench.corpus, emb, index, reranker, emb, index, 20, 7);
  for (const auto& q : bench.validation) {
    const RetrievalResult r = p.run(q);
    std::set<std::string> cand;
    for (const auto& c : r.candidates) cand.insert(c.id);
    std::set<std::string> fin;
    for (const auto& id : r.final_ids()) {
      EXPECT_TRUE(cand.contains(id));
      fin.insert(id);
    }
    EXPECT_EQ(fin.size(), r.final_list.size());
  }
}

TEST_F(PipelineFixture, SingletonBudgetReturnsEmbedderTop1) {
  const Pipeline p(bench.corpus, emb, index, reranker, emb, index, 1, 1);
  for (const auto& q : bench.test) {
    const auto top = retrieve(index, embed(emb, q.text), 1);
    ASSERT_EQ(p.run(q).final_ids(), std::vector<std::string>{top[0].id});
  }
}

TEST_F(PipelineFixture, CorpusSmallerThanBudget) {
  const Corpus small(std::vector<Document>{{"a", "one two"}, {"b", "three four"}});
  const Index si = build_index(emb, small);
  const Pipeline p(small, emb, si, reranker, emb, si, 60, 10);
  EXPECT_EQ(p.run({"q", "one"}).final_list.size(), 2u);
}

TEST_F(PipelineFixture, MismatchedIndexOrFeatureEmbedderIsRejected) {
  EXPECT_THROW(Pipeline(bench.corpus, emb, other_index, reranker, emb, index, 60, 10), Error);
  EXPECT_THROW(Pipeline(bench.corpus, other, other_index, reranker, other, other_index, 60, 10), Error);
  EXPECT_THROW(Pipeline(bench.corpus, emb, index, reranker, emb, index, 5, 10), Error);
  EXPECT_THROW(Pipeline(bench.corpus, emb, index, reranker, emb, index, 5, 0), Error);
  // A stage-k embedder may feed candidates to a reranker trained against another.
  RerankerCheckpoint r2 = reranker;
  r2.set_feature_embedder_id(fingerprint(other));
  EXPECT_NO_THROW(Pipeline(bench.corpus, emb, index, r2, other, other_index, 60, 10));
}

TEST_F(PipelineFixture, ManifestRoundTripAndLoadedPipelineMatchesInMemory) {
  testing::TempDir dir("manifest");
  std::filesystem::create_directories(dir / "models");
  save_checkpoint(emb, dir / "models/emb.cwms");
  save_checkpoint(reranker, dir / "models/rr.cwms");
  PipelineManifest m;
  m.id = "m1";
  m.embedder_path = (dir / "models/emb.cwms").string();
  m.reranker_path = (dir / "models/rr.cwms").string();
  m.feature_embedder_path = (dir / "models/emb.cwms").string();
  m.embedder_stage = StageTag::Base;
  m.reranker_stage = StageTag::Stage2;
  std::filesystem::create_directories(dir / "manifests");
  save_manifest(m, dir / "manifests/m1.json");
  // Paths are stored relative to the manifest so the tree can move.
  EXPECT_EQ(testing::read_file(dir / "manifests/m1.json").find(dir.path().string()), std::string::npos);
  const PipelineManifest back = load_manifest(dir / "manifests/m1.json");
  EXPECT_EQ(back.id, "m1");
  EXPECT_EQ(back.k_embed, 60u);
  EXPECT_EQ(back.k_rerank, 10u);
  EXPECT_EQ(back.embedder_stage, StageTag::Base);
  EXPECT_EQ(back.reranker_stage, StageTag::Stage2);
  EXPECT_EQ(std::filesystem::weakly_canonical(back.embedder_path),
            std::filesystem::weakly_canonical(m.embedder_path));

  const LoadedPipeline lp(back, bench.corpus);
  const Pipeline mem(bench.corpus, emb, index, reranker, emb, index, 60, 10);
  for (const auto& q : bench.test) EXPECT_EQ(lp.pipeline().run(q).final_list, mem.run(q).final_list);

  PipelineManifest mislabeled = back;
  mislabeled.embedder_stage = StageTag::Stage3;
  EXPECT_THROW(LoadedPipeline(mislabeled, bench.corpus), Error);

  PipelineManifest bad = m;
  bad.k_rerank = 100;
  EXPECT_THROW(bad.validate(), Error);
  testing::write_file(dir / "broken.json", "{\"id\": 3");
  EXPECT_THROW(load_manifest(dir / "broken.json"), Error);
}

TEST(Latency, DeploymentFigures) {
  const LatencySummary s = summarize_latency(618, 579, 389);
  EXPECT_EQ(s.delta, 39);
  EXPECT_NEAR(s.per_query_delta, 0.1003, 1e-4);
  EXPECT_NEAR(s.relative_increase, 0.0674, 1e-4);
}

RetrievalResult timed(const std::string& id, double seconds) {
  RetrievalResult r;
  r.query_id = id;
  r.timing.rerank_seconds = seconds;
  return r;
}

TEST(Latency, ReportFromResults) {
  const std::vector<RetrievalResult> cand{timed("a", 1), timed("b", 2), timed("c", 3)};
  const std::vector<RetrievalResult> base{timed("c", 1), timed("a", 1), timed("b", 1)};
  const LatencySummary s = latency_report(cand, base);
  EXPECT_EQ(s.query_count, 3u);
  EXPECT_EQ(s.delta, 3);
  EXPECT_EQ(s.per_query_delta, 1.0);
  EXPECT_EQ(s.relative_increase, 1.0);
  const LatencySummary same = latency_report(cand, cand);
  EXPECT_EQ(same.delta, 0);
  EXPECT_EQ(same.relative_increase, 0);
  EXPECT_THROW(latency_report(cand, {timed("a", 1), timed("b", 1), timed("z", 1)}), Error);
  EXPECT_THROW(latency_report(cand, {timed("a", 1)}), Error);
}

TEST(RunFile, WriteReadRoundTrip) {
  testing::TempDir dir("run");
  RetrievalResult a;
  a.query_id = "q1";
  a.final_list = {{"d3", 0.9}, {"d1", 0.5}, {"d2", 0.5}};
  RetrievalResult b;
  b.query_id = "q2";
  b.final_list = {{"d9", 1.5}};
  write_run({a, b}, "sys", dir / "run.txt");
  const std::string text = testing::read_file(dir / "run.txt");
  EXPECT_EQ(text.substr(0, text.find('\n')).rfind("q1 Q0 d3 1 ", 0), 0u) << text;
  const auto back = read_run(dir / "run.txt");
  EXPECT_EQ(back.at("q1"), (std::vector<std::string>{"d3", "d1", "d2"}));
  EXPECT_EQ(back.at("q2"), std::vector<std::string>{"d9"});
  testing::write_file(dir / "bad.txt", "q1 Q0 d1\n");
  EXPECT_THROW(read_run(dir / "bad.txt"), Error);
}

}  // namespace
}  // namespace cwms
