#include <gtest/gtest.h>

#include "cwms/checkpoint_io.hpp"
#include "cwms/curriculum.hpp"
#include "cwms/error.hpp"
#include "cwms/rng.hpp"
#include "support.hpp"

namespace cwms {
namespace {

CurriculumConfig small_config(std::uint64_t seed) {
  CurriculumConfig c;
  c.settings.seed = seed;
  c.settings.weak_pair_count = 600;
  c.dim = 16;
  c.buckets = 1 << 14;
  return c;
}

struct CurriculumFixture : ::testing::Test {
  Benchmark bench = generate_benchmark(testing::tiny_spec(3));
  StageData stage_data{bench.corpus, bench.train, bench.qrels};
  CurriculumData data{bench.corpus, bench.train, bench.validation, bench.qrels};
  CurriculumConfig config = small_config(9);
};

TEST(StagePlan, DefaultsAndValidation) {
  const auto s1 = StagePlan::defaults(StageTag::Stage1);
  EXPECT_EQ(s1.epochs, 3u);
  EXPECT_EQ(s1.learning_rate, 0.1);
  EXPECT_EQ(s1.data_source, DataSource::WeakPairs);
  const auto s2 = StagePlan::defaults(StageTag::Stage2);
  EXPECT_EQ(s2.epochs, 2u);
  EXPECT_EQ(s2.learning_rate, 0.05);
  EXPECT_FALSE(s2.refresh_negatives_each_epoch);
  const auto s3 = StagePlan::defaults(StageTag::Stage3);
  EXPECT_EQ(s3.learning_rate, 0.02);
  EXPECT_EQ(s3.data_source, DataSource::FilteredMinedPairs);
  EXPECT_TRUE(s3.refresh_negatives_each_epoch);
  EXPECT_THROW(StagePlan::defaults(StageTag::Base), Error);

  StagePlan bad = s2;
  bad.refresh_negatives_each_epoch = true;
  EXPECT_THROW(bad.validate(), Error);
  bad = s1;
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST_F(CurriculumFixture, StageOrderViolationNamesBothStages) {
  const EmbedderCheckpoint base = initial_embedder(config);
  try {
    run_embedder_stage(StagePlan::defaults(StageTag::Stage2), base, stage_data, config.settings);
    FAIL() << "expected a stage-order error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("stage1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("base"), std::string::npos) << msg;
  }
  const RerankerCheckpoint rbase = initial_reranker(config, base);
  const std::vector<std::vector<TrainingExample>> none{{}};
  EXPECT_THROW(run_reranker_stage(StagePlan::defaults(StageTag::Stage3), rbase, none, bench.corpus,
                                  base, config.settings),
               Error);
}

TEST_F(CurriculumFixture, Stage1TrainsWithoutNegativesAndKeepsAMinedCopy) {
  const EmbedderCheckpoint base = initial_embedder(config);
  const auto r = run_embedder_stage(StagePlan::defaults(StageTag::Stage1), base, stage_data, config.settings);
  EXPECT_EQ(r.checkpoint.stage(), StageTag::Stage1);
  EXPECT_NE(r.checkpoint, base);
  ASSERT_EQ(r.mined_per_epoch.size(), 1u);
  EXPECT_EQ(r.mined_per_epoch[0].size(), config.settings.weak_pair_count);
}

TEST_F(CurriculumFixture, Stage3RefreshIsAFixedPointWhenWeightsAreFrozen) {
  EmbedderCheckpoint prev = initial_embedder(config);
  prev.set_stage(StageTag::Stage2);
  StagePlan frozen = StagePlan::defaults(StageTag::Stage3);
  frozen.learning_rate = 0;
  const auto r = run_embedder_stage(frozen, prev, stage_data, config.settings);
  ASSERT_EQ(r.mined_per_epoch.size(), 2u);
  EXPECT_EQ(r.mined_per_epoch[0], r.mined_per_epoch[1]);
  // Only filtered queries take part.
  const auto kept = filter_stage3_queries(bench.train, bench.qrels);
  for (const auto& ex : r.mined_per_epoch[0]) EXPECT_TRUE(kept.contains(ex.query_id));
}

TEST_F(CurriculumFixture, Stage3RefreshChangesNegativesWhenTraining) {
  EmbedderCheckpoint prev = initial_embedder(config);
  prev.set_stage(StageTag::Stage2);
  const auto r = run_embedder_stage(StagePlan::defaults(StageTag::Stage3), prev, stage_data, config.settings);
  ASSERT_EQ(r.mined_per_epoch.size(), 2u);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < r.mined_per_epoch[0].size(); ++i) {
    changed += r.mined_per_epoch[0][i].hard_negative_ids != r.mined_per_epoch[1][i].hard_negative_ids;
  }
  EXPECT_GE(changed, 1u);
}

TEST_F(CurriculumFixture, Stage2MinesOnceWithTheInputCheckpoint) {
  const EmbedderCheckpoint base = initial_embedder(config);
  const auto s1 = run_embedder_stage(StagePlan::defaults(StageTag::Stage1), base, stage_data, config.settings);
  const auto s2 = run_embedder_stage(StagePlan::defaults(StageTag::Stage2), s1.checkpoint, stage_data, config.settings);
  ASSERT_EQ(s2.mined_per_epoch.size(), 1u);
  MiningConfig mining = config.settings.mining;
  mining.seed = mix_seed(config.settings.seed, "mining");
  const Index idx = build_index(s1.checkpoint, bench.corpus);
  auto expected = attach_negatives(supervised_examples(bench.train, bench.qrels, StageTag::Stage2),
                                   s1.checkpoint, idx, bench.qrels, mining);
  EXPECT_EQ(s2.mined_per_epoch[0], expected);
}

struct FullRun : CurriculumFixture {
  testing::TempDir dir{"curriculum"};
  CheckpointRegistry registry;
  void SetUp() override { registry = run_curriculum(data, config, dir.path()); }
};

TEST_F(FullRun, RegistryHasEightEntriesWithMetricsAndSavesItself) {
  EXPECT_EQ(registry.size(), 8u);
  EXPECT_TRUE(registry.missing().empty());
  for (const auto& e : registry.entries()) {
    if (e.component == ComponentKind::Embedder) {
      EXPECT_TRUE(e.metrics.contains("recall@20"));
      EXPECT_TRUE(e.metrics.contains("recall@60"));
      EXPECT_TRUE(e.metrics.contains("recall@100"));
    } else {
      EXPECT_TRUE(e.metrics.contains("mrr"));
      EXPECT_TRUE(e.metrics.contains("ndcg@10"));
      EXPECT_EQ(e.feature_embedder_path, checkpoint_filename(ComponentKind::Embedder, e.stage));
    }
    for (const auto& [name, v] : e.metrics) {
      EXPECT_GE(v, 0.0) << name;
      EXPECT_LE(v, 1.0) << name;
    }
  }
  EXPECT_EQ(CheckpointRegistry::load(dir / "registry.json"), registry);
  EXPECT_EQ(load_embedder(dir / "embedder-stage3.cwms").stage(), StageTag::Stage3);
  EXPECT_EQ(load_reranker(dir / "reranker-base.cwms").stage(), StageTag::Base);
}

TEST_F(FullRun, StoredMetricsAreRecomputable) {
  const auto loaded = CheckpointRegistry::load(dir / "registry.json");
  for (const auto& e : loaded.entries()) {
    EXPECT_EQ(recompute_metrics(loaded, e.component, e.stage, bench.corpus, bench.validation,
                                bench.qrels, config),
              e.metrics)
        << to_string(e.component) << "/" << to_string(e.stage);
  }
}

TEST_F(FullRun, MissingEarlierArtifactBreaksLaterStages) {
  std::filesystem::remove(dir / "embedder-stage1.cwms");
  EXPECT_NO_THROW(registry.require(ComponentKind::Embedder, StageTag::Base));
  try {
    registry.require(ComponentKind::Embedder, StageTag::Stage2);
    FAIL() << "expected a registry invariant error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
    EXPECT_NE(std::string(e.what()).find("embedder-stage1.cwms"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(registry.missing().empty());
}

TEST_F(FullRun, RerunIsBitIdentical) {
  testing::TempDir again("curriculum-again");
  const auto second = run_curriculum(data, config, again.path());
  EXPECT_EQ(second, registry);
  for (const auto& entry : std::filesystem::directory_iterator(dir.path())) {
    const auto name = entry.path().filename();
    EXPECT_EQ(testing::read_file(entry.path()), testing::read_file(again.path() / name)) << name;
  }
}

}  // namespace
}  // namespace cwms
