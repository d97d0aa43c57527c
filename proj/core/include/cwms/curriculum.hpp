#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cwms/corpus.hpp"
#include "cwms/encoder.hpp"
#include "cwms/evalsel.hpp"
#include "cwms/miner.hpp"
#include "cwms/registry.hpp"
#include "cwms/reranker.hpp"

namespace cwms {

enum class DataSource { WeakPairs, MinedPairs, FilteredMinedPairs };

struct StagePlan {
  StageTag stage = StageTag::Stage1;
  std::size_t epochs = 1;
  double learning_rate = 0.1;
  DataSource data_source = DataSource::WeakPairs;
  bool refresh_negatives_each_epoch = false;

  /// Stage1: 3 epochs @ 0.1 on weak pairs. Stage2: 2 @ 0.05 on pairs mined
  /// once. Stage3: 2 @ 0.02 on filtered queries, negatives re-mined per epoch.
  static StagePlan defaults(StageTag stage);

  /// Throws Error(InvalidArgument): Base plans, refresh outside Stage3, zero
  /// epochs, negative learning rate.
  void validate() const;
};

/// Training inputs shared by every stage.
struct StageData {
  const Corpus& corpus;
  const QuerySet& train_queries;
  const Qrels& qrels;
};

struct StageSettings {
  std::uint64_t seed = 0;
  std::size_t weak_pair_count = 32000;
  MiningConfig mining{};
  std::size_t batch_size = kDefaultBatchSize;
  double tau = kDefaultTemperature;
};

struct EmbedderStageResult {
  EmbedderCheckpoint checkpoint;
  /// Examples with negatives as seen by each epoch. Stages that mine once
  /// hold a single set shared by all epochs.
  std::vector<std::vector<TrainingExample>> mined_per_epoch;
};

/// Trains one embedder stage from `prev` (which must be tagged exactly one
/// stage below). Throws Error(Precondition) naming expected/found stages.
EmbedderStageResult run_embedder_stage(const StagePlan& plan, const EmbedderCheckpoint& prev,
                                       const StageData& data, const StageSettings& settings);

/// Trains one reranker stage on the mined sets of the embedder stage of the
/// same index; epoch e uses mined_per_epoch[min(e, size-1)]. The returned
/// checkpoint records `feature_embedder`'s fingerprint.
RerankerCheckpoint run_reranker_stage(const StagePlan& plan, const RerankerCheckpoint& prev,
                                      std::span<const std::vector<TrainingExample>> mined_per_epoch,
                                      const Corpus& corpus,
                                      const EmbedderCheckpoint& feature_embedder,
                                      const StageSettings& settings);

struct CurriculumConfig {
  StageSettings settings{};
  std::array<StagePlan, 3> embedder_plans{StagePlan::defaults(StageTag::Stage1),
                                          StagePlan::defaults(StageTag::Stage2),
                                          StagePlan::defaults(StageTag::Stage3)};
  std::array<StagePlan, 3> reranker_plans{StagePlan::defaults(StageTag::Stage1),
                                          StagePlan::defaults(StageTag::Stage2),
                                          StagePlan::defaults(StageTag::Stage3)};
  std::vector<std::size_t> recall_budgets{kDefaultBudgets.begin(), kDefaultBudgets.end()};
  std::size_t k_embed = kDefaultEmbedBudget;
  std::size_t k_rerank = kDefaultRerankDepth;
  std::uint32_t dim = kEmbeddingDim;
  std::uint32_t buckets = kFeatureBuckets;
};

struct CurriculumData {
  const Corpus& corpus;
  const QuerySet& train_queries;
  const QuerySet& validation_queries;
  const Qrels& qrels;
};

/// File name of a stage checkpoint inside a model directory.
std::string checkpoint_filename(ComponentKind component, StageTag stage);

/// Untrained Base checkpoints derived from config.settings.seed.
EmbedderCheckpoint initial_embedder(const CurriculumConfig& config);
RerankerCheckpoint initial_reranker(const CurriculumConfig& config,
                                    const EmbedderCheckpoint& base_embedder);

/// Registry entries with validation metrics; `path` is stored as given.
RegistryEntry describe_embedder(const EmbedderCheckpoint& embedder, const std::string& path,
                                const CurriculumData& data, const CurriculumConfig& config);
RegistryEntry describe_reranker(const RerankerCheckpoint& reranker, const std::string& path,
                                const EmbedderCheckpoint& feature_embedder,
                                const std::string& feature_embedder_path,
                                const CurriculumData& data, const CurriculumConfig& config);

/// Runs Base + three stages for both components, writing checkpoints into
/// `out_dir` and returning the registry (also saved as out_dir/registry.json).
/// Embedder entries carry recall@K for every budget; reranker entries carry
/// MRR and nDCG@10 of the same-stage Embedding@k_embed -> Rerank@k_rerank
/// pipeline, all on the validation queries.
CheckpointRegistry run_curriculum(const CurriculumData& data, const CurriculumConfig& config,
                                  const std::filesystem::path& out_dir);

/// Recomputes the metric snapshot of one registry entry from its artifact.
std::map<std::string, double> recompute_metrics(const CheckpointRegistry& registry,
                                                ComponentKind component, StageTag stage,
                                                const Corpus& corpus,
                                                const QuerySet& validation_queries,
                                                const Qrels& qrels,
                                                const CurriculumConfig& config);

/// Seed used for one epoch of one stage of one component.
std::uint64_t epoch_seed(std::uint64_t seed, ComponentKind component, StageTag stage,
                         std::size_t epoch);

}  // namespace cwms
