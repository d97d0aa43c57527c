#include "cwms/curriculum.hpp"

#include "cwms/checkpoint_io.hpp"
#include "cwms/error.hpp"
#include "cwms/index.hpp"
#include "cwms/pipeline.hpp"
#include "cwms/rng.hpp"

namespace cwms {
namespace {

void check_stage_order(StageTag plan_stage, StageTag prev_stage) {
  const auto expected = previous_stage(plan_stage);
  if (!expected || *expected != prev_stage) {
    throw Error(ErrorKind::Precondition,
                "stage order violated: " + std::string(to_string(plan_stage)) +
                    " needs a checkpoint tagged " +
                    (expected ? std::string(to_string(*expected)) : std::string("(none)")) +
                    ", found " + std::string(to_string(prev_stage)));
  }
}

std::vector<TrainingExample> retag(std::vector<TrainingExample> examples, StageTag tag) {
  for (auto& ex : examples) ex.stage_tag = tag;
  return examples;
}

std::map<std::string, double> embedder_metrics(const EmbedderCheckpoint& embedder,
                                               const Index& index, const CurriculumData& data,
                                               const CurriculumConfig& config,
                                               RegistryEntry& entry) {
  const MetricReport r = evaluate_embedder(embedder, index, data.validation_queries, data.qrels,
                                           config.recall_budgets, "validation");
  entry.query_count = r.query_count;
  entry.excluded_queries = r.excluded_queries;
  entry.dataset = r.dataset;
  return r.metrics;
}

std::map<std::string, double> reranker_metrics(const RerankerCheckpoint& reranker,
                                               const EmbedderCheckpoint& feature_embedder,
                                               const Index& feature_index,
                                               const CurriculumData& data,
                                               const CurriculumConfig& config,
                                               RegistryEntry& entry) {
  const Pipeline pipeline(data.corpus, feature_embedder, feature_index, reranker, feature_embedder,
                          feature_index, config.k_embed, config.k_rerank);
  const MetricReport r =
      evaluate_pipeline(pipeline, data.validation_queries, data.qrels, "validation", kNdcgCutoff);
  entry.query_count = r.query_count;
  entry.excluded_queries = r.excluded_queries;
  entry.dataset = r.dataset;
  return {{kMrrKey, r.metrics.at(kMrrKey)}, {ndcg_key(), r.metrics.at(ndcg_key())}};
}

}  // namespace

StagePlan StagePlan::defaults(StageTag stage) {
  switch (stage) {
    case StageTag::Stage1: return {StageTag::Stage1, 3, 0.1, DataSource::WeakPairs, false};
    case StageTag::Stage2: return {StageTag::Stage2, 2, 0.05, DataSource::MinedPairs, false};
    case StageTag::Stage3:
      return {StageTag::Stage3, 2, 0.02, DataSource::FilteredMinedPairs, true};
    case StageTag::Base: break;
  }
  throw Error(ErrorKind::InvalidArgument, "no training plan for the base stage");
}

void StagePlan::validate() const {
  if (stage == StageTag::Base) throw Error(ErrorKind::InvalidArgument, "base is not trainable");
  if (refresh_negatives_each_epoch && stage != StageTag::Stage3) {
    throw Error(ErrorKind::InvalidArgument, "per-epoch negative refresh is Stage 3 only");
  }
  if (epochs == 0) throw Error(ErrorKind::InvalidArgument, "stage needs at least one epoch");
  if (!(learning_rate >= 0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be >= 0");
}

std::uint64_t epoch_seed(std::uint64_t seed, ComponentKind component, StageTag stage,
                         std::size_t epoch) {
  std::uint64_t s = mix_seed(seed, to_string(component));
  s = mix_seed(s, static_cast<std::uint64_t>(stage_index(stage)));
  return mix_seed(s, static_cast<std::uint64_t>(epoch));
}

EmbedderStageResult run_embedder_stage(const StagePlan& plan, const EmbedderCheckpoint& prev,
                                       const StageData& data, const StageSettings& settings) {
  plan.validate();
  check_stage_order(plan.stage, prev.stage());

  MiningConfig mining = settings.mining;
  mining.seed = mix_seed(settings.seed, "mining");

  EmbedderStageResult result;
  EmbedderCheckpoint current = prev;
  current.set_stage(plan.stage);

  std::vector<TrainingExample> examples;
  switch (plan.data_source) {
    case DataSource::WeakPairs:
      examples = generate_weak_pairs(data.corpus, settings.weak_pair_count,
                                     mix_seed(settings.seed, "weak-pairs"));
      break;
    case DataSource::MinedPairs:
      examples = supervised_examples(data.train_queries, data.qrels, plan.stage);
      break;
    case DataSource::FilteredMinedPairs:
      examples = supervised_examples(filter_stage3_queries(data.train_queries, data.qrels),
                                     data.qrels, plan.stage);
      break;
  }
  if (examples.empty()) {
    throw Error(ErrorKind::InvalidArgument,
                std::string(to_string(plan.stage)) + ": no training examples");
  }

  const auto mine_with = [&](const EmbedderCheckpoint& model) {
    const Index index = build_index(model, data.corpus, "mining");
    return retag(attach_negatives(examples, model, index, data.qrels, mining), plan.stage);
  };

  if (!plan.refresh_negatives_each_epoch) {
    // Mined once with the input checkpoint. Weak pairs train on in-batch
    // negatives only; their mined copy is kept for the reranker.
    result.mined_per_epoch.push_back(mine_with(prev));
  }
  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    if (plan.refresh_negatives_each_epoch) result.mined_per_epoch.push_back(mine_with(current));
    const auto& train_set =
        plan.data_source == DataSource::WeakPairs ? examples : result.mined_per_epoch.back();
    TrainConfig tc;
    tc.learning_rate = plan.learning_rate;
    tc.seed = epoch_seed(settings.seed, ComponentKind::Embedder, plan.stage, epoch);
    tc.batch_size = settings.batch_size;
    tc.tau = settings.tau;
    current = train_epoch(current, train_set, data.corpus, tc);
  }
  result.checkpoint = std::move(current);
  return result;
}

RerankerCheckpoint run_reranker_stage(const StagePlan& plan, const RerankerCheckpoint& prev,
                                      std::span<const std::vector<TrainingExample>> mined_per_epoch,
                                      const Corpus& corpus,
                                      const EmbedderCheckpoint& feature_embedder,
                                      const StageSettings& settings) {
  plan.validate();
  check_stage_order(plan.stage, prev.stage());
  if (mined_per_epoch.empty()) {
    throw Error(ErrorKind::InvalidArgument, "reranker stage needs mined examples");
  }
  RerankerCheckpoint current = prev;
  current.set_stage(plan.stage);
  current.set_feature_embedder_id(fingerprint(feature_embedder));
  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    const auto& mined = mined_per_epoch[std::min(epoch, mined_per_epoch.size() - 1)];
    // Queries whose band held only relevant documents yield no pairs.
    std::vector<TrainingExample> usable;
    for (const auto& ex : mined) {
      if (!ex.hard_negative_ids.empty()) usable.push_back(ex);
    }
    RerankerTrainConfig rc;
    rc.learning_rate = plan.learning_rate;
    rc.seed = epoch_seed(settings.seed, ComponentKind::Reranker, plan.stage, epoch);
    current = train_reranker_epoch(current, usable, corpus, feature_embedder, rc);
  }
  return current;
}

std::string checkpoint_filename(ComponentKind c, StageTag s) {
  return std::string(to_string(c)) + "-" + std::string(to_string(s)) + ".cwms";
}

EmbedderCheckpoint initial_embedder(const CurriculumConfig& config) {
  return EmbedderCheckpoint::initialize(mix_seed(config.settings.seed, "embedder-init"), config.dim,
                                        config.buckets);
}

RerankerCheckpoint initial_reranker(const CurriculumConfig& config,
                                    const EmbedderCheckpoint& base_embedder) {
  return RerankerCheckpoint::initialize(mix_seed(config.settings.seed, "reranker-init"),
                                        fingerprint(base_embedder));
}

RegistryEntry describe_embedder(const EmbedderCheckpoint& embedder, const std::string& path,
                                const CurriculumData& data, const CurriculumConfig& config) {
  RegistryEntry e;
  e.component = ComponentKind::Embedder;
  e.stage = embedder.stage();
  e.path = path;
  e.fingerprint = fingerprint(embedder);
  e.seed = embedder.seed();
  const Index index = build_index(embedder, data.corpus, e.fingerprint);
  e.metrics = embedder_metrics(embedder, index, data, config, e);
  return e;
}

RegistryEntry describe_reranker(const RerankerCheckpoint& reranker, const std::string& path,
                                const EmbedderCheckpoint& feature_embedder,
                                const std::string& feature_embedder_path,
                                const CurriculumData& data, const CurriculumConfig& config) {
  RegistryEntry r;
  r.component = ComponentKind::Reranker;
  r.stage = reranker.stage();
  r.path = path;
  r.fingerprint = fingerprint(reranker);
  r.seed = reranker.seed();
  r.feature_embedder_path = feature_embedder_path;
  const Index index = build_index(feature_embedder, data.corpus, fingerprint(feature_embedder));
  r.metrics = reranker_metrics(reranker, feature_embedder, index, data, config, r);
  return r;
}

CheckpointRegistry run_curriculum(const CurriculumData& data, const CurriculumConfig& config,
                                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  CheckpointRegistry registry(out_dir);
  const StageData stage_data{data.corpus, data.train_queries, data.qrels};

  EmbedderCheckpoint embedder = initial_embedder(config);
  RerankerCheckpoint reranker = initial_reranker(config, embedder);

  for (std::size_t step = 0; step < kAllStages.size(); ++step) {
    const StageTag stage = kAllStages[step];
    if (stage != StageTag::Base) {
      EmbedderStageResult er =
          run_embedder_stage(config.embedder_plans[step - 1], embedder, stage_data, config.settings);
      reranker = run_reranker_stage(config.reranker_plans[step - 1], reranker, er.mined_per_epoch,
                                    data.corpus, er.checkpoint, config.settings);
      embedder = std::move(er.checkpoint);
    }
    const std::string embedder_file = checkpoint_filename(ComponentKind::Embedder, stage);
    const std::string reranker_file = checkpoint_filename(ComponentKind::Reranker, stage);
    save_checkpoint(embedder, out_dir / embedder_file);
    save_checkpoint(reranker, out_dir / reranker_file);
    registry.put(describe_embedder(embedder, embedder_file, data, config));
    registry.put(describe_reranker(reranker, reranker_file, embedder, embedder_file, data, config));
  }
  registry.save(out_dir / "registry.json");
  return registry;
}

std::map<std::string, double> recompute_metrics(const CheckpointRegistry& registry,
                                                ComponentKind component, StageTag stage,
                                                const Corpus& corpus,
                                                const QuerySet& validation_queries,
                                                const Qrels& qrels,
                                                const CurriculumConfig& config) {
  const RegistryEntry& entry = registry.require(component, stage);
  const QuerySet no_train;
  const CurriculumData data{corpus, no_train, validation_queries, qrels};
  RegistryEntry scratch;
  if (component == ComponentKind::Embedder) {
    const EmbedderCheckpoint embedder = load_embedder(registry.resolve(entry.path));
    const Index index = build_index(embedder, corpus);
    return embedder_metrics(embedder, index, data, config, scratch);
  }
  const RerankerCheckpoint reranker = load_reranker(registry.resolve(entry.path));
  const EmbedderCheckpoint feature = load_embedder(registry.resolve(entry.feature_embedder_path));
  const Index index = build_index(feature, corpus);
  return reranker_metrics(reranker, feature, index, data, config, scratch);
}

}  // namespace cwms
