#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cwms/corpus.hpp"
#include "cwms/encoder.hpp"
#include "cwms/index.hpp"
#include "cwms/metrics.hpp"
#include "cwms/pipeline.hpp"
#include "cwms/registry.hpp"

namespace cwms {

/// Retrieval budgets reported for embedders by default.
inline constexpr std::array<std::size_t, 3> kDefaultBudgets = {20, 60, 100};
inline constexpr std::size_t kNdcgCutoff = 10;

std::string recall_key(std::size_t k);
inline const std::string kMrrKey = "mrr";
std::string ndcg_key(std::size_t cutoff = kNdcgCutoff);

struct MetricReport {
  ComponentKind component = ComponentKind::Embedder;
  StageTag stage = StageTag::Base;
  std::map<std::string, double> metrics;
  std::size_t query_count = 0;
  std::size_t excluded_queries = 0;
  std::string dataset;
};

struct RecallBudgetCurve {
  StageTag stage = StageTag::Base;
  /// (K, mean recall@K), K strictly increasing.
  std::vector<std::pair<std::size_t, double>> points;
};

/// Embedder ranking of every query to `depth`.
std::vector<QueryRanking> rank_queries(const EmbedderCheckpoint& embedder, const Index& index,
                                       const QuerySet& queries, std::size_t depth);

/// One retrieval per query at max(ks), prefix-truncated for each K.
/// Throws Error(InvalidArgument) unless ks is nonempty and strictly increasing.
RecallBudgetCurve sweep_recall_budget(const EmbedderCheckpoint& embedder, const Index& index,
                                      const QuerySet& queries, const Qrels& qrels,
                                      std::span<const std::size_t> ks,
                                      StageTag stage = StageTag::Base);

/// Recall@K for each budget.
MetricReport evaluate_embedder(const EmbedderCheckpoint& embedder, const Index& index,
                               const QuerySet& queries, const Qrels& qrels,
                               std::span<const std::size_t> ks, const std::string& dataset);

/// Runs the pipeline on every query and reports recall@k_rerank, MRR and
/// nDCG@cutoff of the final lists.
MetricReport evaluate_pipeline(const Pipeline& pipeline, const QuerySet& queries,
                               const Qrels& qrels, const std::string& dataset,
                               std::size_t cutoff = kNdcgCutoff);

/// Metrics of externally produced rankings (e.g. a TREC run file).
MetricReport evaluate_rankings(std::span<const QueryRanking> rankings, const Qrels& qrels,
                               std::span<const std::size_t> ks, std::size_t cutoff,
                               const std::string& dataset);

/// A stage's standing under one selection rule.
struct StageScore {
  StageTag stage = StageTag::Base;
  double primary = 0;
  double secondary = 0;
};

/// Highest primary, then highest secondary, then earliest stage. Independent
/// of input order. Throws Error(InvalidArgument) on empty input.
StageTag best_stage(std::span<const StageScore> scores);

struct SelectionConfig {
  std::size_t recall_k = 60;
  std::size_t k_embed = kDefaultEmbedBudget;
  std::size_t k_rerank = kDefaultRerankDepth;
  std::size_t ndcg_cutoff = kNdcgCutoff;
  std::string manifest_id = "selected";
};

/// Embedder stage by recall@recall_k; reranker stage by MRR with nDCG as
/// tie-breaker. Throws Error(Precondition) listing every missing entry when
/// the registry is incomplete.
PipelineManifest select_components(const CheckpointRegistry& registry,
                                   const SelectionConfig& config = {});

/// Manifest for a fixed (embedder stage, reranker stage) pair of a registry.
PipelineManifest manifest_for(const CheckpointRegistry& registry, StageTag embedder_stage,
                              StageTag reranker_stage, const std::string& id,
                              std::size_t k_embed = kDefaultEmbedBudget,
                              std::size_t k_rerank = kDefaultRerankDepth);

/// `stage,K,recall` rows with a header line.
void write_curves_csv(std::span<const RecallBudgetCurve> curves, std::ostream& out);
/// One JSON object per report per line.
void write_reports_jsonl(std::span<const MetricReport> reports, std::ostream& out);

}  // namespace cwms
