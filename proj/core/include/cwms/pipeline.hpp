#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cwms/corpus.hpp"
#include "cwms/encoder.hpp"
#include "cwms/index.hpp"
#include "cwms/reranker.hpp"

namespace cwms {

inline constexpr std::size_t kDefaultEmbedBudget = 60;
inline constexpr std::size_t kDefaultRerankDepth = 10;

/// A composition of stage-tagged components: which embedder retrieves, which
/// reranker orders, and at what budget.
struct PipelineManifest {
  std::string id;
  std::string embedder_path;
  StageTag embedder_stage = StageTag::Base;
  std::string reranker_path;
  StageTag reranker_stage = StageTag::Base;
  /// Embedder whose cosine feeds the reranker's first feature.
  std::string feature_embedder_path;
  std::size_t k_embed = kDefaultEmbedBudget;
  std::size_t k_rerank = kDefaultRerankDepth;

  /// Throws Error(InvalidArgument) unless 1 <= k_rerank <= k_embed.
  void validate() const;

  bool operator==(const PipelineManifest&) const = default;
};

/// JSON; relative checkpoint paths resolve against the manifest's directory.
void save_manifest(const PipelineManifest& manifest, const std::filesystem::path& path);
PipelineManifest load_manifest(const std::filesystem::path& path);

struct PhaseTimings {
  double embed_seconds = 0;
  double retrieve_seconds = 0;
  double rerank_seconds = 0;

  double total() const { return embed_seconds + retrieve_seconds + rerank_seconds; }
};

struct RetrievalResult {
  std::string query_id;
  std::vector<ScoredDoc> final_list;
  std::vector<ScoredDoc> candidates;
  PhaseTimings timing;

  std::vector<std::string> final_ids() const;
};

/// Retrieve-then-rerank over borrowed state. All referenced objects must
/// outlive the pipeline. Construction checks that `index` was built by
/// `embedder` and that `feature_embedder`/`feature_index` are the embedder the
/// reranker was trained against; mismatches throw Error(Precondition).
class Pipeline {
 public:
  Pipeline(const Corpus& corpus, const EmbedderCheckpoint& embedder, const Index& index,
           const RerankerCheckpoint& reranker, const EmbedderCheckpoint& feature_embedder,
           const Index& feature_index, std::size_t k_embed, std::size_t k_rerank);

  RetrievalResult run(const Query& query) const;
  /// Same with per-call budget overrides.
  RetrievalResult run(const Query& query, std::size_t k_embed, std::size_t k_rerank) const;

  std::size_t k_embed() const { return k_embed_; }
  std::size_t k_rerank() const { return k_rerank_; }

 private:
  const Corpus& corpus_;
  const EmbedderCheckpoint& embedder_;
  const Index& index_;
  const RerankerCheckpoint& reranker_;
  const EmbedderCheckpoint& feature_embedder_;
  const Index& feature_index_;
  bool shared_features_ = false;
  CorpusStats stats_;
  std::size_t k_embed_;
  std::size_t k_rerank_;
};

/// Owns everything a manifest names, loaded from disk, plus a ready Pipeline.
class LoadedPipeline {
 public:
  LoadedPipeline(const PipelineManifest& manifest, const Corpus& corpus);
  LoadedPipeline(const LoadedPipeline&) = delete;
  LoadedPipeline& operator=(const LoadedPipeline&) = delete;

  const PipelineManifest& manifest() const { return manifest_; }
  const Pipeline& pipeline() const { return *pipeline_; }
  const EmbedderCheckpoint& embedder() const { return embedder_; }
  const Index& index() const { return index_; }

 private:
  PipelineManifest manifest_;
  EmbedderCheckpoint embedder_;
  Index index_;
  RerankerCheckpoint reranker_;
  EmbedderCheckpoint feature_embedder_;
  Index feature_index_;
  std::unique_ptr<Pipeline> pipeline_;
};

struct LatencySummary {
  std::size_t query_count = 0;
  double candidate_total = 0;
  double baseline_total = 0;
  double delta = 0;
  double per_query_delta = 0;
  /// delta / baseline_total; 0 when both totals are 0.
  double relative_increase = 0;
};

LatencySummary summarize_latency(double candidate_total, double baseline_total,
                                 std::size_t query_count);

/// Per-system totals over the same query ids. Throws Error(InvalidArgument)
/// if the two lists do not cover the same queries.
LatencySummary latency_report(const std::vector<RetrievalResult>& results,
                              const std::vector<RetrievalResult>& baseline);

/// TREC run lines `query_id Q0 doc_id rank score tag`, one per final result.
void write_run(const std::vector<RetrievalResult>& results, const std::string& tag,
               const std::filesystem::path& path);

/// Query id -> doc ids ordered by the rank column.
std::map<std::string, std::vector<std::string>> read_run(const std::filesystem::path& path);

}  // namespace cwms
