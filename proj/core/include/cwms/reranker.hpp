#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cwms/corpus.hpp"
#include "cwms/encoder.hpp"
#include "cwms/stage.hpp"

namespace cwms {

inline constexpr std::size_t kCrossFeatureCount = 5;

/// Query-document interaction features:
///   [0] cosine of the feature embedder's embeddings, in [-1, 1]
///   [1] Jaccard of the two character-bigram sets, in [0, 1]
///   [2] fraction of query bigrams present in the document, in [0, 1]
///   [3] |ln(len q + 1) - ln(len d + 1)| / ln(1 + max doc length), clamped to [0, 1]
///   [4] bias, exactly 1
using CrossFeatures = std::array<double, kCrossFeatureCount>;

struct CorpusStats {
  std::size_t max_doc_chars = 0;

  static CorpusStats of(const Corpus& corpus);
};

class RerankerCheckpoint {
 public:
  using Weights = std::array<double, kCrossFeatureCount>;

  RerankerCheckpoint() = default;
  RerankerCheckpoint(Weights weights, StageTag stage, std::uint64_t seed,
                     std::string feature_embedder_id);

  /// All zeros except the cosine weight, so an untrained reranker orders
  /// candidates exactly like its embedder.
  static RerankerCheckpoint initialize(std::uint64_t seed, std::string feature_embedder_id);

  const Weights& weights() const { return weights_; }
  Weights& weights() { return weights_; }
  StageTag stage() const { return stage_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t trained_examples() const { return trained_examples_; }
  /// Fingerprint of the embedder whose cosine feeds feature 0.
  const std::string& feature_embedder_id() const { return feature_embedder_id_; }

  void set_stage(StageTag s) { stage_ = s; }
  void set_trained_examples(std::uint64_t n) { trained_examples_ = n; }
  void set_feature_embedder_id(std::string id) { feature_embedder_id_ = std::move(id); }

  bool all_finite() const;

  bool operator==(const RerankerCheckpoint&) const = default;

 private:
  Weights weights_{};
  StageTag stage_ = StageTag::Base;
  std::uint64_t seed_ = 0;
  std::uint64_t trained_examples_ = 0;
  std::string feature_embedder_id_;
};

/// Distinct character bigrams of normalized text, sorted.
std::vector<std::string> char_bigram_set(std::string_view text);

CrossFeatures cross_features(const Query& query, const Document& doc,
                             const EmbedderCheckpoint& embedder, const CorpusStats& stats);

/// Same features from precomputed embeddings and bigram sets.
CrossFeatures cross_features(std::span<const double> query_embedding,
                             std::span<const double> doc_embedding,
                             const std::vector<std::string>& query_bigrams,
                             const std::vector<std::string>& doc_bigrams, std::size_t query_chars,
                             std::size_t doc_chars, const CorpusStats& stats);

double score(const RerankerCheckpoint& ckpt, const CrossFeatures& features);

struct PairwiseLoss {
  double loss = 0;
  std::array<double, kCrossFeatureCount> gradient{};
};

/// ln(1 + exp(-(s_pos - s_neg))) in overflow-safe form.
double pairwise_logistic(double margin);

PairwiseLoss pairwise_loss_and_grad(const RerankerCheckpoint& ckpt, const CrossFeatures& positive,
                                    const CrossFeatures& negative);

struct RerankerTrainConfig {
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

/// Cross features for (query text, document id) pairs, cached per document.
/// Borrows the corpus and embedder; both must outlive the cache.
class FeatureCache {
 public:
  FeatureCache(const Corpus& corpus, const EmbedderCheckpoint& embedder);

  CrossFeatures features(std::string_view query_text, const std::string& doc_id);
  const CorpusStats& stats() const { return stats_; }

 private:
  struct DocEntry {
    Embedding embedding;
    std::vector<std::string> bigrams;
    std::size_t chars = 0;
  };
  struct QueryEntry {
    Embedding embedding;
    std::vector<std::string> bigrams;
    std::size_t chars = 0;
  };
  const DocEntry& doc(const std::string& id);
  const QueryEntry& query(std::string_view text);

  const Corpus& corpus_;
  const EmbedderCheckpoint& embedder_;
  CorpusStats stats_;
  std::unordered_map<std::string, DocEntry> docs_;
  std::unordered_map<std::string, QueryEntry> queries_;
};

/// One gradient step per (positive, hard negative) pair, pairs visited in a
/// SplitMix64(config.seed) shuffle. Throws Error(InvalidArgument) naming the
/// first example that has no hard negatives.
RerankerCheckpoint train_reranker_epoch(const RerankerCheckpoint& ckpt,
                                        std::span<const TrainingExample> examples,
                                        const Corpus& corpus, const EmbedderCheckpoint& embedder,
                                        const RerankerTrainConfig& config);

}  // namespace cwms
