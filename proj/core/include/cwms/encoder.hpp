#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwms/corpus.hpp"
#include "cwms/stage.hpp"

namespace cwms {

inline constexpr std::uint32_t kEmbeddingDim = 64;
inline constexpr std::uint32_t kFeatureBuckets = 1u << 18;
inline constexpr double kDefaultTemperature = 0.1;
inline constexpr std::size_t kDefaultBatchSize = 32;

/// Hashed character n-gram vector, sorted by bucket, L2-normalized.
/// Zero-weight entries never appear; empty text gives an empty vector.
struct SparseFeature {
  std::vector<std::uint32_t> buckets;
  std::vector<double> weights;

  std::size_t size() const { return buckets.size(); }
  bool empty() const { return buckets.empty(); }
};

/// Character 2- and 3-grams of already-normalized text, each hashed with
/// 64-bit FNV-1a over its UTF-8 bytes and reduced modulo `buckets`; bucket
/// weight is the occurrence count before normalization.
SparseFeature featurize(std::string_view text, std::uint32_t buckets = kFeatureBuckets);

using Embedding = std::vector<double>;

/// Linear embedder state: a dim x buckets projection.
///
/// Values are kept bucket-major in memory (the `dim` weights of one bucket
/// are contiguous) since every product is sparse over buckets. The on-disk
/// layout is row-major; see checkpoint_io.hpp. Every weight is representable
/// as a 32-bit float after construction and after each training step.
class EmbedderCheckpoint {
 public:
  EmbedderCheckpoint() = default;
  EmbedderCheckpoint(std::uint32_t dim, std::uint32_t buckets, StageTag stage, std::uint64_t seed);

  /// Glorot-uniform init in [-sqrt(6/(F+d)), +sqrt(6/(F+d))] drawn from
  /// SplitMix64(seed) in row-major order, rounded to float. Tagged Base.
  static EmbedderCheckpoint initialize(std::uint64_t seed, std::uint32_t dim = kEmbeddingDim,
                                       std::uint32_t buckets = kFeatureBuckets);

  std::uint32_t dim() const { return dim_; }
  std::uint32_t buckets() const { return buckets_; }
  StageTag stage() const { return stage_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t trained_examples() const { return trained_examples_; }

  void set_stage(StageTag s) { stage_ = s; }
  void set_trained_examples(std::uint64_t n) { trained_examples_ = n; }

  double weight(std::uint32_t row, std::uint32_t bucket) const {
    return values_[static_cast<std::size_t>(bucket) * dim_ + row];
  }
  double& weight(std::uint32_t row, std::uint32_t bucket) {
    return values_[static_cast<std::size_t>(bucket) * dim_ + row];
  }
  /// The `dim` weights feeding from one bucket.
  std::span<const double> column(std::uint32_t bucket) const {
    return {values_.data() + static_cast<std::size_t>(bucket) * dim_, dim_};
  }
  std::span<double> column(std::uint32_t bucket) {
    return {values_.data() + static_cast<std::size_t>(bucket) * dim_, dim_};
  }

  bool all_finite() const;

  bool operator==(const EmbedderCheckpoint&) const = default;

 private:
  std::uint32_t dim_ = 0;
  std::uint32_t buckets_ = 0;
  StageTag stage_ = StageTag::Base;
  std::uint64_t seed_ = 0;
  std::uint64_t trained_examples_ = 0;
  std::vector<double> values_;
};

/// W x followed by L2 normalization; exact zero vector for empty features.
Embedding embed_features(const EmbedderCheckpoint& ckpt, const SparseFeature& x);
Embedding embed(const EmbedderCheckpoint& ckpt, std::string_view text);

/// Dot product of two embeddings (cosine, since both are unit or zero).
double cosine(std::span<const double> a, std::span<const double> b);

/// Sparse gradient over checkpoint weights: bucket -> dim-vector.
struct SparseGradient {
  std::uint32_t dim = 0;
  std::map<std::uint32_t, std::vector<double>> columns;

  double at(std::uint32_t row, std::uint32_t bucket) const;
  std::vector<double>& column(std::uint32_t bucket);
};

struct LossAndGradient {
  double loss = 0;
  SparseGradient gradient;
};

/// InfoNCE over cosine similarities with temperature `tau`:
///   loss = -log softmax(s / tau)[positive], candidates = positive + negatives.
/// The gradient is exact w.r.t. every weight the inputs touch.
/// Throws Error(InvalidArgument) when tau <= 0.
LossAndGradient contrastive_loss_and_grad(const EmbedderCheckpoint& ckpt,
                                          std::string_view query_text,
                                          std::string_view positive_text,
                                          std::span<const std::string> negative_texts, double tau);

/// Numerically stable -log softmax(scores / tau)[0].
double softmax_cross_entropy(std::span<const double> scores, double tau);

struct TrainConfig {
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  std::size_t batch_size = kDefaultBatchSize;
  double tau = kDefaultTemperature;
};

/// One pass of plain minibatch gradient descent. Examples are visited in a
/// SplitMix64(config.seed) shuffle; each example's candidates are its
/// positive, its hard negatives and the positives of the other examples in
/// the batch. The step uses the batch-mean loss. Single-threaded and
/// bit-deterministic. Throws Error(InvalidArgument) on an empty example list.
EmbedderCheckpoint train_epoch(const EmbedderCheckpoint& ckpt,
                               std::span<const TrainingExample> examples, const Corpus& corpus,
                               const TrainConfig& config);

/// Mean contrastive loss of `examples` against positive + hard negatives only
/// (no in-batch negatives). Used to check that training makes progress.
double mean_example_loss(const EmbedderCheckpoint& ckpt, std::span<const TrainingExample> examples,
                         const Corpus& corpus, double tau = kDefaultTemperature);

}  // namespace cwms
