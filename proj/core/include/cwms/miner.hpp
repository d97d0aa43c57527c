#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cwms/corpus.hpp"
#include "cwms/encoder.hpp"
#include "cwms/index.hpp"

namespace cwms {

struct MiningConfig {
  std::size_t band_lo = 2;
  std::size_t band_hi = 50;
  std::size_t per_query = 4;
  std::uint64_t seed = 0;

  /// Throws Error(InvalidArgument) unless 1 <= band_lo <= band_hi and per_query >= 1.
  void validate() const;
};

/// Filter-and-sample step shared by mining: drops documents in `relevant`,
/// keeps survivors whose 1-based rank in `ranked` lies in the band, and
/// draws `per_query` of them without replacement (partial Fisher-Yates on
/// SplitMix64(mix_seed(cfg.seed, query_id))). Returned in ascending rank.
std::vector<std::string> sample_band(std::span<const ScoredDoc> ranked,
                                     const std::set<std::string>& relevant,
                                     const std::string& query_id, const MiningConfig& cfg);

/// Hard negatives for one query against the current embedder: top-band_hi
/// retrieval, minus judged-relevant documents, sampled within the band.
std::vector<std::string> mine_hard_negatives(const EmbedderCheckpoint& embedder,
                                             const Index& index, const Query& query,
                                             const std::set<std::string>& relevant,
                                             const MiningConfig& cfg);

std::vector<std::string> mine_hard_negatives(const EmbedderCheckpoint& embedder,
                                             const Index& index, const Query& query,
                                             const Qrels& qrels, const MiningConfig& cfg);

/// Copies of `examples` with freshly mined hard negatives. The relevant set
/// for each example is its query's qrels plus its own positive. Stage tags
/// are left for the caller to set.
std::vector<TrainingExample> attach_negatives(std::span<const TrainingExample> examples,
                                              const EmbedderCheckpoint& embedder,
                                              const Index& index, const Qrels& qrels,
                                              const MiningConfig& cfg);

}  // namespace cwms
