#include "cwms/miner.hpp"

#include <algorithm>

#include "cwms/error.hpp"
#include "cwms/rng.hpp"

namespace cwms {

void MiningConfig::validate() const {
  if (band_lo < 1 || band_lo > band_hi) {
    throw Error(ErrorKind::InvalidArgument, "mining band must satisfy 1 <= lo <= hi");
  }
  if (per_query < 1) throw Error(ErrorKind::InvalidArgument, "per_query must be >= 1");
}

std::vector<std::string> sample_band(std::span<const ScoredDoc> ranked,
                                     const std::set<std::string>& relevant,
                                     const std::string& query_id, const MiningConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> pool;  // 0-based ranks
  const std::size_t stop = std::min(ranked.size(), cfg.band_hi);
  for (std::size_t r = cfg.band_lo - 1; r < stop; ++r) {
    if (!relevant.contains(ranked[r].id)) pool.push_back(r);
  }
  if (pool.size() > cfg.per_query) {
    SplitMix64 rng(mix_seed(cfg.seed, query_id));
    for (std::size_t i = 0; i < cfg.per_query; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(cfg.per_query);
    std::sort(pool.begin(), pool.end());
  }
  std::vector<std::string> out;
  out.reserve(pool.size());
  for (std::size_t r : pool) out.push_back(ranked[r].id);
  return out;
}

std::vector<std::string> mine_hard_negatives(const EmbedderCheckpoint& embedder,
                                             const Index& index, const Query& query,
                                             const std::set<std::string>& relevant,
                                             const MiningConfig& cfg) {
  cfg.validate();
  const auto ranked = retrieve(index, embed(embedder, query.text), cfg.band_hi);
  return sample_band(ranked, relevant, query.id, cfg);
}

std::vector<std::string> mine_hard_negatives(const EmbedderCheckpoint& embedder,
                                             const Index& index, const Query& query,
                                             const Qrels& qrels, const MiningConfig& cfg) {
  return mine_hard_negatives(embedder, index, query, qrels.relevant(query.id), cfg);
}

std::vector<TrainingExample> attach_negatives(std::span<const TrainingExample> examples,
                                              const EmbedderCheckpoint& embedder,
                                              const Index& index, const Qrels& qrels,
                                              const MiningConfig& cfg) {
  cfg.validate();
  std::vector<TrainingExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    std::set<std::string> relevant = qrels.relevant(ex.query_id);
    relevant.insert(ex.positive_id);
    TrainingExample mined = ex;
    mined.hard_negative_ids =
        mine_hard_negatives(embedder, index, Query{ex.query_id, ex.query_text}, relevant, cfg);
    out.push_back(std::move(mined));
  }
  return out;
}

}  // namespace cwms
