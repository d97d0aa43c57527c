#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cwms/corpus.hpp"

namespace cwms {

/// |top-k ∩ relevant| / |relevant|. Throws Error(InvalidArgument) when
/// `relevant` is empty or k == 0.
double recall_at_k(std::span<const std::string> ranked, const std::set<std::string>& relevant,
                   std::size_t k);

/// 1 / rank of the first relevant document, 0 if none is ranked.
double reciprocal_rank(std::span<const std::string> ranked, const std::set<std::string>& relevant);

/// Binary-gain nDCG truncated at `cutoff`; the ideal DCG places
/// min(|relevant|, cutoff) relevant documents at the top.
double ndcg_at(std::span<const std::string> ranked, const std::set<std::string>& relevant,
               std::size_t cutoff = 10);

/// One query's ranked output.
struct QueryRanking {
  std::string query_id;
  std::vector<std::string> ranked;
};

/// Mean of a per-query metric over queries with a nonempty relevant set.
struct MeanMetric {
  double value = 0;
  std::size_t evaluated = 0;
  /// Queries skipped for having no judged relevant document.
  std::size_t excluded = 0;
};

MeanMetric mean_recall(std::span<const QueryRanking> rankings, const Qrels& qrels, std::size_t k);
MeanMetric mean_reciprocal_rank(std::span<const QueryRanking> rankings, const Qrels& qrels);
MeanMetric mean_ndcg(std::span<const QueryRanking> rankings, const Qrels& qrels,
                     std::size_t cutoff = 10);

}  // namespace cwms
