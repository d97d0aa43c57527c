#include "cwms/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cwms/error.hpp"

namespace cwms {
namespace {

void require_relevant(const std::set<std::string>& relevant) {
  if (relevant.empty()) {
    throw Error(ErrorKind::InvalidArgument, "metric undefined for a query with no relevant documents");
  }
}

template <typename PerQuery>
MeanMetric mean_over(std::span<const QueryRanking> rankings, const Qrels& qrels, PerQuery per_query) {
  MeanMetric m;
  double sum = 0;
  for (const auto& r : rankings) {
    const auto& rel = qrels.relevant(r.query_id);
    if (rel.empty()) {
      ++m.excluded;
      continue;
    }
    sum += per_query(r.ranked, rel);
    ++m.evaluated;
  }
  m.value = m.evaluated == 0 ? 0.0 : sum / static_cast<double>(m.evaluated);
  return m;
}

}  // namespace

double recall_at_k(std::span<const std::string> ranked, const std::set<std::string>& relevant,
                   std::size_t k) {
  require_relevant(relevant);
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "recall cutoff must be >= 1");
  std::set<std::string_view> hits;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    if (relevant.contains(ranked[i])) hits.insert(ranked[i]);
  }
  return static_cast<double>(hits.size()) / static_cast<double>(relevant.size());
}

double reciprocal_rank(std::span<const std::string> ranked, const std::set<std::string>& relevant) {
  require_relevant(relevant);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (relevant.contains(ranked[i])) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double ndcg_at(std::span<const std::string> ranked, const std::set<std::string>& relevant,
               std::size_t cutoff) {
  require_relevant(relevant);
  double dcg = 0;
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < std::min(cutoff, ranked.size()); ++i) {
    if (relevant.contains(ranked[i]) && seen.insert(ranked[i]).second) {
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  double ideal = 0;
  for (std::size_t i = 0; i < std::min(cutoff, relevant.size()); ++i) {
    ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  return ideal == 0 ? 0.0 : dcg / ideal;
}

MeanMetric mean_recall(std::span<const QueryRanking> rankings, const Qrels& qrels, std::size_t k) {
  return mean_over(rankings, qrels, [k](const auto& ranked, const auto& rel) {
    return recall_at_k(ranked, rel, k);
  });
}

MeanMetric mean_reciprocal_rank(std::span<const QueryRanking> rankings, const Qrels& qrels) {
  return mean_over(rankings, qrels,
                   [](const auto& ranked, const auto& rel) { return reciprocal_rank(ranked, rel); });
}

MeanMetric mean_ndcg(std::span<const QueryRanking> rankings, const Qrels& qrels,
                     std::size_t cutoff) {
  return mean_over(rankings, qrels, [cutoff](const auto& ranked, const auto& rel) {
    return ndcg_at(ranked, rel, cutoff);
  });
}

}  // namespace cwms
