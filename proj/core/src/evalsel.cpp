#include "cwms/evalsel.hpp"

#include <algorithm>
#include <ostream>

#include <json.hpp>

#include "cwms/error.hpp"

namespace cwms {
namespace {

void check_budgets(std::span<const std::size_t> ks) {
  if (ks.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one budget");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0 || (i > 0 && ks[i] <= ks[i - 1])) {
      throw Error(ErrorKind::InvalidArgument, "budgets must be positive and strictly increasing");
    }
  }
}

}  // namespace

std::string recall_key(std::size_t k) { return "recall@" + std::to_string(k); }
std::string ndcg_key(std::size_t cutoff) { return "ndcg@" + std::to_string(cutoff); }

std::vector<QueryRanking> rank_queries(const EmbedderCheckpoint& embedder, const Index& index,
                                       const QuerySet& queries, std::size_t depth) {
  std::vector<QueryRanking> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    QueryRanking r{q.id, {}};
    for (auto& d : retrieve(index, embed(embedder, q.text), depth)) r.ranked.push_back(std::move(d.id));
    out.push_back(std::move(r));
  }
  return out;
}

RecallBudgetCurve sweep_recall_budget(const EmbedderCheckpoint& embedder, const Index& index,
                                      const QuerySet& queries, const Qrels& qrels,
                                      std::span<const std::size_t> ks, StageTag stage) {
  check_budgets(ks);
  const auto rankings = rank_queries(embedder, index, queries, ks.back());
  RecallBudgetCurve curve;
  curve.stage = stage;
  for (std::size_t k : ks) curve.points.emplace_back(k, mean_recall(rankings, qrels, k).value);
  return curve;
}

MetricReport evaluate_embedder(const EmbedderCheckpoint& embedder, const Index& index,
                               const QuerySet& queries, const Qrels& qrels,
                               std::span<const std::size_t> ks, const std::string& dataset) {
  check_budgets(ks);
  const auto rankings = rank_queries(embedder, index, queries, ks.back());
  MetricReport report;
  report.component = ComponentKind::Embedder;
  report.stage = embedder.stage();
  report.dataset = dataset;
  for (std::size_t k : ks) {
    const MeanMetric m = mean_recall(rankings, qrels, k);
    report.metrics[recall_key(k)] = m.value;
    report.query_count = m.evaluated;
    report.excluded_queries = m.excluded;
  }
  return report;
}

MetricReport evaluate_pipeline(const Pipeline& pipeline, const QuerySet& queries,
                               const Qrels& qrels, const std::string& dataset,
                               std::size_t cutoff) {
  std::vector<QueryRanking> rankings;
  rankings.reserve(queries.size());
  for (const auto& q : queries) rankings.push_back({q.id, pipeline.run(q).final_ids()});
  const std::array<std::size_t, 1> ks{pipeline.k_rerank()};
  MetricReport report = evaluate_rankings(rankings, qrels, ks, cutoff, dataset);
  report.component = ComponentKind::Reranker;
  return report;
}

MetricReport evaluate_rankings(std::span<const QueryRanking> rankings, const Qrels& qrels,
                               std::span<const std::size_t> ks, std::size_t cutoff,
                               const std::string& dataset) {
  check_budgets(ks);
  MetricReport report;
  report.dataset = dataset;
  for (std::size_t k : ks) report.metrics[recall_key(k)] = mean_recall(rankings, qrels, k).value;
  const MeanMetric mrr = mean_reciprocal_rank(rankings, qrels);
  report.metrics[kMrrKey] = mrr.value;
  report.metrics[ndcg_key(cutoff)] = mean_ndcg(rankings, qrels, cutoff).value;
  report.query_count = mrr.evaluated;
  report.excluded_queries = mrr.excluded;
  return report;
}

StageTag best_stage(std::span<const StageScore> scores) {
  if (scores.empty()) throw Error(ErrorKind::InvalidArgument, "no stages to select from");
  const StageScore* best = &scores[0];
  for (const auto& s : scores.subspan(1)) {
    const bool better =
        s.primary > best->primary ||
        (s.primary == best->primary &&
         (s.secondary > best->secondary ||
          (s.secondary == best->secondary && stage_index(s.stage) < stage_index(best->stage))));
    if (better) best = &s;
  }
  return best->stage;
}

PipelineManifest manifest_for(const CheckpointRegistry& registry, StageTag embedder_stage,
                              StageTag reranker_stage, const std::string& id, std::size_t k_embed,
                              std::size_t k_rerank) {
  const RegistryEntry& emb = registry.require(ComponentKind::Embedder, embedder_stage);
  const RegistryEntry& rr = registry.require(ComponentKind::Reranker, reranker_stage);
  if (rr.feature_embedder_path.empty()) {
    throw Error(ErrorKind::Precondition, "reranker entry has no feature embedder");
  }
  PipelineManifest m;
  m.id = id;
  m.embedder_path = registry.resolve(emb.path).string();
  m.embedder_stage = embedder_stage;
  m.reranker_path = registry.resolve(rr.path).string();
  m.reranker_stage = reranker_stage;
  m.feature_embedder_path = registry.resolve(rr.feature_embedder_path).string();
  m.k_embed = k_embed;
  m.k_rerank = k_rerank;
  m.validate();
  return m;
}

PipelineManifest select_components(const CheckpointRegistry& registry,
                                   const SelectionConfig& config) {
  const auto missing = registry.missing();
  if (!missing.empty()) {
    std::string msg = "registry incomplete:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw Error(ErrorKind::Precondition, msg);
  }
  const std::string recall_name = recall_key(config.recall_k);
  const std::string ndcg_name = ndcg_key(config.ndcg_cutoff);
  std::vector<StageScore> embedders, rerankers;
  for (StageTag s : kAllStages) {
    const auto& e = *registry.find(ComponentKind::Embedder, s);
    const auto& r = *registry.find(ComponentKind::Reranker, s);
    const auto metric = [](const RegistryEntry& entry, const std::string& name) {
      const auto it = entry.metrics.find(name);
      if (it == entry.metrics.end()) {
        throw Error(ErrorKind::Precondition, std::string(to_string(entry.component)) + "/" +
                                                 std::string(to_string(entry.stage)) +
                                                 ": metric snapshot lacks " + name);
      }
      return it->second;
    };
    embedders.push_back({s, metric(e, recall_name), 0.0});
    rerankers.push_back({s, metric(r, kMrrKey), metric(r, ndcg_name)});
  }
  return manifest_for(registry, best_stage(embedders), best_stage(rerankers), config.manifest_id,
                      config.k_embed, config.k_rerank);
}

void write_curves_csv(std::span<const RecallBudgetCurve> curves, std::ostream& out) {
  out << "stage,K,recall\n";
  const auto old = out.precision(17);
  for (const auto& c : curves) {
    for (const auto& [k, r] : c.points) out << to_string(c.stage) << ',' << k << ',' << r << '\n';
  }
  out.precision(old);
}

void write_reports_jsonl(std::span<const MetricReport> reports, std::ostream& out) {
  for (const auto& r : reports) {
    out << nlohmann::json{{"component", std::string(to_string(r.component))},
                          {"stage", std::string(to_string(r.stage))},
                          {"dataset", r.dataset},
                          {"query_count", r.query_count},
                          {"excluded_queries", r.excluded_queries},
                          {"metrics", r.metrics}}
               .dump()
        << '\n';
  }
}

}  // namespace cwms
