#include "cwms/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cwms/error.hpp"
#include "cwms/rng.hpp"
#include "cwms/text.hpp"

namespace cwms {
namespace {

double length_gap(std::size_t query_chars, std::size_t doc_chars, const CorpusStats& stats) {
  const double denom = std::log1p(static_cast<double>(stats.max_doc_chars));
  if (denom <= 0) return 0;
  const double gap = std::abs(std::log(static_cast<double>(query_chars) + 1.0) -
                              std::log(static_cast<double>(doc_chars) + 1.0));
  return std::clamp(gap / denom, 0.0, 1.0);
}

}  // namespace

CorpusStats CorpusStats::of(const Corpus& corpus) {
  CorpusStats s;
  for (const auto& d : corpus) s.max_doc_chars = std::max(s.max_doc_chars, char_length(d.text));
  return s;
}

RerankerCheckpoint::RerankerCheckpoint(Weights weights, StageTag stage, std::uint64_t seed,
                                       std::string feature_embedder_id)
    : weights_(weights),
      stage_(stage),
      seed_(seed),
      feature_embedder_id_(std::move(feature_embedder_id)) {}

RerankerCheckpoint RerankerCheckpoint::initialize(std::uint64_t seed,
                                                  std::string feature_embedder_id) {
  return RerankerCheckpoint({1.0, 0.0, 0.0, 0.0, 0.0}, StageTag::Base, seed,
                            std::move(feature_embedder_id));
}

bool RerankerCheckpoint::all_finite() const {
  return std::all_of(weights_.begin(), weights_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<std::string> char_bigram_set(std::string_view text) {
  const auto chars = split_code_points(text);
  std::vector<std::string> out;
  for (std::size_t i = 0; i + 2 <= chars.size(); ++i) {
    std::string g(chars[i]);
    g.append(chars[i + 1]);
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

CrossFeatures cross_features(std::span<const double> query_embedding,
                             std::span<const double> doc_embedding,
                             const std::vector<std::string>& query_bigrams,
                             const std::vector<std::string>& doc_bigrams, std::size_t query_chars,
                             std::size_t doc_chars, const CorpusStats& stats) {
  std::size_t shared = 0;
  auto q = query_bigrams.begin();
  auto d = doc_bigrams.begin();
  while (q != query_bigrams.end() && d != doc_bigrams.end()) {
    if (*q < *d) {
      ++q;
    } else if (*d < *q) {
      ++d;
    } else {
      ++shared;
      ++q;
      ++d;
    }
  }
  const std::size_t unioned = query_bigrams.size() + doc_bigrams.size() - shared;

  CrossFeatures f{};
  f[0] = std::clamp(cosine(query_embedding, doc_embedding), -1.0, 1.0);
  f[1] = unioned == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(unioned);
  f[2] = query_bigrams.empty()
             ? 0.0
             : static_cast<double>(shared) / static_cast<double>(query_bigrams.size());
  f[3] = length_gap(query_chars, doc_chars, stats);
  f[4] = 1.0;
  return f;
}

CrossFeatures cross_features(const Query& query, const Document& doc,
                             const EmbedderCheckpoint& embedder, const CorpusStats& stats) {
  return cross_features(embed(embedder, query.text), embed(embedder, doc.text),
                        char_bigram_set(query.text), char_bigram_set(doc.text),
                        char_length(query.text), char_length(doc.text), stats);
}

double score(const RerankerCheckpoint& ckpt, const CrossFeatures& features) {
  double s = 0;
  for (std::size_t i = 0; i < kCrossFeatureCount; ++i) s += ckpt.weights()[i] * features[i];
  return s;
}

double pairwise_logistic(double margin) {
  // softplus(-m) = max(-m, 0) + log1p(exp(-|m|))
  return std::max(-margin, 0.0) + std::log1p(std::exp(-std::abs(margin)));
}

PairwiseLoss pairwise_loss_and_grad(const RerankerCheckpoint& ckpt, const CrossFeatures& positive,
                                    const CrossFeatures& negative) {
  const double margin = score(ckpt, positive) - score(ckpt, negative);
  PairwiseLoss out;
  out.loss = pairwise_logistic(margin);
  // d/dm softplus(-m) = -sigmoid(-m)
  const double sig = margin >= 0 ? std::exp(-margin) / (1.0 + std::exp(-margin))
                                 : 1.0 / (1.0 + std::exp(margin));
  for (std::size_t i = 0; i < kCrossFeatureCount; ++i) {
    out.gradient[i] = -sig * (positive[i] - negative[i]);
  }
  return out;
}

FeatureCache::FeatureCache(const Corpus& corpus, const EmbedderCheckpoint& embedder)
    : corpus_(corpus), embedder_(embedder), stats_(CorpusStats::of(corpus)) {}

const FeatureCache::DocEntry& FeatureCache::doc(const std::string& id) {
  auto it = docs_.find(id);
  if (it == docs_.end()) {
    const Document& d = corpus_.at(id);
    DocEntry e{embed(embedder_, d.text), char_bigram_set(d.text), char_length(d.text)};
    it = docs_.emplace(id, std::move(e)).first;
  }
  return it->second;
}

const FeatureCache::QueryEntry& FeatureCache::query(std::string_view text) {
  auto it = queries_.find(std::string(text));
  if (it == queries_.end()) {
    QueryEntry e{embed(embedder_, text), char_bigram_set(text), char_length(text)};
    it = queries_.emplace(std::string(text), std::move(e)).first;
  }
  return it->second;
}

CrossFeatures FeatureCache::features(std::string_view query_text, const std::string& doc_id) {
  const QueryEntry& q = query(query_text);
  const DocEntry& d = doc(doc_id);
  return cross_features(q.embedding, d.embedding, q.bigrams, d.bigrams, q.chars, d.chars, stats_);
}

RerankerCheckpoint train_reranker_epoch(const RerankerCheckpoint& ckpt,
                                        std::span<const TrainingExample> examples,
                                        const Corpus& corpus, const EmbedderCheckpoint& embedder,
                                        const RerankerTrainConfig& config) {
  if (!(config.learning_rate >= 0)) {
    throw Error(ErrorKind::InvalidArgument, "reranker learning rate must be >= 0");
  }
  struct Pair {
    std::size_t example;
    std::size_t negative;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].hard_negative_ids.empty()) {
      throw Error(ErrorKind::InvalidArgument,
                  "reranker example " + std::to_string(i) + " (query \"" + examples[i].query_id +
                      "\") has no hard negatives");
    }
    for (std::size_t n = 0; n < examples[i].hard_negative_ids.size(); ++n) pairs.push_back({i, n});
  }
  SplitMix64 rng(config.seed);
  shuffle(pairs, rng);

  FeatureCache cache(corpus, embedder);
  RerankerCheckpoint next = ckpt;
  for (const Pair& p : pairs) {
    const TrainingExample& ex = examples[p.example];
    const CrossFeatures pos = cache.features(ex.query_text, ex.positive_id);
    const CrossFeatures neg = cache.features(ex.query_text, ex.hard_negative_ids[p.negative]);
    const PairwiseLoss step = pairwise_loss_and_grad(next, pos, neg);
    for (std::size_t i = 0; i < kCrossFeatureCount; ++i) {
      next.weights()[i] = static_cast<float>(next.weights()[i] - config.learning_rate * step.gradient[i]);
    }
  }
  next.set_trained_examples(ckpt.trained_examples() + examples.size());
  return next;
}

}  // namespace cwms
