#include "cwms/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "cwms/error.hpp"
#include "cwms/rng.hpp"
#include "cwms/text.hpp"

namespace cwms {
namespace {

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

// Forward pass state of one text: features, pre-normalization projection,
// its norm and the unit embedding.
struct Encoded {
  SparseFeature x;
  std::vector<double> u;
  double norm = 0;
  Embedding e;
};

Encoded encode(const EmbedderCheckpoint& ckpt, std::string_view text) {
  Encoded enc;
  enc.x = featurize(text, ckpt.buckets());
  enc.u.assign(ckpt.dim(), 0.0);
  for (std::size_t i = 0; i < enc.x.size(); ++i) {
    const auto col = ckpt.column(enc.x.buckets[i]);
    const double w = enc.x.weights[i];
    for (std::uint32_t r = 0; r < ckpt.dim(); ++r) enc.u[r] += col[r] * w;
  }
  double sq = 0;
  for (double v : enc.u) sq += v * v;
  enc.norm = std::sqrt(sq);
  enc.e.assign(ckpt.dim(), 0.0);
  if (enc.norm > 0) {
    for (std::uint32_t r = 0; r < ckpt.dim(); ++r) enc.e[r] = enc.u[r] / enc.norm;
  }
  return enc;
}

// Loss of one query against candidates (index 0 is the positive). Adds
// `scale * dL/de` into the query accumulator and each candidate accumulator.
double accumulate_contrastive(const Encoded& query, std::span<const Encoded* const> candidates,
                              double tau, double scale, std::vector<double>& query_grad,
                              std::span<std::vector<double>* const> candidate_grads) {
  const std::size_t n = candidates.size();
  std::vector<double> scores(n);
  for (std::size_t c = 0; c < n; ++c) scores[c] = cosine(query.e, candidates[c]->e);

  const double max_logit = *std::max_element(scores.begin(), scores.end()) / tau;
  std::vector<double> prob(n);
  double z = 0;
  for (std::size_t c = 0; c < n; ++c) {
    prob[c] = std::exp(scores[c] / tau - max_logit);
    z += prob[c];
  }
  for (double& p : prob) p /= z;
  const double loss = -(scores[0] / tau - max_logit - std::log(z));

  const std::size_t dim = query.e.size();
  for (std::size_t c = 0; c < n; ++c) {
    const double dscore = scale * (prob[c] - (c == 0 ? 1.0 : 0.0)) / tau;
    if (dscore == 0) continue;
    auto& cg = *candidate_grads[c];
    for (std::size_t r = 0; r < dim; ++r) {
      query_grad[r] += dscore * candidates[c]->e[r];
      cg[r] += dscore * query.e[r];
    }
  }
  return loss;
}

// Chains dL/de through e = u/|u| and u = W x into `grad`.
void backprop(const Encoded& enc, std::span<const double> grad_e, SparseGradient& grad) {
  if (enc.norm == 0 || enc.x.empty()) return;
  const std::size_t dim = enc.e.size();
  const double proj = cosine(enc.e, grad_e);
  std::vector<double> grad_u(dim);
  bool any = false;
  for (std::size_t r = 0; r < dim; ++r) {
    grad_u[r] = (grad_e[r] - proj * enc.e[r]) / enc.norm;
    any = any || grad_u[r] != 0;
  }
  if (!any) return;
  for (std::size_t i = 0; i < enc.x.size(); ++i) {
    auto& col = grad.column(enc.x.buckets[i]);
    const double w = enc.x.weights[i];
    for (std::size_t r = 0; r < dim; ++r) col[r] += grad_u[r] * w;
  }
}

void check_tau(double tau) {
  if (!(tau > 0)) throw Error(ErrorKind::InvalidArgument, "temperature must be > 0");
}

}  // namespace

SparseFeature featurize(std::string_view text, std::uint32_t buckets) {
  SparseFeature out;
  if (buckets == 0) return out;
  const auto chars = split_code_points(text);
  std::map<std::uint32_t, double> counts;
  for (std::size_t n = 2; n <= 3; ++n) {
    for (std::size_t i = 0; i + n <= chars.size(); ++i) {
      const char* begin = chars[i].data();
      const char* end = chars[i + n - 1].data() + chars[i + n - 1].size();
      const std::string_view gram(begin, static_cast<std::size_t>(end - begin));
      counts[static_cast<std::uint32_t>(fnv1a64(gram) % buckets)] += 1.0;
    }
  }
  double sq = 0;
  for (const auto& [b, c] : counts) sq += c * c;
  const double norm = std::sqrt(sq);
  out.buckets.reserve(counts.size());
  out.weights.reserve(counts.size());
  for (const auto& [b, c] : counts) {
    out.buckets.push_back(b);
    out.weights.push_back(c / norm);
  }
  return out;
}

EmbedderCheckpoint::EmbedderCheckpoint(std::uint32_t dim, std::uint32_t buckets, StageTag stage,
                                       std::uint64_t seed)
    : dim_(dim),
      buckets_(buckets),
      stage_(stage),
      seed_(seed),
      values_(static_cast<std::size_t>(dim) * buckets, 0.0) {}

EmbedderCheckpoint EmbedderCheckpoint::initialize(std::uint64_t seed, std::uint32_t dim,
                                                  std::uint32_t buckets) {
  EmbedderCheckpoint ckpt(dim, buckets, StageTag::Base, seed);
  const double limit = std::sqrt(6.0 / (static_cast<double>(buckets) + dim));
  SplitMix64 rng(seed);
  for (std::uint32_t r = 0; r < dim; ++r) {
    for (std::uint32_t c = 0; c < buckets; ++c) {
      ckpt.weight(r, c) = round_to_float(-limit + 2.0 * limit * rng.uniform());
    }
  }
  return ckpt;
}

bool EmbedderCheckpoint::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Embedding embed_features(const EmbedderCheckpoint& ckpt, const SparseFeature& x) {
  Embedding u(ckpt.dim(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto col = ckpt.column(x.buckets[i]);
    const double w = x.weights[i];
    for (std::uint32_t r = 0; r < ckpt.dim(); ++r) u[r] += col[r] * w;
  }
  double sq = 0;
  for (double v : u) sq += v * v;
  if (sq == 0) return u;
  const double norm = std::sqrt(sq);
  for (double& v : u) v /= norm;
  return u;
}

Embedding embed(const EmbedderCheckpoint& ckpt, std::string_view text) {
  return embed_features(ckpt, featurize(text, ckpt.buckets()));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double SparseGradient::at(std::uint32_t row, std::uint32_t bucket) const {
  const auto it = columns.find(bucket);
  return it == columns.end() ? 0.0 : it->second[row];
}

std::vector<double>& SparseGradient::column(std::uint32_t bucket) {
  auto it = columns.find(bucket);
  if (it == columns.end()) it = columns.emplace(bucket, std::vector<double>(dim, 0.0)).first;
  return it->second;
}

double softmax_cross_entropy(std::span<const double> scores, double tau) {
  check_tau(tau);
  const double max_logit = *std::max_element(scores.begin(), scores.end()) / tau;
  double z = 0;
  for (double s : scores) z += std::exp(s / tau - max_logit);
  return -(scores[0] / tau - max_logit - std::log(z));
}

LossAndGradient contrastive_loss_and_grad(const EmbedderCheckpoint& ckpt,
                                          std::string_view query_text,
                                          std::string_view positive_text,
                                          std::span<const std::string> negative_texts, double tau) {
  check_tau(tau);
  const Encoded query = encode(ckpt, query_text);
  std::vector<Encoded> cands;
  cands.reserve(negative_texts.size() + 1);
  cands.push_back(encode(ckpt, positive_text));
  for (const auto& t : negative_texts) cands.push_back(encode(ckpt, t));

  std::vector<const Encoded*> cand_ptrs;
  std::vector<std::vector<double>> cand_grads(cands.size(), std::vector<double>(ckpt.dim(), 0.0));
  std::vector<std::vector<double>*> grad_ptrs;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    cand_ptrs.push_back(&cands[i]);
    grad_ptrs.push_back(&cand_grads[i]);
  }
  std::vector<double> query_grad(ckpt.dim(), 0.0);

  LossAndGradient out;
  out.gradient.dim = ckpt.dim();
  out.loss = accumulate_contrastive(query, cand_ptrs, tau, 1.0, query_grad, grad_ptrs);
  backprop(query, query_grad, out.gradient);
  for (std::size_t i = 0; i < cands.size(); ++i) backprop(cands[i], cand_grads[i], out.gradient);
  return out;
}

EmbedderCheckpoint train_epoch(const EmbedderCheckpoint& ckpt,
                               std::span<const TrainingExample> examples, const Corpus& corpus,
                               const TrainConfig& config) {
  if (examples.empty()) throw Error(ErrorKind::InvalidArgument, "train_epoch: no examples");
  if (!(config.learning_rate >= 0)) {
    throw Error(ErrorKind::InvalidArgument, "train_epoch: learning rate must be >= 0");
  }
  check_tau(config.tau);
  const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(config.seed);
  shuffle(order, rng);

  EmbedderCheckpoint next = ckpt;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    const double scale = 1.0 / static_cast<double>(stop - start);

    // Encode each distinct document once per batch, in first-use order.
    std::vector<Encoded> docs;
    std::vector<std::vector<double>> doc_grads;
    std::unordered_map<std::string, std::size_t> doc_slot;
    auto slot_of = [&](const std::string& id) {
      auto [it, inserted] = doc_slot.emplace(id, docs.size());
      if (inserted) {
        docs.push_back(encode(next, corpus.at(id).text));
        doc_grads.emplace_back(next.dim(), 0.0);
      }
      return it->second;
    };

    std::vector<Encoded> queries;
    std::vector<std::vector<double>> query_grads;
    std::vector<std::vector<std::size_t>> cand_slots;
    for (std::size_t b = start; b < stop; ++b) {
      const TrainingExample& ex = examples[order[b]];
      queries.push_back(encode(next, ex.query_text));
      query_grads.emplace_back(next.dim(), 0.0);
      std::vector<std::string> ids{ex.positive_id};
      for (const auto& n : ex.hard_negative_ids) {
        if (std::find(ids.begin(), ids.end(), n) == ids.end()) ids.push_back(n);
      }
      for (std::size_t o = start; o < stop; ++o) {
        if (o == b) continue;
        const auto& other = examples[order[o]].positive_id;
        if (std::find(ids.begin(), ids.end(), other) == ids.end()) ids.push_back(other);
      }
      std::vector<std::size_t> slots;
      for (const auto& id : ids) slots.push_back(slot_of(id));
      cand_slots.push_back(std::move(slots));
    }

    for (std::size_t q = 0; q < queries.size(); ++q) {
      std::vector<const Encoded*> cands;
      std::vector<std::vector<double>*> grads;
      for (std::size_t s : cand_slots[q]) {
        cands.push_back(&docs[s]);
        grads.push_back(&doc_grads[s]);
      }
      accumulate_contrastive(queries[q], cands, config.tau, scale, query_grads[q], grads);
    }

    if (config.learning_rate == 0) continue;
    SparseGradient grad;
    grad.dim = next.dim();
    for (std::size_t q = 0; q < queries.size(); ++q) backprop(queries[q], query_grads[q], grad);
    for (std::size_t d = 0; d < docs.size(); ++d) backprop(docs[d], doc_grads[d], grad);
    for (const auto& [bucket, g] : grad.columns) {
      auto col = next.column(bucket);
      for (std::uint32_t r = 0; r < next.dim(); ++r) {
        col[r] = round_to_float(col[r] - config.learning_rate * g[r]);
      }
    }
  }
  next.set_trained_examples(ckpt.trained_examples() + examples.size());
  return next;
}

double mean_example_loss(const EmbedderCheckpoint& ckpt, std::span<const TrainingExample> examples,
                         const Corpus& corpus, double tau) {
  check_tau(tau);
  if (examples.empty()) return 0;
  double total = 0;
  for (const auto& ex : examples) {
    const Embedding q = embed(ckpt, ex.query_text);
    std::vector<double> scores{cosine(q, embed(ckpt, corpus.at(ex.positive_id).text))};
    for (const auto& n : ex.hard_negative_ids) scores.push_back(cosine(q, embed(ckpt, corpus.at(n).text)));
    total += softmax_cross_entropy(scores, tau);
  }
  return total / static_cast<double>(examples.size());
}

}  // namespace cwms
