#include "cwms/index.hpp"

#include <algorithm>
#include <numeric>

#include "cwms/checkpoint_io.hpp"
#include "cwms/error.hpp"

namespace cwms {

Index::Index(std::vector<std::string> ids, std::uint32_t dim, std::vector<double> vectors,
             std::string embedder_id)
    : ids_(std::move(ids)),
      dim_(dim),
      vectors_(std::move(vectors)),
      embedder_id_(std::move(embedder_id)) {
  if (vectors_.size() != ids_.size() * dim_) {
    throw Error(ErrorKind::InvalidArgument, "index vector storage does not match ids x dim");
  }
}

Index build_index(const EmbedderCheckpoint& embedder, const Corpus& corpus) {
  return build_index(embedder, corpus, fingerprint(embedder));
}

Index build_index(const EmbedderCheckpoint& embedder, const Corpus& corpus,
                  std::string embedder_id) {
  if (corpus.empty()) throw Error(ErrorKind::InvalidArgument, "cannot index an empty corpus");
  std::vector<std::string> ids;
  std::vector<double> vectors;
  ids.reserve(corpus.size());
  vectors.reserve(corpus.size() * embedder.dim());
  for (const auto& d : corpus) {
    ids.push_back(d.id);
    const Embedding e = embed(embedder, d.text);
    vectors.insert(vectors.end(), e.begin(), e.end());
  }
  return Index(std::move(ids), embedder.dim(), std::move(vectors), std::move(embedder_id));
}

std::vector<ScoredDoc> retrieve(const Index& index, std::span<const double> query_embedding,
                                std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "retrieval budget must be >= 1");
  const std::size_t n = index.size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = cosine(index.vector(i), query_embedding);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return index.id(a) < index.id(b);
  };
  const std::size_t top = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    before);

  std::vector<ScoredDoc> out;
  out.reserve(top);
  for (std::size_t i = 0; i < top; ++i) out.push_back({index.id(order[i]), scores[order[i]]});
  return out;
}

}  // namespace cwms
