#pragma once

#include <span>
#include <string>
#include <vector>

#include "cwms/corpus.hpp"
#include "cwms/encoder.hpp"

namespace cwms {

struct ScoredDoc {
  std::string id;
  double score = 0;

  bool operator==(const ScoredDoc&) const = default;
};

/// Exact brute-force index: one unit-norm (or zero) embedding per document,
/// stored contiguously in corpus order.
class Index {
 public:
  Index() = default;
  Index(std::vector<std::string> ids, std::uint32_t dim, std::vector<double> vectors,
        std::string embedder_id);

  std::size_t size() const { return ids_.size(); }
  std::uint32_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const double> vector(std::size_t i) const {
    return {vectors_.data() + i * dim_, dim_};
  }
  /// Fingerprint of the embedder that produced the vectors.
  const std::string& embedder_id() const { return embedder_id_; }

  bool operator==(const Index&) const = default;

 private:
  std::vector<std::string> ids_;
  std::uint32_t dim_ = 0;
  std::vector<double> vectors_;
  std::string embedder_id_;
};

/// Embeds every document in corpus order. Throws Error(InvalidArgument) on an
/// empty corpus. The overload without an id fingerprints the embedder.
Index build_index(const EmbedderCheckpoint& embedder, const Corpus& corpus);
Index build_index(const EmbedderCheckpoint& embedder, const Corpus& corpus,
                  std::string embedder_id);

/// Strict ranking order: score descending, then id ascending.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

/// Exact top-min(k, N) by dot product. Throws Error(InvalidArgument) if k == 0.
std::vector<ScoredDoc> retrieve(const Index& index, std::span<const double> query_embedding,
                                std::size_t k);

}  // namespace cwms
