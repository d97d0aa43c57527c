#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cwms/stage.hpp"

namespace cwms {

struct Document {
  std::string id;
  std::string text;

  bool operator==(const Document&) const = default;
};

struct Query {
  std::string id;
  std::string text;

  bool operator==(const Query&) const = default;
};

/// Immutable-after-load ordered collection of records with unique ids.
/// Shared shape of the corpus and of query sets.
template <typename Record>
class RecordSet {
 public:
  RecordSet() = default;

  /// Throws Error(InvalidArgument) on a duplicate or empty id.
  explicit RecordSet(std::vector<Record> records);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const Record& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<Record>& records() const { return records_; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  bool contains(std::string_view id) const;
  /// Throws Error(NotFound).
  const Record& at(std::string_view id) const;
  /// Position in file order. Throws Error(NotFound).
  std::size_t position(std::string_view id) const;

  bool operator==(const RecordSet& other) const { return records_ == other.records_; }

 private:
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

using Corpus = RecordSet<Document>;
using QuerySet = RecordSet<Query>;

/// Binary relevance judgments: query id -> relevant document ids.
class Qrels {
 public:
  void add(const std::string& query_id, const std::string& doc_id);
  /// Empty set when the query has no judged positives.
  const std::set<std::string>& relevant(std::string_view query_id) const;
  bool is_relevant(std::string_view query_id, std::string_view doc_id) const;
  bool has_judgments(std::string_view query_id) const;
  std::size_t query_count() const { return judged_.size(); }
  const std::map<std::string, std::set<std::string>, std::less<>>& entries() const { return judged_; }

  /// Throws Error(InvalidArgument) naming the first doc id absent from `corpus`.
  void validate_against(const Corpus& corpus) const;

  bool operator==(const Qrels&) const = default;

 private:
  std::map<std::string, std::set<std::string>, std::less<>> judged_;
};

/// One unit of curriculum supervision.
struct TrainingExample {
  std::string query_id;
  std::string query_text;
  std::string positive_id;
  std::vector<std::string> hard_negative_ids;
  StageTag stage_tag = StageTag::Stage1;

  bool operator==(const TrainingExample&) const = default;
};

/// Throws Error(InvalidArgument) when the positive appears among the
/// negatives or a negative repeats.
void validate_example(const TrainingExample& example);

// File formats. Corpus and query files are JSON Lines with `id` and `text`
// fields; qrels use the TREC layout `query_id 0 doc_id grade`.

Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
QuerySet load_queries(const std::filesystem::path& path);
void save_queries(const QuerySet& queries, const std::filesystem::path& path);
Qrels load_qrels(const std::filesystem::path& path);
void save_qrels(const Qrels& qrels, const std::filesystem::path& path);

std::vector<TrainingExample> load_examples(const std::filesystem::path& path);
void save_examples(const std::vector<TrainingExample>& examples,
                   const std::filesystem::path& path);

/// Stage 1 weak supervision: `count` examples whose query is a contiguous
/// span of 8..32 characters (clipped to the document length) sampled from a
/// uniformly chosen document. Pure in (corpus, count, seed).
std::vector<TrainingExample> generate_weak_pairs(const Corpus& corpus, std::size_t count,
                                                 std::uint64_t seed);

/// Minimum normalized query length admitted to Stage 3.
inline constexpr std::size_t kStage3MinQueryChars = 4;

/// Keeps queries with at least one judged positive and normalized text of at
/// least four characters, in input order.
QuerySet filter_stage3_queries(const QuerySet& queries, const Qrels& qrels);

/// One supervised example per (query, relevant document) pair, in query order
/// then document id order. Queries without judgments are skipped.
std::vector<TrainingExample> supervised_examples(const QuerySet& queries, const Qrels& qrels,
                                                 StageTag tag);

}  // namespace cwms
