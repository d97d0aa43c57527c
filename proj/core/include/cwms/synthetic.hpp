#pragma once

#include <cstdint>
#include <filesystem>

#include "cwms/corpus.hpp"

namespace cwms {

/// Parameters of the seeded synthetic retrieval benchmark.
///
/// Documents belong to topics. Each topic owns a handful of key terms that
/// documents use verbatim and queries only reference through per-term
/// aliases, so matching a query's topic requires learning, while each
/// document's entity words give a lexical anchor. Pairs of documents in a
/// topic share one entity word; queries that use it have two relevant
/// documents. A few queries are deliberately unusable (no judgments or
/// under four characters) to exercise the Stage 3 filter.
struct BenchmarkSpec {
  std::uint64_t seed = 20260101;
  std::size_t documents = 5000;
  std::size_t queries = 500;
  std::size_t topics = 50;
  std::size_t terms_per_topic = 6;
  std::size_t background_words = 400;
  /// Fraction of topics whose terms are CJK strings instead of Latin pseudo-words.
  double cjk_topic_fraction = 0.2;
  /// Chance that a query names a topic term verbatim instead of its alias.
  double verbatim_term_rate = 0.5;
  double shared_entity_query_rate = 0.25;
  double typo_rate = 0.3;
  double unjudged_query_rate = 0.03;
  double short_query_rate = 0.02;
};

struct Benchmark {
  Corpus corpus;
  QuerySet train;
  QuerySet validation;
  QuerySet test;
  Qrels qrels;
};

/// Deterministic in the spec. Queries are split 3:1:1 by position into
/// train, validation and test.
Benchmark generate_benchmark(const BenchmarkSpec& spec);

/// Writes corpus.jsonl, queries.{train,validation,test}.jsonl and qrels.txt.
void save_benchmark(const Benchmark& bench, const std::filesystem::path& dir);
Benchmark load_benchmark(const std::filesystem::path& dir);

/// Reads a JSON spec file; absent fields keep their defaults.
BenchmarkSpec load_benchmark_spec(const std::filesystem::path& path);

}  // namespace cwms
