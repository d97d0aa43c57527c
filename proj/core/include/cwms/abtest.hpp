#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cwms/corpus.hpp"
#include "cwms/pipeline.hpp"

namespace cwms {

inline constexpr std::size_t kSnippetChars = 200;

enum class Side { Left, Right };
enum class Choice { Left, Right, Tie };
/// The two systems under comparison.
enum class System { A, B };

std::string_view to_string(Choice c);
std::optional<Choice> parse_choice(std::string_view text);

struct Snippet {
  std::string doc_id;
  std::string text;

  bool operator==(const Snippet&) const = default;
};

/// Judge-facing pair. Carries no system identity: which side shows system A
/// lives in the session's sealed table only.
struct ABPair {
  std::string pair_id;
  std::string query_id;
  std::string query_text;
  std::string dataset;
  std::vector<Snippet> left;
  std::vector<Snippet> right;
  /// True iff both systems returned the same ordered final doc ids.
  bool auto_tie = false;

  bool operator==(const ABPair&) const = default;
};

/// Hidden per-pair record, used only when aggregating.
struct SealedAssignment {
  Side system_a_side = Side::Left;
  double latency_a = 0;
  double latency_b = 0;

  bool operator==(const SealedAssignment&) const = default;
};

class ABSession {
 public:
  std::string session_id;
  std::string manifest_a;
  std::string manifest_b;
  /// The system whose win rate the report states (the "improved" one).
  System candidate = System::B;
  std::uint64_t seed = 0;

  const std::vector<ABPair>& pairs() const { return pairs_; }
  const ABPair& pair(const std::string& pair_id) const;
  const std::map<std::string, Choice>& judgments() const { return judgments_; }
  const SealedAssignment& sealed(const std::string& pair_id) const;

  std::size_t judgeable_count() const;
  std::size_t remaining() const;
  bool complete() const { return remaining() == 0; }
  /// First judgeable pair without a judgment, in pair order.
  const ABPair* next_unjudged() const;

  /// Throws Error(NotFound) for an unknown pair, Error(Conflict) for an
  /// auto-tie pair or a pair that already has a judgment.
  void record_judgment(const std::string& pair_id, Choice choice);

  void add_pair(ABPair pair, SealedAssignment sealed);

  bool operator==(const ABSession&) const = default;

 private:
  std::vector<ABPair> pairs_;
  std::map<std::string, std::size_t> pair_pos_;
  std::map<std::string, SealedAssignment> sealed_;
  std::map<std::string, Choice> judgments_;
};

/// Side that shows system A for one pair: a fair coin from
/// SplitMix64(mix_seed(seed, pair_id)).
Side draw_assignment(std::uint64_t seed, const std::string& pair_id);

/// First kSnippetChars characters of each final document, in rank order.
std::vector<Snippet> snippets_for(const RetrievalResult& result, const Corpus& corpus);

/// Assembles a session from per-query results of both systems (same query
/// order). Throws Error(InvalidArgument) on misaligned inputs.
ABSession build_session_from_results(const std::string& session_id, const std::string& manifest_a,
                                     const std::string& manifest_b, const QuerySet& queries,
                                     const std::vector<RetrievalResult>& results_a,
                                     const std::vector<RetrievalResult>& results_b,
                                     const Corpus& corpus, std::uint64_t seed,
                                     const std::string& dataset = "default");

/// Runs both pipelines on every query (recording their latencies) and builds
/// the session. Pipeline failures are rethrown naming the query id.
ABSession build_session(const Pipeline& system_a, const std::string& manifest_a,
                        const Pipeline& system_b, const std::string& manifest_b,
                        const QuerySet& queries, const Corpus& corpus, std::uint64_t seed,
                        const std::string& session_id, const std::string& dataset = "default");

struct ABCounts {
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t judged_ties = 0;
  std::size_t auto_ties = 0;
  std::size_t pairs = 0;

  std::size_t ties() const { return judged_ties + auto_ties; }
};

struct ABReport {
  std::string session_id;
  System candidate = System::B;
  ABCounts totals;
  std::map<std::string, ABCounts> by_dataset;
  std::size_t pending = 0;
  bool partial = false;
  /// wins_candidate / (wins_a + wins_b); absent when no pair has a winner.
  std::optional<double> win_rate_excluding_ties;
  LatencySummary latency;
};

/// win_rate_excluding_ties as defined on ABReport.
std::optional<double> win_rate(std::size_t wins_candidate, std::size_t wins_other);

/// Unblinds judgments through the sealed assignments.
ABReport aggregate(const ABSession& session);

/// Judge-facing JSON object of a pair: pair_id, query_id, query_text,
/// dataset, left, right (each a list of {doc_id, text}).
std::string judge_view_json(const ABPair& pair);
/// Field names a judge-facing pair record may contain.
const std::set<std::string>& judge_view_fields();

/// JSON object mirroring ABReport; win_rate_excluding_ties is null when absent.
std::string report_json(const ABReport& report);

/// Append-only JSON Lines journal of a session. Every record carries a
/// monotonically increasing `seq`; record types are `session`, `pair`
/// (judge-facing fields only), `seal` and `judgment`.
class SessionJournal {
 public:
  /// Writes a fresh journal for `session` (including existing judgments).
  static void create(const std::filesystem::path& path, const ABSession& session);
  static ABSession load(const std::filesystem::path& path);
  /// Validates against `session`, appends one judgment record and applies it.
  static void append_judgment(const std::filesystem::path& path, ABSession& session,
                              const std::string& pair_id, Choice choice);
};

}  // namespace cwms
