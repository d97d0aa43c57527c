#include "cwms/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cwms/checkpoint_io.hpp"
#include "cwms/error.hpp"
#include "cwms/text.hpp"

namespace cwms {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

}  // namespace

void PipelineManifest::validate() const {
  if (k_rerank < 1 || k_rerank > k_embed) {
    throw Error(ErrorKind::InvalidArgument,
                "manifest \"" + id + "\": need 1 <= k_rerank <= k_embed, got k_rerank=" +
                    std::to_string(k_rerank) + " k_embed=" + std::to_string(k_embed));
  }
}

void save_manifest(const PipelineManifest& m, const std::filesystem::path& path) {
  // Stored relative to the manifest so load_manifest resolves them back.
  const auto base = std::filesystem::absolute(path).parent_path();
  const auto rel = [&](const std::string& p) {
    return std::filesystem::proximate(std::filesystem::absolute(p), base).generic_string();
  };
  const nlohmann::json j = {
      {"id", m.id},
      {"embedder", {{"path", rel(m.embedder_path)}, {"stage", std::string(to_string(m.embedder_stage))}}},
      {"reranker", {{"path", rel(m.reranker_path)}, {"stage", std::string(to_string(m.reranker_stage))}}},
      {"feature_embedder", rel(m.feature_embedder_path)},
      {"k_embed", m.k_embed},
      {"k_rerank", m.k_rerank},
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

PipelineManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  PipelineManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    const auto base = path.parent_path();
    m.id = j.at("id").get<std::string>();
    m.embedder_path = resolve(base, j.at("embedder").at("path").get<std::string>());
    m.reranker_path = resolve(base, j.at("reranker").at("path").get<std::string>());
    m.feature_embedder_path = resolve(base, j.at("feature_embedder").get<std::string>());
    const auto es = parse_stage(j.at("embedder").at("stage").get<std::string>());
    const auto rs = parse_stage(j.at("reranker").at("stage").get<std::string>());
    if (!es || !rs) throw Error(ErrorKind::Format, "bad stage tag");
    m.embedder_stage = *es;
    m.reranker_stage = *rs;
    m.k_embed = j.value("k_embed", kDefaultEmbedBudget);
    m.k_rerank = j.value("k_rerank", kDefaultRerankDepth);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": malformed manifest (" + e.what() + ")");
  }
  m.validate();
  return m;
}

std::vector<std::string> RetrievalResult::final_ids() const {
  std::vector<std::string> ids;
  ids.reserve(final_list.size());
  for (const auto& d : final_list) ids.push_back(d.id);
  return ids;
}

Pipeline::Pipeline(const Corpus& corpus, const EmbedderCheckpoint& embedder, const Index& index,
                   const RerankerCheckpoint& reranker, const EmbedderCheckpoint& feature_embedder,
                   const Index& feature_index, std::size_t k_embed, std::size_t k_rerank)
    : corpus_(corpus),
      embedder_(embedder),
      index_(index),
      reranker_(reranker),
      feature_embedder_(feature_embedder),
      feature_index_(feature_index),
      stats_(CorpusStats::of(corpus)),
      k_embed_(k_embed),
      k_rerank_(k_rerank) {
  if (k_rerank < 1 || k_rerank > k_embed) {
    throw Error(ErrorKind::InvalidArgument, "need 1 <= k_rerank <= k_embed");
  }
  const std::string embedder_id = fingerprint(embedder);
  if (index.embedder_id() != embedder_id) {
    throw Error(ErrorKind::Precondition, "index was built by embedder " + index.embedder_id() +
                                             ", pipeline embedder is " + embedder_id);
  }
  const std::string feature_id =
      &feature_embedder == &embedder ? embedder_id : fingerprint(feature_embedder);
  if (reranker.feature_embedder_id() != feature_id || feature_index.embedder_id() != feature_id) {
    throw Error(ErrorKind::Precondition,
                "reranker expects feature embedder " + reranker.feature_embedder_id() +
                    ", got embedder " + feature_id + " with index " + feature_index.embedder_id());
  }
  if (index.ids() != feature_index.ids() || index.size() != corpus.size()) {
    throw Error(ErrorKind::Precondition, "indexes do not cover the same corpus");
  }
  shared_features_ = feature_id == embedder_id;
}

RetrievalResult Pipeline::run(const Query& query) const { return run(query, k_embed_, k_rerank_); }

RetrievalResult Pipeline::run(const Query& query, std::size_t k_embed, std::size_t k_rerank) const {
  if (k_rerank < 1 || k_rerank > k_embed) {
    throw Error(ErrorKind::InvalidArgument, "need 1 <= k_rerank <= k_embed");
  }
  RetrievalResult result;
  result.query_id = query.id;

  auto t0 = Clock::now();
  const Embedding q = embed(embedder_, query.text);
  result.timing.embed_seconds = seconds_since(t0);

  t0 = Clock::now();
  result.candidates = retrieve(index_, q, k_embed);
  result.timing.retrieve_seconds = seconds_since(t0);

  t0 = Clock::now();
  const Embedding qf = shared_features_ ? q : embed(feature_embedder_, query.text);
  const auto query_bigrams = char_bigram_set(query.text);
  const std::size_t query_chars = char_length(query.text);
  std::vector<ScoredDoc> rescored;
  rescored.reserve(result.candidates.size());
  for (const auto& c : result.candidates) {
    const std::size_t pos = corpus_.position(c.id);
    const Document& doc = corpus_[pos];
    const CrossFeatures f =
        cross_features(qf, feature_index_.vector(pos), query_bigrams, char_bigram_set(doc.text),
                       query_chars, char_length(doc.text), stats_);
    rescored.push_back({c.id, score(reranker_, f)});
  }
  std::sort(rescored.begin(), rescored.end(), ranks_before);
  rescored.resize(std::min(k_rerank, rescored.size()));
  result.final_list = std::move(rescored);
  result.timing.rerank_seconds = seconds_since(t0);
  return result;
}

LoadedPipeline::LoadedPipeline(const PipelineManifest& manifest, const Corpus& corpus)
    : manifest_(manifest) {
  manifest_.validate();
  embedder_ = load_embedder(manifest_.embedder_path);
  if (embedder_.stage() != manifest_.embedder_stage) {
    throw Error(ErrorKind::Precondition, manifest_.embedder_path + ": stage " +
                                             std::string(to_string(embedder_.stage())) +
                                             " does not match manifest stage " +
                                             std::string(to_string(manifest_.embedder_stage)));
  }
  reranker_ = load_reranker(manifest_.reranker_path);
  if (reranker_.stage() != manifest_.reranker_stage) {
    throw Error(ErrorKind::Precondition, manifest_.reranker_path + ": stage " +
                                             std::string(to_string(reranker_.stage())) +
                                             " does not match manifest stage " +
                                             std::string(to_string(manifest_.reranker_stage)));
  }
  index_ = build_index(embedder_, corpus);
  if (manifest_.feature_embedder_path == manifest_.embedder_path) {
    feature_embedder_ = embedder_;
    feature_index_ = index_;
  } else {
    feature_embedder_ = load_embedder(manifest_.feature_embedder_path);
    feature_index_ = build_index(feature_embedder_, corpus);
  }
  pipeline_ = std::make_unique<Pipeline>(corpus, embedder_, index_, reranker_, feature_embedder_,
                                         feature_index_, manifest_.k_embed, manifest_.k_rerank);
}

LatencySummary summarize_latency(double candidate_total, double baseline_total,
                                 std::size_t query_count) {
  LatencySummary s;
  s.query_count = query_count;
  s.candidate_total = candidate_total;
  s.baseline_total = baseline_total;
  s.delta = candidate_total - baseline_total;
  s.per_query_delta = query_count == 0 ? 0.0 : s.delta / static_cast<double>(query_count);
  s.relative_increase = baseline_total == 0 ? 0.0 : s.delta / baseline_total;
  return s;
}

LatencySummary latency_report(const std::vector<RetrievalResult>& results,
                              const std::vector<RetrievalResult>& baseline) {
  std::multiset<std::string> a, b;
  double total_a = 0, total_b = 0;
  for (const auto& r : results) {
    a.insert(r.query_id);
    total_a += r.timing.total();
  }
  for (const auto& r : baseline) {
    b.insert(r.query_id);
    total_b += r.timing.total();
  }
  if (a != b) throw Error(ErrorKind::InvalidArgument, "latency report: query sets differ");
  return summarize_latency(total_a, total_b, results.size());
}

void write_run(const std::vector<RetrievalResult>& results, const std::string& tag,
               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.precision(17);
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.final_list.size(); ++i) {
      out << r.query_id << " Q0 " << r.final_list[i].id << ' ' << (i + 1) << ' '
          << r.final_list[i].score << ' ' << tag << '\n';
    }
  }
}

std::map<std::string, std::vector<std::string>> read_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::map<std::string, std::vector<std::pair<long, std::string>>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream f(line);
    std::string qid, q0, did, score, tag;
    long rank = 0;
    if (!(f >> qid)) continue;
    if (!(f >> q0 >> did >> rank >> score >> tag)) {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(lineno) +
                                         ": expected `query_id Q0 doc_id rank score tag`");
    }
    rows[qid].emplace_back(rank, did);
  }
  std::map<std::string, std::vector<std::string>> out;
  for (auto& [qid, list] : rows) {
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });
    auto& ids = out[qid];
    for (auto& [rank, did] : list) ids.push_back(std::move(did));
  }
  return out;
}

}  // namespace cwms
