#include "cwms/corpus.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cwms/error.hpp"
#include "cwms/rng.hpp"
#include "cwms/text.hpp"

namespace cwms {
namespace {

using nlohmann::json;

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

// Reads an `id`/`text` JSON Lines file, normalizing text and rejecting
// duplicate ids with the offending line number.
template <typename Record>
RecordSet<Record> load_records(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Record> records;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Record r;
    try {
      const json j = json::parse(line);
      if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["id"].is_string() ||
          !j["text"].is_string()) {
        throw Error(ErrorKind::Format, "");
      }
      r.id = j["id"].get<std::string>();
      r.text = normalize_text(j["text"].get<std::string>());
    } catch (const std::exception&) {
      throw Error(ErrorKind::Format,
                  where(path, lineno) + ": malformed record (expected {\"id\":..., \"text\":...})");
    }
    if (r.id.empty()) throw Error(ErrorKind::Format, where(path, lineno) + ": empty id");
    auto [it, inserted] = first_line.emplace(r.id, lineno);
    if (!inserted) {
      throw Error(ErrorKind::InvalidArgument,
                  where(path, lineno) + ": duplicate id \"" + r.id + "\" (first seen on line " +
                      std::to_string(it->second) + ")");
    }
    records.push_back(std::move(r));
  }
  return RecordSet<Record>(std::move(records));
}

template <typename Record>
void save_records(const RecordSet<Record>& set, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& r : set) out << json{{"id", r.id}, {"text", r.text}}.dump() << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace

template <typename Record>
RecordSet<Record>::RecordSet(std::vector<Record> records) : records_(std::move(records)) {
  by_id_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].id.empty()) throw Error(ErrorKind::InvalidArgument, "record with empty id");
    if (!by_id_.emplace(records_[i].id, i).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate id \"" + records_[i].id + "\"");
    }
  }
}

template <typename Record>
bool RecordSet<Record>::contains(std::string_view id) const {
  return by_id_.find(std::string(id)) != by_id_.end();
}

template <typename Record>
const Record& RecordSet<Record>::at(std::string_view id) const {
  return records_[position(id)];
}

template <typename Record>
std::size_t RecordSet<Record>::position(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) throw Error(ErrorKind::NotFound, "unknown id \"" + std::string(id) + "\"");
  return it->second;
}

template class RecordSet<Document>;
template class RecordSet<Query>;

void Qrels::add(const std::string& query_id, const std::string& doc_id) {
  judged_[query_id].insert(doc_id);
}

const std::set<std::string>& Qrels::relevant(std::string_view query_id) const {
  static const std::set<std::string> kNone;
  const auto it = judged_.find(query_id);
  return it == judged_.end() ? kNone : it->second;
}

bool Qrels::is_relevant(std::string_view query_id, std::string_view doc_id) const {
  const auto& rel = relevant(query_id);
  return rel.find(std::string(doc_id)) != rel.end();
}

bool Qrels::has_judgments(std::string_view query_id) const { return !relevant(query_id).empty(); }

void Qrels::validate_against(const Corpus& corpus) const {
  for (const auto& [qid, docs] : judged_) {
    for (const auto& d : docs) {
      if (!corpus.contains(d)) {
        throw Error(ErrorKind::InvalidArgument,
                    "qrels for query \"" + qid + "\" reference unknown document \"" + d + "\"");
      }
    }
  }
}

void validate_example(const TrainingExample& example) {
  std::set<std::string_view> seen;
  for (const auto& n : example.hard_negative_ids) {
    if (n == example.positive_id) {
      throw Error(ErrorKind::InvalidArgument,
                  "example \"" + example.query_id + "\": positive listed as hard negative");
    }
    if (!seen.insert(n).second) {
      throw Error(ErrorKind::InvalidArgument,
                  "example \"" + example.query_id + "\": duplicate hard negative \"" + n + "\"");
    }
  }
}

Corpus load_corpus(const std::filesystem::path& path) { return load_records<Document>(path); }
void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  save_records(corpus, path);
}
QuerySet load_queries(const std::filesystem::path& path) { return load_records<Query>(path); }
void save_queries(const QuerySet& queries, const std::filesystem::path& path) {
  save_records(queries, path);
}

Qrels load_qrels(const std::filesystem::path& path) {
  auto in = open_in(path);
  Qrels qrels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string qid, iter, did, grade_text, extra;
    if (!(fields >> qid)) continue;
    if (!(fields >> iter >> did >> grade_text) || (fields >> extra)) {
      throw Error(ErrorKind::Format,
                  where(path, lineno) + ": expected `query_id 0 doc_id grade`");
    }
    double grade = 0;
    try {
      std::size_t used = 0;
      grade = std::stod(grade_text, &used);
      if (used != grade_text.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw Error(ErrorKind::Format, where(path, lineno) + ": bad grade \"" + grade_text + "\"");
    }
    if (grade > 0) qrels.add(qid, did);
  }
  return qrels;
}

void save_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& [qid, docs] : qrels.entries()) {
    for (const auto& d : docs) out << qid << " 0 " << d << " 1\n";
  }
}

std::vector<TrainingExample> load_examples(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TrainingExample ex;
    try {
      const json j = json::parse(line);
      ex.query_id = j.at("query_id").get<std::string>();
      ex.query_text = j.at("query_text").get<std::string>();
      ex.positive_id = j.at("positive_id").get<std::string>();
      ex.hard_negative_ids = j.at("hard_negative_ids").get<std::vector<std::string>>();
      const auto stage = parse_stage(j.at("stage").get<std::string>());
      if (!stage) throw Error(ErrorKind::Format, "");
      ex.stage_tag = *stage;
    } catch (const std::exception&) {
      throw Error(ErrorKind::Format, where(path, lineno) + ": malformed training example");
    }
    validate_example(ex);
    out.push_back(std::move(ex));
  }
  return out;
}

void save_examples(const std::vector<TrainingExample>& examples,
                   const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& ex : examples) {
    out << json{{"query_id", ex.query_id},
                {"query_text", ex.query_text},
                {"positive_id", ex.positive_id},
                {"hard_negative_ids", ex.hard_negative_ids},
                {"stage", std::string(to_string(ex.stage_tag))}}
               .dump()
        << '\n';
  }
}

std::vector<TrainingExample> generate_weak_pairs(const Corpus& corpus, std::size_t count,
                                                 std::uint64_t seed) {
  if (corpus.empty()) throw Error(ErrorKind::InvalidArgument, "weak pairs need a nonempty corpus");
  if (count == 0) throw Error(ErrorKind::InvalidArgument, "weak pair count must be >= 1");

  constexpr std::size_t kMinSpan = 8;
  constexpr std::size_t kMaxSpan = 32;

  SplitMix64 rng(seed);
  std::vector<TrainingExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Document& doc = corpus[rng.below(corpus.size())];
    const auto chars = split_code_points(doc.text);
    const std::size_t span = std::min<std::size_t>(rng.between(kMinSpan, kMaxSpan), chars.size());
    const std::size_t start = rng.below(chars.size() - span + 1);

    std::string text;
    for (std::size_t k = start; k < start + span; ++k) text.append(chars[k]);

    TrainingExample ex;
    ex.query_id = "w" + std::to_string(i);
    ex.query_text = std::move(text);
    ex.positive_id = doc.id;
    ex.stage_tag = StageTag::Stage1;
    out.push_back(std::move(ex));
  }
  return out;
}

QuerySet filter_stage3_queries(const QuerySet& queries, const Qrels& qrels) {
  std::vector<Query> kept;
  for (const auto& q : queries) {
    if (qrels.has_judgments(q.id) && char_length(normalize_text(q.text)) >= kStage3MinQueryChars) {
      kept.push_back(q);
    }
  }
  return QuerySet(std::move(kept));
}

std::vector<TrainingExample> supervised_examples(const QuerySet& queries, const Qrels& qrels,
                                                 StageTag tag) {
  std::vector<TrainingExample> out;
  for (const auto& q : queries) {
    for (const auto& d : qrels.relevant(q.id)) {
      TrainingExample ex;
      ex.query_id = q.id;
      ex.query_text = q.text;
      ex.positive_id = d;
      ex.stage_tag = tag;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace cwms
