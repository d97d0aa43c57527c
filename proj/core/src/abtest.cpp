#include "cwms/abtest.hpp"

#include <fstream>

#include <json.hpp>

#include "cwms/error.hpp"
#include "cwms/rng.hpp"
#include "cwms/text.hpp"

namespace cwms {
namespace {

using nlohmann::json;

std::string_view to_string(Side s) { return s == Side::Left ? "left" : "right"; }
std::string_view to_string(System s) { return s == System::A ? "A" : "B"; }

json snippets_json(const std::vector<Snippet>& snippets) {
  json arr = json::array();
  for (const auto& s : snippets) arr.push_back({{"doc_id", s.doc_id}, {"text", s.text}});
  return arr;
}

std::vector<Snippet> snippets_from(const json& arr) {
  std::vector<Snippet> out;
  for (const auto& s : arr) out.push_back({s.at("doc_id").get<std::string>(), s.at("text").get<std::string>()});
  return out;
}

json judge_view(const ABPair& p) {
  return {{"pair_id", p.pair_id},   {"query_id", p.query_id},
          {"query_text", p.query_text}, {"dataset", p.dataset},
          {"left", snippets_json(p.left)}, {"right", snippets_json(p.right)}};
}

json counts_json(const ABCounts& c) {
  return {{"wins_a", c.wins_a},           {"wins_b", c.wins_b},     {"ties", c.ties()},
          {"judged_ties", c.judged_ties}, {"auto_ties", c.auto_ties}, {"pairs", c.pairs}};
}

void append_line(const std::filesystem::path& path, const json& record) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot append to " + path.string());
  out << record.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "append failed: " + path.string());
}

std::uint64_t next_seq(const ABSession& session) {
  // session + pair + seal per pair + one per judgment
  return 1 + 2 * session.pairs().size() + session.judgments().size();
}

}  // namespace

std::string_view to_string(Choice c) {
  switch (c) {
    case Choice::Left: return "left";
    case Choice::Right: return "right";
    case Choice::Tie: return "tie";
  }
  return "tie";
}

std::optional<Choice> parse_choice(std::string_view text) {
  if (text == "left") return Choice::Left;
  if (text == "right") return Choice::Right;
  if (text == "tie") return Choice::Tie;
  return std::nullopt;
}

const ABPair& ABSession::pair(const std::string& pair_id) const {
  const auto it = pair_pos_.find(pair_id);
  if (it == pair_pos_.end()) throw Error(ErrorKind::NotFound, "unknown pair \"" + pair_id + "\"");
  return pairs_[it->second];
}

const SealedAssignment& ABSession::sealed(const std::string& pair_id) const {
  const auto it = sealed_.find(pair_id);
  if (it == sealed_.end()) throw Error(ErrorKind::NotFound, "unknown pair \"" + pair_id + "\"");
  return it->second;
}

std::size_t ABSession::judgeable_count() const {
  std::size_t n = 0;
  for (const auto& p : pairs_) n += p.auto_tie ? 0 : 1;
  return n;
}

std::size_t ABSession::remaining() const { return judgeable_count() - judgments_.size(); }

const ABPair* ABSession::next_unjudged() const {
  for (const auto& p : pairs_) {
    if (!p.auto_tie && !judgments_.contains(p.pair_id)) return &p;
  }
  return nullptr;
}

void ABSession::record_judgment(const std::string& pair_id, Choice choice) {
  const ABPair& p = pair(pair_id);
  if (p.auto_tie) {
    throw Error(ErrorKind::Conflict, "pair \"" + pair_id + "\" is an automatic tie");
  }
  if (!judgments_.emplace(pair_id, choice).second) {
    throw Error(ErrorKind::Conflict, "pair \"" + pair_id + "\" is already judged");
  }
}

void ABSession::add_pair(ABPair pair, SealedAssignment sealed) {
  if (!pair_pos_.emplace(pair.pair_id, pairs_.size()).second) {
    throw Error(ErrorKind::InvalidArgument, "duplicate pair id \"" + pair.pair_id + "\"");
  }
  sealed_[pair.pair_id] = sealed;
  pairs_.push_back(std::move(pair));
}

Side draw_assignment(std::uint64_t seed, const std::string& pair_id) {
  SplitMix64 rng(mix_seed(seed, pair_id));
  return rng.coin() ? Side::Left : Side::Right;
}

std::vector<Snippet> snippets_for(const RetrievalResult& result, const Corpus& corpus) {
  std::vector<Snippet> out;
  out.reserve(result.final_list.size());
  for (const auto& d : result.final_list) {
    out.push_back({d.id, std::string(prefix_chars(corpus.at(d.id).text, kSnippetChars))});
  }
  return out;
}

ABSession build_session_from_results(const std::string& session_id, const std::string& manifest_a,
                                     const std::string& manifest_b, const QuerySet& queries,
                                     const std::vector<RetrievalResult>& results_a,
                                     const std::vector<RetrievalResult>& results_b,
                                     const Corpus& corpus, std::uint64_t seed,
                                     const std::string& dataset) {
  if (results_a.size() != queries.size() || results_b.size() != queries.size()) {
    throw Error(ErrorKind::InvalidArgument, "A/B results do not cover the query set");
  }
  ABSession s;
  s.session_id = session_id;
  s.manifest_a = manifest_a;
  s.manifest_b = manifest_b;
  s.seed = seed;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Query& q = queries[i];
    if (results_a[i].query_id != q.id || results_b[i].query_id != q.id) {
      throw Error(ErrorKind::InvalidArgument, "A/B results out of order at query \"" + q.id + "\"");
    }
    ABPair p;
    p.pair_id = "p" + std::to_string(i);
    p.query_id = q.id;
    p.query_text = q.text;
    p.dataset = dataset;
    p.auto_tie = results_a[i].final_ids() == results_b[i].final_ids();

    SealedAssignment seal;
    seal.system_a_side = draw_assignment(seed, p.pair_id);
    seal.latency_a = results_a[i].timing.total();
    seal.latency_b = results_b[i].timing.total();

    auto a = snippets_for(results_a[i], corpus);
    auto b = snippets_for(results_b[i], corpus);
    if (seal.system_a_side == Side::Left) {
      p.left = std::move(a);
      p.right = std::move(b);
    } else {
      p.left = std::move(b);
      p.right = std::move(a);
    }
    s.add_pair(std::move(p), seal);
  }
  return s;
}

ABSession build_session(const Pipeline& system_a, const std::string& manifest_a,
                        const Pipeline& system_b, const std::string& manifest_b,
                        const QuerySet& queries, const Corpus& corpus, std::uint64_t seed,
                        const std::string& session_id, const std::string& dataset) {
  std::vector<RetrievalResult> ra, rb;
  ra.reserve(queries.size());
  rb.reserve(queries.size());
  for (const auto& q : queries) {
    try {
      ra.push_back(system_a.run(q));
      rb.push_back(system_b.run(q));
    } catch (const Error& e) {
      throw Error(e.kind(), "query \"" + q.id + "\": " + e.what());
    }
  }
  return build_session_from_results(session_id, manifest_a, manifest_b, queries, ra, rb, corpus,
                                    seed, dataset);
}

std::optional<double> win_rate(std::size_t wins_candidate, std::size_t wins_other) {
  const std::size_t decided = wins_candidate + wins_other;
  if (decided == 0) return std::nullopt;
  return static_cast<double>(wins_candidate) / static_cast<double>(decided);
}

ABReport aggregate(const ABSession& session) {
  ABReport r;
  r.session_id = session.session_id;
  r.candidate = session.candidate;
  double latency_a = 0, latency_b = 0;
  for (const auto& p : session.pairs()) {
    const SealedAssignment& seal = session.sealed(p.pair_id);
    latency_a += seal.latency_a;
    latency_b += seal.latency_b;
    ABCounts& ds = r.by_dataset[p.dataset];
    ++ds.pairs;
    ++r.totals.pairs;
    if (p.auto_tie) {
      ++ds.auto_ties;
      ++r.totals.auto_ties;
      continue;
    }
    const auto it = session.judgments().find(p.pair_id);
    if (it == session.judgments().end()) {
      ++r.pending;
      continue;
    }
    if (it->second == Choice::Tie) {
      ++ds.judged_ties;
      ++r.totals.judged_ties;
      continue;
    }
    const Side chosen = it->second == Choice::Left ? Side::Left : Side::Right;
    if (chosen == seal.system_a_side) {
      ++ds.wins_a;
      ++r.totals.wins_a;
    } else {
      ++ds.wins_b;
      ++r.totals.wins_b;
    }
  }
  r.partial = r.pending > 0;
  const bool a_is_candidate = session.candidate == System::A;
  r.win_rate_excluding_ties = a_is_candidate ? win_rate(r.totals.wins_a, r.totals.wins_b)
                                             : win_rate(r.totals.wins_b, r.totals.wins_a);
  r.latency = a_is_candidate ? summarize_latency(latency_a, latency_b, r.totals.pairs)
                             : summarize_latency(latency_b, latency_a, r.totals.pairs);
  return r;
}

std::string judge_view_json(const ABPair& pair) { return judge_view(pair).dump(); }

const std::set<std::string>& judge_view_fields() {
  static const std::set<std::string> kFields{"pair_id", "query_id", "query_text",
                                             "dataset", "left",     "right"};
  return kFields;
}

std::string report_json(const ABReport& r) {
  json by_dataset = json::object();
  for (const auto& [name, c] : r.by_dataset) by_dataset[name] = counts_json(c);
  json j = counts_json(r.totals);
  j["session_id"] = r.session_id;
  j["candidate"] = std::string(to_string(r.candidate));
  j["pending"] = r.pending;
  j["partial"] = r.partial;
  j["win_rate_excluding_ties"] =
      r.win_rate_excluding_ties ? json(*r.win_rate_excluding_ties) : json(nullptr);
  j["by_dataset"] = by_dataset;
  j["latency"] = {{"query_count", r.latency.query_count},
                  {"candidate_total_seconds", r.latency.candidate_total},
                  {"baseline_total_seconds", r.latency.baseline_total},
                  {"delta_seconds", r.latency.delta},
                  {"per_query_delta_seconds", r.latency.per_query_delta},
                  {"relative_increase", r.latency.relative_increase}};
  return j.dump();
}

void SessionJournal::create(const std::filesystem::path& path, const ABSession& session) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  std::uint64_t seq = 0;
  out << json{{"seq", seq++},
              {"type", "session"},
              {"session_id", session.session_id},
              {"manifest_a", session.manifest_a},
              {"manifest_b", session.manifest_b},
              {"candidate", std::string(to_string(session.candidate))},
              {"seed", session.seed},
              {"pair_count", session.pairs().size()}}
             .dump()
      << '\n';
  for (const auto& p : session.pairs()) {
    json rec = judge_view(p);
    rec["seq"] = seq++;
    rec["type"] = "pair";
    rec["auto_tie"] = p.auto_tie;
    out << rec.dump() << '\n';
  }
  for (const auto& p : session.pairs()) {
    const auto& seal = session.sealed(p.pair_id);
    out << json{{"seq", seq++},
                {"type", "seal"},
                {"pair_id", p.pair_id},
                {"system_a_side", std::string(to_string(seal.system_a_side))},
                {"latency_a", seal.latency_a},
                {"latency_b", seal.latency_b}}
               .dump()
        << '\n';
  }
  for (const auto& p : session.pairs()) {
    const auto it = session.judgments().find(p.pair_id);
    if (it == session.judgments().end()) continue;
    out << json{{"seq", seq++},
                {"type", "judgment"},
                {"pair_id", p.pair_id},
                {"choice", std::string(to_string(it->second))}}
               .dump()
        << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

ABSession SessionJournal::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  ABSession s;
  std::map<std::string, ABPair> pending_pairs;
  std::vector<std::string> pair_order;
  std::map<std::string, SealedAssignment> seals;
  std::vector<std::pair<std::string, Choice>> judgments;
  std::string line;
  std::size_t lineno = 0;
  std::int64_t last_seq = -1;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string at = path.string() + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Format, at + ": malformed journal record");
    }
    try {
      const auto seq = rec.at("seq").get<std::int64_t>();
      if (seq <= last_seq) throw Error(ErrorKind::Format, at + ": sequence number not increasing");
      last_seq = seq;
      const auto type = rec.at("type").get<std::string>();
      if (type == "session") {
        s.session_id = rec.at("session_id").get<std::string>();
        s.manifest_a = rec.at("manifest_a").get<std::string>();
        s.manifest_b = rec.at("manifest_b").get<std::string>();
        s.candidate = rec.at("candidate").get<std::string>() == "A" ? System::A : System::B;
        s.seed = rec.at("seed").get<std::uint64_t>();
        have_header = true;
      } else if (type == "pair") {
        ABPair p;
        p.pair_id = rec.at("pair_id").get<std::string>();
        p.query_id = rec.at("query_id").get<std::string>();
        p.query_text = rec.at("query_text").get<std::string>();
        p.dataset = rec.at("dataset").get<std::string>();
        p.left = snippets_from(rec.at("left"));
        p.right = snippets_from(rec.at("right"));
        p.auto_tie = rec.at("auto_tie").get<bool>();
        pair_order.push_back(p.pair_id);
        pending_pairs[p.pair_id] = std::move(p);
      } else if (type == "seal") {
        SealedAssignment seal;
        seal.system_a_side =
            rec.at("system_a_side").get<std::string>() == "left" ? Side::Left : Side::Right;
        seal.latency_a = rec.at("latency_a").get<double>();
        seal.latency_b = rec.at("latency_b").get<double>();
        seals[rec.at("pair_id").get<std::string>()] = seal;
      } else if (type == "judgment") {
        const auto choice = parse_choice(rec.at("choice").get<std::string>());
        if (!choice) throw Error(ErrorKind::Format, at + ": bad choice");
        judgments.emplace_back(rec.at("pair_id").get<std::string>(), *choice);
      } else {
        throw Error(ErrorKind::Format, at + ": unknown record type \"" + type + "\"");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorKind::Format, at + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorKind::Format, path.string() + ": missing session record");
  for (const auto& id : pair_order) {
    const auto seal = seals.find(id);
    if (seal == seals.end()) throw Error(ErrorKind::Format, "pair \"" + id + "\" has no seal");
    s.add_pair(std::move(pending_pairs[id]), seal->second);
  }
  for (const auto& [id, choice] : judgments) s.record_judgment(id, choice);
  return s;
}

void SessionJournal::append_judgment(const std::filesystem::path& path, ABSession& session,
                                     const std::string& pair_id, Choice choice) {
  ABSession updated = session;
  updated.record_judgment(pair_id, choice);
  append_line(path, json{{"seq", next_seq(session)},
                         {"type", "judgment"},
                         {"pair_id", pair_id},
                         {"choice", std::string(to_string(choice))}});
  session = std::move(updated);
}

}  // namespace cwms
