#include "service.hpp"

#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "cwms/error.hpp"
#include "cwms/text.hpp"

namespace cwms::gateway {
namespace {

using nlohmann::json;

Response json_response(int status, const json& body) { return {status, body.dump()}; }

Response error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound: return 404;
    case ErrorKind::Conflict: return 409;
    case ErrorKind::InvalidArgument:
    case ErrorKind::Format: return 400;
    case ErrorKind::Precondition:
    case ErrorKind::Io: break;
  }
  return 500;
}

json parse_body(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument, "body: malformed JSON");
  }
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "body: expected a JSON object");
  return j;
}

std::string required_string(const json& j, const char* field) {
  const auto it = j.find(field);
  if (it == j.end()) throw Error(ErrorKind::InvalidArgument, std::string(field) + ": missing");
  if (!it->is_string()) {
    throw Error(ErrorKind::InvalidArgument, std::string(field) + ": expected a string");
  }
  return it->get<std::string>();
}

std::optional<std::size_t> optional_count(const json& j, const char* field) {
  const auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned() || it->get<std::size_t>() == 0) {
    throw Error(ErrorKind::InvalidArgument, std::string(field) + ": expected a positive integer");
  }
  return it->get<std::size_t>();
}

// Splits "/ab/sessions/{id}/tail" into {id, tail}; tail may be empty.
bool session_route(const std::string& path, std::string& id, std::string& tail) {
  static const std::string prefix = "/ab/sessions/";
  if (path.rfind(prefix, 0) != 0) return false;
  const std::string rest = path.substr(prefix.size());
  const auto slash = rest.find('/');
  id = rest.substr(0, slash);
  tail = slash == std::string::npos ? "" : rest.substr(slash + 1);
  return !id.empty();
}

}  // namespace

struct Service::Http {
  httplib::Server server;
};

void ServiceConfig::apply_environment() {
  if (const char* dir = std::getenv("CWMS_DATA_DIR"); dir && *dir) data_dir = dir;
  if (const char* listen = std::getenv("CWMS_LISTEN"); listen && *listen) {
    const std::string value = listen;
    const auto colon = value.rfind(':');
    if (colon == std::string::npos) {
      throw Error(ErrorKind::InvalidArgument, "CWMS_LISTEN: expected host:port, got " + value);
    }
    host = value.substr(0, colon);
    try {
      port = std::stoi(value.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "CWMS_LISTEN: bad port in " + value);
    }
  }
  if (manifest_dir.empty()) manifest_dir = data_dir / "manifests";
  if (session_dir.empty()) session_dir = data_dir / "sessions";
}

void ServiceConfig::check() const {
  for (const auto& dir : {data_dir, manifest_dir, session_dir}) {
    if (!std::filesystem::is_directory(dir)) {
      throw Error(ErrorKind::Precondition, "not a directory: " + dir.string());
    }
  }
  const auto probe = session_dir / ".write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw Error(ErrorKind::Precondition, "session store not writable: " + session_dir.string());
  }
  std::filesystem::remove(probe);
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  if (config_.manifest_dir.empty()) config_.manifest_dir = config_.data_dir / "manifests";
  if (config_.session_dir.empty()) config_.session_dir = config_.data_dir / "sessions";
  config_.check();
  corpus_ = load_corpus(config_.data_dir / "corpus.jsonl");
  for (const auto& entry : std::filesystem::directory_iterator(config_.manifest_dir)) {
    if (entry.path().extension() != ".json") continue;
    const PipelineManifest m = load_manifest(entry.path());
    if (pipelines_.contains(m.id)) {
      throw Error(ErrorKind::Conflict, "duplicate manifest id \"" + m.id + "\"");
    }
    pipelines_.emplace(m.id, std::make_unique<LoadedPipeline>(m, corpus_));
  }
  for (const auto& entry : std::filesystem::directory_iterator(config_.session_dir)) {
    if (entry.path().extension() != ".jsonl") continue;
    auto s = std::make_unique<SessionSlot>();
    s->journal = entry.path();
    s->session = SessionJournal::load(entry.path());
    const std::string id = s->session.session_id;
    if (!sessions_.emplace(id, std::move(s)).second) {
      throw Error(ErrorKind::Conflict, "duplicate session id \"" + id + "\"");
    }
  }
}

Response Service::handle(const std::string& method, const std::string& path,
                         const std::string& body) const {
  try {
    if (path == "/health") {
      if (method == "GET") return health();
    } else if (path == "/retrieve") {
      if (method == "POST") return retrieve(body);
    } else if (path == "/ab/sessions") {
      if (method == "GET") return list_sessions();
    } else if (std::string id, tail; session_route(path, id, tail)) {
      if (tail == "next" && method == "GET") return next_pair(id);
      if (tail == "judgments" && method == "POST") return post_judgment(id, body);
      if (tail == "report" && method == "GET") return report(id);
      if (tail != "next" && tail != "judgments" && tail != "report") {
        return error_response(404, "no such route: " + path);
      }
    } else {
      return error_response(404, "no such route: " + path);
    }
    return error_response(405, "method not allowed: " + method + " " + path);
  } catch (const Error& e) {
    return error_response(status_for(e.kind()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

Response Service::health() const { return json_response(200, {{"status", "ok"}}); }

Response Service::retrieve(const std::string& body) const {
  const json req = parse_body(body);
  const std::string text = required_string(req, "query_text");
  const std::string manifest_id = required_string(req, "manifest_id");
  const auto it = pipelines_.find(manifest_id);
  if (it == pipelines_.end()) {
    throw Error(ErrorKind::NotFound, "unknown manifest \"" + manifest_id + "\"");
  }
  const Pipeline& p = it->second->pipeline();
  const std::size_t k_embed = optional_count(req, "k_embed").value_or(p.k_embed());
  const std::size_t k_rerank = optional_count(req, "k_rerank").value_or(p.k_rerank());
  std::string normalized;
  try {
    normalized = normalize_text(text);
  } catch (const Error&) {
    throw Error(ErrorKind::InvalidArgument, "query_text: not valid UTF-8");
  }
  const RetrievalResult r = p.run(Query{"adhoc", normalized}, k_embed, k_rerank);
  json results = json::array();
  for (std::size_t i = 0; i < r.final_list.size(); ++i) {
    const auto& d = r.final_list[i];
    results.push_back({{"rank", i + 1},
                       {"doc_id", d.id},
                       {"score", d.score},
                       {"snippet", std::string(prefix_chars(corpus_.at(d.id).text, kSnippetChars))}});
  }
  return json_response(200, {{"manifest_id", manifest_id},
                             {"query_text", normalized},
                             {"k_embed", k_embed},
                             {"k_rerank", k_rerank},
                             {"results", results},
                             {"timing",
                              {{"embed_seconds", r.timing.embed_seconds},
                               {"retrieve_seconds", r.timing.retrieve_seconds},
                               {"rerank_seconds", r.timing.rerank_seconds},
                               {"total_seconds", r.timing.total()}}}});
}

Service::SessionSlot& Service::slot(const std::string& id) const {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorKind::NotFound, "unknown session \"" + id + "\"");
  return *it->second;
}

Response Service::list_sessions() const {
  json out = json::array();
  for (const auto& [id, s] : sessions_) {
    std::shared_lock guard(s->lock);
    const std::size_t judgeable = s->session.judgeable_count();
    out.push_back({{"session_id", id},
                   {"pairs", s->session.pairs().size()},
                   {"judgeable", judgeable},
                   {"judged", judgeable - s->session.remaining()},
                   {"remaining", s->session.remaining()},
                   {"complete", s->session.complete()}});
  }
  return json_response(200, {{"sessions", out}});
}

Response Service::next_pair(const std::string& id) const {
  SessionSlot& s = slot(id);
  std::shared_lock guard(s.lock);
  const std::size_t judgeable = s.session.judgeable_count();
  const json progress = {{"judged", judgeable - s.session.remaining()}, {"total", judgeable}};
  const ABPair* next = s.session.next_unjudged();
  if (next == nullptr) {
    return json_response(200, {{"session_id", id}, {"complete", true}, {"progress", progress}});
  }
  return json_response(200, {{"session_id", id},
                             {"complete", false},
                             {"progress", progress},
                             {"pair", json::parse(judge_view_json(*next))}});
}

Response Service::post_judgment(const std::string& id, const std::string& body) const {
  SessionSlot& s = slot(id);
  const json req = parse_body(body);
  const std::string pair_id = required_string(req, "pair_id");
  const auto choice = parse_choice(required_string(req, "choice"));
  if (!choice) throw Error(ErrorKind::InvalidArgument, "choice: expected left, right or tie");
  std::unique_lock guard(s.lock);
  SessionJournal::append_judgment(s.journal, s.session, pair_id, *choice);
  return json_response(200, {{"session_id", id},
                             {"pair_id", pair_id},
                             {"accepted", true},
                             {"remaining", s.session.remaining()}});
}

Response Service::report(const std::string& id) const {
  SessionSlot& s = slot(id);
  std::shared_lock guard(s.lock);
  return {200, report_json(aggregate(s.session))};
}

void Service::install_routes() {
  http_ = std::make_unique<Http>();
  const auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const Response r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  http_->server.Get(".*", forward);
  http_->server.Post(".*", forward);
  http_->server.Put(".*", forward);
  http_->server.Delete(".*", forward);
}

void Service::listen() {
  install_routes();
  if (!http_->server.listen(config_.host, config_.port)) {
    throw Error(ErrorKind::Io, "cannot listen on " + config_.host + ":" +
                                   std::to_string(config_.port));
  }
}

int Service::bind_any_port() {
  install_routes();
  const int port = http_->server.bind_to_any_port(config_.host);
  if (port < 0) throw Error(ErrorKind::Io, "cannot bind " + config_.host);
  return port;
}

void Service::listen_bound() {
  if (!http_) throw Error(ErrorKind::Precondition, "bind_any_port() first");
  http_->server.listen_after_bind();
}

void Service::wait_until_ready() const {
  if (http_) http_->server.wait_until_ready();
}

void Service::stop() {
  if (http_) http_->server.stop();
}

Service::~Service() = default;

}  // namespace cwms::gateway
