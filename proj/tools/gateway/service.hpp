#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cwms/abtest.hpp"
#include "cwms/corpus.hpp"
#include "cwms/pipeline.hpp"

namespace cwms::gateway {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Holds corpus.jsonl; manifests/ and sessions/ default to subdirectories.
  std::filesystem::path data_dir = "data";
  std::filesystem::path manifest_dir;
  std::filesystem::path session_dir;

  /// Fills empty directories from data_dir and applies CWMS_LISTEN
  /// ("host:port") and CWMS_DATA_DIR when set.
  void apply_environment();
  /// Throws Error(Precondition) unless the directories exist and the
  /// session store is writable.
  void check() const;
};

struct Response {
  int status = 200;
  std::string body;  // JSON
};

/// File-backed retrieval and A/B judging service. Manifests and corpus are
/// loaded once and never change; each session's journal is guarded by its
/// own lock so judgments on one session are serialized.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Routes one request. Never throws; errors become JSON {"error": ...}.
  Response handle(const std::string& method, const std::string& path,
                  const std::string& body) const;

  /// Blocks serving HTTP until stop() is called.
  void listen();
  /// Binds to an ephemeral port and returns it; serve with listen_bound().
  int bind_any_port();
  void listen_bound();
  void wait_until_ready() const;
  void stop();

  const ServiceConfig& config() const { return config_; }

 private:
  struct SessionSlot {
    std::filesystem::path journal;
    mutable std::shared_mutex lock;
    ABSession session;
  };

  Response health() const;
  Response retrieve(const std::string& body) const;
  Response list_sessions() const;
  Response next_pair(const std::string& id) const;
  Response post_judgment(const std::string& id, const std::string& body) const;
  Response report(const std::string& id) const;
  SessionSlot& slot(const std::string& id) const;
  void install_routes();

  ServiceConfig config_;
  Corpus corpus_;
  std::map<std::string, std::unique_ptr<LoadedPipeline>> pipelines_;
  std::map<std::string, std::unique_ptr<SessionSlot>> sessions_;
  struct Http;
  std::unique_ptr<Http> http_;
};

}  // namespace cwms::gateway
