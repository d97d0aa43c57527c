#include <gtest/gtest.h>

#include <httplib.h>
#include <json.hpp>
#include <cstdlib>
#include <thread>

#include "cwms/checkpoint_io.hpp"
#include "cwms/error.hpp"
#include "gateway/service.hpp"
#include "support.hpp"

namespace cwms {
namespace {

using nlohmann::json;

// A served workspace: corpus, two manifests and one A/B session journal.
struct Workspace {
  testing::TempDir dir{"gateway"};
  Benchmark bench = generate_benchmark(testing::tiny_spec(17));
  std::filesystem::path data = dir.path();
  std::filesystem::path journal = dir.path() / "sessions" / "s1.jsonl";

  Workspace() {
    std::filesystem::create_directories(data / "manifests");
    std::filesystem::create_directories(data / "sessions");
    std::filesystem::create_directories(data / "models");
    save_corpus(bench.corpus, data / "corpus.jsonl");
    const auto make = [&](const std::string& id, std::uint64_t seed) {
      const auto emb = EmbedderCheckpoint::initialize(seed, 16, 1 << 14);
      const auto rr = RerankerCheckpoint::initialize(seed, fingerprint(emb));
      save_checkpoint(emb, data / "models" / (id + "-emb.cwms"));
      save_checkpoint(rr, data / "models" / (id + "-rr.cwms"));
      PipelineManifest m;
      m.id = id;
      m.embedder_path = (data / "models" / (id + "-emb.cwms")).string();
      m.reranker_path = (data / "models" / (id + "-rr.cwms")).string();
      m.feature_embedder_path = m.embedder_path;
      save_manifest(m, data / "manifests" / (id + ".json"));
    };
    make("base", 1);
    make("other", 2);
    const LoadedPipeline a(load_manifest(data / "manifests/base.json"), bench.corpus);
    const LoadedPipeline b(load_manifest(data / "manifests/other.json"), bench.corpus);
    const ABSession s = build_session(a.pipeline(), "base", b.pipeline(), "other", bench.test,
                                      bench.corpus, 3, "s1");
    SessionJournal::create(journal, s);
  }

  gateway::ServiceConfig config() const {
    gateway::ServiceConfig c;
    c.data_dir = data;
    c.manifest_dir = data / "manifests";
    c.session_dir = data / "sessions";
    return c;
  }
};

struct GatewayTest : ::testing::Test {
  Workspace ws;
  gateway::Service service{ws.config()};

  json call(const std::string& method, const std::string& path, const std::string& body,
            int expected_status) {
    const gateway::Response r = service.handle(method, path, body);
    EXPECT_EQ(r.status, expected_status) << method << " " << path << " -> " << r.body;
    return json::parse(r.body);
  }
};

TEST_F(GatewayTest, Health) {
  EXPECT_EQ(call("GET", "/health", "", 200), json({{"status", "ok"}}));
}

TEST_F(GatewayTest, RetrieveMatchesInProcessPipeline) {
  const LoadedPipeline lp(load_manifest(ws.data / "manifests/base.json"), ws.bench.corpus);
  for (const auto& q : ws.bench.test) {
    const json body{{"query_text", q.text}, {"manifest_id", "base"}};
    const json r = call("POST", "/retrieve", body.dump(), 200);
    const auto expected = lp.pipeline().run(Query{"adhoc", q.text});
    ASSERT_EQ(r.at("results").size(), expected.final_list.size());
    EXPECT_EQ(r.at("k_embed"), 60);
    EXPECT_EQ(r.at("k_rerank"), 10);
    for (std::size_t i = 0; i < expected.final_list.size(); ++i) {
      EXPECT_EQ(r["results"][i].at("doc_id"), expected.final_list[i].id);
      EXPECT_EQ(r["results"][i].at("rank"), i + 1);
      EXPECT_DOUBLE_EQ(r["results"][i].at("score").get<double>(), expected.final_list[i].score);
    }
  }
  const json small = call("POST", "/retrieve",
                          json{{"query_text", "x"}, {"manifest_id", "base"}, {"k_embed", 5}, {"k_rerank", 2}}.dump(), 200);
  EXPECT_EQ(small.at("results").size(), 2u);
}

TEST_F(GatewayTest, RetrieveErrorsNameTheField) {
  json r = call("POST", "/retrieve", json{{"manifest_id", "base"}}.dump(), 400);
  EXPECT_NE(r.at("error").get<std::string>().find("query_text"), std::string::npos);
  r = call("POST", "/retrieve", json{{"query_text", "x"}, {"manifest_id", 3}}.dump(), 400);
  EXPECT_NE(r.at("error").get<std::string>().find("manifest_id"), std::string::npos);
  r = call("POST", "/retrieve", json{{"query_text", "x"}, {"manifest_id", "base"}, {"k_rerank", 0}}.dump(), 400);
  EXPECT_NE(r.at("error").get<std::string>().find("k_rerank"), std::string::npos);
  call("POST", "/retrieve", "{not json", 400);
  call("POST", "/retrieve", json{{"query_text", "x"}, {"manifest_id", "nope"}}.dump(), 404);
  call("GET", "/retrieve", "", 405);
  call("GET", "/nowhere", "", 404);
}

TEST_F(GatewayTest, SessionListing) {
  const json r = call("GET", "/ab/sessions", "", 200);
  ASSERT_EQ(r.at("sessions").size(), 1u);
  const json& s = r["sessions"][0];
  EXPECT_EQ(s.at("session_id"), "s1");
  EXPECT_EQ(s.at("pairs"), ws.bench.test.size());
  EXPECT_EQ(s.at("judged"), 0);
  EXPECT_EQ(s.at("complete"), s.at("judgeable") == 0);
}

TEST_F(GatewayTest, JudgmentErrors) {
  call("GET", "/ab/sessions/zz/next", "", 404);
  const json next = call("GET", "/ab/sessions/s1/next", "", 200);
  ASSERT_FALSE(next.at("complete").get<bool>());
  const std::string pid = next.at("pair").at("pair_id");
  json r = call("POST", "/ab/sessions/s1/judgments", json{{"pair_id", pid}}.dump(), 400);
  EXPECT_NE(r.at("error").get<std::string>().find("choice"), std::string::npos);
  r = call("POST", "/ab/sessions/s1/judgments", json{{"pair_id", pid}, {"choice", "maybe"}}.dump(), 400);
  EXPECT_NE(r.at("error").get<std::string>().find("choice"), std::string::npos);
  call("POST", "/ab/sessions/s1/judgments", json{{"pair_id", "nope"}, {"choice", "left"}}.dump(), 404);
  call("POST", "/ab/sessions/s1/judgments", json{{"pair_id", pid}, {"choice", "left"}}.dump(), 200);
  call("POST", "/ab/sessions/s1/judgments", json{{"pair_id", pid}, {"choice", "right"}}.dump(), 409);
  // The journal holds exactly the accepted judgment.
  EXPECT_EQ(SessionJournal::load(ws.journal).judgments().at(pid), Choice::Left);
}

TEST(ServiceConfig, EnvironmentOverridesAndChecks) {
  testing::TempDir dir("svc-config");
  ::setenv("CWMS_DATA_DIR", dir.path().c_str(), 1);
  ::setenv("CWMS_LISTEN", "0.0.0.0:9123", 1);
  gateway::ServiceConfig c;
  c.apply_environment();
  ::unsetenv("CWMS_DATA_DIR");
  ::unsetenv("CWMS_LISTEN");
  EXPECT_EQ(c.host, "0.0.0.0");
  EXPECT_EQ(c.port, 9123);
  EXPECT_EQ(c.data_dir, dir.path());
  EXPECT_EQ(c.manifest_dir, dir.path() / "manifests");
  EXPECT_THROW(c.check(), Error);
  std::filesystem::create_directories(c.manifest_dir);
  std::filesystem::create_directories(c.session_dir);
  EXPECT_NO_THROW(c.check());
}

// Full judging flow over real HTTP; the final report must equal aggregating
// the journal in-process, and no /next payload may leak the assignment.
TEST(GatewayHttp, ScriptedSessionMatchesInProcessAggregate) {
  Workspace ws;
  auto config = ws.config();
  gateway::Service service(config);
  const int port = service.bind_any_port();
  std::thread server([&] { service.listen_bound(); });
  service.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  const std::set<std::string> envelope{"session_id", "complete", "progress", "pair"};
  std::size_t judged = 0;
  for (int guard = 0; guard < 1000; ++guard) {
    auto res = client.Get("/ab/sessions/s1/next");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    const json next = json::parse(res->body);
    for (const auto& [key, v] : next.items()) EXPECT_TRUE(envelope.contains(key)) << key;
    if (next.at("complete").get<bool>()) {
      EXPECT_FALSE(next.contains("pair"));
      break;
    }
    const json& pair = next.at("pair");
    for (const auto& [key, v] : pair.items()) EXPECT_TRUE(judge_view_fields().contains(key)) << key;
    for (const auto& side : {"left", "right"}) {
      for (const auto& snip : pair.at(side)) {
        for (const auto& [key, v] : snip.items()) EXPECT_TRUE(key == "doc_id" || key == "text") << key;
      }
    }
    const std::string choice = judged % 3 == 0 ? "left" : judged % 3 == 1 ? "right" : "tie";
    const json body{{"pair_id", pair.at("pair_id")}, {"choice", choice}};
    auto ack = client.Post("/ab/sessions/s1/judgments", body.dump(), "application/json");
    ASSERT_TRUE(ack);
    ASSERT_EQ(ack->status, 200) << ack->body;
    ++judged;
    EXPECT_EQ(json::parse(ack->body).at("remaining"), next.at("progress").at("total").get<int>() - judged);
  }
  EXPECT_GT(judged, 0u);

  auto rep = client.Get("/ab/sessions/s1/report");
  ASSERT_TRUE(rep);
  ASSERT_EQ(rep->status, 200);
  const ABSession replay = SessionJournal::load(ws.journal);
  EXPECT_EQ(replay.judgments().size(), judged);
  EXPECT_EQ(json::parse(rep->body), json::parse(report_json(aggregate(replay))));
  EXPECT_FALSE(json::parse(rep->body).at("partial").get<bool>());

  service.stop();
  server.join();

  // A restarted service picks the judgments back up from the journal.
  gateway::Service restarted(config);
  EXPECT_TRUE(json::parse(restarted.handle("GET", "/ab/sessions/s1/next", "").body).at("complete").get<bool>());
}

}  // namespace
}  // namespace cwms
