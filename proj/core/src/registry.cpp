#include "cwms/registry.hpp"

#include <fstream>

#include <json.hpp>

#include "cwms/error.hpp"

namespace cwms {
namespace {

std::string label(ComponentKind c, StageTag s) {
  return std::string(to_string(c)) + "/" + std::string(to_string(s));
}

}  // namespace

void CheckpointRegistry::put(RegistryEntry entry) {
  const auto key = std::make_pair(entry.component, entry.stage);
  entries_[key] = std::move(entry);
}

const RegistryEntry* CheckpointRegistry::find(ComponentKind component, StageTag stage) const {
  const auto it = entries_.find({component, stage});
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<RegistryEntry> CheckpointRegistry::entries() const {
  std::vector<RegistryEntry> out;
  for (const auto& [key, e] : entries_) out.push_back(e);
  return out;
}

std::filesystem::path CheckpointRegistry::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : (base_dir_ / p).lexically_normal();
}

const RegistryEntry& CheckpointRegistry::require(ComponentKind component, StageTag stage) const {
  for (StageTag s : kAllStages) {
    if (stage_index(s) > stage_index(stage)) break;
    const RegistryEntry* e = find(component, s);
    if (e == nullptr) {
      throw Error(ErrorKind::Precondition, "registry invariant violated: " + label(component, stage) +
                                               " requires missing entry " + label(component, s));
    }
    if (!std::filesystem::exists(resolve(e->path))) {
      throw Error(ErrorKind::Precondition,
                  "registry invariant violated: " + label(component, stage) + " requires " +
                      label(component, s) + " whose artifact " + resolve(e->path).string() +
                      " is missing");
    }
  }
  return *find(component, stage);
}

std::vector<std::string> CheckpointRegistry::missing() const {
  std::vector<std::string> out;
  for (ComponentKind c : {ComponentKind::Embedder, ComponentKind::Reranker}) {
    for (StageTag s : kAllStages) {
      const RegistryEntry* e = find(c, s);
      if (e == nullptr) {
        out.push_back(label(c, s) + ": no entry");
      } else if (!std::filesystem::exists(resolve(e->path))) {
        out.push_back(label(c, s) + ": artifact " + resolve(e->path).string() + " missing");
      } else if (e->metrics.empty()) {
        out.push_back(label(c, s) + ": no metric snapshot");
      }
    }
  }
  return out;
}

void CheckpointRegistry::save(const std::filesystem::path& path) const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, e] : entries_) {
    nlohmann::json j = {
        {"component", std::string(to_string(e.component))},
        {"stage", std::string(to_string(e.stage))},
        {"path", e.path},
        {"fingerprint", e.fingerprint},
        {"seed", e.seed},
        {"metrics", e.metrics},
        {"dataset", e.dataset},
        {"query_count", e.query_count},
        {"excluded_queries", e.excluded_queries},
    };
    if (!e.feature_embedder_path.empty()) j["feature_embedder"] = e.feature_embedder_path;
    entries.push_back(std::move(j));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << nlohmann::json{{"format", "cwms-registry/1"}, {"entries", entries}}.dump(2) << '\n';
}

CheckpointRegistry CheckpointRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  CheckpointRegistry reg(path.parent_path());
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& je : j.at("entries")) {
      RegistryEntry e;
      const auto c = parse_component(je.at("component").get<std::string>());
      const auto s = parse_stage(je.at("stage").get<std::string>());
      if (!c || !s) throw Error(ErrorKind::Format, "bad component or stage");
      e.component = *c;
      e.stage = *s;
      e.path = je.at("path").get<std::string>();
      e.fingerprint = je.value("fingerprint", "");
      e.seed = je.value("seed", std::uint64_t{0});
      e.feature_embedder_path = je.value("feature_embedder", "");
      e.metrics = je.value("metrics", std::map<std::string, double>{});
      e.dataset = je.value("dataset", "");
      e.query_count = je.value("query_count", std::size_t{0});
      e.excluded_queries = je.value("excluded_queries", std::size_t{0});
      reg.put(std::move(e));
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": malformed registry (" + e.what() + ")");
  }
  return reg;
}

}  // namespace cwms
