#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cwms/stage.hpp"

namespace cwms {

/// One stage-tagged checkpoint with the validation metrics measured on it.
struct RegistryEntry {
  ComponentKind component = ComponentKind::Embedder;
  StageTag stage = StageTag::Base;
  /// Checkpoint file, relative to the registry directory unless absolute.
  std::string path;
  std::string fingerprint;
  std::uint64_t seed = 0;
  /// Rerankers only: the embedder checkpoint that feeds the cosine feature.
  std::string feature_embedder_path;
  std::map<std::string, double> metrics;
  std::string dataset;
  std::size_t query_count = 0;
  std::size_t excluded_queries = 0;

  bool operator==(const RegistryEntry&) const = default;
};

/// (component, stage) -> checkpoint + metric snapshot. A stage's entry is
/// only usable if every earlier stage of the same component is present and
/// its artifact exists on disk.
class CheckpointRegistry {
 public:
  CheckpointRegistry() = default;
  explicit CheckpointRegistry(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

  void put(RegistryEntry entry);
  const RegistryEntry* find(ComponentKind component, StageTag stage) const;
  std::size_t size() const { return entries_.size(); }
  std::vector<RegistryEntry> entries() const;

  const std::filesystem::path& base_dir() const { return base_dir_; }
  std::filesystem::path resolve(const std::string& path) const;

  /// Entry for (component, stage) after checking the stage chain below it.
  /// Throws Error(Precondition) naming the first missing entry or artifact.
  const RegistryEntry& require(ComponentKind component, StageTag stage) const;

  /// Human-readable list of absent entries, absent artifacts and entries
  /// without metrics, over both components and all four stages.
  std::vector<std::string> missing() const;

  /// JSON. Paths stay as stored; loading sets base_dir to the file's directory.
  void save(const std::filesystem::path& path) const;
  static CheckpointRegistry load(const std::filesystem::path& path);

  bool operator==(const CheckpointRegistry& other) const { return entries_ == other.entries_; }

 private:
  std::filesystem::path base_dir_;
  std::map<std::pair<ComponentKind, StageTag>, RegistryEntry> entries_;
};

}  // namespace cwms
