#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "cwms/encoder.hpp"
#include "cwms/reranker.hpp"

namespace cwms {

/// Checkpoint file layout (all integers little-endian):
///
///   "CWMS"                  4 bytes magic
///   version                 u8, currently 1
///   header length           u32, byte count of the header record
///   header record:
///     dim                   u32
///     buckets               u32
///     stage                 u8  (0 = base .. 3 = stage3)
///     seed                  u64
///     component kind        u8  (0 = embedder, 1 = reranker)
///     trained examples      u64
///     reference length      u16, then that many bytes: the feature-embedder
///                           fingerprint for rerankers, empty for embedders
///   payload                 dim * buckets float32, row-major
///
/// A reranker is stored as dim = 1, buckets = 5.
inline constexpr std::string_view kCheckpointMagic = "CWMS";
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::string serialize(const EmbedderCheckpoint& ckpt);
std::string serialize(const RerankerCheckpoint& ckpt);
EmbedderCheckpoint deserialize_embedder(std::string_view bytes);
RerankerCheckpoint deserialize_reranker(std::string_view bytes);

void save_checkpoint(const EmbedderCheckpoint& ckpt, const std::filesystem::path& path);
void save_checkpoint(const RerankerCheckpoint& ckpt, const std::filesystem::path& path);
EmbedderCheckpoint load_embedder(const std::filesystem::path& path);
RerankerCheckpoint load_reranker(const std::filesystem::path& path);

/// Component kind stored in a checkpoint file's header.
ComponentKind peek_component(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a-64 over the serialized bytes.
std::string fingerprint(const EmbedderCheckpoint& ckpt);
std::string fingerprint(const RerankerCheckpoint& ckpt);

}  // namespace cwms
