#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cwms {

/// Training stage of a checkpoint. Ordered: Base < Stage1 < Stage2 < Stage3.
enum class StageTag : std::uint8_t { Base = 0, Stage1 = 1, Stage2 = 2, Stage3 = 3 };

inline constexpr std::array<StageTag, 4> kAllStages = {
    StageTag::Base, StageTag::Stage1, StageTag::Stage2, StageTag::Stage3};

enum class ComponentKind : std::uint8_t { Embedder = 0, Reranker = 1 };

inline constexpr int stage_index(StageTag s) { return static_cast<int>(s); }

std::string_view to_string(StageTag s);
std::string_view to_string(ComponentKind k);

/// Accepts "base", "stage1".."stage3" and the bare digits "0".."3".
std::optional<StageTag> parse_stage(std::string_view text);
std::optional<ComponentKind> parse_component(std::string_view text);

/// Stage immediately preceding `s`; nullopt for Base.
std::optional<StageTag> previous_stage(StageTag s);

}  // namespace cwms
