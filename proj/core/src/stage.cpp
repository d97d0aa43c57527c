#include "cwms/stage.hpp"

namespace cwms {

std::string_view to_string(StageTag s) {
  switch (s) {
    case StageTag::Base: return "base";
    case StageTag::Stage1: return "stage1";
    case StageTag::Stage2: return "stage2";
    case StageTag::Stage3: return "stage3";
  }
  return "unknown";
}

std::string_view to_string(ComponentKind k) {
  return k == ComponentKind::Embedder ? "embedder" : "reranker";
}

std::optional<StageTag> parse_stage(std::string_view text) {
  if (text == "base" || text == "0") return StageTag::Base;
  if (text == "stage1" || text == "1") return StageTag::Stage1;
  if (text == "stage2" || text == "2") return StageTag::Stage2;
  if (text == "stage3" || text == "3") return StageTag::Stage3;
  return std::nullopt;
}

std::optional<ComponentKind> parse_component(std::string_view text) {
  if (text == "embedder") return ComponentKind::Embedder;
  if (text == "reranker") return ComponentKind::Reranker;
  return std::nullopt;
}

std::optional<StageTag> previous_stage(StageTag s) {
  if (s == StageTag::Base) return std::nullopt;
  return static_cast<StageTag>(stage_index(s) - 1);
}

}  // namespace cwms
