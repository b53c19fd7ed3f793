#include "crctc/consistency.hpp"

namespace crctc {

std::string_view to_string(TargetMode m) {
  return m == TargetMode::kStopGradient ? "stop_gradient" : "flow_gradient";
}

std::string_view to_string(Distance d) {
  return d == Distance::kBidirectionalKl ? "bidirectional_kl" : "hard_label_ce";
}

std::string_view to_string(FrameFilter f) {
  switch (f) {
    case FrameFilter::kAll: return "all";
    case FrameFilter::kExcludeSelfMasked: return "exclude_self_masked";
    case FrameFilter::kExcludeSelfUnmasked: return "exclude_self_unmasked";
  }
  return "all";
}

TargetMode parse_target_mode(std::string_view s) {
  if (s == "stop_gradient") return TargetMode::kStopGradient;
  if (s == "flow_gradient") return TargetMode::kFlowGradient;
  throw InvalidInput("unknown cr.target_mode '" + std::string(s) + "'");
}

Distance parse_distance(std::string_view s) {
  if (s == "bidirectional_kl") return Distance::kBidirectionalKl;
  if (s == "hard_label_ce") return Distance::kHardLabelCe;
  throw InvalidInput("unknown cr.distance '" + std::string(s) + "'");
}

FrameFilter parse_frame_filter(std::string_view s) {
  if (s == "all") return FrameFilter::kAll;
  if (s == "exclude_self_masked") return FrameFilter::kExcludeSelfMasked;
  if (s == "exclude_self_unmasked") return FrameFilter::kExcludeSelfUnmasked;
  throw InvalidInput("unknown cr.frame_filter '" + std::string(s) + "'");
}

}  // namespace crctc
