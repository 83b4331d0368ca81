#include "adaptsr/artifact_guard.hpp"

#include <algorithm>

#include "adaptsr/error.hpp"

namespace adaptsr {

std::string_view to_string(DiscountMode mode) noexcept {
  return mode == DiscountMode::absolute ? "absolute" : "relative";
}

std::optional<DiscountMode> parse_discount_mode(std::string_view text) {
  if (text == "relative") return DiscountMode::relative;
  if (text == "absolute") return DiscountMode::absolute;
  return std::nullopt;
}

void GuardConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(Errc::invalid_argument, "guard threshold must be in [0,1]");
  }
  if (!(discount >= 0.0 && discount <= 1.0)) {
    throw Error(Errc::invalid_argument, "guard discount must be in [0,1]");
  }
}

bool label_artifact(double ssim_vs_hr, double perceptual_loss) {
  return ssim_vs_hr < kArtifactSsimCut || perceptual_loss > kArtifactPerceptualCut;
}

GuardOutcome apply_guard(double p_artifact, const GateDecision& gated, double confidence,
                         const GuardConfig& cfg) {
  if (gated.level == SRLevel::None) {
    throw Error(Errc::guard_on_non_sr, "artifact guard applies only to SR-enhanced input");
  }
  if (!(p_artifact >= 0.0 && p_artifact <= 1.0) || !(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(Errc::invalid_argument, "artifact probability and confidence must be in [0,1]");
  }
  GuardOutcome out;
  out.p_artifact = p_artifact;
  out.triggered = p_artifact > cfg.threshold;
  out.used_sr = !out.triggered;
  out.final_confidence = confidence;
  if (out.triggered) {
    const double discounted = cfg.mode == DiscountMode::relative
                                  ? confidence * (1.0 - cfg.discount)
                                  : confidence - cfg.discount;
    out.final_confidence = std::clamp(discounted, 0.0, 1.0);
  }
  return out;
}

GateDecision effective_decision(const GateDecision& gated, const GuardOutcome& outcome) {
  GateDecision d = gated;
  if (!outcome.used_sr) d.level = SRLevel::None;
  return d;
}

double artifact_score_heuristic(const Clip& sr, const Clip& lr_upsampled,
                                const HeuristicWeights& weights) {
  if (sr.size() != lr_upsampled.size() || !sr.frames()[0].same_shape(lr_upsampled.frames()[0])) {
    throw Error(Errc::dimension_mismatch, "SR and LR clips must match in frames and size");
  }
  const double temporal = sr.size() >= 2 ? temporal_inconsistency(sr) : 0.0;
  double similarity = 0.0;
  for (std::size_t t = 0; t < sr.size(); ++t) {
    similarity += ssim(sr.frames()[t], lr_upsampled.frames()[t]);
  }
  similarity /= static_cast<double>(sr.size());
  return std::clamp(weights.temporal * temporal + weights.spatial * (1.0 - similarity), 0.0, 1.0);
}

}  // namespace adaptsr
