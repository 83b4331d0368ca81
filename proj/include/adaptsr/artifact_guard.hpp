#pragma once

#include <optional>
#include <string_view>

#include "adaptsr/core.hpp"
#include "adaptsr/quality.hpp"

namespace adaptsr {

struct GuardOutcome {
  bool used_sr = true;
  double final_confidence = 0.0;
  double p_artifact = 0.0;
  bool triggered = false;

  bool operator==(const GuardOutcome&) const = default;
};

enum class DiscountMode { relative, absolute };

std::string_view to_string(DiscountMode mode) noexcept;
std::optional<DiscountMode> parse_discount_mode(std::string_view text);

struct GuardConfig {
  double threshold = 0.5;
  // relative: confidence * (1 - discount); absolute: confidence - discount.
  double discount = 0.15;
  DiscountMode mode = DiscountMode::relative;

  void validate() const;
  bool operator==(const GuardConfig&) const = default;
};

inline constexpr double kArtifactSsimCut = 0.7;
inline constexpr double kArtifactPerceptualCut = 0.3;

/// Training label for an SR frame: SSIM against HR below 0.7 or perceptual
/// loss above 0.3.
bool label_artifact(double ssim_vs_hr, double perceptual_loss);

/// Reverts an SR decision to the LR input and discounts confidence when the
/// detector's artifact probability exceeds the threshold. Throws GuardOnNonSR
/// when `gated` did not use SR.
GuardOutcome apply_guard(double p_artifact, const GateDecision& gated, double confidence,
                         const GuardConfig& cfg = {});

/// The decision actually executed after the guard (level None once reverted).
GateDecision effective_decision(const GateDecision& gated, const GuardOutcome& outcome);

struct HeuristicWeights {
  double temporal = 0.5;
  double spatial = 0.5;
};

/// Detector stand-in: weighted temporal inconsistency of the SR clip plus the
/// mean per-frame SSIM deficit against the upsampled LR clip, clamped to [0,1].
double artifact_score_heuristic(const Clip& sr, const Clip& lr_upsampled,
                                const HeuristicWeights& weights = {});

}  // namespace adaptsr
