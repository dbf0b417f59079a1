#pragma once

#include <cstdint>
#include <optional>

#include "anydoor/conditioning.hpp"
#include "anydoor/diffusion.hpp"
#include "anydoor/zoom.hpp"

namespace anydoor::inference {

struct TeleportConfig {
  double zoom_ratio = 2.0;
  int erosion_radius = 2;
  double crop_pad = 0.0;
  int sampler_steps = 4;
  int feather = 0;

  void validate() const;
};

/// Regenerates `box` of `scene` so that it contains the object: crop the
/// object, build its HF collage around the zoomed box, condition on its ID
/// tokens, sample, and paste the square back. A missing shape mask means the
/// filled box. Errors carry the failing stage as a message prefix.
ImageBuffer teleport(const ImageBuffer& object_img, const BinaryMask& object_mask,
                     const ImageBuffer& scene, const Box& box,
                     const std::optional<BinaryMask>& shape_mask,
                     const diffusion::DenoiserModel& model,
                     const diffusion::NoiseSchedule& sched, std::uint64_t seed,
                     const TeleportConfig& cfg = {});

/// The zoom square teleport() will regenerate for this scene and box.
Box teleport_region(const ImageBuffer& scene, const Box& box, const TeleportConfig& cfg = {});

}  // namespace anydoor::inference
