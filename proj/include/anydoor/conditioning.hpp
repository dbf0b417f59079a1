#pragma once

#include "anydoor/collage.hpp"
#include "anydoor/image.hpp"
#include "anydoor/zoom.hpp"

namespace anydoor::inference {

/// Everything the denoiser needs, in model coordinates, for one object/scene
/// pairing. Shared by training and teleport so both see identical inputs.
struct AssembledInputs {
  collage::CollageInput collage;  // model_side x model_side
  ImageBuffer object_img;         // square, background zeroed
  ZoomTransform transform;
  Box model_box;
};

/// `object_img`/`object_mask` are an already centred object crop. The scene
/// box is hollowed, the square around it zoomed to `model_side`, and the
/// object's high-frequency map stitched into the mapped box together with
/// `shape_mask`.
AssembledInputs assemble_inputs(const ImageBuffer& object_img, const BinaryMask& object_mask,
                                const ImageBuffer& scene, const Box& box,
                                const BinaryMask& shape_mask, int model_side, double zoom_ratio,
                                int erosion_radius);

}  // namespace anydoor::inference
