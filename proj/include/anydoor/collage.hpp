#pragma once

#include <vector>

#include "anydoor/image.hpp"
#include "anydoor/rng.hpp"

namespace anydoor::collage {

/// Detail-extractor input: scene with the box hollowed and the object's
/// high-frequency map stitched in, plus the shape-mask channel.
struct CollageInput {
  ImageBuffer rgb;
  BinaryMask shape;

  int width() const { return rgb.width(); }
  int height() const { return rgb.height(); }
};

struct ShapeSimConfig {
  double box_probability = 0.3;
  std::vector<double> downsample_ratios{1.0 / 2, 1.0 / 4, 1.0 / 8, 1.0 / 16};
  int morph_iters_max = 5;

  void validate() const;
};

/// Which branch produced a simulated mask; exposed for frequency checks.
enum class ShapeBranch { box, coarse };

struct SimulatedShape {
  BinaryMask mask;
  ShapeBranch branch;
};

/// Imitates a user-drawn shape mask from a ground-truth instance mask.
///
/// With probability `box_probability` the filled bounding box is returned.
/// Otherwise the mask is block-pooled by 1/ratio (a block is set when any of
/// its pixels is), expanded back with nearest neighbour, and put through
/// k in [0, morph_iters_max] random 3x3 dilate-or-erode steps. A step that
/// would empty the mask or leave the ground-truth bounding box is skipped.
SimulatedShape simulate_shape_mask_traced(const BinaryMask& gt_mask, const ShapeSimConfig& cfg,
                                          Rng& rng);

BinaryMask simulate_shape_mask(const BinaryMask& gt_mask, const ShapeSimConfig& cfg, Rng& rng);

/// Hollows `box` in `scene`, writes `object_hf` (resized to the box) where
/// the resized object mask is set, and places `shape_mask` resized into the
/// box on the shape channel. Pixels outside the box are copied untouched.
CollageInput build_collage(const ImageBuffer& scene, const Box& box, const ImageBuffer& object_hf,
                           const BinaryMask& object_mask, const BinaryMask& shape_mask);

/// Scene with the box interior set to 0.
ImageBuffer hollow_box(const ImageBuffer& scene, const Box& box);

}  // namespace anydoor::collage
