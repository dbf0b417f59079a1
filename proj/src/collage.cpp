#include "anydoor/collage.hpp"

#include <cmath>

#include "anydoor/imageops.hpp"

namespace anydoor::collage {

void ShapeSimConfig::validate() const {
  if (!(box_probability >= 0.0 && box_probability <= 1.0)) {
    throw InvalidArgument("box_probability must be in [0,1]");
  }
  if (downsample_ratios.empty()) throw InvalidArgument("downsample_ratios is empty");
  for (double r : downsample_ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("downsample ratios must be in (0,1]");
  }
  if (morph_iters_max < 0) throw InvalidArgument("morph_iters_max must be >= 0");
}

namespace {

bool intersects(const BinaryMask& mask, const Box& box) {
  return (mask.data().block(box.y0, box.x0, box.height(), box.width()) != 0).any();
}

// Block-OR pooling by `block` followed by nearest expansion to the original size.
BinaryMask coarsen(const BinaryMask& mask, int block) {
  if (block <= 1) return mask;
  const int w = mask.width();
  const int h = mask.height();
  const int sw = (w + block - 1) / block;
  const int sh = (h + block - 1) / block;
  BinaryMask small(sw, sh);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask(y, x)) small(y / block, x / block) = 1;
    }
  }
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out(y, x) = small(y / block, x / block);
  }
  return out;
}

}  // namespace

SimulatedShape simulate_shape_mask_traced(const BinaryMask& gt_mask, const ShapeSimConfig& cfg,
                                          Rng& rng) {
  cfg.validate();
  if (!gt_mask.any()) throw EmptyObjectError("simulate_shape_mask: ground-truth mask is empty");
  const Box bbox = imageops::bounding_box(gt_mask);

  if (uniform01(rng) < cfg.box_probability) {
    return {imageops::filled_box_mask(gt_mask.width(), gt_mask.height(), bbox), ShapeBranch::box};
  }

  const double ratio = cfg.downsample_ratios[static_cast<size_t>(
      uniform_index(rng, 0, static_cast<long>(cfg.downsample_ratios.size())))];
  const int block = std::max(1, static_cast<int>(std::lround(1.0 / ratio)));
  BinaryMask mask = coarsen(gt_mask, block);

  const long steps = uniform_index(rng, 0, cfg.morph_iters_max + 1);
  for (long i = 0; i < steps; ++i) {
    const bool dilate = uniform01(rng) < 0.5;
    BinaryMask next = dilate ? imageops::dilate_mask(mask, 1) : imageops::erode_mask(mask, 1);
    if (next.any() && intersects(next, bbox)) mask = std::move(next);
  }
  return {std::move(mask), ShapeBranch::coarse};
}

BinaryMask simulate_shape_mask(const BinaryMask& gt_mask, const ShapeSimConfig& cfg, Rng& rng) {
  return simulate_shape_mask_traced(gt_mask, cfg, rng).mask;
}

ImageBuffer hollow_box(const ImageBuffer& scene, const Box& box) {
  if (box.degenerate()) throw InvalidArgument("degenerate box " + to_string(box));
  if (!box.inside(scene.width(), scene.height())) {
    throw InvalidArgument("box " + to_string(box) + " exceeds the scene frame");
  }
  ImageBuffer out = scene;
  for (int c = 0; c < out.channels(); ++c) {
    out.plane(c).block(box.y0, box.x0, box.height(), box.width()).setZero();
  }
  return out;
}

CollageInput build_collage(const ImageBuffer& scene, const Box& box, const ImageBuffer& object_hf,
                           const BinaryMask& object_mask, const BinaryMask& shape_mask) {
  if (scene.channels() != 3 || object_hf.channels() != 3) {
    throw InvalidArgument("build_collage expects 3-channel scene and HF map");
  }
  if (!object_hf.same_size(object_mask.width(), object_mask.height())) {
    throw InvalidArgument("build_collage: HF map and object mask dimensions differ");
  }
  CollageInput out;
  out.rgb = hollow_box(scene, box);

  const auto hf = imageops::resize_nearest(object_hf, box.width(), box.height());
  const auto om = imageops::resize_nearest(object_mask, box.width(), box.height());
  for (int y = 0; y < box.height(); ++y) {
    for (int x = 0; x < box.width(); ++x) {
      if (!om(y, x)) continue;
      for (int c = 0; c < 3; ++c) out.rgb(c, box.y0 + y, box.x0 + x) = hf(c, y, x);
    }
  }

  out.shape = BinaryMask(scene.width(), scene.height());
  const auto sm = imageops::resize_nearest(shape_mask, box.width(), box.height());
  out.shape.data().block(box.y0, box.x0, box.height(), box.width()) = sm.data();
  return out;
}

}  // namespace anydoor::collage
