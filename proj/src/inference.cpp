#include "anydoor/inference.hpp"

#include "anydoor/imageops.hpp"

namespace anydoor::inference {

void TeleportConfig::validate() const {
  if (!(zoom_ratio >= 1.0)) throw InvalidArgument("zoom ratio must be >= 1");
  if (erosion_radius < 0) throw InvalidArgument("erosion radius must be >= 0");
  if (crop_pad < 0) throw InvalidArgument("crop padding must be >= 0");
  if (sampler_steps < 1) throw InvalidArgument("sampler steps must be >= 1");
  if (feather < 0) throw InvalidArgument("feather must be >= 0");
}

namespace {

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    rethrow_with_stage(stage, e);
  } catch (const EmptyObjectError& e) {
    rethrow_with_stage(stage, e);
  } catch (const IoError& e) {
    rethrow_with_stage(stage, e);
  }
}

}  // namespace

Box teleport_region(const ImageBuffer& scene, const Box& box, const TeleportConfig& cfg) {
  return zoom_square(scene.width(), scene.height(), box, cfg.zoom_ratio);
}

ImageBuffer teleport(const ImageBuffer& object_img, const BinaryMask& object_mask,
                     const ImageBuffer& scene, const Box& box,
                     const std::optional<BinaryMask>& shape_mask,
                     const diffusion::DenoiserModel& model,
                     const diffusion::NoiseSchedule& sched, std::uint64_t seed,
                     const TeleportConfig& cfg) {
  staged("config", [&] { cfg.validate(); });
  if (shape_mask && !shape_mask->any()) {
    throw EmptyObjectError("shape mask: mask is empty");
  }
  const auto object = staged("object crop", [&] {
    return imageops::center_crop_object(object_img, object_mask, cfg.crop_pad);
  });
  const BinaryMask shape = shape_mask ? *shape_mask : BinaryMask(box.width(), box.height(), true);
  const int side = model.config().image_side;
  const auto inputs = staged("collage", [&] {
    return assemble_inputs(object.image, object.mask, scene, box, shape, side, cfg.zoom_ratio,
                           cfg.erosion_radius);
  });
  const auto tokens = staged("id tokens", [&] { return diffusion::id_tokens_for(object.image, model); });
  const auto result = staged("sample", [&] {
    return diffusion::sample(inputs.collage, tokens, model, sched, cfg.sampler_steps, seed);
  });
  return staged("paste", [&] { return paste_back(result, inputs.transform, scene, cfg.feather); });
}

}  // namespace anydoor::inference
