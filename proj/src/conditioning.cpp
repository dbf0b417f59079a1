#include "anydoor/conditioning.hpp"

#include "anydoor/imageops.hpp"

namespace anydoor::inference {

AssembledInputs assemble_inputs(const ImageBuffer& object_img, const BinaryMask& object_mask,
                                const ImageBuffer& scene, const Box& box,
                                const BinaryMask& shape_mask, int model_side, double zoom_ratio,
                                int erosion_radius) {
  AssembledInputs in;
  const ImageBuffer hollowed = collage::hollow_box(scene, box);
  auto zoomed = zoom_in(hollowed, box, zoom_ratio, model_side);
  in.transform = zoomed.transform;
  in.model_box = in.transform.box_to_model(box);
  const auto hf = imageops::high_frequency_map(object_img, object_mask, erosion_radius);
  in.collage = collage::build_collage(zoomed.crop, in.model_box, hf, object_mask, shape_mask);
  in.object_img = object_img;
  return in;
}

}  // namespace anydoor::inference
