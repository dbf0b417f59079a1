#pragma once

#include "anydoor/image.hpp"

namespace anydoor::inference {

/// Maps between a square window of the scene and the model's input raster.
struct ZoomTransform {
  Box square;          // scene coordinates, equal sides, inside the frame
  int model_side = 0;  // pixels
  double scale = 1.0;  // model pixels per scene pixel

  double to_model_x(double x) const { return (x - square.x0) * scale; }
  double to_model_y(double y) const { return (y - square.y0) * scale; }
  double to_scene_x(double x) const { return x / scale + square.x0; }
  double to_scene_y(double y) const { return y / scale + square.y0; }

  /// Box in model coordinates covering the scene box (outward rounding).
  Box box_to_model(const Box& scene_box) const;
};

/// Square of side ratio * max(box w, box h) centred on the box, shifted to
/// fit the frame, shrunk to min(frame w, frame h) only if it cannot fit.
Box zoom_square(int frame_width, int frame_height, const Box& box, double ratio);

struct ZoomResult {
  ImageBuffer crop;  // model_side x model_side
  ZoomTransform transform;
};

ZoomResult zoom_in(const ImageBuffer& scene, const Box& box, double ratio, int model_side);

/// Resizes `result` onto the transform's square and returns the scene with
/// that square replaced. `feather` > 0 blends linearly over that many scene
/// pixels inside the square border.
ImageBuffer paste_back(const ImageBuffer& result, const ZoomTransform& tf, const ImageBuffer& scene,
                       int feather = 0);

}  // namespace anydoor::inference
