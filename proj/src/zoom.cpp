#include "anydoor/zoom.hpp"

#include <algorithm>
#include <cmath>

#include "anydoor/imageops.hpp"

namespace anydoor::inference {

Box ZoomTransform::box_to_model(const Box& b) const {
  Box m;
  m.x0 = std::clamp(static_cast<int>(std::floor(to_model_x(b.x0) + 1e-9)), 0, model_side - 1);
  m.y0 = std::clamp(static_cast<int>(std::floor(to_model_y(b.y0) + 1e-9)), 0, model_side - 1);
  m.x1 = std::clamp(static_cast<int>(std::ceil(to_model_x(b.x1) - 1e-9)), m.x0 + 1, model_side);
  m.y1 = std::clamp(static_cast<int>(std::ceil(to_model_y(b.y1) - 1e-9)), m.y0 + 1, model_side);
  return m;
}

Box zoom_square(int frame_width, int frame_height, const Box& box, double ratio) {
  if (box.degenerate()) throw InvalidArgument("degenerate box " + to_string(box));
  if (!box.inside(frame_width, frame_height)) {
    throw InvalidArgument("box " + to_string(box) + " exceeds the " +
                          std::to_string(frame_width) + "x" + std::to_string(frame_height) +
                          " frame");
  }
  if (!(ratio >= 1.0)) throw InvalidArgument("zoom ratio must be >= 1");
  int side = static_cast<int>(std::lround(ratio * std::max(box.width(), box.height())));
  side = std::clamp(side, 1, std::min(frame_width, frame_height));
  int x0 = static_cast<int>(std::lround(box.center_x() - side / 2.0));
  int y0 = static_cast<int>(std::lround(box.center_y() - side / 2.0));
  x0 = std::clamp(x0, 0, frame_width - side);
  y0 = std::clamp(y0, 0, frame_height - side);
  return Box{x0, y0, x0 + side, y0 + side};
}

ZoomResult zoom_in(const ImageBuffer& scene, const Box& box, double ratio, int model_side) {
  if (model_side < 1) throw InvalidArgument("model side must be positive");
  ZoomResult r;
  r.transform.square = zoom_square(scene.width(), scene.height(), box, ratio);
  r.transform.model_side = model_side;
  r.transform.scale = static_cast<double>(model_side) / r.transform.square.width();
  r.crop = imageops::resize_bilinear(imageops::crop(scene, r.transform.square), model_side,
                                     model_side);
  return r;
}

ImageBuffer paste_back(const ImageBuffer& result, const ZoomTransform& tf, const ImageBuffer& scene,
                       int feather) {
  if (result.width() != tf.model_side || result.height() != tf.model_side) {
    throw InvalidArgument("paste_back: result is not model_side x model_side");
  }
  if (!tf.square.inside(scene.width(), scene.height()) || tf.square.degenerate()) {
    throw InvalidArgument("paste_back: zoom square " + to_string(tf.square) +
                          " does not fit the scene");
  }
  if (result.channels() != scene.channels()) {
    throw InvalidArgument("paste_back: channel count mismatch");
  }
  const Box& sq = tf.square;
  const auto patch = imageops::resize_bilinear(result, sq.width(), sq.height());
  ImageBuffer out = scene;
  for (int c = 0; c < out.channels(); ++c) {
    auto region = out.plane(c).block(sq.y0, sq.x0, sq.height(), sq.width());
    if (feather <= 0) {
      region = patch.plane(c);
      continue;
    }
    for (int y = 0; y < sq.height(); ++y) {
      for (int x = 0; x < sq.width(); ++x) {
        const int edge = std::min({x, y, sq.width() - 1 - x, sq.height() - 1 - y});
        const double a = std::min(1.0, (edge + 1.0) / (feather + 1.0));
        region(y, x) = a * patch(c, y, x) + (1.0 - a) * region(y, x);
      }
    }
  }
  return out;
}

}  // namespace anydoor::inference
