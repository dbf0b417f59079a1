#include "anydoor/imageops.hpp"

#include <sstream>

namespace anydoor {

std::string to_string(const Box& box) {
  std::ostringstream os;
  os << box.x0 << ',' << box.y0 << ',' << box.x1 << ',' << box.y1;
  return os.str();
}

Box parse_box(const std::string& text) {
  Box box;
  char c1 = 0, c2 = 0, c3 = 0;
  std::istringstream is(text);
  if (!(is >> box.x0 >> c1 >> box.y0 >> c2 >> box.x1 >> c3 >> box.y1) || c1 != ',' ||
      c2 != ',' || c3 != ',') {
    throw InvalidArgument("box must be x0,y0,x1,y1, got '" + text + "'");
  }
  std::string rest;
  if (is >> rest) throw InvalidArgument("trailing characters in box '" + text + "'");
  if (box.degenerate()) throw InvalidArgument("degenerate box '" + text + "'");
  return box;
}

namespace imageops {

namespace {

// One 3x3 min (erode) or max (dilate) pass; out-of-frame pixels count as 0.
BinaryMask morph_pass(const BinaryMask& mask, bool erode) {
  const int h = mask.height();
  const int w = mask.width();
  BinaryMask::Data padded = BinaryMask::Data::Zero(h + 2, w + 2);
  padded.block(1, 1, h, w) = mask.data();
  BinaryMask out(w, h);
  auto& o = out.data();
  o = padded.block(1, 1, h, w);
  for (int dy = 0; dy < 3; ++dy) {
    for (int dx = 0; dx < 3; ++dx) {
      if (erode) {
        o = o.min(padded.block(dy, dx, h, w));
      } else {
        o = o.max(padded.block(dy, dx, h, w));
      }
    }
  }
  return out;
}

}  // namespace

BinaryMask erode_mask(const BinaryMask& mask, int radius) {
  if (radius < 0) throw InvalidArgument("erosion radius must be >= 0");
  BinaryMask out = mask;
  for (int i = 0; i < radius && out.any(); ++i) out = morph_pass(out, true);
  return out;
}

BinaryMask dilate_mask(const BinaryMask& mask, int radius) {
  if (radius < 0) throw InvalidArgument("dilation radius must be >= 0");
  BinaryMask out = mask;
  for (int i = 0; i < radius; ++i) out = morph_pass(out, false);
  return out;
}

Box bounding_box(const BinaryMask& mask) {
  Box box{mask.width(), mask.height(), 0, 0};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(y, x)) {
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x + 1);
        box.y1 = std::max(box.y1, y + 1);
      }
    }
  }
  if (box.degenerate()) throw EmptyObjectError("mask has no set pixels");
  return box;
}

BinaryMask filled_box_mask(int width, int height, const Box& box) {
  BinaryMask out(width, height);
  const int x0 = std::max(box.x0, 0), y0 = std::max(box.y0, 0);
  const int x1 = std::min(box.x1, width), y1 = std::min(box.y1, height);
  if (x1 > x0 && y1 > y0) out.data().block(y0, x0, y1 - y0, x1 - x0).setOnes();
  return out;
}

BinaryMask crop(const BinaryMask& mask, const Box& window) {
  if (window.degenerate()) throw InvalidArgument("degenerate crop window");
  BinaryMask out(window.width(), window.height());
  const int sx0 = std::max(window.x0, 0);
  const int sy0 = std::max(window.y0, 0);
  const int sx1 = std::min(window.x1, mask.width());
  const int sy1 = std::min(window.y1, mask.height());
  if (sx1 <= sx0 || sy1 <= sy0) return out;
  out.data().block(sy0 - window.y0, sx0 - window.x0, sy1 - sy0, sx1 - sx0) =
      mask.data().block(sy0, sx0, sy1 - sy0, sx1 - sx0);
  return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int width, int height) {
  BinaryMask out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<long>(y) * mask.height() / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<long>(x) * mask.width() / width);
      out(y, x) = mask(sy, sx);
    }
  }
  return out;
}

BinaryMask flip_horizontal(const BinaryMask& mask) {
  BinaryMask out = mask;
  out.data() = mask.data().rowwise().reverse();
  return out;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InvalidArgument("mask_iou: dimensions differ");
  }
  const long inter = ((a.data() != 0) && (b.data() != 0)).count();
  const long uni = ((a.data() != 0) || (b.data() != 0)).count();
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace imageops
}  // namespace anydoor
