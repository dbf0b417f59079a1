#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

#include "anydoor/image.hpp"

namespace anydoor::imageops {

template <typename Scalar>
using Stencil = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
struct SobelKernels {
  Stencil<Scalar> horizontal;
  Stencil<Scalar> vertical;
};

template <typename Scalar = double>
SobelKernels<Scalar> sobel_kernels() {
  SobelKernels<Scalar> k;
  k.horizontal << -1, 0, 1,
                  -2, 0, 2,
                  -1, 0, 1;
  k.vertical = k.horizontal.transpose();
  return k;
}

/// Rec.601 luma.
template <typename Scalar>
BasicImage<Scalar> to_grayscale(const BasicImage<Scalar>& img) {
  if (img.channels() != 3) {
    throw InvalidArgument("to_grayscale expects a 3-channel image");
  }
  BasicImage<Scalar> out(img.width(), img.height(), 1);
  out.plane(0) = Scalar(0.299) * img.plane(0) + Scalar(0.587) * img.plane(1) +
                 Scalar(0.114) * img.plane(2);
  // Keep gray-axis inputs exact: when R == G == B the weighted sum can drift
  // by an ulp.
  const auto& r = img.plane(0);
  const auto& g = img.plane(1);
  const auto& b = img.plane(2);
  out.plane(0) = ((r == g) && (g == b)).select(r, out.plane(0));
  return out;
}

/// Zero-padded 3x3 correlation.
template <typename Scalar>
Plane<Scalar> correlate3x3(const Plane<Scalar>& src, const Stencil<Scalar>& k) {
  const Eigen::Index h = src.rows();
  const Eigen::Index w = src.cols();
  Plane<Scalar> padded = Plane<Scalar>::Zero(h + 2, w + 2);
  padded.block(1, 1, h, w) = src;
  Plane<Scalar> out = Plane<Scalar>::Zero(h, w);
  // Taps are visited with their point mirror so antisymmetric pairs become a
  // single difference; flat regions then cancel exactly.
  for (int i = 0; i < 4; ++i) {
    const int dy = i / 3, dx = i % 3;
    const Scalar a = k(dy, dx), b = k(2 - dy, 2 - dx);
    if (a == -b) {
      if (a != Scalar(0)) {
        out += a * (padded.block(dy, dx, h, w) - padded.block(2 - dy, 2 - dx, h, w));
      }
    } else {
      if (a != Scalar(0)) out += a * padded.block(dy, dx, h, w);
      if (b != Scalar(0)) out += b * padded.block(2 - dy, 2 - dx, h, w);
    }
  }
  if (k(1, 1) != Scalar(0)) out += k(1, 1) * padded.block(1, 1, h, w);
  return out;
}

/// clamp(|gray * K_h| + |gray * K_v|, 0, 1) with zero padding.
template <typename Scalar>
BasicImage<Scalar> sobel_response(const BasicImage<Scalar>& gray) {
  if (gray.channels() != 1) {
    throw InvalidArgument("sobel_response expects a single-channel image");
  }
  const auto k = sobel_kernels<Scalar>();
  BasicImage<Scalar> out(gray.width(), gray.height(), 1);
  out.plane(0) = (correlate3x3(gray.plane(0), k.horizontal).abs() +
                  correlate3x3(gray.plane(0), k.vertical).abs())
                     .min(Scalar(1))
                     .max(Scalar(0));
  return out;
}

/// Erosion by a 3x3 all-ones element, `radius` times; out-of-frame is 0.
BinaryMask erode_mask(const BinaryMask& mask, int radius);

/// Dilation by a 3x3 all-ones element, `radius` times.
BinaryMask dilate_mask(const BinaryMask& mask, int radius);

/// Tight bounding box of the set pixels. Throws EmptyObjectError when empty.
Box bounding_box(const BinaryMask& mask);

BinaryMask filled_box_mask(int width, int height, const Box& box);

/// Window copy; pixels of the window outside the frame read as 0.
BinaryMask crop(const BinaryMask& mask, const Box& window);

BinaryMask resize_nearest(const BinaryMask& mask, int width, int height);

BinaryMask flip_horizontal(const BinaryMask& mask);

double mask_iou(const BinaryMask& a, const BinaryMask& b);

template <typename Scalar>
BasicImage<Scalar> crop(const BasicImage<Scalar>& img, const Box& window) {
  if (window.degenerate()) throw InvalidArgument("degenerate crop window");
  BasicImage<Scalar> out(window.width(), window.height(), img.channels());
  const int sx0 = std::max(window.x0, 0);
  const int sy0 = std::max(window.y0, 0);
  const int sx1 = std::min(window.x1, img.width());
  const int sy1 = std::min(window.y1, img.height());
  if (sx1 <= sx0 || sy1 <= sy0) return out;
  for (int c = 0; c < img.channels(); ++c) {
    out.plane(c).block(sy0 - window.y0, sx0 - window.x0, sy1 - sy0, sx1 - sx0) =
        img.plane(c).block(sy0, sx0, sy1 - sy0, sx1 - sx0);
  }
  return out;
}

/// Nearest-neighbour resize; source index = floor(dst * in / out).
template <typename Scalar>
BasicImage<Scalar> resize_nearest(const BasicImage<Scalar>& img, int width, int height) {
  BasicImage<Scalar> out(width, height, img.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<long>(y) * img.height() / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<long>(x) * img.width() / width);
      for (int c = 0; c < img.channels(); ++c) out(c, y, x) = img(c, sy, sx);
    }
  }
  return out;
}

/// Bilinear resize with half-pixel centres and edge clamping.
template <typename Scalar>
BasicImage<Scalar> resize_bilinear(const BasicImage<Scalar>& img, int width, int height) {
  if (img.width() == width && img.height() == height) return img;
  BasicImage<Scalar> out(width, height, img.channels());
  const double fx = static_cast<double>(img.width()) / width;
  const double fy = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    double sy = std::clamp((y + 0.5) * fy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const Scalar wy = static_cast<Scalar>(sy - y0);
    for (int x = 0; x < width; ++x) {
      double sx = std::clamp((x + 0.5) * fx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const Scalar wx = static_cast<Scalar>(sx - x0);
      for (int c = 0; c < img.channels(); ++c) {
        const Scalar top = (1 - wx) * img(c, y0, x0) + wx * img(c, y0, x1);
        const Scalar bot = (1 - wx) * img(c, y1, x0) + wx * img(c, y1, x1);
        out(c, y, x) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

template <typename Scalar>
BasicImage<Scalar> flip_horizontal(const BasicImage<Scalar>& img) {
  BasicImage<Scalar> out = img;
  for (int c = 0; c < img.channels(); ++c) {
    out.plane(c) = img.plane(c).rowwise().reverse();
  }
  return out;
}

/// Zeroes every pixel where the mask is 0.
template <typename Scalar>
BasicImage<Scalar> apply_mask(const BasicImage<Scalar>& img, const BinaryMask& mask) {
  if (!img.same_size(mask.width(), mask.height())) {
    throw InvalidArgument("image and mask dimensions differ");
  }
  BasicImage<Scalar> out = img;
  const auto keep = mask.data().template cast<Scalar>();
  for (int c = 0; c < img.channels(); ++c) out.plane(c) *= keep;
  return out;
}

/// (|gray * K_h| + |gray * K_v|) . I . M_erode, the object's high-frequency map.
template <typename Scalar>
BasicImage<Scalar> high_frequency_map(const BasicImage<Scalar>& img, const BinaryMask& mask,
                                      int erosion_radius) {
  if (img.channels() != 3) {
    throw InvalidArgument("high_frequency_map expects a 3-channel image");
  }
  if (!img.same_size(mask.width(), mask.height())) {
    throw InvalidArgument("high_frequency_map: image and mask dimensions differ");
  }
  const auto edges = sobel_response(to_grayscale(img));
  const Plane<Scalar> eroded = erode_mask(mask, erosion_radius).data().template cast<Scalar>();
  BasicImage<Scalar> out(img.width(), img.height(), 3);
  for (int c = 0; c < 3; ++c) {
    out.plane(c) = edges.plane(0) * img.plane(c) * eroded;
  }
  return out;
}

template <typename Scalar>
struct ObjectCrop {
  BasicImage<Scalar> image;
  BinaryMask mask;
  Box window;  // in source coordinates, may extend past the frame
};

/// Square crop around the mask's bounding box with the background zeroed.
/// The window is shifted inside the frame when it fits; otherwise it stays
/// centred and out-of-frame pixels are 0.
template <typename Scalar>
ObjectCrop<Scalar> center_crop_object(const BasicImage<Scalar>& img, const BinaryMask& mask,
                                      double pad_fraction) {
  if (!img.same_size(mask.width(), mask.height())) {
    throw InvalidArgument("center_crop_object: image and mask dimensions differ");
  }
  if (pad_fraction < 0) throw InvalidArgument("pad_fraction must be >= 0");
  if (!mask.any()) throw EmptyObjectError("center_crop_object: mask is empty");
  const Box bbox = bounding_box(mask);
  const int side = std::max(
      1, static_cast<int>(std::lround((1.0 + pad_fraction) *
                                      std::max(bbox.width(), bbox.height()))));
  int x0 = static_cast<int>(std::lround(bbox.center_x() - side / 2.0));
  int y0 = static_cast<int>(std::lround(bbox.center_y() - side / 2.0));
  if (side <= img.width()) x0 = std::clamp(x0, 0, img.width() - side);
  if (side <= img.height()) y0 = std::clamp(y0, 0, img.height() - side);
  const Box window{x0, y0, x0 + side, y0 + side};

  ObjectCrop<Scalar> out;
  out.window = window;
  out.mask = crop(mask, window);
  out.image = apply_mask(crop(img, window), out.mask);
  return out;
}

}  // namespace anydoor::imageops
