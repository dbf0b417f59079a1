#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "anydoor/errors.hpp"

namespace anydoor {

template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Planar raster with 1 or 3 channels. Each plane is height x width, indexed
/// (y, x); intensities live in [0, 1].
template <typename Scalar>
class BasicImage {
 public:
  using PlaneType = Plane<Scalar>;

  BasicImage() = default;

  BasicImage(int width, int height, int channels, Scalar fill = Scalar(0)) {
    if (width < 1 || height < 1) {
      throw InvalidArgument("image dimensions must be positive");
    }
    if (channels != 1 && channels != 3) {
      throw InvalidArgument("image must have 1 or 3 channels, got " +
                            std::to_string(channels));
    }
    planes_.assign(channels, PlaneType::Constant(height, width, fill));
  }

  static BasicImage from_planes(std::vector<PlaneType> planes) {
    if (planes.empty()) throw InvalidArgument("no planes");
    BasicImage img(static_cast<int>(planes[0].cols()),
                   static_cast<int>(planes[0].rows()),
                   static_cast<int>(planes.size()));
    for (const auto& p : planes) {
      if (p.rows() != planes[0].rows() || p.cols() != planes[0].cols()) {
        throw InvalidArgument("plane dimensions differ");
      }
    }
    img.planes_ = std::move(planes);
    return img;
  }

  int width() const { return planes_.empty() ? 0 : static_cast<int>(planes_[0].cols()); }
  int height() const { return planes_.empty() ? 0 : static_cast<int>(planes_[0].rows()); }
  int channels() const { return static_cast<int>(planes_.size()); }
  bool empty() const { return planes_.empty(); }

  PlaneType& plane(int c) { return planes_[c]; }
  const PlaneType& plane(int c) const { return planes_[c]; }

  Scalar& operator()(int c, int y, int x) { return planes_[c](y, x); }
  Scalar operator()(int c, int y, int x) const { return planes_[c](y, x); }

  bool same_size(int w, int h) const { return width() == w && height() == h; }

  friend bool operator==(const BasicImage& a, const BasicImage& b) {
    if (a.channels() != b.channels() || a.width() != b.width() ||
        a.height() != b.height()) {
      return false;
    }
    for (int c = 0; c < a.channels(); ++c) {
      if (!(a.planes_[c] == b.planes_[c]).all()) return false;
    }
    return true;
  }

 private:
  std::vector<PlaneType> planes_;
};

using ImageBuffer = BasicImage<double>;

/// Per-pixel {0,1} instance or shape mask, height x width.
class BinaryMask {
 public:
  using Data = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false) {
    if (width < 1 || height < 1) {
      throw InvalidArgument("mask dimensions must be positive");
    }
    data_ = Data::Constant(height, width, fill ? 1 : 0);
  }

  int width() const { return static_cast<int>(data_.cols()); }
  int height() const { return static_cast<int>(data_.rows()); }

  std::uint8_t& operator()(int y, int x) { return data_(y, x); }
  std::uint8_t operator()(int y, int x) const { return data_(y, x); }

  Data& data() { return data_; }
  const Data& data() const { return data_; }

  long count() const { return (data_ != 0).count(); }
  bool any() const { return (data_ != 0).any(); }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() &&
           (a.data_ == b.data_).all();
  }

 private:
  Data data_;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool degenerate() const { return x1 <= x0 || y1 <= y0; }
  bool inside(int frame_w, int frame_h) const {
    return x0 >= 0 && y0 >= 0 && x1 <= frame_w && y1 <= frame_h;
  }
  bool contains(const Box& o) const {
    return o.x0 >= x0 && o.y0 >= y0 && o.x1 <= x1 && o.y1 <= y1;
  }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }

  friend bool operator==(const Box&, const Box&) = default;
};

std::string to_string(const Box& box);

/// Parses "x0,y0,x1,y1".
Box parse_box(const std::string& text);

}  // namespace anydoor
