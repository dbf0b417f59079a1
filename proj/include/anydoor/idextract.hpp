#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>

#include "anydoor/image.hpp"
#include "anydoor/nn.hpp"

namespace anydoor::idextract {

using nn::Matrix;

struct BackboneOutput {
  Matrix global_token;  // 1 x D_b
  Matrix patch_tokens;  // N_p x D_b, row-major patch order
};

/// Identity tokens: row 0 is the projected global token, rows 1..N_p the
/// projected patch tokens in patch order.
struct IdTokens {
  Matrix tokens;  // (N_p + 1) x D_c

  int rows() const { return static_cast<int>(tokens.rows()); }
  int width() const { return static_cast<int>(tokens.cols()); }
};

/// Vision backbone adapter. Implementations must be deterministic and
/// immutable after construction.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual int input_side() const = 0;
  virtual int patch_size() const = 0;
  virtual int width() const = 0;
  virtual std::string name() const = 0;

  int patch_count() const {
    const int per_side = input_side() / patch_size();
    return per_side * per_side;
  }

  /// `img` is square with side input_side().
  virtual BackboneOutput encode(const ImageBuffer& img) const = 0;
};

/// Deterministic stand-in for a pretrained ViT: non-overlapping patches are
/// summarised by per-channel mean and standard deviation plus a constant,
/// mixed by a fixed seeded matrix and squashed with tanh. The global token
/// applies the same map to whole-image statistics.
class ToyBackbone final : public Backbone {
 public:
  static constexpr int kStatCount = 7;

  ToyBackbone(int input_side = 64, int patch_size = 8, int width = 64, std::uint64_t seed = 7);

  int input_side() const override { return side_; }
  int patch_size() const override { return patch_; }
  int width() const override { return static_cast<int>(mixing_.cols()); }
  std::string name() const override;

  BackboneOutput encode(const ImageBuffer& img) const override;

  /// Region statistics [mean_r, mean_g, mean_b, std_r, std_g, std_b, 1].
  static Eigen::RowVectorXd region_stats(const ImageBuffer& img, int x0, int y0, int w, int h);

  const Matrix& mixing() const { return mixing_; }

 private:
  int side_;
  int patch_;
  std::uint64_t seed_;
  Matrix mixing_;  // kStatCount x width
};

/// Square-checks, resizes to the backbone side (bilinear) when needed, and
/// runs the backbone.
BackboneOutput extract_tokens(const ImageBuffer& object_img, const Backbone& backbone);

/// Single affine map shared by global and patch tokens.
struct IdProjector {
  nn::Param weight;  // D_b x D_c
  nn::Param bias;    // 1 x D_c

  IdProjector() = default;
  IdProjector(int backbone_width, int token_width, Rng& rng);

  int input_width() const { return static_cast<int>(weight.value.rows()); }
  int output_width() const { return static_cast<int>(weight.value.cols()); }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

/// [global; patches] (N_p+1 x D_b) -> affine -> (N_p+1 x D_c).
IdTokens project_id_tokens(const BackboneOutput& out, const IdProjector& proj);

/// Accumulates projector gradients from d(loss)/d(tokens).
void project_id_tokens_backward(const BackboneOutput& out, const Matrix& grad_tokens,
                                IdProjector& proj);

}  // namespace anydoor::idextract
