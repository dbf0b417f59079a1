#include "anydoor/idextract.hpp"

#include <cmath>

#include "anydoor/imageops.hpp"

namespace anydoor::idextract {

ToyBackbone::ToyBackbone(int input_side, int patch_size, int width, std::uint64_t seed)
    : side_(input_side), patch_(patch_size), seed_(seed) {
  if (patch_size < 1 || input_side < patch_size || input_side % patch_size != 0) {
    throw InvalidArgument("backbone side must be a positive multiple of the patch size");
  }
  if (width < 1) throw InvalidArgument("backbone width must be positive");
  Rng rng(seed);
  mixing_ = nn::random_normal(kStatCount, width, 1.0, rng);
}

std::string ToyBackbone::name() const {
  return "toy-stats-" + std::to_string(side_) + "p" + std::to_string(patch_) + "w" +
         std::to_string(width()) + "s" + std::to_string(seed_);
}

Eigen::RowVectorXd ToyBackbone::region_stats(const ImageBuffer& img, int x0, int y0, int w,
                                             int h) {
  Eigen::RowVectorXd s(kStatCount);
  for (int c = 0; c < 3; ++c) {
    const auto block = img.plane(c).block(y0, x0, h, w);
    const double mean = block.mean();
    s(c) = mean;
    s(3 + c) = std::sqrt(std::max(0.0, (block - mean).square().mean()));
  }
  s(6) = 1.0;
  return s;
}

BackboneOutput ToyBackbone::encode(const ImageBuffer& img) const {
  if (img.width() != side_ || img.height() != side_ || img.channels() != 3) {
    throw InvalidArgument("toy backbone expects a " + std::to_string(side_) + "x" +
                          std::to_string(side_) + " RGB image");
  }
  const int per_side = side_ / patch_;
  Matrix stats(per_side * per_side, kStatCount);
  for (int py = 0; py < per_side; ++py) {
    for (int px = 0; px < per_side; ++px) {
      stats.row(py * per_side + px) = region_stats(img, px * patch_, py * patch_, patch_, patch_);
    }
  }
  BackboneOutput out;
  out.patch_tokens = (stats * mixing_).array().tanh().matrix();
  out.global_token = (region_stats(img, 0, 0, side_, side_) * mixing_).array().tanh().matrix();
  return out;
}

BackboneOutput extract_tokens(const ImageBuffer& object_img, const Backbone& backbone) {
  if (object_img.width() != object_img.height()) {
    throw InvalidArgument("extract_tokens expects a square object image, got " +
                          std::to_string(object_img.width()) + "x" +
                          std::to_string(object_img.height()));
  }
  if (object_img.channels() != 3) throw InvalidArgument("extract_tokens expects RGB input");
  const int side = backbone.input_side();
  if (object_img.width() == side) return backbone.encode(object_img);
  return backbone.encode(imageops::resize_bilinear(object_img, side, side));
}

IdProjector::IdProjector(int backbone_width, int token_width, Rng& rng)
    : weight(nn::random_normal(backbone_width, token_width, 1.0 / std::sqrt(backbone_width), rng)),
      bias(Matrix::Zero(1, token_width)) {}

IdTokens project_id_tokens(const BackboneOutput& out, const IdProjector& proj) {
  if (out.global_token.cols() != proj.input_width() ||
      out.patch_tokens.cols() != proj.input_width()) {
    throw InvalidArgument("projector expects backbone width " +
                          std::to_string(proj.input_width()) + ", got " +
                          std::to_string(out.global_token.cols()));
  }
  IdTokens t;
  t.tokens.resize(out.patch_tokens.rows() + 1, proj.output_width());
  t.tokens.topRows(1) = out.global_token * proj.weight.value;
  t.tokens.bottomRows(out.patch_tokens.rows()) = out.patch_tokens * proj.weight.value;
  t.tokens.rowwise() += proj.bias.value.row(0);
  return t;
}

void project_id_tokens_backward(const BackboneOutput& out, const Matrix& grad_tokens,
                                IdProjector& proj) {
  proj.weight.grad.noalias() += out.global_token.transpose() * grad_tokens.topRows(1);
  proj.weight.grad.noalias() +=
      out.patch_tokens.transpose() * grad_tokens.bottomRows(out.patch_tokens.rows());
  proj.bias.grad.row(0) += grad_tokens.colwise().sum();
}

}  // namespace anydoor::idextract
