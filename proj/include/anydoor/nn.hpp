#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "anydoor/rng.hpp"

// Minimal layers with hand-written backward passes for the toy denoiser.
// Forward passes are const and record what backward needs in a cache owned by
// the caller, so inference can run concurrently on shared weights.
namespace anydoor::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Param {
  Matrix value;
  Matrix grad;

  Param() = default;
  explicit Param(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

/// channels x (height * width); column index is y * width + x.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  Matrix data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w), data(Matrix::Zero(c, h * w)) {}
  FeatureMap(int h, int w, Matrix d)
      : channels(static_cast<int>(d.rows())), height(h), width(w), data(std::move(d)) {}

  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  double& at(int c, int y, int x) { return data(c, y * width + x); }
  double at(int c, int y, int x) const { return data(c, y * width + x); }
};

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

FeatureMap concat_channels(const std::vector<const FeatureMap*>& parts);

/// Splits a gradient of a channel concatenation back into per-part blocks.
std::vector<FeatureMap> split_channels(const FeatureMap& grad, const std::vector<int>& channels);

FeatureMap avg_pool2(const FeatureMap& x);
FeatureMap avg_pool2_backward(const FeatureMap& grad_out, int in_height, int in_width);

FeatureMap upsample2(const FeatureMap& x);
FeatureMap upsample2_backward(const FeatureMap& grad_out);

FeatureMap silu(const FeatureMap& x);
FeatureMap silu_backward(const FeatureMap& grad_out, const FeatureMap& x);

/// Sinusoidal embedding of a diffusion step.
Vector timestep_embedding(int t, int dim);

class Conv2d {
 public:
  struct Cache {
    Matrix columns;
    int height = 0;
    int width = 0;
  };

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, Rng& rng, bool zero_init = false);

  FeatureMap forward(const FeatureMap& x, Cache* cache) const;
  FeatureMap backward(const FeatureMap& grad_out, const Cache& cache);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }

  Param weight;  // out x (in * k * k), input-channel-major
  Param bias;    // out x 1

 private:
  int in_ = 0;
  int out_ = 0;
  int k_ = 1;
};

/// Adds a learned projection of the timestep embedding to every pixel.
class TimeBias {
 public:
  TimeBias() = default;
  TimeBias(int time_dim, int channels, Rng& rng);

  FeatureMap forward(const FeatureMap& x, const Vector& temb) const;
  void backward(const FeatureMap& grad_out, const Vector& temb);

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }

  Param weight;  // channels x time_dim
  Param bias;    // channels x 1
};

/// Residual cross-attention from pixels (queries) to conditioning tokens.
class CrossAttention {
 public:
  struct Cache {
    Matrix input;   // C x N
    Matrix tokens;  // M x D
    Matrix q, k, v; // d x N, d x M, d x M
    Matrix attn;    // N x M, row-softmaxed
    Matrix mixed;   // d x N
  };

  CrossAttention() = default;
  CrossAttention(int channels, int token_width, int attn_dim, Rng& rng);

  FeatureMap forward(const FeatureMap& x, const Matrix& tokens, Cache* cache) const;
  /// Returns the input gradient and accumulates the token gradient.
  FeatureMap backward(const FeatureMap& grad_out, const Cache& cache, Matrix& grad_tokens);

  int token_width() const { return static_cast<int>(to_k.value.cols()); }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".to_q", to_q);
    f(prefix + ".to_k", to_k);
    f(prefix + ".to_v", to_v);
    f(prefix + ".to_out", to_out);
    f(prefix + ".out_bias", out_bias);
  }

  Param to_q;      // d x C
  Param to_k;      // d x D
  Param to_v;      // d x D
  Param to_out;    // C x d
  Param out_bias;  // C x 1
};

/// conv3x3 -> + time bias -> SiLU -> cross-attention. The unit used at every
/// denoiser resolution.
class UNetBlock {
 public:
  struct Cache {
    Conv2d::Cache conv;
    FeatureMap pre_act;
    CrossAttention::Cache attn;
  };

  UNetBlock() = default;
  UNetBlock(int in_channels, int out_channels, int time_dim, int token_width, int attn_dim,
            Rng& rng);

  FeatureMap forward(const FeatureMap& x, const Vector& temb, const Matrix& tokens,
                     Cache* cache) const;
  FeatureMap backward(const FeatureMap& grad_out, const Vector& temb, const Cache& cache,
                      Matrix& grad_tokens);

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    conv.for_each_param(prefix + ".conv", f);
    time.for_each_param(prefix + ".time", f);
    attn.for_each_param(prefix + ".attn", f);
  }

  Conv2d conv;
  TimeBias time;
  CrossAttention attn;
};

}  // namespace anydoor::nn
