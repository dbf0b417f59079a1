#include "anydoor/nn.hpp"

#include <cmath>

#include "anydoor/errors.hpp"

namespace anydoor::nn {

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

FeatureMap concat_channels(const std::vector<const FeatureMap*>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_channels: nothing to concatenate");
  int total = 0;
  for (const auto* p : parts) {
    if (p->height != parts[0]->height || p->width != parts[0]->width) {
      throw InvalidArgument("concat_channels: spatial dimensions differ");
    }
    total += p->channels;
  }
  FeatureMap out(total, parts[0]->height, parts[0]->width);
  int row = 0;
  for (const auto* p : parts) {
    out.data.middleRows(row, p->channels) = p->data;
    row += p->channels;
  }
  return out;
}

std::vector<FeatureMap> split_channels(const FeatureMap& grad, const std::vector<int>& channels) {
  std::vector<FeatureMap> out;
  int row = 0;
  for (int c : channels) {
    out.emplace_back(grad.height, grad.width, grad.data.middleRows(row, c));
    row += c;
  }
  return out;
}

FeatureMap avg_pool2(const FeatureMap& x) {
  if (x.height % 2 != 0 || x.width % 2 != 0) {
    throw InvalidArgument("avg_pool2 needs even spatial dimensions");
  }
  FeatureMap out(x.channels, x.height / 2, x.width / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int xx = 0; xx < out.width; ++xx) {
      const int o = y * out.width + xx;
      const int i = 2 * y * x.width + 2 * xx;
      out.data.col(o) = 0.25 * (x.data.col(i) + x.data.col(i + 1) + x.data.col(i + x.width) +
                                x.data.col(i + x.width + 1));
    }
  }
  return out;
}

FeatureMap avg_pool2_backward(const FeatureMap& grad_out, int in_height, int in_width) {
  FeatureMap g(grad_out.channels, in_height, in_width);
  for (int y = 0; y < in_height; ++y) {
    for (int x = 0; x < in_width; ++x) {
      g.data.col(y * in_width + x) = 0.25 * grad_out.data.col((y / 2) * grad_out.width + x / 2);
    }
  }
  return g;
}

FeatureMap upsample2(const FeatureMap& x) {
  FeatureMap out(x.channels, x.height * 2, x.width * 2);
  for (int y = 0; y < out.height; ++y) {
    for (int xx = 0; xx < out.width; ++xx) {
      out.data.col(y * out.width + xx) = x.data.col((y / 2) * x.width + xx / 2);
    }
  }
  return out;
}

FeatureMap upsample2_backward(const FeatureMap& grad_out) {
  FeatureMap g(grad_out.channels, grad_out.height / 2, grad_out.width / 2);
  for (int y = 0; y < grad_out.height; ++y) {
    for (int x = 0; x < grad_out.width; ++x) {
      g.data.col((y / 2) * g.width + x / 2) += grad_out.data.col(y * grad_out.width + x);
    }
  }
  return g;
}

FeatureMap silu(const FeatureMap& x) {
  FeatureMap out = x;
  out.data = x.data.array() / (1.0 + (-x.data.array()).exp());
  return out;
}

FeatureMap silu_backward(const FeatureMap& grad_out, const FeatureMap& x) {
  const auto s = (1.0 / (1.0 + (-x.data.array()).exp())).eval();
  FeatureMap g = grad_out;
  g.data = grad_out.data.array() * (s + x.data.array() * s * (1.0 - s));
  return g;
}

Vector timestep_embedding(int t, int dim) {
  Vector e(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / std::max(half, 1));
    e(i) = std::sin(t * freq);
    e(half + i) = std::cos(t * freq);
  }
  if (dim % 2 == 1) e(dim - 1) = 0.0;
  return e;
}

namespace {

Matrix im2col(const FeatureMap& x, int k) {
  const int pad = k / 2;
  const int hw = x.height * x.width;
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(x.channels) * k * k, hw);
  for (int c = 0; c < x.channels; ++c) {
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + dy) * k + dx;
        for (int y = 0; y < x.height; ++y) {
          const int sy = y + dy - pad;
          if (sy < 0 || sy >= x.height) continue;
          for (int xx = 0; xx < x.width; ++xx) {
            const int sx = xx + dx - pad;
            if (sx < 0 || sx >= x.width) continue;
            cols(row, y * x.width + xx) = x.data(c, sy * x.width + sx);
          }
        }
      }
    }
  }
  return cols;
}

FeatureMap col2im(const Matrix& cols, int channels, int height, int width, int k) {
  const int pad = k / 2;
  FeatureMap g(channels, height, width);
  for (int c = 0; c < channels; ++c) {
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + dy) * k + dx;
        for (int y = 0; y < height; ++y) {
          const int sy = y + dy - pad;
          if (sy < 0 || sy >= height) continue;
          for (int x = 0; x < width; ++x) {
            const int sx = x + dx - pad;
            if (sx < 0 || sx >= width) continue;
            g.data(c, sy * width + sx) += cols(row, y * width + x);
          }
        }
      }
    }
  }
  return g;
}

}  // namespace

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, Rng& rng, bool zero_init)
    : in_(in_channels), out_(out_channels), k_(kernel) {
  const int fan_in = in_channels * kernel * kernel;
  weight = Param(zero_init ? Matrix::Zero(out_channels, fan_in)
                           : random_normal(out_channels, fan_in, 1.0 / std::sqrt(fan_in), rng));
  bias = Param(Matrix::Zero(out_channels, 1));
}

FeatureMap Conv2d::forward(const FeatureMap& x, Cache* cache) const {
  if (x.channels != in_) {
    throw InvalidArgument("Conv2d: expected " + std::to_string(in_) + " input channels, got " +
                          std::to_string(x.channels));
  }
  Matrix cols = k_ == 1 ? x.data : im2col(x, k_);
  FeatureMap y(x.height, x.width, weight.value * cols);
  y.data.colwise() += bias.value.col(0);
  if (cache) {
    cache->columns = std::move(cols);
    cache->height = x.height;
    cache->width = x.width;
  }
  return y;
}

FeatureMap Conv2d::backward(const FeatureMap& grad_out, const Cache& cache) {
  weight.grad.noalias() += grad_out.data * cache.columns.transpose();
  bias.grad.col(0) += grad_out.data.rowwise().sum();
  Matrix gcols = weight.value.transpose() * grad_out.data;
  if (k_ == 1) return FeatureMap(cache.height, cache.width, std::move(gcols));
  return col2im(gcols, in_, cache.height, cache.width, k_);
}

TimeBias::TimeBias(int time_dim, int channels, Rng& rng)
    : weight(random_normal(channels, time_dim, 1.0 / std::sqrt(time_dim), rng)),
      bias(Matrix::Zero(channels, 1)) {}

FeatureMap TimeBias::forward(const FeatureMap& x, const Vector& temb) const {
  FeatureMap y = x;
  const Vector shift = weight.value * temb + bias.value.col(0);
  y.data.colwise() += shift;
  return y;
}

void TimeBias::backward(const FeatureMap& grad_out, const Vector& temb) {
  const Vector gsum = grad_out.data.rowwise().sum();
  weight.grad.noalias() += gsum * temb.transpose();
  bias.grad.col(0) += gsum;
}

CrossAttention::CrossAttention(int channels, int token_width, int attn_dim, Rng& rng)
    : to_q(random_normal(attn_dim, channels, 1.0 / std::sqrt(channels), rng)),
      to_k(random_normal(attn_dim, token_width, 1.0 / std::sqrt(token_width), rng)),
      to_v(random_normal(attn_dim, token_width, 1.0 / std::sqrt(token_width), rng)),
      to_out(random_normal(channels, attn_dim, 1.0 / std::sqrt(attn_dim), rng)),
      out_bias(Matrix::Zero(channels, 1)) {}

FeatureMap CrossAttention::forward(const FeatureMap& x, const Matrix& tokens, Cache* cache) const {
  if (tokens.cols() != to_k.value.cols()) {
    throw InvalidArgument("cross-attention expects token width " +
                          std::to_string(to_k.value.cols()) + ", got " +
                          std::to_string(tokens.cols()));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(to_q.value.rows()));
  Matrix q = to_q.value * x.data;
  Matrix k = to_k.value * tokens.transpose();
  Matrix v = to_v.value * tokens.transpose();
  Matrix attn = (q.transpose() * k) * scale;
  const Vector row_max = attn.rowwise().maxCoeff();
  attn = (attn.colwise() - row_max).array().exp().matrix();
  const Vector row_sum = attn.rowwise().sum();
  attn = row_sum.cwiseInverse().asDiagonal() * attn;
  Matrix mixed = v * attn.transpose();

  FeatureMap y = x;
  y.data.noalias() += to_out.value * mixed;
  y.data.colwise() += out_bias.value.col(0);
  if (cache) {
    cache->input = x.data;
    cache->tokens = tokens;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->mixed = std::move(mixed);
  }
  return y;
}

FeatureMap CrossAttention::backward(const FeatureMap& grad_out, const Cache& c,
                                    Matrix& grad_tokens) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(to_q.value.rows()));
  const Matrix& gy = grad_out.data;
  to_out.grad.noalias() += gy * c.mixed.transpose();
  out_bias.grad.col(0) += gy.rowwise().sum();
  const Matrix gmixed = to_out.value.transpose() * gy;            // d x N
  const Matrix gv = gmixed * c.attn;                              // d x M
  const Matrix gattn = gmixed.transpose() * c.v;                  // N x M
  const Vector inner = (gattn.array() * c.attn.array()).rowwise().sum();
  const Matrix gscore = (c.attn.array() * (gattn.colwise() - inner).array()).matrix() * scale;
  const Matrix gq = c.k * gscore.transpose();                     // d x N
  const Matrix gk = c.q * gscore;                                 // d x M

  to_q.grad.noalias() += gq * c.input.transpose();
  to_k.grad.noalias() += gk * c.tokens;
  to_v.grad.noalias() += gv * c.tokens;
  grad_tokens.noalias() += gk.transpose() * to_k.value + gv.transpose() * to_v.value;

  FeatureMap gx = grad_out;
  gx.data.noalias() += to_q.value.transpose() * gq;
  return gx;
}

UNetBlock::UNetBlock(int in_channels, int out_channels, int time_dim, int token_width,
                     int attn_dim, Rng& rng)
    : conv(in_channels, out_channels, 3, rng),
      time(time_dim, out_channels, rng),
      attn(out_channels, token_width, attn_dim, rng) {}

FeatureMap UNetBlock::forward(const FeatureMap& x, const Vector& temb, const Matrix& tokens,
                              Cache* cache) const {
  FeatureMap pre = time.forward(conv.forward(x, cache ? &cache->conv : nullptr), temb);
  FeatureMap y = attn.forward(silu(pre), tokens, cache ? &cache->attn : nullptr);
  if (cache) cache->pre_act = std::move(pre);
  return y;
}

FeatureMap UNetBlock::backward(const FeatureMap& grad_out, const Vector& temb, const Cache& cache,
                               Matrix& grad_tokens) {
  const FeatureMap ga = attn.backward(grad_out, cache.attn, grad_tokens);
  const FeatureMap gp = silu_backward(ga, cache.pre_act);
  time.backward(gp, temb);
  return conv.backward(gp, cache.conv);
}

}  // namespace anydoor::nn
