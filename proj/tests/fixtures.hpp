#pragma once

// Small models and synthetic training data shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "anydoor/datapipe.hpp"
#include "anydoor/diffusion.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace anydoor;

inline diffusion::ModelConfig tiny_config() {
  diffusion::ModelConfig c;
  c.image_side = 16;
  c.latent_factor = 2;
  c.base_width = 6;
  c.channel_mult = {1, 2};
  c.token_width = 8;
  c.attn_dim = 6;
  c.time_dim = 8;
  c.backbone_side = 16;
  c.backbone_patch = 4;
  c.backbone_width = 10;
  c.init_seed = 3;
  return c;
}

// Video pair from the 2-frame moving-square clip, fixed by `seed`.
inline datapipe::TrainingPair square_pair(std::uint64_t seed = 1, int frame = 24) {
  const auto clip = oracle::moving_square_clip(frame, frame, 6, 7, 6, 3, 2);
  Rng rng(seed);
  return datapipe::sample_video_pair(clip, 1, rng);
}

// Runs a few optimiser steps so zero-initialised layers carry gradient.
inline void warm_up(diffusion::DenoiserModel& model, const diffusion::NoiseSchedule& sched,
                    const diffusion::TrainingExample& ex, int steps, double lr = 1e-2) {
  diffusion::AdamOptimizer opt(lr);
  Rng rng(99);
  for (int i = 0; i < steps; ++i) diffusion::train_step({ex}, {sched.T / 3}, model, sched, opt, rng);
}

struct GradCheck {
  std::string name;
  long index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error() const {
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    return denom == 0 ? 0.0 : std::abs(analytic - numeric) / denom;
  }
};

// Central differences on the largest-gradient entry of each named parameter.
inline std::vector<GradCheck> gradient_check(diffusion::DenoiserModel& model,
                                             const diffusion::NoiseSchedule& sched,
                                             const diffusion::TrainingExample& ex, int t,
                                             const diffusion::Latent& eps,
                                             const std::vector<std::string>& names,
                                             double h = 1e-5) {
  model.zero_grad();
  diffusion::accumulate_gradients(ex, t, eps, model, sched);
  std::vector<GradCheck> out;
  for (const auto& n : names) {
    auto& p = model.param(n);
    Eigen::Index idx = 0;
    p.grad.cwiseAbs().reshaped().maxCoeff(&idx);
    GradCheck g;
    g.name = n;
    g.index = static_cast<long>(idx);
    g.analytic = p.grad.reshaped()(idx);
    const double keep = p.value.reshaped()(idx);
    p.value.reshaped()(idx) = keep + h;
    const double up = diffusion::example_loss(ex, t, eps, model, sched);
    p.value.reshaped()(idx) = keep - h;
    const double down = diffusion::example_loss(ex, t, eps, model, sched);
    p.value.reshaped()(idx) = keep;
    g.numeric = (up - down) / (2 * h);
    out.push_back(g);
  }
  return out;
}

// Ten parameters spread over every trainable group.
inline std::vector<std::string> gradient_check_names() {
  return {"decoder.block0.conv.weight", "decoder.block1.conv.weight", "decoder.block0.attn.to_q",
          "decoder.block1.time.weight", "decoder.out_conv.weight",    "detail.hint.weight",
          "detail.conv1.weight",        "detail.zero0.weight",        "detail.zero1.bias",
          "projector.weight"};
}

}  // namespace fixture
