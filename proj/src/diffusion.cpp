#include "anydoor/diffusion.hpp"

#include <cmath>

#include "anydoor/conditioning.hpp"
#include "anydoor/imageops.hpp"

namespace anydoor::diffusion {

using nn::FeatureMap;
using nn::Matrix;

// ---------------------------------------------------------------------------
// Schedule

std::string to_string(ScheduleKind k) { return k == ScheduleKind::linear ? "linear" : "scaled_linear"; }

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "scaled_linear") return ScheduleKind::scaled_linear;
  throw InvalidArgument("unknown schedule kind '" + s + "'");
}

NoiseSchedule make_schedule(int T, ScheduleKind kind) {
  if (T < 2) throw InvalidArgument("schedule needs T >= 2, got " + std::to_string(T));
  NoiseSchedule s;
  s.T = T;
  s.kind = kind;
  s.alpha.resize(T);
  s.sigma.resize(T);
  const double b0 = kind == ScheduleKind::linear ? 1e-4 : 8.5e-4;
  const double b1 = kind == ScheduleKind::linear ? 0.02 : 0.012;
  double cumprod = 1.0;
  s.alpha[0] = 1.0;
  s.sigma[0] = 0.0;
  for (int t = 1; t < T; ++t) {
    const double frac = T > 2 ? static_cast<double>(t - 1) / (T - 2) : 1.0;
    double beta = 0.0;
    if (kind == ScheduleKind::linear) {
      beta = b0 + (b1 - b0) * frac;
    } else {
      const double r = std::sqrt(b0) + (std::sqrt(b1) - std::sqrt(b0)) * frac;
      beta = r * r;
    }
    cumprod *= 1.0 - beta;
    s.alpha[t] = std::sqrt(cumprod);
    s.sigma[t] = std::sqrt(1.0 - cumprod);
  }
  return s;
}

Latent add_noise(const Latent& x, const Latent& eps, int t, const NoiseSchedule& sched) {
  if (!x.same_shape(eps)) throw InvalidArgument("add_noise: latent shapes differ");
  if (t < 0 || t >= sched.T) throw InvalidArgument("add_noise: timestep out of range");
  Latent z = x;
  z.data = sched.alpha[t] * x.data + sched.sigma[t] * eps.data;
  return z;
}

double training_loss(const Latent& pred, const Latent& target) {
  if (!pred.same_shape(target)) throw InvalidArgument("training_loss: shapes differ");
  return (pred.data - target.data).squaredNorm() / static_cast<double>(pred.data.size());
}

Latent random_latent(int channels, int height, int width, Rng& rng) {
  return Latent(height, width, nn::random_normal(channels, height * width, 1.0, rng));
}

// ---------------------------------------------------------------------------
// Latent adapter

Latent PoolingLatentAdapter::encode(const ImageBuffer& img) const {
  if (img.channels() != 3) throw InvalidArgument("latent adapter expects RGB");
  if (img.width() % factor_ != 0 || img.height() % factor_ != 0) {
    throw InvalidArgument("image side not divisible by the latent factor");
  }
  const int h = img.height() / factor_, w = img.width() / factor_;
  Latent z(3, h, w);
  const double inv = 1.0 / (factor_ * factor_);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double mean =
            img.plane(c).block(y * factor_, x * factor_, factor_, factor_).sum() * inv;
        z.at(c, y, x) = 2.0 * mean - 1.0;
      }
    }
  }
  return z;
}

ImageBuffer PoolingLatentAdapter::decode(const Latent& z) const {
  if (z.channels != 3) throw InvalidArgument("latent adapter expects 3 latent channels");
  ImageBuffer img(z.width * factor_, z.height * factor_, 3);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        img(c, y, x) = std::clamp(0.5 * (z.at(c, y / factor_, x / factor_) + 1.0), 0.0, 1.0);
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Model

std::string to_string(Prediction p) { return p == Prediction::x ? "x" : "epsilon"; }

Prediction parse_prediction(const std::string& s) {
  if (s == "x") return Prediction::x;
  if (s == "epsilon" || s == "eps") return Prediction::epsilon;
  throw InvalidArgument("unknown prediction target '" + s + "'");
}

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::decoder: return "decoder";
    case ParamGroup::detail: return "detail";
    case ParamGroup::projector: return "projector";
  }
  return "?";
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument("model config: " + what);
  };
  require(stages() >= 1, "need at least one stage");
  require(latent_factor >= 1 && (latent_factor & (latent_factor - 1)) == 0,
          "latent_factor must be a power of two");
  require(image_side >= 1 && image_side % latent_factor == 0,
          "image_side must be divisible by latent_factor");
  require(latent_side() % (1 << (stages() - 1)) == 0,
          "latent side must be divisible by 2^(stages-1)");
  require(base_width >= 1 && token_width >= 1 && attn_dim >= 1 && time_dim >= 2,
          "widths must be positive (time_dim >= 2)");
  for (int m : channel_mult) require(m >= 1, "channel multipliers must be positive");
  require(backbone_patch >= 1 && backbone_side % backbone_patch == 0,
          "backbone_side must be a multiple of backbone_patch");
  require(backbone_width >= 1, "backbone_width must be positive");
}

DenoiserModel::DenoiserModel(ModelConfig cfg, std::shared_ptr<const idextract::Backbone> backbone,
                             std::shared_ptr<const LatentAdapter> adapter)
    : cfg_(std::move(cfg)), backbone_(std::move(backbone)), adapter_(std::move(adapter)) {
  cfg_.validate();
  if (!backbone_) {
    backbone_ = std::make_shared<idextract::ToyBackbone>(cfg_.backbone_side, cfg_.backbone_patch,
                                                         cfg_.backbone_width, cfg_.backbone_seed);
  }
  if (!adapter_) adapter_ = std::make_shared<PoolingLatentAdapter>(cfg_.latent_factor);
  if (adapter_->factor() != cfg_.latent_factor) {
    throw InvalidArgument("latent adapter factor does not match the model config");
  }

  Rng rng(cfg_.init_seed);
  const int n = cfg_.stages();
  const int lc = adapter_->channels();
  const int td = cfg_.time_dim, dc = cfg_.token_width, da = cfg_.attn_dim;
  auto w = [&](int i) { return cfg_.stage_width(i); };

  encoder.in_conv = nn::Conv2d(lc, w(0), 3, rng);
  for (int i = 0; i < n; ++i) {
    encoder.blocks.emplace_back(i == 0 ? w(0) : w(i - 1), w(i), td, dc, da, rng);
  }
  encoder.mid = nn::UNetBlock(w(n - 1), w(n - 1), td, dc, da, rng);

  decoder.blocks.resize(n);
  for (int i = n - 1; i >= 0; --i) {
    decoder.blocks[i] = nn::UNetBlock(3 * w(i), i > 0 ? w(i - 1) : w(0), td, dc, da, rng);
  }
  decoder.out_conv = nn::Conv2d(w(0), lc, 3, rng);

  detail.hint = nn::Conv2d(4, w(0), 3, rng);
  for (int i = 0; i < n; ++i) {
    detail.convs.emplace_back(i == 0 ? w(0) : w(i - 1), w(i), 3, rng);
    detail.zero_convs.emplace_back(w(i), w(i), 1, rng, /*zero_init=*/true);
  }

  projector = idextract::IdProjector(backbone_->width(), dc, rng);
}

std::map<std::string, ParamGroup> DenoiserModel::partition() const {
  std::map<std::string, ParamGroup> out;
  for_each_param([&](const std::string& n, ParamGroup g, const nn::Param&) { out[n] = g; });
  return out;
}

nn::Param& DenoiserModel::param(const std::string& name) {
  nn::Param* found = nullptr;
  for_each_param([&](const std::string& n, ParamGroup, nn::Param& p) {
    if (n == name) found = &p;
  });
  if (!found) throw InvalidArgument("no parameter named '" + name + "'");
  return *found;
}

const nn::Param& DenoiserModel::param(const std::string& name) const {
  return const_cast<DenoiserModel*>(this)->param(name);
}

long DenoiserModel::parameter_count() const {
  long total = 0;
  for_each_param([&](const std::string&, ParamGroup, const nn::Param& p) { total += p.size(); });
  return total;
}

void DenoiserModel::zero_grad() {
  for_each_param([](const std::string&, ParamGroup, nn::Param& p) { p.zero_grad(); });
}

// ---------------------------------------------------------------------------
// Forward / backward passes

namespace {

struct DetailCache {
  nn::Conv2d::Cache hint;
  FeatureMap hint_pre;
  std::vector<std::pair<int, int>> hint_pool_shapes;  // input shape of each pooling
  std::vector<std::pair<int, int>> level_pool_shapes; // level i > 0: input shape before pooling
  std::vector<nn::Conv2d::Cache> convs;
  std::vector<FeatureMap> pre;
  std::vector<nn::Conv2d::Cache> zeros;
};

int log2_int(int v) {
  int r = 0;
  while ((1 << r) < v) ++r;
  return r;
}

DetailMaps detail_forward(const DenoiserModel& m, const FeatureMap& collage, DetailCache* c) {
  const auto& d = m.detail;
  const int n = m.config().stages();
  FeatureMap pre = d.hint.forward(collage, c ? &c->hint : nullptr);
  FeatureMap h = nn::silu(pre);
  if (c) c->hint_pre = std::move(pre);
  for (int k = 0; k < log2_int(m.config().latent_factor); ++k) {
    if (c) c->hint_pool_shapes.emplace_back(h.height, h.width);
    h = nn::avg_pool2(h);
  }
  DetailMaps out;
  if (c) {
    c->convs.resize(n);
    c->pre.resize(n);
    c->zeros.resize(n);
    c->level_pool_shapes.resize(n);
  }
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      if (c) c->level_pool_shapes[i] = {h.height, h.width};
      h = nn::avg_pool2(h);
    }
    FeatureMap p = d.convs[i].forward(h, c ? &c->convs[i] : nullptr);
    h = nn::silu(p);
    out.levels.push_back(d.zero_convs[i].forward(h, c ? &c->zeros[i] : nullptr));
    if (c) c->pre[i] = std::move(p);
  }
  return out;
}

void detail_backward(DenoiserModel& m, const DetailMaps& g, const DetailCache& c) {
  auto& d = m.detail;
  const int n = m.config().stages();
  FeatureMap carry;  // gradient w.r.t. the activation feeding level i+1
  for (int i = n - 1; i >= 0; --i) {
    FeatureMap ga = d.zero_convs[i].backward(g.levels[i], c.zeros[i]);
    if (i < n - 1) ga.data += carry.data;
    const FeatureMap gp = nn::silu_backward(ga, c.pre[i]);
    FeatureMap gin = d.convs[i].backward(gp, c.convs[i]);
    if (i > 0) {
      carry = nn::avg_pool2_backward(gin, c.level_pool_shapes[i].first,
                                     c.level_pool_shapes[i].second);
    } else {
      carry = std::move(gin);
    }
  }
  for (auto it = c.hint_pool_shapes.rbegin(); it != c.hint_pool_shapes.rend(); ++it) {
    carry = nn::avg_pool2_backward(carry, it->first, it->second);
  }
  d.hint.backward(nn::silu_backward(carry, c.hint_pre), c.hint);
}

struct UNetCache {
  nn::Vector temb;
  nn::Conv2d::Cache in_conv;
  std::vector<nn::UNetBlock::Cache> enc;
  std::vector<std::pair<int, int>> enc_pool_shapes;
  nn::UNetBlock::Cache mid;
  std::vector<nn::UNetBlock::Cache> dec;
  std::vector<std::vector<int>> dec_parts;
  nn::Conv2d::Cache out;
};

void check_inputs(const DenoiserModel& m, const Latent& z, const Matrix& tokens,
                  const DetailMaps& details) {
  const auto& cfg = m.config();
  const int ls = cfg.latent_side();
  if (z.channels != m.adapter().channels() || z.height != ls || z.width != ls) {
    throw InvalidArgument("denoise: latent must be " + std::to_string(m.adapter().channels()) +
                          "x" + std::to_string(ls) + "x" + std::to_string(ls));
  }
  if (tokens.cols() != cfg.token_width) {
    throw InvalidArgument("denoise: token width " + std::to_string(tokens.cols()) +
                          " != cross-attention width " + std::to_string(cfg.token_width));
  }
  if (tokens.rows() < 1) throw InvalidArgument("denoise: no id tokens");
  if (static_cast<int>(details.levels.size()) != cfg.stages()) {
    throw InvalidArgument("denoise: detail map count does not match decoder stages");
  }
  for (int i = 0; i < cfg.stages(); ++i) {
    const auto& l = details.levels[i];
    if (l.channels != cfg.stage_width(i) || l.height != (ls >> i) || l.width != (ls >> i)) {
      throw InvalidArgument("denoise: detail map level " + std::to_string(i) + " has wrong shape");
    }
  }
}

Latent unet_forward(const DenoiserModel& m, const Latent& z, int t, const Matrix& tokens,
                    const DetailMaps& details, UNetCache* c) {
  const int n = m.config().stages();
  const nn::Vector temb = nn::timestep_embedding(t, m.config().time_dim);
  if (c) {
    c->temb = temb;
    c->enc.resize(n);
    c->enc_pool_shapes.resize(n);
    c->dec.resize(n);
    c->dec_parts.resize(n);
  }
  FeatureMap h = m.encoder.in_conv.forward(z, c ? &c->in_conv : nullptr);
  std::vector<FeatureMap> skips(n);
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      if (c) c->enc_pool_shapes[i] = {h.height, h.width};
      h = nn::avg_pool2(h);
    }
    h = m.encoder.blocks[i].forward(h, temb, tokens, c ? &c->enc[i] : nullptr);
    skips[i] = h;
  }
  h = m.encoder.mid.forward(h, temb, tokens, c ? &c->mid : nullptr);
  for (int i = n - 1; i >= 0; --i) {
    const FeatureMap cat = nn::concat_channels({&h, &skips[i], &details.levels[i]});
    if (c) c->dec_parts[i] = {h.channels, skips[i].channels, details.levels[i].channels};
    h = m.decoder.blocks[i].forward(cat, temb, tokens, c ? &c->dec[i] : nullptr);
    if (i > 0) h = nn::upsample2(h);
  }
  return m.decoder.out_conv.forward(h, c ? &c->out : nullptr);
}

void unet_backward(DenoiserModel& m, const Latent& gout, const UNetCache& c, Matrix& gtokens,
                   DetailMaps& gdetails) {
  const int n = m.config().stages();
  FeatureMap g = m.decoder.out_conv.backward(gout, c.out);
  std::vector<FeatureMap> gskips(n);
  gdetails.levels.resize(n);
  for (int i = 0; i < n; ++i) {
    if (i > 0) g = nn::upsample2_backward(g);
    const FeatureMap gcat = m.decoder.blocks[i].backward(g, c.temb, c.dec[i], gtokens);
    auto parts = nn::split_channels(gcat, c.dec_parts[i]);
    g = std::move(parts[0]);
    gskips[i] = std::move(parts[1]);
    gdetails.levels[i] = std::move(parts[2]);
  }
  g = m.encoder.mid.backward(g, c.temb, c.mid, gtokens);
  for (int i = n - 1; i >= 0; --i) {
    g.data += gskips[i].data;
    g = m.encoder.blocks[i].backward(g, c.temb, c.enc[i], gtokens);
    if (i > 0) g = nn::avg_pool2_backward(g, c.enc_pool_shapes[i].first, c.enc_pool_shapes[i].second);
  }
  m.encoder.in_conv.backward(g, c.in_conv);
}

}  // namespace

FeatureMap collage_features(const collage::CollageInput& collage) {
  const int w = collage.width(), h = collage.height();
  if (collage.shape.width() != w || collage.shape.height() != h) {
    throw InvalidArgument("collage: shape channel size differs from rgb");
  }
  FeatureMap f(4, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) f.at(c, y, x) = collage.rgb(c, y, x);
      f.at(3, y, x) = collage.shape(y, x);
    }
  }
  return f;
}

DetailMaps encode_details(const collage::CollageInput& collage, const DenoiserModel& model) {
  const int s = model.config().image_side;
  if (collage.width() != s || collage.height() != s) {
    throw InvalidArgument("encode_details: collage must be " + std::to_string(s) + "x" +
                          std::to_string(s) + ", got " + std::to_string(collage.width()) + "x" +
                          std::to_string(collage.height()));
  }
  return detail_forward(model, collage_features(collage), nullptr);
}

Latent denoise(const Latent& z_t, int t, const idextract::IdTokens& id_tokens,
               const DetailMaps& details, const DenoiserModel& model) {
  check_inputs(model, z_t, id_tokens.tokens, details);
  return unet_forward(model, z_t, t, id_tokens.tokens, details, nullptr);
}

Latent predict_x(const Latent& z_t, int t, const idextract::IdTokens& id_tokens,
                 const DetailMaps& details, const DenoiserModel& model,
                 const NoiseSchedule& sched) {
  Latent out = denoise(z_t, t, id_tokens, details, model);
  if (model.config().prediction == Prediction::x) return out;
  out.data = (z_t.data - sched.sigma[t] * out.data) / sched.alpha[t];
  return out;
}

idextract::IdTokens id_tokens_for(const ImageBuffer& object_img, const DenoiserModel& model) {
  return idextract::project_id_tokens(idextract::extract_tokens(object_img, model.backbone()),
                                      model.projector);
}

// ---------------------------------------------------------------------------
// Training

TrainingExample prepare_example(const datapipe::TrainingPair& pair, const DenoiserModel& model,
                                const ConditioningConfig& cfg) {
  const int side = model.config().image_side;
  const auto in = inference::assemble_inputs(pair.object_img, pair.object_mask, pair.scene,
                                             pair.box, pair.shape_mask, side, cfg.zoom_ratio,
                                             cfg.erosion_radius);
  const auto gt = inference::zoom_in(pair.ground_truth, pair.box, cfg.zoom_ratio, side);
  TrainingExample ex;
  ex.x = model.adapter().encode(gt.crop);
  ex.collage = collage_features(in.collage);
  ex.backbone = idextract::extract_tokens(in.object_img, model.backbone());
  return ex;
}

namespace {

struct Forward {
  Latent out;
  Latent target;
  Matrix tokens;
  DetailCache dcache;
  UNetCache ucache;
};

void run_forward(const TrainingExample& ex, int t, const Latent& eps, const DenoiserModel& model,
                 const NoiseSchedule& sched, Forward& f, bool record) {
  if (t < 0 || t >= sched.T) throw InvalidArgument("timestep out of range");
  const Latent z = add_noise(ex.x, eps, t, sched);
  f.tokens = idextract::project_id_tokens(ex.backbone, model.projector).tokens;
  const DetailMaps details = detail_forward(model, ex.collage, record ? &f.dcache : nullptr);
  check_inputs(model, z, f.tokens, details);
  f.out = unet_forward(model, z, t, f.tokens, details, record ? &f.ucache : nullptr);
  f.target = model.config().prediction == Prediction::x ? ex.x : eps;
}

}  // namespace

double example_loss(const TrainingExample& ex, int t, const Latent& eps,
                    const DenoiserModel& model, const NoiseSchedule& sched) {
  Forward f;
  run_forward(ex, t, eps, model, sched, f, false);
  return training_loss(f.out, f.target);
}

double accumulate_gradients(const TrainingExample& ex, int t, const Latent& eps,
                            DenoiserModel& model, const NoiseSchedule& sched, double weight) {
  Forward f;
  run_forward(ex, t, eps, model, sched, f, true);
  const double loss = training_loss(f.out, f.target);

  Latent gout = f.out;
  gout.data = (f.out.data - f.target.data) * (2.0 * weight / static_cast<double>(f.out.data.size()));
  Matrix gtokens = Matrix::Zero(f.tokens.rows(), f.tokens.cols());
  DetailMaps gdetails;
  unet_backward(model, gout, f.ucache, gtokens, gdetails);
  detail_backward(model, gdetails, f.dcache);
  idextract::project_id_tokens_backward(ex.backbone, gtokens, model.projector);
  return loss;
}

void AdamOptimizer::step(DenoiserModel& model) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  model.for_each_param([&](const std::string& name, ParamGroup g, nn::Param& p) {
    if (DenoiserModel::frozen(g)) return;
    auto& s = state_[name];
    if (s.m.size() == 0) {
      s.m = Matrix::Zero(p.value.rows(), p.value.cols());
      s.v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    s.m = beta1_ * s.m + (1.0 - beta1_) * p.grad;
    s.v = beta2_ * s.v + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr_ * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps_);
  });
}

double train_step(const std::vector<TrainingExample>& examples, const std::vector<int>& timesteps,
                  DenoiserModel& model, const NoiseSchedule& sched, AdamOptimizer& optimizer,
                  Rng& rng) {
  if (examples.empty()) throw InvalidArgument("train_step: empty batch");
  if (timesteps.size() != examples.size()) {
    throw InvalidArgument("train_step: one timestep per example required");
  }
  model.zero_grad();
  const double weight = 1.0 / static_cast<double>(examples.size());
  double loss = 0.0;
  for (size_t i = 0; i < examples.size(); ++i) {
    const auto& x = examples[i].x;
    const Latent eps = random_latent(x.channels, x.height, x.width, rng);
    loss += weight * accumulate_gradients(examples[i], timesteps[i], eps, model, sched, weight);
  }
  if (!std::isfinite(loss)) {
    throw NumericalDivergence("non-finite training loss", optimizer.steps());
  }
  optimizer.step(model);
  return loss;
}

double train_step(const datapipe::Batch& batch, DenoiserModel& model, const NoiseSchedule& sched,
                  AdamOptimizer& optimizer, Rng& rng, const ConditioningConfig& cfg) {
  std::vector<TrainingExample> examples;
  std::vector<int> timesteps;
  for (const auto& item : batch) {
    examples.push_back(prepare_example(item.pair, model, cfg));
    timesteps.push_back(item.timestep);
  }
  return train_step(examples, timesteps, model, sched, optimizer, rng);
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<int> sampling_timesteps(int T, int steps) {
  if (steps < 1) throw InvalidArgument("sampler needs at least one step");
  if (steps > T) throw InvalidArgument("sampler steps exceed T");
  std::vector<int> ts;
  for (int k = steps - 1; k >= 0; --k) {
    ts.push_back(static_cast<int>((static_cast<long>(k) + 1) * T / steps) - 1);
  }
  return ts;
}

ImageBuffer sample(const collage::CollageInput& collage, const idextract::IdTokens& id_tokens,
                   const DenoiserModel& model, const NoiseSchedule& sched, int steps,
                   std::uint64_t seed) {
  const auto ts = sampling_timesteps(sched.T, steps);
  const DetailMaps details = encode_details(collage, model);
  const int ls = model.config().latent_side();
  Rng rng(seed);
  Latent z = random_latent(model.adapter().channels(), ls, ls, rng);
  Latent x_hat;
  for (size_t k = 0; k < ts.size(); ++k) {
    const int t = ts[k];
    x_hat = predict_x(z, t, id_tokens, details, model, sched);
    if (k + 1 == ts.size()) break;
    const int next = ts[k + 1];
    // Deterministic re-noise with the implied noise estimate.
    const Matrix eps_hat = sched.sigma[t] > 0 ? Matrix((z.data - sched.alpha[t] * x_hat.data) / sched.sigma[t])
                                              : Matrix(Matrix::Zero(z.data.rows(), z.data.cols()));
    z.data = sched.alpha[next] * x_hat.data + sched.sigma[next] * eps_hat;
  }
  return model.adapter().decode(x_hat);
}

}  // namespace anydoor::diffusion
