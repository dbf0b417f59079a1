#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "anydoor/collage.hpp"
#include "anydoor/datapipe.hpp"
#include "anydoor/idextract.hpp"
#include "anydoor/image.hpp"
#include "anydoor/nn.hpp"

namespace anydoor::diffusion {

using Latent = nn::FeatureMap;

// ---------------------------------------------------------------------------
// Noise schedule

enum class ScheduleKind { linear, scaled_linear };

std::string to_string(ScheduleKind k);
ScheduleKind parse_schedule_kind(const std::string& s);

/// Variance-preserving coefficients with the step-0 identity convention:
/// beta_0 = 0, beta_1..beta_{T-1} from the chosen ramp over [1e-4, 0.02],
/// alpha_t = sqrt(prod(1 - beta)), sigma_t = sqrt(1 - alpha_t^2).
struct NoiseSchedule {
  int T = 0;
  ScheduleKind kind = ScheduleKind::linear;
  std::vector<double> alpha;
  std::vector<double> sigma;
};

NoiseSchedule make_schedule(int T, ScheduleKind kind = ScheduleKind::linear);

/// alpha_t * x + sigma_t * eps.
Latent add_noise(const Latent& x, const Latent& eps, int t, const NoiseSchedule& sched);

/// Mean squared difference over every element.
double training_loss(const Latent& pred, const Latent& target);

Latent random_latent(int channels, int height, int width, Rng& rng);

// ---------------------------------------------------------------------------
// Latent adapter

/// Image <-> latent map standing in for a pretrained autoencoder.
class LatentAdapter {
 public:
  virtual ~LatentAdapter() = default;
  virtual int factor() const = 0;
  virtual int channels() const = 0;
  virtual std::string name() const = 0;
  virtual Latent encode(const ImageBuffer& img) const = 0;
  virtual ImageBuffer decode(const Latent& z) const = 0;
};

/// factor x factor average pooling down, nearest up; pixels in [0,1] map to
/// latents in [-1,1].
class PoolingLatentAdapter final : public LatentAdapter {
 public:
  explicit PoolingLatentAdapter(int factor = 2) : factor_(factor) {}
  int factor() const override { return factor_; }
  int channels() const override { return 3; }
  std::string name() const override { return "avgpool" + std::to_string(factor_); }
  Latent encode(const ImageBuffer& img) const override;
  ImageBuffer decode(const Latent& z) const override;

 private:
  int factor_;
};

// ---------------------------------------------------------------------------
// Model

enum class Prediction { x, epsilon };

std::string to_string(Prediction p);
Prediction parse_prediction(const std::string& s);

struct ModelConfig {
  int image_side = 32;
  int latent_factor = 2;
  int base_width = 32;
  std::vector<int> channel_mult{1, 2, 2};  // one entry per resolution stage
  int token_width = 32;                    // cross-attention width D_c
  int attn_dim = 32;
  int time_dim = 16;
  int backbone_side = 64;
  int backbone_patch = 8;
  int backbone_width = 64;
  std::uint64_t backbone_seed = 7;
  Prediction prediction = Prediction::x;
  std::uint64_t init_seed = 0;

  void validate() const;
  int stages() const { return static_cast<int>(channel_mult.size()); }
  int stage_width(int i) const { return base_width * channel_mult.at(i); }
  int latent_side() const { return image_side / latent_factor; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One feature grid per decoder stage; level i is latent_side / 2^i square.
struct DetailMaps {
  std::vector<nn::FeatureMap> levels;
};

enum class ParamGroup { encoder, decoder, detail, projector };

std::string to_string(ParamGroup g);

/// Toy conditional UNet plus its detail encoder and ID projector.
///
/// The encoder (input conv, down blocks, middle block) is the frozen part;
/// decoder, detail encoder and projector are trainable. Decoder stage i
/// consumes [features | skip_i | detail_i] concatenated on channels, and
/// every block cross-attends to the ID tokens.
class DenoiserModel {
 public:
  explicit DenoiserModel(ModelConfig cfg,
                         std::shared_ptr<const idextract::Backbone> backbone = nullptr,
                         std::shared_ptr<const LatentAdapter> adapter = nullptr);

  const ModelConfig& config() const { return cfg_; }
  const idextract::Backbone& backbone() const { return *backbone_; }
  const LatentAdapter& adapter() const { return *adapter_; }
  std::shared_ptr<const idextract::Backbone> backbone_ptr() const { return backbone_; }

  static bool frozen(ParamGroup g) { return g == ParamGroup::encoder; }

  /// f(name, group, Param&) over every parameter, in a fixed order.
  template <typename F>
  void for_each_param(F&& f) {
    auto in = [&](ParamGroup g) {
      return [&f, g](const std::string& name, nn::Param& p) { f(name, g, p); };
    };
    auto enc = in(ParamGroup::encoder);
    encoder.in_conv.for_each_param("encoder.in_conv", enc);
    for (size_t i = 0; i < encoder.blocks.size(); ++i) {
      encoder.blocks[i].for_each_param("encoder.block" + std::to_string(i), enc);
    }
    encoder.mid.for_each_param("encoder.mid", enc);
    auto dec = in(ParamGroup::decoder);
    for (size_t i = 0; i < decoder.blocks.size(); ++i) {
      decoder.blocks[i].for_each_param("decoder.block" + std::to_string(i), dec);
    }
    decoder.out_conv.for_each_param("decoder.out_conv", dec);
    auto det = in(ParamGroup::detail);
    detail.hint.for_each_param("detail.hint", det);
    for (size_t i = 0; i < detail.convs.size(); ++i) {
      detail.convs[i].for_each_param("detail.conv" + std::to_string(i), det);
      detail.zero_convs[i].for_each_param("detail.zero" + std::to_string(i), det);
    }
    projector.for_each_param("projector", in(ParamGroup::projector));
  }

  template <typename F>
  void for_each_param(F&& f) const {
    const_cast<DenoiserModel*>(this)->for_each_param(
        [&f](const std::string& n, ParamGroup g, nn::Param& p) {
          f(n, g, static_cast<const nn::Param&>(p));
        });
  }

  std::map<std::string, ParamGroup> partition() const;
  nn::Param& param(const std::string& name);
  const nn::Param& param(const std::string& name) const;
  long parameter_count() const;
  void zero_grad();

  struct Encoder {
    nn::Conv2d in_conv;
    std::vector<nn::UNetBlock> blocks;
    nn::UNetBlock mid;
  } encoder;

  struct Decoder {
    std::vector<nn::UNetBlock> blocks;  // index = stage
    nn::Conv2d out_conv;
  } decoder;

  struct DetailEncoder {
    nn::Conv2d hint;
    std::vector<nn::Conv2d> convs;
    std::vector<nn::Conv2d> zero_convs;  // zero-initialised 1x1 outputs
  } detail;

  idextract::IdProjector projector;

 private:
  ModelConfig cfg_;
  std::shared_ptr<const idextract::Backbone> backbone_;
  std::shared_ptr<const LatentAdapter> adapter_;
};

/// Collage as a 4-channel feature map: RGB then shape.
nn::FeatureMap collage_features(const collage::CollageInput& collage);

DetailMaps encode_details(const collage::CollageInput& collage, const DenoiserModel& model);

/// Raw network output for (z_t, t): the x-prediction, or the noise
/// prediction when the model is configured for epsilon.
Latent denoise(const Latent& z_t, int t, const idextract::IdTokens& id_tokens,
               const DetailMaps& details, const DenoiserModel& model);

/// x-hat regardless of the configured parameterisation.
Latent predict_x(const Latent& z_t, int t, const idextract::IdTokens& id_tokens,
                 const DetailMaps& details, const DenoiserModel& model,
                 const NoiseSchedule& sched);

idextract::IdTokens id_tokens_for(const ImageBuffer& object_img, const DenoiserModel& model);

// ---------------------------------------------------------------------------
// Training

/// Model-ready tensors for one TrainingPair.
struct TrainingExample {
  Latent x;                          // ground-truth latent
  nn::FeatureMap collage;            // 4 x image_side x image_side
  idextract::BackboneOutput backbone;
};

struct ConditioningConfig {
  double zoom_ratio = 2.0;
  int erosion_radius = 2;
};

TrainingExample prepare_example(const datapipe::TrainingPair& pair, const DenoiserModel& model,
                                const ConditioningConfig& cfg = {});

/// Loss of one example at a fixed (t, eps); no side effects.
double example_loss(const TrainingExample& ex, int t, const Latent& eps,
                    const DenoiserModel& model, const NoiseSchedule& sched);

/// Forward + backward for one example; adds weight * d(loss)/d(param) into
/// every parameter's grad and returns the unweighted loss.
double accumulate_gradients(const TrainingExample& ex, int t, const Latent& eps,
                            DenoiserModel& model, const NoiseSchedule& sched, double weight = 1.0);

/// Adaptive-moment optimiser touching only trainable parameters.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr = 1e-5, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(DenoiserModel& model);
  double learning_rate() const { return lr_; }
  long steps() const { return t_; }

 private:
  struct Moments {
    nn::Matrix m;
    nn::Matrix v;
  };
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Moments> state_;
};

/// One optimisation step over the batch (mean loss). Noise is drawn from
/// `rng`; timesteps come from the batch items. Throws NumericalDivergence
/// when the loss is not finite.
double train_step(const datapipe::Batch& batch, DenoiserModel& model, const NoiseSchedule& sched,
                  AdamOptimizer& optimizer, Rng& rng, const ConditioningConfig& cfg = {});

/// Same, on prepared examples.
double train_step(const std::vector<TrainingExample>& examples, const std::vector<int>& timesteps,
                  DenoiserModel& model, const NoiseSchedule& sched, AdamOptimizer& optimizer,
                  Rng& rng);

// ---------------------------------------------------------------------------
// Sampling

/// Descending stride-uniform steps: t_k = (k+1) * T / steps - 1.
std::vector<int> sampling_timesteps(int T, int steps);

/// Deterministic predict-x / re-noise loop from Gaussian noise drawn with
/// `seed`, decoded through the latent adapter and clamped to [0,1].
ImageBuffer sample(const collage::CollageInput& collage, const idextract::IdTokens& id_tokens,
                   const DenoiserModel& model, const NoiseSchedule& sched, int steps,
                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  ModelConfig config;
  ScheduleKind schedule_kind = ScheduleKind::linear;
  int T = 1000;
  std::map<std::string, nn::Matrix> tensors;
};

/// Layout: "ANYDCKPT", u32 version, u64 header length, JSON header, then
/// each tensor row-major as little-endian float32 at its header offset.
void save_checkpoint(const std::string& path, const DenoiserModel& model, ScheduleKind kind, int T);
Checkpoint read_checkpoint(const std::string& path);
DenoiserModel load_model(const Checkpoint& ckpt,
                         std::shared_ptr<const idextract::Backbone> backbone = nullptr);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace anydoor::diffusion
