#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "anydoor/diffusion.hpp"

namespace anydoor::diffusion {

namespace {

constexpr char kMagic[8] = {'A', 'N', 'Y', 'D', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"image_side", c.image_side},         {"latent_factor", c.latent_factor},
          {"base_width", c.base_width},         {"channel_mult", c.channel_mult},
          {"token_width", c.token_width},       {"attn_dim", c.attn_dim},
          {"time_dim", c.time_dim},             {"backbone_side", c.backbone_side},
          {"backbone_patch", c.backbone_patch}, {"backbone_width", c.backbone_width},
          {"backbone_seed", c.backbone_seed},   {"prediction", to_string(c.prediction)},
          {"init_seed", c.init_seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.image_side = j.at("image_side").get<int>();
  c.latent_factor = j.at("latent_factor").get<int>();
  c.base_width = j.at("base_width").get<int>();
  c.channel_mult = j.at("channel_mult").get<std::vector<int>>();
  c.token_width = j.at("token_width").get<int>();
  c.attn_dim = j.at("attn_dim").get<int>();
  c.time_dim = j.at("time_dim").get<int>();
  c.backbone_side = j.at("backbone_side").get<int>();
  c.backbone_patch = j.at("backbone_patch").get<int>();
  c.backbone_width = j.at("backbone_width").get<int>();
  c.backbone_seed = j.at("backbone_seed").get<std::uint64_t>();
  c.prediction = parse_prediction(j.at("prediction").get<std::string>());
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const DenoiserModel& model, ScheduleKind kind, int T) {
  nlohmann::json header;
  header["format"] = "anydoor-checkpoint";
  header["version"] = kCheckpointVersion;
  header["config"] = config_to_json(model.config());
  header["schedule"] = {{"kind", to_string(kind)}, {"T", T}};
  header["adapter"] = model.adapter().name();
  header["backbone"] = model.backbone().name();

  std::vector<float> payload;
  auto tensors = nlohmann::json::array();
  model.for_each_param([&](const std::string& name, ParamGroup g, const nn::Param& p) {
    tensors.push_back({{"name", name},
                       {"group", to_string(g)},
                       {"shape", {p.value.rows(), p.value.cols()}},
                       {"offset", payload.size() * sizeof(float)}});
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        payload.push_back(static_cast<float>(p.value(r, c)));
      }
    }
  });
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint '" + path + "'");
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t len = text.size();
  os.write(kMagic, sizeof(kMagic));
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!os) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint '" + path + "'");
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  is.read(magic, sizeof(magic));
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("'" + path + "' is not a checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  std::vector<char> payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(text);
    ck.config = config_from_json(header.at("config"));
    ck.schedule_kind = parse_schedule_kind(header.at("schedule").at("kind").get<std::string>());
    ck.T = header.at("schedule").at("T").get<int>();
    for (const auto& t : header.at("tensors")) {
      const auto rows = t.at("shape")[0].get<Eigen::Index>();
      const auto cols = t.at("shape")[1].get<Eigen::Index>();
      const auto offset = t.at("offset").get<size_t>();
      const size_t bytes = static_cast<size_t>(rows * cols) * sizeof(float);
      if (offset + bytes > payload.size()) throw IoError("checkpoint payload truncated");
      nn::Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          float v;
          std::memcpy(&v, payload.data() + offset + (r * cols + c) * sizeof(float), sizeof(float));
          m(r, c) = v;
        }
      }
      ck.tensors.emplace(t.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint header: " + std::string(e.what()));
  }
  return ck;
}

DenoiserModel load_model(const Checkpoint& ckpt,
                         std::shared_ptr<const idextract::Backbone> backbone) {
  DenoiserModel model(ckpt.config, std::move(backbone));
  model.for_each_param([&](const std::string& name, ParamGroup, nn::Param& p) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw IoError("checkpoint lacks tensor '" + name + "'");
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
      throw IoError("checkpoint tensor '" + name + "' has the wrong shape");
    }
    p.value = it->second;
    p.zero_grad();
  });
  return model;
}

}  // namespace anydoor::diffusion
