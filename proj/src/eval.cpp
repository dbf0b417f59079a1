#include "anydoor/eval.hpp"

#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "anydoor/imageops.hpp"
#include "anydoor/png_io.hpp"

namespace fs = std::filesystem;

namespace anydoor::eval {

Eigen::VectorXd pooled_feature(const ImageBuffer& img, const idextract::Backbone& extractor) {
  const int side = extractor.input_side();
  const auto out = extractor.encode(imageops::resize_bilinear(img, side, side));
  Eigen::VectorXd v =
      (out.patch_tokens.colwise().mean() + out.global_token.row(0)).transpose();
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine_similarity: length mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double region_similarity_score(const ImageBuffer& generated, const Box& box,
                               const ImageBuffer& target, const idextract::Backbone& extractor) {
  if (box.degenerate() || !box.inside(generated.width(), generated.height())) {
    throw InvalidArgument("region box " + to_string(box) + " is not inside the generated image");
  }
  return cosine_similarity(pooled_feature(imageops::crop(generated, box), extractor),
                           pooled_feature(target, extractor));
}

namespace {

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read '" + path.string() + "'");
  std::vector<nlohmann::json> rows;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

}  // namespace

std::vector<BenchmarkObject> load_objects(const fs::path& jsonl) {
  std::vector<BenchmarkObject> out;
  for (const auto& j : read_jsonl(jsonl)) {
    try {
      BenchmarkObject o;
      o.name = j.at("name").get<std::string>();
      o.image = io::read_rgb(resolve(jsonl.parent_path(), j.at("image").get<std::string>()));
      o.mask = io::read_mask(resolve(jsonl.parent_path(), j.at("mask").get<std::string>()));
      out.push_back(std::move(o));
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(jsonl.string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<BenchmarkScene> load_scenes(const fs::path& jsonl) {
  std::vector<BenchmarkScene> out;
  for (const auto& j : read_jsonl(jsonl)) {
    try {
      BenchmarkScene s;
      s.name = j.at("name").get<std::string>();
      s.image = io::read_rgb(resolve(jsonl.parent_path(), j.at("image").get<std::string>()));
      const auto b = j.at("box").get<std::vector<int>>();
      if (b.size() != 4) throw ManifestError("box needs 4 coordinates");
      s.box = Box{b[0], b[1], b[2], b[3]};
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(jsonl.string() + ": " + e.what());
    }
  }
  return out;
}

SimilarityReport run_benchmark(const std::vector<BenchmarkObject>& objects,
                               const std::vector<BenchmarkScene>& scenes,
                               const diffusion::DenoiserModel& model,
                               const diffusion::NoiseSchedule& sched,
                               const idextract::Backbone& extractor, const BenchmarkConfig& cfg) {
  if (objects.empty() || scenes.empty()) throw EmptyDatasetError("benchmark needs objects and scenes");
  if (cfg.proposals < 1) throw InvalidArgument("proposals per combination must be >= 1");

  SimilarityReport report;
  for (const auto& o : objects) report.objects.push_back(o.name);
  for (const auto& s : scenes) report.scenes.push_back(s.name);
  report.proposals = cfg.proposals;
  report.seed = cfg.seed;
  report.extractor = extractor.name();

  const size_t n_obj = objects.size(), n_scene = scenes.size();
  const size_t total = n_obj * n_scene * static_cast<size_t>(cfg.proposals);

  // Masked object crops are shared by every scene.
  std::vector<ImageBuffer> targets(n_obj);
  std::vector<std::string> target_errors(n_obj);
  for (size_t o = 0; o < n_obj; ++o) {
    try {
      targets[o] = imageops::center_crop_object(objects[o].image, objects[o].mask,
                                                cfg.teleport.crop_pad).image;
    } catch (const Error& e) {
      target_errors[o] = e.what();
    }
  }

  struct Outcome {
    bool ok = false;
    ComboScore score;
    ComboFailure failure;
  };
  std::vector<Outcome> outcomes(total);

  auto run_one = [&](size_t idx) {
    const int p = static_cast<int>(idx % cfg.proposals);
    const int s = static_cast<int>((idx / cfg.proposals) % n_scene);
    const int o = static_cast<int>(idx / (cfg.proposals * n_scene));
    const std::uint64_t seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(o),
                                                      static_cast<std::uint64_t>(s),
                                                      static_cast<std::uint64_t>(p)});
    Outcome& out = outcomes[idx];
    try {
      if (!target_errors[o].empty()) throw Error("object crop: " + target_errors[o]);
      const auto& scene = scenes[s];
      const auto generated = inference::teleport(objects[o].image, objects[o].mask, scene.image,
                                                 scene.box, std::nullopt, model, sched, seed,
                                                 cfg.teleport);
      if (!cfg.run_dir.empty()) {
        io::write_image(cfg.run_dir / ("o" + std::to_string(o) + "_s" + std::to_string(s) + "_p" +
                                       std::to_string(p) + ".png"),
                        generated);
      }
      out.score = {o, s, p, seed,
                   region_similarity_score(generated, scene.box, targets[o], extractor)};
      out.ok = true;
    } catch (const std::exception& e) {
      out.failure = {o, s, p, e.what()};
    }
  };

  if (!cfg.run_dir.empty()) fs::create_directories(cfg.run_dir);
  const size_t workers = static_cast<size_t>(std::max(1, cfg.workers));
  if (workers == 1) {
    for (size_t i = 0; i < total; ++i) run_one(i);
  } else {
    std::vector<std::future<void>> jobs;
    for (size_t w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (size_t i = w; i < total; i += workers) run_one(i);
      }));
    }
    for (auto& j : jobs) j.get();
  }

  double sum = 0.0;
  for (const auto& out : outcomes) {
    if (out.ok) {
      report.scores.push_back(out.score);
      sum += out.score.score;
    } else {
      report.failures.push_back(out.failure);
    }
  }
  report.mean_score = report.scores.empty() ? 0.0 : sum / static_cast<double>(report.scores.size());
  return report;
}

std::string SimilarityReport::to_json() const {
  nlohmann::json j;
  j["note"] =
      "scores come from the '" + extractor +
      "' feature extractor; absolute values are not comparable with pretrained CLIP/DINO scores";
  j["extractor"] = extractor;
  j["seed"] = seed;
  j["proposals"] = proposals;
  j["objects"] = objects;
  j["scenes"] = scenes;
  j["score_count"] = scores.size();
  j["failure_count"] = failures.size();
  j["mean_score"] = mean_score;
  auto arr = nlohmann::json::array();
  for (const auto& s : scores) {
    arr.push_back({{"object", objects[s.object]},
                   {"scene", scenes[s.scene]},
                   {"proposal", s.proposal},
                   {"seed", s.seed},
                   {"score", s.score}});
  }
  j["scores"] = arr;
  auto fails = nlohmann::json::array();
  for (const auto& f : failures) {
    fails.push_back({{"object", objects[f.object]},
                     {"scene", scenes[f.scene]},
                     {"proposal", f.proposal},
                     {"error", f.error}});
  }
  j["failures"] = fails;
  return j.dump(2);
}

std::string SimilarityReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "object,scene,proposal,seed,score\n";
  for (const auto& s : scores) {
    os << objects[s.object] << ',' << scenes[s.scene] << ',' << s.proposal << ',' << s.seed << ','
       << s.score << '\n';
  }
  os << "mean,,,," << mean_score << '\n';
  return os.str();
}

void write_report(const SimilarityReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream(dir / "report.json") << report.to_json() << '\n';
  std::ofstream(dir / "summary.csv") << report.to_csv();
}

}  // namespace anydoor::eval
