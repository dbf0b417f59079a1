#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anydoor/diffusion.hpp"
#include "anydoor/idextract.hpp"
#include "anydoor/inference.hpp"

namespace anydoor::eval {

/// Mean patch token plus global token, L2-normalised. Non-square inputs are
/// resized to the extractor's side.
Eigen::VectorXd pooled_feature(const ImageBuffer& img, const idextract::Backbone& extractor);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Cosine between pooled features of generated[box] and the target.
double region_similarity_score(const ImageBuffer& generated, const Box& box,
                               const ImageBuffer& target, const idextract::Backbone& extractor);

struct BenchmarkObject {
  std::string name;
  ImageBuffer image;
  BinaryMask mask;
};

struct BenchmarkScene {
  std::string name;
  ImageBuffer image;
  Box box;
};

/// objects.jsonl lines: {"name", "image", "mask"}; scenes.jsonl lines:
/// {"name", "image", "box": [x0, y0, x1, y1]}. Relative paths resolve
/// against the manifest's directory.
std::vector<BenchmarkObject> load_objects(const std::filesystem::path& jsonl);
std::vector<BenchmarkScene> load_scenes(const std::filesystem::path& jsonl);

struct ComboScore {
  int object = 0;
  int scene = 0;
  int proposal = 0;
  std::uint64_t seed = 0;
  double score = 0.0;
};

struct ComboFailure {
  int object = 0;
  int scene = 0;
  int proposal = 0;
  std::string error;
};

struct SimilarityReport {
  std::vector<std::string> objects;
  std::vector<std::string> scenes;
  int proposals = 1;
  std::uint64_t seed = 0;
  std::string extractor;
  std::vector<ComboScore> scores;  // object-major, then scene, then proposal
  std::vector<ComboFailure> failures;
  double mean_score = 0.0;

  std::string to_json() const;
  std::string to_csv() const;
};

struct BenchmarkConfig {
  int proposals = 1;
  std::uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path run_dir;  // empty: keep generated images in memory only
  inference::TeleportConfig teleport;
};

/// Teleports every object into every scene box, `proposals` seeds each, and
/// scores the generated box against the masked object crop. Failed
/// combinations are recorded and skipped.
SimilarityReport run_benchmark(const std::vector<BenchmarkObject>& objects,
                               const std::vector<BenchmarkScene>& scenes,
                               const diffusion::DenoiserModel& model,
                               const diffusion::NoiseSchedule& sched,
                               const idextract::Backbone& extractor, const BenchmarkConfig& cfg);

/// report.json and summary.csv under `dir`.
void write_report(const SimilarityReport& report, const std::filesystem::path& dir);

}  // namespace anydoor::eval
