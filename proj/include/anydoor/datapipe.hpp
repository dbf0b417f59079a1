#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "anydoor/collage.hpp"
#include "anydoor/image.hpp"
#include "anydoor/rng.hpp"

namespace anydoor::datapipe {

enum class Modality { video, image };

std::string to_string(Modality m);
Modality parse_modality(const std::string& s);

/// One supervised example: the object from one view, the scene with the
/// target box hollowed, and the untouched target view as ground truth.
struct TrainingPair {
  ImageBuffer object_img;   // square, background zeroed
  BinaryMask object_mask;   // same size as object_img
  ImageBuffer scene;        // ground_truth with box set to 0
  Box box;                  // in ground_truth coordinates
  BinaryMask shape_mask;    // box-sized
  ImageBuffer ground_truth;
  Modality modality = Modality::image;
  int source_frame = -1;    // clip frame indices; -1 for stills
  int target_frame = -1;
};

/// Throws InvalidArgument if the pair breaks its contract.
void check_pair(const TrainingPair& pair);

struct ClipFrame {
  int index = 0;
  ImageBuffer image;
  std::map<int, BinaryMask> instances;  // instance id -> mask
};

using Clip = std::vector<ClipFrame>;

struct AugmentConfig {
  double flip_probability = 0.5;
  double max_rotation_deg = 15.0;
  double min_scale = 0.9;
  double max_scale = 1.1;

  static AugmentConfig identity() { return {0.0, 0.0, 1.0, 1.0}; }
  void validate() const;
};

struct PairConfig {
  double crop_pad = 0.0;     // object crop padding fraction
  double max_box_pad = 0.1;  // per-side box padding, fraction of box size
  collage::ShapeSimConfig shape;
  AugmentConfig augment;
};

TrainingPair sample_video_pair(const Clip& clip, int instance_id, Rng& rng,
                               const PairConfig& cfg = {});

TrainingPair make_image_pair(const ImageBuffer& img, const BinaryMask& mask, Rng& rng,
                             const PairConfig& cfg = {});

/// Flip / rotate / scale about the centre; image bilinear, mask nearest.
std::pair<ImageBuffer, BinaryMask> augment_object(const ImageBuffer& img, const BinaryMask& mask,
                                                  const AugmentConfig& cfg, Rng& rng);

struct TimestepSamplerConfig {
  int T = 1000;
  double early_boost = 0.5;
  int boundary = 500;

  void validate() const;
  /// Probability mass of the half favoured by a modality.
  double favored_mass() const;
};

/// Piecewise-uniform step: video favours [boundary, T), images [0, boundary).
int sample_timestep(Modality modality, const TimestepSamplerConfig& cfg, Rng& rng);

struct ManifestEntry {
  std::vector<std::string> paths;  // frame images (clips) or the still image
  int instance_id = 1;
  std::vector<int> frames;         // frame numbers aligned with paths; empty for stills
  Modality modality = Modality::image;
  std::string quality = "unknown";

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  bool empty() const { return entries.empty(); }
  size_t size() const { return entries.size(); }

  std::string to_jsonl() const;
  static Manifest from_jsonl(const std::string& text);

  void save(const std::filesystem::path& path) const;
  /// Loads and checks that every referenced image and mask exists.
  static Manifest load(const std::filesystem::path& path);
  void validate_files() const;
};

/// Mask path for an image path: <stem>.mask.png next to it.
std::filesystem::path mask_path_for(const std::filesystem::path& image_path);

/// Scans roots laid out as clips/<name>/<frame>.png (+ .mask.png label maps,
/// one gray level per instance) and stills/<name>.png (+ .mask.png).
Manifest build_manifest(const std::vector<std::filesystem::path>& roots);

Clip load_clip(const ManifestEntry& entry);

struct BatchItem {
  TrainingPair pair;
  int timestep = 0;
  size_t entry_index = 0;
};

using Batch = std::vector<BatchItem>;

/// Epoch-wise seeded shuffles over a manifest. Each item draws from a child
/// seed of (seed, epoch, position) so the worker count never changes content.
class BatchIterator {
 public:
  BatchIterator(Manifest manifest, int batch_size, std::uint64_t seed, PairConfig pair_cfg = {},
                TimestepSamplerConfig ts_cfg = {}, int workers = 1);

  /// Next batch; the final batch of an epoch may be short, batches never
  /// straddle epochs.
  Batch next();

  int epoch() const { return epoch_; }
  const Manifest& manifest() const { return manifest_; }

  /// Builds the pair for one entry from a given random source.
  TrainingPair make_pair(size_t entry_index, Rng& rng) const;

 private:
  struct Loaded {
    Clip clip;
    ImageBuffer image;
    BinaryMask mask;
  };

  std::shared_ptr<const Loaded> load(size_t entry_index) const;
  void reshuffle();

  Manifest manifest_;
  int batch_size_;
  std::uint64_t seed_;
  PairConfig pair_cfg_;
  TimestepSamplerConfig ts_cfg_;
  int workers_;

  int epoch_ = 0;
  size_t cursor_ = 0;
  std::vector<size_t> order_;

  mutable std::mutex cache_mutex_;
  mutable std::map<size_t, std::shared_ptr<const Loaded>> cache_;
};

}  // namespace anydoor::datapipe
