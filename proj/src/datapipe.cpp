#include "anydoor/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "anydoor/imageops.hpp"
#include "anydoor/png_io.hpp"

namespace fs = std::filesystem;

namespace anydoor::datapipe {

std::string to_string(Modality m) { return m == Modality::video ? "video" : "image"; }

Modality parse_modality(const std::string& s) {
  if (s == "video") return Modality::video;
  if (s == "image") return Modality::image;
  throw InvalidArgument("unknown modality '" + s + "'");
}

void check_pair(const TrainingPair& p) {
  const int w = p.ground_truth.width(), h = p.ground_truth.height();
  if (!p.scene.same_size(w, h)) throw InvalidArgument("pair: scene and ground truth sizes differ");
  if (!p.box.inside(w, h) || p.box.degenerate()) throw InvalidArgument("pair: box out of frame");
  if (!p.object_mask.any()) throw InvalidArgument("pair: empty object mask");
  if (!p.object_img.same_size(p.object_mask.width(), p.object_mask.height())) {
    throw InvalidArgument("pair: object image and mask sizes differ");
  }
  if (p.shape_mask.width() != p.box.width() || p.shape_mask.height() != p.box.height()) {
    throw InvalidArgument("pair: shape mask is not box-sized");
  }
  for (int c = 0; c < p.scene.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const bool in_box = x >= p.box.x0 && x < p.box.x1 && y >= p.box.y0 && y < p.box.y1;
        const double expect = in_box ? 0.0 : p.ground_truth(c, y, x);
        if (p.scene(c, y, x) != expect) {
          throw InvalidArgument("pair: scene differs from ground truth outside the box or is "
                                "nonzero inside it");
        }
      }
    }
  }
}

void AugmentConfig::validate() const {
  if (!(flip_probability >= 0 && flip_probability <= 1)) {
    throw InvalidArgument("flip probability must be in [0,1]");
  }
  if (max_rotation_deg < 0) throw InvalidArgument("max rotation must be >= 0");
  if (!(min_scale > 0 && min_scale <= max_scale)) throw InvalidArgument("invalid scale range");
}

namespace {

// Box grown by an independent uniform fraction in [0, max_pad] per side.
Box jitter_box(const Box& b, double max_pad, int frame_w, int frame_h, Rng& rng) {
  std::uniform_real_distribution<double> pad(0.0, max_pad);
  Box out = b;
  out.x0 = std::max(0, b.x0 - static_cast<int>(std::lround(pad(rng) * b.width())));
  out.x1 = std::min(frame_w, b.x1 + static_cast<int>(std::lround(pad(rng) * b.width())));
  out.y0 = std::max(0, b.y0 - static_cast<int>(std::lround(pad(rng) * b.height())));
  out.y1 = std::min(frame_h, b.y1 + static_cast<int>(std::lround(pad(rng) * b.height())));
  return out;
}

// Scene-side fields shared by both pair sources.
void fill_target(TrainingPair& pair, const ImageBuffer& target, const BinaryMask& target_mask,
                 const PairConfig& cfg, Rng& rng) {
  const Box tight = imageops::bounding_box(target_mask);
  pair.box = jitter_box(tight, cfg.max_box_pad, target.width(), target.height(), rng);
  pair.ground_truth = target;
  pair.scene = collage::hollow_box(target, pair.box);
  pair.shape_mask =
      imageops::crop(collage::simulate_shape_mask(target_mask, cfg.shape, rng), pair.box);
}

}  // namespace

TrainingPair sample_video_pair(const Clip& clip, int instance_id, Rng& rng, const PairConfig& cfg) {
  std::vector<size_t> present;
  for (size_t i = 0; i < clip.size(); ++i) {
    auto it = clip[i].instances.find(instance_id);
    if (it != clip[i].instances.end() && it->second.any()) present.push_back(i);
  }
  if (present.size() < 2) {
    throw InsufficientFramesError("instance " + std::to_string(instance_id) + " appears in " +
                                  std::to_string(present.size()) + " frame(s), need 2");
  }
  // Uniform ordered pair of distinct frames == uniform unordered pair with a
  // random role assignment.
  const long n = static_cast<long>(present.size());
  const long a = uniform_index(rng, 0, n);
  long b = uniform_index(rng, 0, n - 1);
  if (b >= a) ++b;
  const ClipFrame& src = clip[present[static_cast<size_t>(a)]];
  const ClipFrame& dst = clip[present[static_cast<size_t>(b)]];

  TrainingPair pair;
  auto crop = imageops::center_crop_object(src.image, src.instances.at(instance_id), cfg.crop_pad);
  pair.object_img = std::move(crop.image);
  pair.object_mask = std::move(crop.mask);
  fill_target(pair, dst.image, dst.instances.at(instance_id), cfg, rng);
  pair.modality = Modality::video;
  pair.source_frame = src.index;
  pair.target_frame = dst.index;
  return pair;
}

std::pair<ImageBuffer, BinaryMask> augment_object(const ImageBuffer& img, const BinaryMask& mask,
                                                  const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  const bool flip = uniform01(rng) < cfg.flip_probability;
  const double angle =
      std::uniform_real_distribution<double>(-cfg.max_rotation_deg, cfg.max_rotation_deg)(rng) *
      std::numbers::pi / 180.0;
  const double scale = std::uniform_real_distribution<double>(cfg.min_scale, cfg.max_scale)(rng);

  ImageBuffer out_img = flip ? imageops::flip_horizontal(img) : img;
  BinaryMask out_mask = flip ? imageops::flip_horizontal(mask) : mask;
  if (angle == 0.0 && scale == 1.0) return {std::move(out_img), std::move(out_mask)};

  const int w = img.width(), h = img.height();
  const double cx = 0.5 * w, cy = 0.5 * h;
  const double ca = std::cos(angle), sa = std::sin(angle);
  ImageBuffer warped(w, h, img.channels());
  BinaryMask warped_mask(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Inverse map of the destination pixel centre.
      const double dx = (x + 0.5 - cx) / scale, dy = (y + 0.5 - cy) / scale;
      const double sx = ca * dx + sa * dy + cx - 0.5;
      const double sy = -sa * dx + ca * dy + cy - 0.5;
      const int nx = static_cast<int>(std::lround(sx)), ny = static_cast<int>(std::lround(sy));
      if (nx >= 0 && nx < w && ny >= 0 && ny < h) warped_mask(y, x) = out_mask(ny, nx);
      if (sx < -0.5 || sy < -0.5 || sx > w - 0.5 || sy > h - 0.5) continue;
      const double fx = std::clamp(sx, 0.0, w - 1.0), fy = std::clamp(sy, 0.0, h - 1.0);
      const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double wx = fx - x0, wy = fy - y0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1 - wx) * out_img(c, y0, x0) + wx * out_img(c, y0, x1);
        const double bot = (1 - wx) * out_img(c, y1, x0) + wx * out_img(c, y1, x1);
        warped(c, y, x) = (1 - wy) * top + wy * bot;
      }
    }
  }
  if (!warped_mask.any()) return {std::move(out_img), std::move(out_mask)};
  return {imageops::apply_mask(warped, warped_mask), std::move(warped_mask)};
}

TrainingPair make_image_pair(const ImageBuffer& img, const BinaryMask& mask, Rng& rng,
                             const PairConfig& cfg) {
  if (!mask.any()) throw EmptyObjectError("make_image_pair: mask is empty");
  auto crop = imageops::center_crop_object(img, mask, cfg.crop_pad);
  auto [obj, obj_mask] = augment_object(crop.image, crop.mask, cfg.augment, rng);

  TrainingPair pair;
  pair.object_img = std::move(obj);
  pair.object_mask = std::move(obj_mask);
  fill_target(pair, img, mask, cfg, rng);
  pair.modality = Modality::image;
  return pair;
}

void TimestepSamplerConfig::validate() const {
  if (T < 2) throw InvalidArgument("T must be >= 2");
  if (!(boundary > 0 && boundary < T)) throw InvalidArgument("boundary must be in (0, T)");
  if (!(early_boost >= 0)) throw InvalidArgument("early_boost must be >= 0");
}

double TimestepSamplerConfig::favored_mass() const {
  return std::min(1.0, 0.5 * (1.0 + early_boost));
}

int sample_timestep(Modality modality, const TimestepSamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  const bool favored = uniform01(rng) < cfg.favored_mass();
  const bool upper = (modality == Modality::video) == favored;
  return upper ? static_cast<int>(uniform_index(rng, cfg.boundary, cfg.T))
               : static_cast<int>(uniform_index(rng, 0, cfg.boundary));
}

// ---------------------------------------------------------------------------
// Manifest

std::string Manifest::to_jsonl() const {
  std::string out;
  for (const auto& e : entries) {
    nlohmann::json j;
    j["paths"] = e.paths;
    j["instance_id"] = e.instance_id;
    j["frames"] = e.frames;
    j["modality"] = to_string(e.modality);
    j["quality"] = e.quality;
    out += j.dump() + "\n";
  }
  return out;
}

Manifest Manifest::from_jsonl(const std::string& text) {
  Manifest m;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.paths = j.at("paths").get<std::vector<std::string>>();
      e.instance_id = j.at("instance_id").get<int>();
      e.frames = j.at("frames").get<std::vector<int>>();
      e.modality = parse_modality(j.at("modality").get<std::string>());
      e.quality = j.value("quality", std::string("unknown"));
      if (e.paths.empty()) throw ManifestError("entry has no paths");
      if (e.modality == Modality::video && e.frames.size() != e.paths.size()) {
        throw ManifestError("frames and paths lengths differ");
      }
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ManifestError("manifest line " + std::to_string(lineno) + ": " + ex.what());
    } catch (const Error& ex) {
      throw ManifestError("manifest line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return m;
}

void Manifest::save(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write manifest '" + path.string() + "'");
  os << to_jsonl();
}

Manifest Manifest::load(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read manifest '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  Manifest m = from_jsonl(ss.str());
  m.validate_files();
  return m;
}

void Manifest::validate_files() const {
  for (const auto& e : entries) {
    for (const auto& p : e.paths) {
      if (!fs::exists(p)) throw ManifestError("missing image '" + p + "'");
      if (!fs::exists(mask_path_for(p))) {
        throw ManifestError("missing mask '" + mask_path_for(p).string() + "'");
      }
    }
  }
}

fs::path mask_path_for(const fs::path& image_path) {
  fs::path p = image_path;
  return p.replace_extension(".mask.png");
}

namespace {

bool is_mask_file(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.size() > 9 && name.compare(name.size() - 9, 9, ".mask.png") == 0;
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> images;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (!de.is_regular_file()) continue;
    const auto& p = de.path();
    if (p.extension() == ".png" && !is_mask_file(p)) images.push_back(p);
  }
  std::sort(images.begin(), images.end());
  return images;
}

void require_mask(const fs::path& image) {
  if (!fs::exists(mask_path_for(image))) {
    throw ManifestError("image without mask: '" + image.string() + "' (expected '" +
                        mask_path_for(image).string() + "')");
  }
}

std::string read_quality(const fs::path& dir) {
  std::ifstream is(dir / "quality.txt");
  std::string tag;
  if (is >> tag) return tag;
  return "unknown";
}

void scan_clip(const fs::path& dir, std::vector<ManifestEntry>& out) {
  struct Frame {
    int number;
    fs::path image;
  };
  std::vector<Frame> frames;
  for (const auto& img : sorted_images(dir)) {
    require_mask(img);
    int number = 0;
    try {
      size_t used = 0;
      number = std::stoi(img.stem().string(), &used);
      if (used != img.stem().string().size()) throw std::invalid_argument("suffix");
    } catch (const std::exception&) {
      throw ManifestError("clip frame name is not a frame number: '" + img.string() + "'");
    }
    frames.push_back({number, img});
  }
  std::sort(frames.begin(), frames.end(),
            [](const Frame& a, const Frame& b) { return a.number < b.number; });

  std::map<int, ManifestEntry> by_instance;
  const std::string quality = read_quality(dir);
  for (const auto& f : frames) {
    const auto labels = io::read_labels(mask_path_for(f.image));
    std::set<int> ids(labels.data(), labels.data() + labels.size());
    ids.erase(0);
    for (int id : ids) {
      auto& e = by_instance[id];
      e.instance_id = id;
      e.modality = Modality::video;
      e.quality = quality;
      e.paths.push_back(f.image.string());
      e.frames.push_back(f.number);
    }
  }
  for (auto& [id, e] : by_instance) {
    if (e.frames.size() >= 2) out.push_back(std::move(e));
  }
}

}  // namespace

Manifest build_manifest(const std::vector<fs::path>& roots) {
  Manifest m;
  for (const auto& root : roots) {
    if (!fs::is_directory(root)) throw ManifestError("not a directory: '" + root.string() + "'");
    if (fs::is_directory(root / "clips")) {
      std::vector<fs::path> clips;
      for (const auto& de : fs::directory_iterator(root / "clips")) {
        if (de.is_directory()) clips.push_back(de.path());
      }
      std::sort(clips.begin(), clips.end());
      for (const auto& c : clips) scan_clip(c, m.entries);
    }
    if (fs::is_directory(root / "stills")) {
      const std::string quality = read_quality(root / "stills");
      for (const auto& img : sorted_images(root / "stills")) {
        require_mask(img);
        ManifestEntry e;
        e.paths = {img.string()};
        e.instance_id = 1;
        e.modality = Modality::image;
        e.quality = quality;
        m.entries.push_back(std::move(e));
      }
    }
  }
  std::stable_sort(m.entries.begin(), m.entries.end(),
                   [](const ManifestEntry& a, const ManifestEntry& b) {
                     if (a.paths.front() != b.paths.front()) return a.paths.front() < b.paths.front();
                     return a.instance_id < b.instance_id;
                   });
  return m;
}

Clip load_clip(const ManifestEntry& entry) {
  if (entry.modality != Modality::video) throw InvalidArgument("load_clip: entry is not a clip");
  Clip clip;
  for (size_t i = 0; i < entry.paths.size(); ++i) {
    ClipFrame f;
    f.index = entry.frames.at(i);
    f.image = io::read_rgb(entry.paths[i]);
    const auto labels = io::read_labels(mask_path_for(entry.paths[i]));
    if (labels.rows() != f.image.height() || labels.cols() != f.image.width()) {
      throw ManifestError("mask size differs from image '" + entry.paths[i] + "'");
    }
    BinaryMask m(f.image.width(), f.image.height());
    m.data() = (labels == entry.instance_id).cast<std::uint8_t>();
    f.instances.emplace(entry.instance_id, std::move(m));
    clip.push_back(std::move(f));
  }
  return clip;
}

// ---------------------------------------------------------------------------
// BatchIterator

BatchIterator::BatchIterator(Manifest manifest, int batch_size, std::uint64_t seed,
                             PairConfig pair_cfg, TimestepSamplerConfig ts_cfg, int workers)
    : manifest_(std::move(manifest)),
      batch_size_(batch_size),
      seed_(seed),
      pair_cfg_(std::move(pair_cfg)),
      ts_cfg_(ts_cfg),
      workers_(std::max(1, workers)) {
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (manifest_.empty()) throw EmptyDatasetError("manifest has no entries");
  ts_cfg_.validate();
  pair_cfg_.shape.validate();
  pair_cfg_.augment.validate();
  reshuffle();
}

void BatchIterator::reshuffle() {
  order_.resize(manifest_.size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng(derive_seed(seed_, {0x5348554646ull, static_cast<std::uint64_t>(epoch_)}));
  // Fisher-Yates with our own index draws keeps the order independent of the
  // standard library's shuffle.
  for (size_t i = order_.size(); i > 1; --i) {
    const auto j = static_cast<size_t>(uniform_index(rng, 0, static_cast<long>(i)));
    std::swap(order_[i - 1], order_[j]);
  }
  cursor_ = 0;
}

std::shared_ptr<const BatchIterator::Loaded> BatchIterator::load(size_t entry_index) const {
  {
    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(entry_index);
    if (it != cache_.end()) return it->second;
  }
  const auto& e = manifest_.entries.at(entry_index);
  auto loaded = std::make_shared<Loaded>();
  if (e.modality == Modality::video) {
    loaded->clip = load_clip(e);
  } else {
    loaded->image = io::read_rgb(e.paths.front());
    loaded->mask = io::read_mask(mask_path_for(e.paths.front()));
  }
  std::lock_guard lock(cache_mutex_);
  return cache_.emplace(entry_index, std::move(loaded)).first->second;
}

TrainingPair BatchIterator::make_pair(size_t entry_index, Rng& rng) const {
  const auto& e = manifest_.entries.at(entry_index);
  const auto data = load(entry_index);
  if (e.modality == Modality::video) {
    return sample_video_pair(data->clip, e.instance_id, rng, pair_cfg_);
  }
  return make_image_pair(data->image, data->mask, rng, pair_cfg_);
}

Batch BatchIterator::next() {
  if (cursor_ >= order_.size()) {
    ++epoch_;
    reshuffle();
  }
  const size_t count = std::min(static_cast<size_t>(batch_size_), order_.size() - cursor_);
  const size_t start = cursor_;
  cursor_ += count;

  auto build = [this, start](size_t k) {
    const size_t pos = start + k;
    Rng rng(derive_seed(seed_, {static_cast<std::uint64_t>(epoch_), pos}));
    BatchItem item;
    item.entry_index = order_[pos];
    item.pair = make_pair(item.entry_index, rng);
    item.timestep = sample_timestep(item.pair.modality, ts_cfg_, rng);
    return item;
  };

  Batch batch(count);
  if (workers_ == 1 || count == 1) {
    for (size_t k = 0; k < count; ++k) batch[k] = build(k);
    return batch;
  }
  std::vector<std::future<void>> jobs;
  const size_t stride = static_cast<size_t>(workers_);
  for (size_t w = 0; w < stride && w < count; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (size_t k = w; k < count; k += stride) batch[k] = build(k);
    }));
  }
  for (auto& j : jobs) j.get();
  return batch;
}

}  // namespace anydoor::datapipe
