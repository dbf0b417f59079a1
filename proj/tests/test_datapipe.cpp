#include <doctest.h>

#include <fstream>
#include <set>

#include "anydoor/datapipe.hpp"
#include "anydoor/imageops.hpp"
#include "oracles.hpp"

using namespace anydoor;
using namespace anydoor::datapipe;
namespace fs = std::filesystem;

namespace {

PairConfig no_pad() {
  PairConfig cfg;
  cfg.max_box_pad = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("sample_video_pair on the moving-square clip") {
  const auto clip = oracle::moving_square_clip(16, 16, 3, 4, 3, 2, 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto pair = sample_video_pair(clip, 1, rng);
    CHECK(pair.modality == Modality::video);
    CHECK(pair.source_frame != pair.target_frame);
    const auto& src = clip[pair.source_frame];
    const auto& dst = clip[pair.target_frame];

    // Object crop holds exactly the square from the source frame.
    const Box sq = imageops::bounding_box(src.instances.at(1));
    CHECK(pair.object_mask == BinaryMask(3, 3, true));
    CHECK(pair.object_img == imageops::crop(src.image, sq));

    // Target: padded box around the destination square, hollowed.
    const Box tight = imageops::bounding_box(dst.instances.at(1));
    CHECK(pair.box.contains(tight));
    CHECK(pair.ground_truth == dst.image);
    CHECK(pair.scene == collage::hollow_box(dst.image, pair.box));
    CHECK(pair.shape_mask.width() == pair.box.width());
    CHECK_NOTHROW(check_pair(pair));
  }
}

TEST_CASE("sample_video_pair draws both frame orders") {
  const auto clip = oracle::moving_square_clip(16, 16, 3, 4, 3, 2, 1);
  std::set<std::pair<int, int>> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const auto p = sample_video_pair(clip, 1, rng);
    seen.insert({p.source_frame, p.target_frame});
  }
  CHECK(seen.size() == 2);
}

TEST_CASE("sample_video_pair without padding hollows exactly the square") {
  const auto clip = oracle::moving_square_clip(16, 16, 3, 4, 3, 2, 1);
  Rng rng(3);
  const auto pair = sample_video_pair(clip, 1, rng, no_pad());
  CHECK(pair.box == imageops::bounding_box(clip[pair.target_frame].instances.at(1)));
}

TEST_CASE("sample_video_pair needs two frames") {
  auto clip = oracle::moving_square_clip(16, 16, 3, 4, 3, 2, 1);
  clip.pop_back();
  Rng rng(0);
  CHECK_THROWS_AS(sample_video_pair(clip, 1, rng), InsufficientFramesError);
  auto two = oracle::moving_square_clip(16, 16, 3, 4, 3, 2, 1);
  two[1].instances[1] = BinaryMask(16, 16);
  CHECK_THROWS_AS(sample_video_pair(two, 1, rng), InsufficientFramesError);
  CHECK_THROWS_AS(sample_video_pair(two, 9, rng), InsufficientFramesError);
}

TEST_CASE("make_image_pair identity augmentation") {
  std::mt19937_64 g(1);
  const auto img = oracle::random_image(20, 18, g);
  const auto mask = oracle::box_mask(20, 18, Box{4, 5, 11, 14});
  PairConfig cfg;
  cfg.augment = AugmentConfig::identity();
  Rng rng(7);
  const auto pair = make_image_pair(img, mask, rng, cfg);
  const auto crop = imageops::center_crop_object(img, mask, 0.0);
  CHECK(pair.object_img == crop.image);
  CHECK(pair.object_mask == crop.mask);
  CHECK(pair.modality == Modality::image);
  CHECK(pair.ground_truth == img);
  CHECK_NOTHROW(check_pair(pair));
}

TEST_CASE("make_image_pair flip matches a mirror oracle") {
  std::mt19937_64 g(2);
  const auto img = oracle::random_image(20, 18, g);
  auto mask = oracle::box_mask(20, 18, Box{4, 5, 11, 12});
  mask(5, 4) = 0;  // break the symmetry
  PairConfig cfg;
  cfg.augment = {1.0, 0.0, 1.0, 1.0};
  Rng rng(9);
  const auto pair = make_image_pair(img, mask, rng, cfg);
  const auto crop = imageops::center_crop_object(img, mask, 0.0);
  const int w = crop.image.width();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < crop.image.height(); ++y)
      for (int x = 0; x < w; ++x) CHECK(pair.object_img(c, y, x) == crop.image(c, y, w - 1 - x));
  for (int y = 0; y < crop.mask.height(); ++y)
    for (int x = 0; x < w; ++x) CHECK(pair.object_mask(y, x) == crop.mask(y, w - 1 - x));
}

TEST_CASE("make_image_pair contract holds under random augmentation") {
  std::mt19937_64 g(3);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto img = oracle::random_image(24, 24, g);
    const auto mask = oracle::box_mask(24, 24, Box{6, 5, 16, 19});
    Rng rng(s);
    const auto pair = make_image_pair(img, mask, rng);
    CHECK_NOTHROW(check_pair(pair));
    CHECK(pair.object_mask.any());
  }
  Rng rng(0);
  CHECK_THROWS_AS(make_image_pair(ImageBuffer(5, 5, 3), BinaryMask(5, 5), rng), EmptyObjectError);
}

TEST_CASE("sample_timestep favours the modality's half") {
  const TimestepSamplerConfig cfg;
  CHECK(cfg.favored_mass() == doctest::Approx(0.75));
  for (auto mod : {Modality::video, Modality::image}) {
    Rng rng(mod == Modality::video ? 1 : 2);
    int upper = 0, lo = 1000, hi = -1;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const int t = sample_timestep(mod, cfg, rng);
      lo = std::min(lo, t);
      hi = std::max(hi, t);
      upper += t >= 500;
    }
    CHECK(lo >= 0);
    CHECK(hi < 1000);
    const double favored = mod == Modality::video ? double(upper) / n : 1.0 - double(upper) / n;
    CHECK(std::abs(favored - 0.75) <= 0.01);
  }
}

TEST_CASE("sample_timestep is uniform within each half") {
  const TimestepSamplerConfig cfg{10, 0.5, 5};
  Rng rng(3);
  std::vector<int> hist(10, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++hist[sample_timestep(Modality::video, cfg, rng)];
  for (int t = 0; t < 10; ++t) {
    const double expect = (t >= 5 ? 0.75 : 0.25) / 5.0;
    CHECK(std::abs(double(hist[t]) / n - expect) < 0.005);
  }
  CHECK_THROWS_AS(sample_timestep(Modality::image, TimestepSamplerConfig{10, 0.5, 10}, rng),
                  InvalidArgument);
}

TEST_CASE("build_manifest on an empty directory") {
  const auto dir = oracle::scratch_dir("manifest_empty");
  CHECK(build_manifest({dir}).empty());
}

TEST_CASE("build_manifest on two clips and a still") {
  const auto dir = oracle::scratch_dir("manifest_two");
  oracle::write_clip(dir, "b_clip", oracle::moving_square_clip(12, 12, 2, 2, 3, 2, 1));
  oracle::write_clip(dir, "a_clip", oracle::moving_square_clip(12, 12, 5, 5, 3, -1, 2));
  std::mt19937_64 g(4);
  oracle::write_still(dir, "s0", oracle::random_image(10, 10, g),
                      oracle::box_mask(10, 10, Box{2, 2, 6, 7}));
  std::ofstream(dir / "stills" / "quality.txt") << "high\n";

  const auto m = build_manifest({dir});
  REQUIRE(m.size() == 3);
  CHECK(m.entries[0].paths.front() < m.entries[1].paths.front());
  CHECK(m.entries[0].paths.front().find("a_clip") != std::string::npos);
  CHECK(m.entries[0].modality == Modality::video);
  CHECK(m.entries[0].frames == std::vector<int>{0, 1});
  CHECK(m.entries[2].modality == Modality::image);
  CHECK(m.entries[2].quality == "high");
  CHECK(m.entries[0].quality == "unknown");

  // JSON-lines round trip and reload.
  CHECK(Manifest::from_jsonl(m.to_jsonl()).entries == m.entries);
  m.save(dir / "m.jsonl");
  CHECK(Manifest::load(dir / "m.jsonl").entries == m.entries);

  // Clip loads back the instance masks.
  const auto clip = load_clip(m.entries[0]);
  REQUIRE(clip.size() == 2);
  CHECK(clip[1].instances.at(1) == oracle::box_mask(12, 12, Box{4, 7, 7, 10}));
}

TEST_CASE("build_manifest splits instances of a label map") {
  const auto dir = oracle::scratch_dir("manifest_multi");
  auto clip = oracle::moving_square_clip(16, 16, 1, 1, 3, 1, 0);
  clip[0].instances[2] = oracle::box_mask(16, 16, Box{10, 10, 13, 13});
  clip[1].instances[2] = oracle::box_mask(16, 16, Box{11, 10, 14, 13});
  clip[1].instances[3] = oracle::box_mask(16, 16, Box{0, 12, 2, 14});  // one frame only
  oracle::write_clip(dir, "c", clip);
  const auto m = build_manifest({dir});
  REQUIRE(m.size() == 2);
  CHECK(m.entries[0].instance_id == 1);
  CHECK(m.entries[1].instance_id == 2);
}

TEST_CASE("build_manifest names an orphan image") {
  const auto dir = oracle::scratch_dir("manifest_orphan");
  std::mt19937_64 g(5);
  fs::create_directories(dir / "stills");
  io::write_image(dir / "stills" / "lonely.png", oracle::random_image(4, 4, g));
  try {
    build_manifest({dir});
    FAIL("expected ManifestError");
  } catch (const ManifestError& e) {
    CHECK(std::string(e.what()).find("lonely.png") != std::string::npos);
  }
}

TEST_CASE("Manifest::load rejects missing files and bad lines") {
  const auto dir = oracle::scratch_dir("manifest_bad");
  std::ofstream(dir / "gone.jsonl")
      << R"({"paths":["/nonexistent/x.png"],"instance_id":1,"frames":[],"modality":"image","quality":"unknown"})"
      << "\n";
  CHECK_THROWS_AS(Manifest::load(dir / "gone.jsonl"), ManifestError);
  CHECK_THROWS_AS(Manifest::from_jsonl("{not json}\n"), ManifestError);
  CHECK_THROWS_AS(Manifest::from_jsonl(R"({"paths":["a"],"instance_id":1,"frames":[],"modality":"audio"})"),
                  ManifestError);
}

namespace {

Manifest mixed_fixture(const fs::path& dir) {
  std::mt19937_64 g(6);
  for (int i = 0; i < 3; ++i) {
    oracle::write_clip(dir, "clip" + std::to_string(i),
                       oracle::moving_square_clip(16, 16, 2 + i, 3, 4, 2, 1));
  }
  for (int i = 0; i < 5; ++i) {
    oracle::write_still(dir, "still" + std::to_string(i), oracle::random_image(16, 16, g),
                        oracle::box_mask(16, 16, Box{3, 3 + i, 10, 12}));
  }
  return build_manifest({dir});
}

std::vector<size_t> epoch_order(BatchIterator& it, size_t n) {
  std::vector<size_t> order;
  while (order.size() < n) {
    for (const auto& item : it.next()) order.push_back(item.entry_index);
  }
  return order;
}

}  // namespace

TEST_CASE("BatchIterator is a seeded per-epoch permutation") {
  const auto dir = oracle::scratch_dir("batches");
  const auto m = mixed_fixture(dir);
  REQUIRE(m.size() == 8);

  BatchIterator a(m, 3, 11), b(m, 3, 11);
  for (int step = 0; step < 9; ++step) {
    const auto ba = a.next(), bb = b.next();
    REQUIRE(ba.size() == bb.size());
    for (size_t k = 0; k < ba.size(); ++k) {
      CHECK(ba[k].entry_index == bb[k].entry_index);
      CHECK(ba[k].timestep == bb[k].timestep);
      CHECK(ba[k].pair.scene == bb[k].pair.scene);
      CHECK(ba[k].pair.object_img == bb[k].pair.object_img);
    }
  }

  BatchIterator c(m, 3, 11);
  const auto e0 = epoch_order(c, 8);
  const auto e1 = epoch_order(c, 8);
  for (const auto* e : {&e0, &e1}) {
    std::vector<size_t> sorted = *e;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < 8; ++i) CHECK(sorted[i] == i);
  }
  CHECK(e0 != e1);
}

TEST_CASE("BatchIterator batches never straddle epochs") {
  const auto dir = oracle::scratch_dir("batches_sizes");
  const auto m = mixed_fixture(dir);
  BatchIterator it(m, 3, 1);
  std::vector<size_t> sizes;
  for (int i = 0; i < 6; ++i) sizes.push_back(it.next().size());
  CHECK(sizes == std::vector<size_t>{3, 3, 2, 3, 3, 2});
}

TEST_CASE("BatchIterator modality mix matches the manifest") {
  const auto dir = oracle::scratch_dir("batches_mix");
  const auto m = mixed_fixture(dir);
  BatchIterator it(m, 2, 5);
  int video = 0, image = 0;
  for (int i = 0; i < 4; ++i) {
    for (const auto& item : it.next()) {
      (item.pair.modality == Modality::video ? video : image)++;
      CHECK(item.pair.modality == m.entries[item.entry_index].modality);
      CHECK_NOTHROW(check_pair(item.pair));
    }
  }
  CHECK(video == 3);
  CHECK(image == 5);
}

TEST_CASE("BatchIterator content does not depend on the worker count") {
  const auto dir = oracle::scratch_dir("batches_workers");
  const auto m = mixed_fixture(dir);
  BatchIterator one(m, 4, 21, {}, {}, 1), many(m, 4, 21, {}, {}, 3);
  for (int i = 0; i < 4; ++i) {
    const auto a = one.next(), b = many.next();
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].entry_index == b[k].entry_index);
      CHECK(a[k].timestep == b[k].timestep);
      CHECK(a[k].pair.scene == b[k].pair.scene);
      CHECK(a[k].pair.shape_mask == b[k].pair.shape_mask);
    }
  }
}

TEST_CASE("BatchIterator rejects an empty manifest") {
  CHECK_THROWS_AS(BatchIterator(Manifest{}, 1, 0), EmptyDatasetError);
}
