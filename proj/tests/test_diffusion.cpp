#include <doctest.h>

#include <fstream>
#include <limits>
#include <set>

#include "anydoor/diffusion.hpp"
#include "anydoor/inference.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace anydoor;
using namespace anydoor::diffusion;

namespace {

Latent latent_of(int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  return random_latent(c, h, w, rng);
}

collage::CollageInput random_collage(int side, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  collage::CollageInput c;
  c.rgb = oracle::random_image(side, side, g);
  c.shape = oracle::random_mask(side, side, 0.4, g);
  return c;
}

double max_abs(const nn::Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("schedule invariants") {
  for (auto kind : {ScheduleKind::linear, ScheduleKind::scaled_linear}) {
    for (int T : {2, 10, 100, 1000}) {
      const auto s = make_schedule(T, kind);
      REQUIRE(s.alpha.size() == size_t(T));
      CHECK(s.alpha[0] == 1.0);
      CHECK(s.sigma[0] == 0.0);
      for (int t = 0; t < T; ++t) {
        CHECK(std::abs(s.alpha[t] * s.alpha[t] + s.sigma[t] * s.sigma[t] - 1.0) < 1e-9);
        if (t > 0) {
          CHECK(s.alpha[t] <= s.alpha[t - 1]);
          CHECK(s.sigma[t] >= s.sigma[t - 1]);
        }
      }
    }
  }
  CHECK_THROWS_AS(make_schedule(1), InvalidArgument);
}

TEST_CASE("schedule matches the cumulative-product oracle") {
  const auto s = make_schedule(1000);
  for (int t : {1, 2, 250, 500, 999}) {
    const double ab = oracle::alpha_bar(1000, t);
    CHECK(s.alpha[t] == doctest::Approx(std::sqrt(ab)).epsilon(1e-12));
    CHECK(s.sigma[t] == doctest::Approx(std::sqrt(1 - ab)).epsilon(1e-12));
  }
  const auto q = make_schedule(1000, ScheduleKind::scaled_linear);
  const double ab = oracle::alpha_bar(1000, 500, 8.5e-4, 0.012, true);
  CHECK(q.alpha[500] == doctest::Approx(std::sqrt(ab)).epsilon(1e-12));
}

TEST_CASE("add_noise") {
  const auto s = make_schedule(1000);
  const auto x = latent_of(3, 4, 5, 1), eps = latent_of(3, 4, 5, 2);
  CHECK(add_noise(x, eps, 0, s).data == x.data);
  const Latent zero(3, 4, 5);
  CHECK(max_abs(add_noise(zero, eps, 300, s).data - s.sigma[300] * eps.data) == 0.0);
  const auto z = add_noise(x, eps, 500, s);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 4; ++y)
      for (int xx = 0; xx < 5; ++xx)
        CHECK(z.at(c, y, xx) ==
              doctest::Approx(s.alpha[500] * x.at(c, y, xx) + s.sigma[500] * eps.at(c, y, xx)));
  CHECK_THROWS_AS(add_noise(x, latent_of(3, 4, 4, 3), 1, s), InvalidArgument);
  CHECK_THROWS_AS(add_noise(x, eps, 1000, s), InvalidArgument);
}

TEST_CASE("training_loss") {
  const auto a = latent_of(2, 3, 3, 4), b = latent_of(2, 3, 3, 5);
  CHECK(training_loss(a, a) == 0.0);
  Latent a1 = a;
  a1.data.array() += 1.0;
  CHECK(training_loss(a1, a) == doctest::Approx(1.0).epsilon(1e-15));
  double acc = 0;
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) acc += std::pow(a.at(c, y, x) - b.at(c, y, x), 2);
  CHECK(std::abs(training_loss(a, b) - acc / 18) < 1e-8);
  CHECK_THROWS_AS(training_loss(a, latent_of(2, 3, 2, 6)), InvalidArgument);
}

TEST_CASE("pooling latent adapter") {
  const PoolingLatentAdapter ad(2);
  ImageBuffer img(4, 4, 3);
  img(0, 0, 0) = 1.0;  // one bright pixel in the first 2x2 block
  const auto z = ad.encode(img);
  CHECK(z.height == 2);
  CHECK(z.at(0, 0, 0) == doctest::Approx(2 * 0.25 - 1));
  CHECK(z.at(0, 1, 1) == -1.0);
  const auto back = ad.decode(z);
  CHECK(back(0, 1, 1) == 0.25);
  CHECK(back(0, 3, 3) == 0.0);
  CHECK_THROWS_AS(ad.encode(ImageBuffer(5, 4, 3)), InvalidArgument);
}

TEST_CASE("model parameter partition") {
  const DenoiserModel m(fixture::tiny_config());
  const auto part = m.partition();
  int frozen = 0, trainable = 0;
  std::set<ParamGroup> groups;
  for (const auto& [name, g] : part) {
    groups.insert(g);
    (DenoiserModel::frozen(g) ? frozen : trainable)++;
    CHECK(DenoiserModel::frozen(g) == (name.rfind("encoder.", 0) == 0));
  }
  CHECK(groups.size() == 4);
  CHECK(frozen > 0);
  CHECK(trainable > 0);
  CHECK(m.parameter_count() > 0);
  CHECK_THROWS_AS(m.param("nope"), InvalidArgument);
}

TEST_CASE("encode_details of a fresh model is exactly zero") {
  const DenoiserModel m(fixture::tiny_config());
  const auto col = random_collage(16, 1);
  const auto d = encode_details(col, m);
  REQUIRE(d.levels.size() == 2);
  CHECK(d.levels[0].height == 8);
  CHECK(d.levels[1].height == 4);
  CHECK(d.levels[0].channels == 6);
  CHECK(d.levels[1].channels == 12);
  for (const auto& l : d.levels) CHECK(max_abs(l.data) == 0.0);
  CHECK_THROWS_AS(encode_details(random_collage(12, 1), m), InvalidArgument);
}

TEST_CASE("encode_details is deterministic and live after training") {
  DenoiserModel m(fixture::tiny_config());
  for (auto& z : m.detail.zero_convs) z.weight.value.setConstant(0.1);
  const auto col = random_collage(16, 2);
  const auto a = encode_details(col, m), b = encode_details(col, m);
  for (size_t i = 0; i < a.levels.size(); ++i) {
    CHECK(a.levels[i].data == b.levels[i].data);
    CHECK(max_abs(a.levels[i].data) > 0);
  }
}

TEST_CASE("denoise with zero detail maps ignores the detail columns") {
  // Oracle: the decoder's detail input channels multiply all-zero maps, so
  // scrambling their weights must leave the output bit-identical.
  DenoiserModel m(fixture::tiny_config());
  const auto col = random_collage(16, 3);
  const auto details = encode_details(col, m);
  const auto tokens = id_tokens_for(col.rgb, m);
  const auto z = latent_of(3, 8, 8, 7);
  const auto before = denoise(z, 400, tokens, details, m);
  CHECK(before.same_shape(z));

  Rng rng(5);
  const auto& cfg = m.config();
  for (int i = 0; i < cfg.stages(); ++i) {
    auto& w = m.decoder.blocks[i].conv.weight.value;
    const int width = cfg.stage_width(i);
    const int k2 = 9;
    w.middleCols(2 * width * k2, width * k2) = nn::random_normal(w.rows(), width * k2, 3.0, rng);
  }
  const auto after = denoise(z, 400, tokens, details, m);
  CHECK(after.data == before.data);

  // Nonzero detail maps now change the output.
  for (auto& zc : m.detail.zero_convs) zc.weight.value.setConstant(0.05);
  const auto live = denoise(z, 400, tokens, encode_details(col, m), m);
  CHECK(max_abs(live.data - before.data) > 0);
}

TEST_CASE("denoise cross-attends to the ID tokens") {
  const DenoiserModel m(fixture::tiny_config());
  const auto col = random_collage(16, 4);
  const auto details = encode_details(col, m);
  auto tokens = id_tokens_for(col.rgb, m);
  const auto z = latent_of(3, 8, 8, 8);
  const auto a = denoise(z, 300, tokens, details, m);
  tokens.tokens.row(3).array() += 0.5;
  const auto b = denoise(z, 300, tokens, details, m);
  CHECK(max_abs(a.data - b.data) > 1e-9);

  idextract::IdTokens narrow;
  narrow.tokens = nn::Matrix::Zero(5, 7);
  CHECK_THROWS_AS(denoise(z, 300, narrow, details, m), InvalidArgument);
  CHECK_THROWS_AS(denoise(latent_of(3, 4, 4, 1), 300, tokens, details, m), InvalidArgument);
}

TEST_CASE("gradients agree with central differences") {
  DenoiserModel m(fixture::tiny_config());
  const auto sched = make_schedule(1000);
  const auto ex = prepare_example(fixture::square_pair(), m);
  fixture::warm_up(m, sched, ex, 3);
  const auto eps = latent_of(3, 8, 8, 11);
  for (const auto& g : fixture::gradient_check(m, sched, ex, 420, eps, fixture::gradient_check_names())) {
    INFO(g.name, " analytic=", g.analytic, " numeric=", g.numeric);
    CHECK(g.analytic != 0.0);
    CHECK(g.rel_error() < 1e-3);
  }
}

TEST_CASE("gradients with epsilon prediction") {
  auto cfg = fixture::tiny_config();
  cfg.prediction = Prediction::epsilon;
  DenoiserModel m(cfg);
  const auto sched = make_schedule(100);
  const auto ex = prepare_example(fixture::square_pair(2), m);
  fixture::warm_up(m, sched, ex, 2);
  const auto eps = latent_of(3, 8, 8, 12);
  for (const auto& g : fixture::gradient_check(m, sched, ex, 60, eps,
                                               {"decoder.block0.conv.weight", "detail.zero1.weight",
                                                "projector.bias"})) {
    INFO(g.name);
    CHECK(g.rel_error() < 1e-3);
  }
}

TEST_CASE("train_step updates only the trainable partition") {
  DenoiserModel m(fixture::tiny_config());
  const auto sched = make_schedule(1000);
  std::map<std::string, nn::Matrix> before;
  m.for_each_param([&](const std::string& n, ParamGroup, const nn::Param& p) { before[n] = p.value; });

  datapipe::Batch batch(2);
  batch[0].pair = fixture::square_pair(1);
  batch[0].timestep = 700;
  batch[1].pair = fixture::square_pair(2);
  batch[1].timestep = 200;
  AdamOptimizer opt(1e-3);
  Rng rng(1);
  for (int i = 0; i < 3; ++i) {
    const double loss = train_step(batch, m, sched, opt, rng);
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0);
  }
  m.for_each_param([&](const std::string& n, ParamGroup g, const nn::Param& p) {
    INFO(n);
    if (DenoiserModel::frozen(g)) {
      CHECK(p.value == before[n]);
    } else {
      CHECK(max_abs(p.value - before[n]) > 0);
    }
  });
}

TEST_CASE("train_step reports divergence") {
  DenoiserModel m(fixture::tiny_config());
  const auto sched = make_schedule(100);
  const auto ex = prepare_example(fixture::square_pair(), m);
  m.param("decoder.out_conv.bias").value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  AdamOptimizer opt;
  Rng rng(0);
  CHECK_THROWS_AS(train_step({ex}, {10}, m, sched, opt, rng), NumericalDivergence);
  CHECK_THROWS_AS(train_step({}, {}, m, sched, opt, rng), InvalidArgument);
}

TEST_CASE("sampling timesteps are a descending stride-uniform grid") {
  CHECK(sampling_timesteps(1000, 4) == std::vector<int>{999, 749, 499, 249});
  CHECK(sampling_timesteps(1000, 1) == std::vector<int>{999});
  CHECK(sampling_timesteps(10, 10) == std::vector<int>{9, 8, 7, 6, 5, 4, 3, 2, 1, 0});
  CHECK_THROWS_AS(sampling_timesteps(10, 0), InvalidArgument);
}

TEST_CASE("one-step sampling is a single decoded denoise from the seeded noise") {
  const DenoiserModel m(fixture::tiny_config());
  const auto sched = make_schedule(1000);
  const auto col = random_collage(16, 5);
  const auto tokens = id_tokens_for(col.rgb, m);
  const auto out = sample(col, tokens, m, sched, 1, 77);
  CHECK(out.width() == 16);
  CHECK(out.height() == 16);
  Rng rng(77);
  const auto z = random_latent(3, 8, 8, rng);
  const auto expect = m.adapter().decode(denoise(z, 999, tokens, encode_details(col, m), m));
  CHECK(out == expect);
}

TEST_CASE("multi-step sampling unrolls predict-then-renoise") {
  const DenoiserModel m(fixture::tiny_config());
  const auto sched = make_schedule(100);
  const auto col = random_collage(16, 6);
  const auto tokens = id_tokens_for(col.rgb, m);
  const auto details = encode_details(col, m);
  Rng rng(5);
  Latent z = random_latent(3, 8, 8, rng);
  Latent x;
  const std::vector<int> ts{99, 49};
  for (size_t k = 0; k < ts.size(); ++k) {
    x = denoise(z, ts[k], tokens, details, m);
    if (k + 1 < ts.size()) {
      const nn::Matrix eps = (z.data - sched.alpha[ts[k]] * x.data) / sched.sigma[ts[k]];
      z.data = sched.alpha[ts[k + 1]] * x.data + sched.sigma[ts[k + 1]] * eps;
    }
  }
  CHECK(sample(col, tokens, m, sched, 2, 5) == m.adapter().decode(x));
  CHECK(sample(col, tokens, m, sched, 2, 5) == sample(col, tokens, m, sched, 2, 5));
  CHECK_THROWS_AS(sample(col, tokens, m, sched, 0, 5), InvalidArgument);
}

TEST_CASE("epsilon models predict x through the schedule") {
  auto cfg = fixture::tiny_config();
  cfg.prediction = Prediction::epsilon;
  const DenoiserModel m(cfg);
  const auto sched = make_schedule(100);
  const auto col = random_collage(16, 7);
  const auto tokens = id_tokens_for(col.rgb, m);
  const auto details = encode_details(col, m);
  const auto z = latent_of(3, 8, 8, 9);
  const auto eps = denoise(z, 50, tokens, details, m);
  const auto x = predict_x(z, 50, tokens, details, m, sched);
  CHECK(max_abs(sched.alpha[50] * x.data + sched.sigma[50] * eps.data - z.data) < 1e-12);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = oracle::scratch_dir("ckpt");
  auto cfg = fixture::tiny_config();
  cfg.prediction = Prediction::epsilon;
  DenoiserModel m(cfg);
  for (auto& z : m.detail.zero_convs) z.weight.value.setConstant(0.01);
  save_checkpoint((dir / "m.ckpt").string(), m, ScheduleKind::scaled_linear, 200);

  const auto ck = read_checkpoint((dir / "m.ckpt").string());
  CHECK(ck.config == cfg);
  CHECK(ck.schedule_kind == ScheduleKind::scaled_linear);
  CHECK(ck.T == 200);
  const auto loaded = load_model(ck);
  m.for_each_param([&](const std::string& n, ParamGroup, const nn::Param& p) {
    const nn::Matrix as_float = p.value.cast<float>().cast<double>();
    CHECK(loaded.param(n).value == as_float);
  });

  // Saving the loaded model reproduces the file byte for byte.
  save_checkpoint((dir / "again.ckpt").string(), loaded, ScheduleKind::scaled_linear, 200);
  std::ifstream a(dir / "m.ckpt", std::ios::binary), b(dir / "again.ckpt", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  CHECK(sa.compare(0, 8, "ANYDCKPT") == 0);

  std::ofstream(dir / "bad.ckpt", std::ios::binary) << "NOTACKPT";
  CHECK_THROWS_AS(read_checkpoint((dir / "bad.ckpt").string()), Error);
  CHECK_THROWS_AS(read_checkpoint((dir / "missing.ckpt").string()), IoError);
}
