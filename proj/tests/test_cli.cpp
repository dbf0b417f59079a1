#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "anydoor/imageops.hpp"
#include "anydoor/png_io.hpp"
#include "anydoor/run_config.hpp"
#include "cli_runner.hpp"
#include "oracles.hpp"

using namespace anydoor;
namespace fs = std::filesystem;

TEST_CASE("run config parsing") {
  const auto cfg = RunConfig::parse(
      "# comment line\n"
      "seed = 12   # trailing comment\n"
      "\n"
      "T=600\n"
      "channel_mult = 1, 2\n");
  CHECK(cfg.get_u64("seed") == 12);
  CHECK(cfg.get_int("T") == 600);
  CHECK(cfg.model_config().channel_mult == std::vector<int>{1, 2});
  CHECK(cfg.get("runs_dir") == "runs");
  CHECK_NOTHROW(cfg.validate());

  CHECK_THROWS_AS(RunConfig::parse("bogus = 1\n"), InvalidArgument);
  CHECK_THROWS_AS(RunConfig::parse("seed 12\n"), InvalidArgument);
  CHECK_THROWS_AS(RunConfig::parse("T = ten\n").validate(), InvalidArgument);
  CHECK_THROWS_AS(RunConfig::parse("prediction = v\n").validate(), InvalidArgument);
  CHECK_THROWS_AS(RunConfig().require_seed("train"), InvalidArgument);
  try {
    RunConfig::parse("seed = 1\nnope = 2\n");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("runs directory honours the environment override") {
  RunConfig cfg;
  cfg.set("runs_dir", "somewhere");
  ::unsetenv("ANYDOOR_RUNS");
  CHECK(runs_directory(cfg) == fs::path("somewhere"));
  ::setenv("ANYDOOR_RUNS", "/tmp/elsewhere", 1);
  CHECK(runs_directory(cfg) == fs::path("/tmp/elsewhere"));
  ::unsetenv("ANYDOOR_RUNS");
}

TEST_CASE("cli help and usage errors") {
  const auto help = cli::run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("teleport") != std::string::npos);
  const auto thelp = cli::run({"train", "--help"});
  CHECK(thelp.code == 0);
  CHECK(thelp.out.find("learning_rate") != std::string::npos);
  CHECK(thelp.out.find("1e-5") != std::string::npos);
  CHECK(cli::run({"no-such-command"}).code == 2);
  CHECK(cli::run({"hfmap", "--image", "x.png"}).code == 2);
}

TEST_CASE("cli hfmap matches the library bit for bit") {
  const auto dir = oracle::scratch_dir("cli_hfmap");
  std::mt19937_64 g(1);
  const auto img = oracle::random_image(20, 18, g);
  const auto mask = oracle::random_mask(20, 18, 0.6, g);
  io::write_image(dir / "obj.png", img);
  io::write_mask(dir / "obj.mask.png", mask);
  const auto r = cli::run({"hfmap", "--image", (dir / "obj.png").string(), "--mask",
                           (dir / "obj.mask.png").string(), "--out", (dir / "hf.png").string()});
  REQUIRE_MESSAGE(r.code == 0, r.out);
  const auto lib = imageops::high_frequency_map(io::read_rgb(dir / "obj.png"),
                                                io::read_mask(dir / "obj.mask.png"), 2);
  io::write_image(dir / "lib.png", lib);
  CHECK(cli::file_bytes(dir / "hf.png") == cli::file_bytes(dir / "lib.png"));

  const auto missing = (dir / "absent.mask.png").string();
  const auto bad = cli::run({"hfmap", "--image", (dir / "obj.png").string(), "--mask", missing,
                             "--out", (dir / "x.png").string()});
  CHECK(bad.code == 2);
  CHECK(bad.out.find(missing) != std::string::npos);
}

TEST_CASE("cli seed is mandatory") {
  const auto dir = oracle::scratch_dir("cli_seed");
  std::mt19937_64 g(2);
  io::write_image(dir / "o.png", oracle::random_image(12, 12, g));
  io::write_mask(dir / "o.mask.png", BinaryMask(12, 12, true));
  io::write_image(dir / "s.png", oracle::random_image(24, 24, g));
  const auto r = cli::run({"teleport", "--object", (dir / "o.png").string(), "--mask",
                           (dir / "o.mask.png").string(), "--scene", (dir / "s.png").string(),
                           "--box", "4,4,12,12", "--out", (dir / "out.png").string()});
  CHECK(r.code == 2);
  CHECK(r.out.find("seed") != std::string::npos);
  CHECK(!fs::exists(dir / "out.png"));
  CHECK(cli::run({"train", "--steps", "1"}).code == 2);
  CHECK(cli::run({"eval"}).code == 2);
}

TEST_CASE("cli teleport is deterministic per seed") {
  const auto dir = oracle::scratch_dir("cli_teleport");
  std::ofstream(dir / "small.cfg") << cli::small_config();
  std::mt19937_64 g(3);
  io::write_image(dir / "o.png", oracle::random_image(14, 14, g));
  io::write_mask(dir / "o.mask.png", oracle::box_mask(14, 14, Box{2, 3, 12, 11}));
  io::write_image(dir / "s.png", oracle::random_image(30, 26, g));
  auto go = [&](const std::string& seed, const std::string& out,
                const std::string& box = "5,6,15,18") {
    return cli::run({"teleport", "--config", (dir / "small.cfg").string(), "--object",
                     (dir / "o.png").string(), "--mask", (dir / "o.mask.png").string(), "--scene",
                     (dir / "s.png").string(), "--box", box, "--seed", seed, "--out",
                     (dir / out).string()});
  };
  REQUIRE(go("7", "a.png").code == 0);
  REQUIRE(go("7", "b.png").code == 0);
  REQUIRE(go("8", "c.png").code == 0);
  CHECK(cli::file_bytes(dir / "a.png") == cli::file_bytes(dir / "b.png"));
  CHECK(cli::file_bytes(dir / "a.png") != cli::file_bytes(dir / "c.png"));
  CHECK(io::read_rgb(dir / "a.png").width() == 30);

  const auto bad_box = go("7", "d.png", "5,6,45,18");
  CHECK(bad_box.code == 2);
}

TEST_CASE("cli prepare, train and eval") {
  const auto dir = oracle::scratch_dir("cli_pipeline");
  std::ofstream(dir / "small.cfg") << cli::small_config();
  const auto data = dir / "data";
  oracle::write_clip(data, "sq", oracle::moving_square_clip(24, 24, 5, 6, 7, 3, 2));
  std::mt19937_64 g(4);
  oracle::write_still(data, "blob", oracle::random_image(20, 20, g),
                      oracle::box_mask(20, 20, Box{4, 5, 14, 16}));

  const auto prep = cli::run({"prepare", "--data-root", data.string(), "--out",
                              (dir / "manifest.jsonl").string()});
  REQUIRE_MESSAGE(prep.code == 0, prep.out);
  CHECK(prep.out.find("2 entries") != std::string::npos);

  const auto tr = cli::run({"train", "--config", (dir / "small.cfg").string(), "--seed", "3",
                            "--manifest", (dir / "manifest.jsonl").string(), "--steps", "4",
                            "--lr", "1e-3", "--checkpoint-out", (dir / "model.ckpt").string(),
                            "--loss-log", (dir / "loss.csv").string()});
  REQUIRE_MESSAGE(tr.code == 0, tr.out);
  CHECK(fs::exists(dir / "model.ckpt"));
  std::ifstream log(dir / "loss.csv");
  std::string line;
  int rows = 0;
  std::getline(log, line);
  CHECK(line == "step,loss,video_fraction");
  while (std::getline(log, line)) ++rows;
  CHECK(rows == 5);

  const auto bench = dir / "bench";
  fs::create_directories(bench);
  io::write_image(bench / "o.png", oracle::random_image(12, 12, g));
  io::write_mask(bench / "o.mask.png", oracle::box_mask(12, 12, Box{2, 2, 10, 10}));
  io::write_image(bench / "s.png", oracle::random_image(24, 24, g));
  std::ofstream(bench / "objects.jsonl") << R"({"name":"o","image":"o.png","mask":"o.mask.png"})" << "\n";
  std::ofstream(bench / "scenes.jsonl") << R"({"name":"s","image":"s.png","box":[4,4,14,16]})" << "\n";
  const auto runs = dir / "runs";
  const auto ev = cli::run({"eval", "--config", (dir / "small.cfg").string(), "--seed", "5",
                            "--checkpoint", (dir / "model.ckpt").string(), "--objects",
                            (bench / "objects.jsonl").string(), "--scenes",
                            (bench / "scenes.jsonl").string(), "--run-id", "one"},
                           "ANYDOOR_RUNS=" + cli::quote(runs.string()));
  REQUIRE_MESSAGE(ev.code == 0, ev.out);
  std::ifstream is(runs / "one" / "report.json");
  const auto j = nlohmann::json::parse(is);
  CHECK(j["score_count"] == 1);
  CHECK(j["scores"].size() == 1);
  CHECK(fs::exists(runs / "one" / "summary.csv"));
}
