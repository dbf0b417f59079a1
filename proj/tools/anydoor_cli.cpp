// anydoor: command-line front end (hfmap, prepare, train, teleport, eval).
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage or validation failure.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "anydoor/datapipe.hpp"
#include "anydoor/diffusion.hpp"
#include "anydoor/eval.hpp"
#include "anydoor/imageops.hpp"
#include "anydoor/inference.hpp"
#include "anydoor/png_io.hpp"
#include "anydoor/run_config.hpp"

namespace fs = std::filesystem;
using namespace anydoor;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

// Validation failures map to exit code 2, everything else to 1.
struct UsageError : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

void require_file(const std::string& what, const std::string& path) {
  if (path.empty()) throw UsageError(what + " path is required");
  if (!fs::exists(path)) throw UsageError(what + " not found: '" + path + "'");
}

std::string config_footer() {
  std::ostringstream os;
  os << "Config keys (key=value in --config files or via --set; defaults shown):\n";
  for (const auto& k : RunConfig::keys()) {
    os << "  " << std::left << std::setw(18) << k.name << std::setw(24)
       << (k.default_value.empty() ? "(unset)" : k.default_value) << k.help << "\n";
  }
  return os.str();
}

struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_file, "key=value config file")->capture_default_str();
  cmd->add_option("--set", f.overrides, "override a config key (repeatable), e.g. --set T=100");
  cmd->footer(config_footer());
}

RunConfig resolve_config(const ConfigFlags& f,
                         const std::vector<std::pair<std::string, std::string>>& flag_values) {
  RunConfig cfg = f.config_file.empty() ? RunConfig() : RunConfig::load(f.config_file);
  for (const auto& o : f.overrides) cfg.set(o);
  for (const auto& [k, v] : flag_values) {
    if (!v.empty()) cfg.set(k, v);
  }
  cfg.validate();
  return cfg;
}

struct LoadedModel {
  diffusion::DenoiserModel model;
  diffusion::NoiseSchedule schedule;
};

LoadedModel load_or_init(const RunConfig& cfg) {
  if (cfg.has("checkpoint")) {
    require_file("checkpoint", cfg.get("checkpoint"));
    const auto ck = diffusion::read_checkpoint(cfg.get("checkpoint"));
    return {diffusion::load_model(ck), diffusion::make_schedule(ck.T, ck.schedule_kind)};
  }
  return {diffusion::DenoiserModel(cfg.model_config()),
          diffusion::make_schedule(cfg.total_steps(), cfg.schedule_kind())};
}

// ---------------------------------------------------------------------------

struct HfmapArgs {
  std::string image, mask, out;
  int radius = 2;
};

int cmd_hfmap(const HfmapArgs& a) {
  require_file("image", a.image);
  require_file("mask", a.mask);
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.radius < 0) throw UsageError("--radius must be >= 0");
  const auto img = io::read_rgb(a.image);
  const auto mask = io::read_mask(a.mask);
  io::write_image(a.out, imageops::high_frequency_map(img, mask, a.radius));
  return kOk;
}

struct PrepareArgs {
  std::vector<std::string> roots;
  std::string out;
};

int cmd_prepare(const PrepareArgs& a) {
  std::vector<fs::path> roots;
  for (const auto& r : a.roots) {
    if (!fs::is_directory(r)) throw UsageError("data root not found: '" + r + "'");
    roots.emplace_back(r);
  }
  const auto manifest = datapipe::build_manifest(roots);
  manifest.save(a.out);
  std::cout << "wrote " << manifest.size() << " entries to " << a.out << "\n";
  return kOk;
}

struct TrainArgs {
  ConfigFlags cfg;
  std::string seed, manifest, steps, lr, checkpoint_out, loss_log, workers, batch_size;
};

int cmd_train(const TrainArgs& a) {
  const RunConfig cfg = resolve_config(
      a.cfg, {{"seed", a.seed}, {"manifest", a.manifest}, {"train_steps", a.steps},
              {"learning_rate", a.lr}, {"checkpoint_out", a.checkpoint_out},
              {"loss_log", a.loss_log}, {"workers", a.workers}, {"batch_size", a.batch_size}});
  const std::uint64_t seed = cfg.require_seed("train");
  if (!cfg.has("manifest")) throw UsageError("train requires a manifest");
  require_file("manifest", cfg.get("manifest"));
  auto manifest = datapipe::Manifest::load(cfg.get("manifest"));
  if (manifest.empty()) throw EmptyDatasetError("manifest has no entries");

  auto [model, sched] = load_or_init(cfg);
  if (sched.T != cfg.timestep_config().T) {
    throw UsageError("timestep sampler T differs from the model schedule T");
  }
  datapipe::BatchIterator batches(std::move(manifest), cfg.get_int("batch_size"),
                                  derive_seed(seed, {1}), cfg.pair_config(), cfg.timestep_config(),
                                  cfg.get_int("workers"));
  diffusion::AdamOptimizer opt(cfg.get_double("learning_rate"));
  Rng noise(derive_seed(seed, {2}));
  const auto cond = cfg.conditioning_config();

  std::ofstream log;
  if (cfg.has("loss_log")) {
    const fs::path p = cfg.get("loss_log");
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    log.open(p);
    if (!log) throw IoError("cannot write loss log '" + p.string() + "'");
    log << "step,loss,video_fraction\n" << std::setprecision(10);
  }
  auto video_fraction = [](const datapipe::Batch& b) {
    double v = 0;
    for (const auto& it : b) v += it.pair.modality == datapipe::Modality::video;
    return v / static_cast<double>(b.size());
  };

  const int steps = cfg.get_int("train_steps");
  const int every = cfg.get_int("checkpoint_every");
  const std::string ckpt_out = cfg.get("checkpoint_out");
  for (int step = 0; step <= steps; ++step) {
    const auto batch = batches.next();
    double loss = 0;
    if (step < steps) {
      loss = diffusion::train_step(batch, model, sched, opt, noise, cond);
    } else {
      // Final row: loss of the trained model on one more batch, no update.
      for (const auto& item : batch) {
        const auto ex = diffusion::prepare_example(item.pair, model, cond);
        const auto eps = diffusion::random_latent(ex.x.channels, ex.x.height, ex.x.width, noise);
        loss += diffusion::example_loss(ex, item.timestep, eps, model, sched) / batch.size();
      }
    }
    if (log.is_open()) log << step << ',' << loss << ',' << video_fraction(batch) << '\n';
    if (every > 0 && step > 0 && step < steps && step % every == 0 && !ckpt_out.empty()) {
      diffusion::save_checkpoint(ckpt_out + ".step" + std::to_string(step), model, sched.kind,
                                 sched.T);
    }
  }
  if (!ckpt_out.empty()) {
    const fs::path p = ckpt_out;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    diffusion::save_checkpoint(ckpt_out, model, sched.kind, sched.T);
  }
  return kOk;
}

struct TeleportArgs {
  ConfigFlags cfg;
  std::string object, mask, scene, box, shape_mask, out, seed, checkpoint, steps;
};

int cmd_teleport(const TeleportArgs& a) {
  const RunConfig cfg = resolve_config(
      a.cfg, {{"seed", a.seed}, {"checkpoint", a.checkpoint}, {"sampler_steps", a.steps}});
  const std::uint64_t seed = cfg.require_seed("teleport");
  require_file("object image", a.object);
  require_file("object mask", a.mask);
  require_file("scene image", a.scene);
  if (!a.shape_mask.empty()) require_file("shape mask", a.shape_mask);
  if (a.out.empty()) throw UsageError("--out is required");
  const Box box = parse_box(a.box);

  const auto object = io::read_rgb(a.object);
  const auto mask = io::read_mask(a.mask);
  const auto scene = io::read_rgb(a.scene);
  std::optional<BinaryMask> shape;
  if (!a.shape_mask.empty()) shape = io::read_mask(a.shape_mask);

  const auto loaded = load_or_init(cfg);
  const auto result = inference::teleport(object, mask, scene, box, shape, loaded.model,
                                          loaded.schedule, seed, cfg.teleport_config());
  io::write_image(a.out, result);
  return kOk;
}

struct EvalArgs {
  ConfigFlags cfg;
  std::string seed, objects, scenes, proposals, checkpoint, workers, run_id;
};

int cmd_eval(const EvalArgs& a) {
  const RunConfig cfg = resolve_config(
      a.cfg, {{"seed", a.seed}, {"objects", a.objects}, {"scenes", a.scenes},
              {"proposals", a.proposals}, {"checkpoint", a.checkpoint}, {"workers", a.workers},
              {"run_id", a.run_id}});
  const std::uint64_t seed = cfg.require_seed("eval");
  require_file("objects manifest", cfg.get("objects"));
  require_file("scenes manifest", cfg.get("scenes"));
  const auto objects = eval::load_objects(cfg.get("objects"));
  const auto scenes = eval::load_scenes(cfg.get("scenes"));
  if (objects.empty() || scenes.empty()) throw UsageError("benchmark manifests must be non-empty");

  const auto loaded = load_or_init(cfg);
  const std::string run_id = cfg.has("run_id") ? cfg.get("run_id") : "eval-" + std::to_string(seed);
  const fs::path run_dir = runs_directory(cfg) / run_id;

  eval::BenchmarkConfig bc;
  bc.proposals = cfg.get_int("proposals");
  bc.seed = seed;
  bc.workers = cfg.get_int("workers");
  bc.run_dir = run_dir / "images";
  bc.teleport = cfg.teleport_config();
  const auto report = eval::run_benchmark(objects, scenes, loaded.model, loaded.schedule,
                                          loaded.model.backbone(), bc);
  eval::write_report(report, run_dir);
  std::ofstream(run_dir / "config.txt") << cfg.dump();
  std::cout << "scores: " << report.scores.size() << "  failures: " << report.failures.size()
            << "  mean: " << report.mean_score << "\nreport: " << (run_dir / "report.json").string()
            << "\n";
  return report.failures.empty() ? kOk : kRuntime;
}

template <typename F>
int guarded(const char* stage, F&& f) {
  try {
    return f();
  } catch (const UsageError& e) {
    std::cerr << "anydoor " << stage << ": " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "anydoor " << stage << ": invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const ManifestError& e) {
    std::cerr << "anydoor " << stage << ": manifest: " << e.what() << "\n";
    return kUsage;
  } catch (const EmptyObjectError& e) {
    std::cerr << "anydoor " << stage << ": empty object: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "anydoor " << stage << ": " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object teleportation with a toy conditional latent diffusion model"};
  app.require_subcommand(1);

  HfmapArgs hf;
  auto* c_hf = app.add_subcommand("hfmap", "write the high-frequency map of a masked object");
  c_hf->add_option("--image", hf.image, "RGB object image (PNG)")->required();
  c_hf->add_option("--mask", hf.mask, "object mask (PNG, nonzero = object)")->required();
  c_hf->add_option("--out", hf.out, "output PNG")->required();
  c_hf->add_option("--radius", hf.radius, "mask erosion iterations")->capture_default_str();

  PrepareArgs pr;
  auto* c_pr = app.add_subcommand("prepare", "scan dataset roots into a JSON-lines manifest");
  c_pr->add_option("--data-root", pr.roots, "dataset root (repeatable)")->required();
  c_pr->add_option("--out", pr.out, "manifest output path")->required();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "train decoder, detail encoder and projector");
  add_config_flags(c_tr, tr.cfg);
  c_tr->add_option("--seed", tr.seed, "random seed (required)");
  c_tr->add_option("--manifest", tr.manifest, "training manifest");
  c_tr->add_option("--steps", tr.steps, "optimisation steps [train_steps=1000]");
  c_tr->add_option("--lr", tr.lr, "learning rate [learning_rate=1e-5]");
  c_tr->add_option("--batch-size", tr.batch_size, "batch size [batch_size=1]");
  c_tr->add_option("--checkpoint-out", tr.checkpoint_out, "checkpoint output path");
  c_tr->add_option("--loss-log", tr.loss_log, "CSV loss log (step,loss,video_fraction)");
  c_tr->add_option("--workers", tr.workers, "pair-construction threads [workers=1]");

  TeleportArgs tp;
  auto* c_tp = app.add_subcommand("teleport", "place an object into a scene box");
  add_config_flags(c_tp, tp.cfg);
  c_tp->add_option("--object", tp.object, "object image (PNG)")->required();
  c_tp->add_option("--mask", tp.mask, "object mask (PNG)")->required();
  c_tp->add_option("--scene", tp.scene, "scene image (PNG)")->required();
  c_tp->add_option("--box", tp.box, "target box x0,y0,x1,y1")->required();
  c_tp->add_option("--shape-mask", tp.shape_mask, "optional shape mask (PNG), fitted to the box");
  c_tp->add_option("--out", tp.out, "output PNG")->required();
  c_tp->add_option("--seed", tp.seed, "random seed (required)");
  c_tp->add_option("--checkpoint", tp.checkpoint, "model checkpoint (default: fresh model)");
  c_tp->add_option("--steps", tp.steps, "sampler steps [sampler_steps=4]");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "run the object x scene similarity benchmark");
  add_config_flags(c_ev, ev.cfg);
  c_ev->add_option("--seed", ev.seed, "random seed (required)");
  c_ev->add_option("--objects", ev.objects, "objects manifest (JSON lines)");
  c_ev->add_option("--scenes", ev.scenes, "scenes manifest (JSON lines)");
  c_ev->add_option("--proposals", ev.proposals, "proposals per combination [proposals=1]");
  c_ev->add_option("--checkpoint", ev.checkpoint, "model checkpoint (default: fresh model)");
  c_ev->add_option("--workers", ev.workers, "benchmark threads [workers=1]");
  c_ev->add_option("--run-id", ev.run_id, "run directory name under the runs root");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (c_hf->parsed()) return guarded("hfmap", [&] { return cmd_hfmap(hf); });
  if (c_pr->parsed()) return guarded("prepare", [&] { return cmd_prepare(pr); });
  if (c_tr->parsed()) return guarded("train", [&] { return cmd_train(tr); });
  if (c_tp->parsed()) return guarded("teleport", [&] { return cmd_teleport(tp); });
  if (c_ev->parsed()) return guarded("eval", [&] { return cmd_eval(ev); });
  return kUsage;
}
