#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>

#include "mmgan/checkpoint.hpp"
#include "mmgan/gradcheck_suite.hpp"
#include "mmgan/trainer.hpp"

namespace fs = std::filesystem;
using namespace mmgan;

namespace {

// One --<key> flag per TrainConfig field; applied after --config.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file whose keys are TrainConfig field names");
    for (const auto& key : TrainConfig::keys()) app->add_option("--" + key, values[key], "override " + key);
  }

  TrainConfig resolve(TrainConfig base = {}) const {
    TrainConfig c = config_path.empty() ? base : TrainConfig::load(config_path, base);
    for (const auto& [k, v] : values)
      if (!v.empty()) c.set(k, v);
    c.validate();
    return c;
  }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

int cmd_synth(const fs::path& out, const TrainConfig& cfg) {
  const auto samples = data::synth_dataset(cfg.dataset_spec());
  fs::create_directories(out);
  data::save_manifest(samples, out / "manifest.tsv");
  enc::Vocabulary(data::caption_vocabulary(cfg.dataset_spec()), cfg.arch.max_caption_len).save(out / "vocab.txt");
  std::cout << "wrote " << samples.size() << " samples to " << (out / "manifest.tsv").string() << "\n";
  return 0;
}

// Keys a resumed run may change; everything else must match the checkpoint.
const std::set<std::string> kResumable{"max_steps", "epochs", "output_dir", "checkpoint_every", "eval_every_epochs",
                                       "n_gen"};

int cmd_train(const ConfigFlags& flags, const std::string& resume, bool quiet) {
  train::Trainer tr = [&] {
    if (resume.empty()) return train::Trainer::fresh(flags.resolve());
    ModelBundle b = load_checkpoint(resume);
    const TrainConfig next = flags.resolve(b.config);
    const auto before = nlohmann::json::parse(b.config.to_json()), after = nlohmann::json::parse(next.to_json());
    for (const auto& [key, value] : after.items())
      if (value != before.at(key) && !kResumable.count(key))
        throw std::invalid_argument("--resume cannot change " + key);
    b.config = next;
    auto samples = train::load_dataset(b.config);
    return train::Trainer(std::move(b), std::move(samples));
  }();
  std::cout << "training " << tr.total_steps() << " steps (" << tr.steps_per_epoch() << " per epoch) from step "
            << tr.bundle().step << " into " << tr.bundle().config.output_dir << "\n";
  train::RunOptions opt;
  if (!quiet)
    opt.on_step = [&](const train::TrainRecord& r) {
      if ((r.step + 1) % 50 == 0 || r.step == 0)
        std::printf("step %6llu  d_loss %.4f  g_loss %.4f  adv %.4f  txt %.4f  style %.6f  (%.0f ms)\n",
                    static_cast<unsigned long long>(r.step + 1), r.d_loss, r.g_loss, r.eq1_value, r.l_txt_img,
                    r.l_style, r.wall_ms);
    };
  try {
    train::run(tr, opt);
  } catch (const train::TrainingDiverged& e) {
    std::cerr << e.what() << "; last good checkpoint kept in " << tr.bundle().config.output_dir << "\n";
    return 3;
  }
  const fs::path dir = tr.bundle().config.output_dir;
  std::cout << "final checkpoint " << (dir / "final.ckpt").string() << "\n";
  std::ifstream in(dir / "metrics_last.txt");
  std::cout << in.rdbuf();
  return 0;
}

int cmd_eval(const std::string& ckpt, std::size_t n_gen, std::uint64_t seed, const std::string& out_stem) {
  const ModelBundle b = load_checkpoint(ckpt);
  const auto data = train::TrainingData::build(b, train::load_dataset(b.config));
  const auto r = train::evaluate(b, data, {n_gen == 0 ? b.config.n_gen : n_gen, seed});
  std::cout << r.to_text();
  if (!out_stem.empty()) {
    write_text(out_stem + ".txt", r.to_text());
    write_text(out_stem + ".json", r.to_json());
  }
  return 0;
}

int cmd_generate(const std::string& ckpt, const std::string& caption, const std::string& style_ref, int style_id,
                 std::size_t count, std::uint64_t seed, const fs::path& out) {
  const ModelBundle b = load_checkpoint(ckpt);
  Tensor ref;
  if (!style_ref.empty()) {
    ref = data::read_png(style_ref);
  } else {
    if (style_id < 0) throw CLI::ValidationError("generate", "one of --style-ref or --style-id is required");
    // First training sample of the requested style.
    const auto data = train::TrainingData::build(b, train::load_dataset(b.config));
    auto it = data.train_by_style.find(static_cast<std::size_t>(style_id));
    if (it == data.train_by_style.end()) throw std::invalid_argument("no training sample has style id " + std::to_string(style_id));
    ref = data.samples[it->second.front()].image;
  }
  const auto images = train::generate_images(b, caption, ref, count, seed);
  fs::create_directories(out);
  data::write_png(out / "grid.png", train::tile_grid(images));
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03zu.png", i);
    data::write_png(out / name, images[i]);
  }
  std::cout << "wrote " << images.size() << " images and grid.png to " << out.string() << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& only, const std::string& corrupt, bool list) {
  if (list) {
    for (const auto& e : train::gradcheck_entries()) std::cout << e.name << "\n";
    return 0;
  }
  if (!corrupt.empty()) debug::corrupt_backward(corrupt);
  const auto results = train::run_gradcheck(only);
  if (results.empty()) {
    std::cerr << "no gradcheck entry matches '" << only << "'\n";
    return 2;
  }
  bool ok = true;
  std::printf("%-44s %12s  %s\n", "entry", "max_rel_err", "status");
  for (const auto& r : results) {
    std::printf("%-44s %12.3e  %s\n", r.name.c_str(), r.error, r.pass ? "pass" : "FAIL");
    ok = ok && r.pass;
  }
  std::printf("%zu entries, %s (tolerance 1e-4)\n", results.size(), ok ? "all pass" : "FAILURES");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text, image and style conditioned GAN at desk scale"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-data", "Write the procedural dataset as PNGs plus a manifest");
  std::string synth_out = "data";
  synth->add_option("--out", synth_out, "output directory")->capture_default_str();
  ConfigFlags synth_flags;
  synth_flags.add_to(synth);

  auto* trainc = app.add_subcommand("train", "Alternating D/G training with checkpoints, logs and reports");
  ConfigFlags train_flags;
  train_flags.add_to(trainc);
  std::string resume;
  bool quiet = false;
  trainc->add_option("--resume", resume, "continue from a checkpoint");
  trainc->add_flag("--quiet", quiet, "no per-step progress");

  auto* evalc = app.add_subcommand("eval", "Metrics report for a checkpoint");
  std::string eval_ckpt, eval_out;
  std::size_t eval_n = 0;
  std::uint64_t eval_seed = 0;
  evalc->add_option("--checkpoint", eval_ckpt)->required();
  evalc->add_option("--n_gen", eval_n, "generated sample count (default: checkpoint config)");
  evalc->add_option("--seed", eval_seed)->capture_default_str();
  evalc->add_option("--out", eval_out, "write <out>.txt and <out>.json");

  auto* gen = app.add_subcommand("generate", "Images for one caption and style reference");
  std::string gen_ckpt, caption, style_ref, gen_out = "generated";
  int style_id = -1;
  std::size_t count = 16;
  std::uint64_t gen_seed = 0;
  gen->add_option("--checkpoint", gen_ckpt)->required();
  gen->add_option("--caption", caption)->required();
  gen->add_option("--style-ref", style_ref, "PNG style reference");
  gen->add_option("--style-id", style_id, "use a training image of this style id");
  gen->add_option("--count", count)->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out)->capture_default_str();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op and loss");
  std::string only, corrupt;
  bool list = false;
  gc->add_option("--only", only, "run entries whose name contains this");
  gc->add_flag("--list", list, "list entry names");
  gc->add_option("--corrupt-backward", corrupt)->group("");  // test fixture

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(synth_out, synth_flags.resolve());
    if (*trainc) return cmd_train(train_flags, resume, quiet);
    if (*evalc) return cmd_eval(eval_ckpt, eval_n, eval_seed, eval_out);
    if (*gen) return cmd_generate(gen_ckpt, caption, style_ref, style_id, count, gen_seed, gen_out);
    if (*gc) return cmd_gradcheck(only, corrupt, list);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
