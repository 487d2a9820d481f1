#include <fstream>

#include "mmgan/trainer.hpp"

namespace mmgan::train {

namespace {
namespace fs = std::filesystem;

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

void write_report(const fs::path& dir, const std::string& stem, const metrics::MetricsReport& r) {
  write_text(dir / (stem + ".txt"), r.to_text());
  write_text(dir / (stem + ".json"), r.to_json());
}
}  // namespace

TrainLog run(Trainer& tr, const RunOptions& opt) {
  auto& b = tr.bundle();
  const TrainConfig cfg = b.config;
  const std::size_t target = opt.until_step.value_or(tr.total_steps());
  const fs::path dir = cfg.output_dir;
  const std::size_t spe = tr.steps_per_epoch();
  const EvalOptions eval_opt{cfg.n_gen, cfg.seed};

  std::ofstream log_file;
  if (opt.write_files) {
    fs::create_directories(dir);
    write_text(dir / "config.json", cfg.to_json());
    b.vocab.save(dir / "vocab.txt");
    const fs::path log_path = dir / "train_log.csv";
    const bool fresh = !fs::exists(log_path) || fs::file_size(log_path) == 0 || b.step == 0;
    log_file.open(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log_file) throw std::runtime_error("cannot write " + log_path.string());
    if (fresh) log_file << TrainLog::kHeader << "\n";
  }

  TrainLog log;
  std::optional<metrics::MetricsReport> best;
  auto consider = [&](const metrics::MetricsReport& r) {
    if (!best || r.fid < best->fid) best = r;
  };
  while (b.step < target) {
    TrainRecord rec;
    try {
      rec = tr.step();
    } catch (const TrainingDiverged& e) {
      // The bundle is still the last good state.
      if (opt.write_files) {
        save_checkpoint(b, dir / "last.ckpt");
        write_text(dir / "diverged.txt", std::string(e.what()) + "\n");
      }
      throw;
    }
    log.records.push_back(rec);
    if (log_file) log_file << TrainLog::csv_row(rec) << "\n" << std::flush;
    if (opt.on_step) opt.on_step(rec);
    if (!opt.write_files) continue;
    if (cfg.checkpoint_every > 0 && b.step % cfg.checkpoint_every == 0) save_checkpoint(b, dir / "last.ckpt");
    if (cfg.eval_every_epochs > 0 && b.step % (spe * cfg.eval_every_epochs) == 0) {
      const auto r = evaluate(b, tr.data(), eval_opt);
      write_report(dir, "metrics_epoch" + std::to_string(b.step / spe), r);
      consider(r);
    }
  }
  if (opt.write_files) {
    save_checkpoint(b, dir / "last.ckpt");
    save_checkpoint(b, dir / "final.ckpt");
    const auto last = evaluate(b, tr.data(), eval_opt);
    write_report(dir, "metrics_last", last);
    consider(last);
    write_report(dir, "metrics_best", *best);
  }
  return log;
}

}  // namespace mmgan::train
