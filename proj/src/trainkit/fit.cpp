#include <fstream>

#include "typegan/errors.hpp"
#include "typegan/evalkit.hpp"
#include "typegan/glyphrender.hpp"
#include "typegan/trainkit.hpp"

namespace typegan {

namespace {

constexpr std::int64_t kSampleRows = 8;

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

void write_samples(Trainer& trainer, const PairDataset& data, bool with_truth, const std::filesystem::path& path) {
  const std::int64_t rows = std::min<std::int64_t>(kSampleRows, data.size());
  const Tensor src = data.src.slice_batch(0, rows);
  const Tensor tgt = data.tgt.slice_batch(0, rows);
  EvalOptions opt;
  opt.style_index = trainer.config().style_index;
  const Tensor gen = run_generator(trainer.generator(), src, Phase::Infer, opt);
  write_png(path, grid_image(src, with_truth ? &tgt : nullptr, gen));
}

}  // namespace

FitResult fit(const TrainConfig& config, const PairManifest& manifest, const FitOptions& options,
              const std::optional<Checkpoint>& resume) {
  config.validate();
  if (manifest.policy.kind != config.policy) {
    throw Error(ErrorKind::ConfigMismatch, "manifest policy " + to_string(manifest.policy.kind) +
                                               " differs from configured policy " + to_string(config.policy));
  }
  Trainer trainer(config);
  if (resume) {
    trainer.restore(*resume);
  } else if (config.warm_start) {
    trainer.warm_start(load_checkpoint(*config.warm_start));
  }

  FitResult result;
  const bool files = !options.out_dir.empty();
  std::ofstream log;
  if (files) {
    ensure_dir(options.out_dir);
    if (config.checkpoint_every > 0) ensure_dir(options.out_dir / "checkpoints");
    if (config.sample_every > 0) ensure_dir(options.out_dir / "samples");
    trainer.set_dump_path(options.out_dir / "non_finite_dump.tgck");
    const auto log_path = options.out_dir / "train_log.csv";
    const bool append = resume && std::filesystem::exists(log_path);
    log.open(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw Error(ErrorKind::IoError, "cannot write " + log_path.string());
    if (!append) log << LossReport::csv_header() << '\n';
  }

  const std::int64_t total = config.epochs == 0 ? 0 : [&] {
    const auto n = static_cast<std::int64_t>(manifest.pairs.size());
    if (n == 0) throw Error(ErrorKind::EmptyManifest, "training manifest has no pairs");
    return static_cast<std::int64_t>(config.epochs) * steps_per_epoch(n, config.batch_size);
  }();

  if (total > trainer.step()) {
    const PairDataset data = PairDataset::load(manifest, config.model.canvas);
    const std::int64_t n = data.size();
    const std::int64_t spe = steps_per_epoch(n, config.batch_size);
    std::int64_t cached_epoch = -1;
    std::vector<std::int64_t> order;
    while (trainer.step() < total) {
      if (options.stop_after_step >= 0 && trainer.step() >= options.stop_after_step) break;
      const std::int64_t s = trainer.step();
      const std::int64_t epoch = s / spe;
      if (epoch != cached_epoch) {
        order = epoch_order(n, config.seed, epoch);
        cached_epoch = epoch;
      }
      const std::int64_t first = (s % spe) * config.batch_size;
      const std::int64_t count = std::min<std::int64_t>(config.batch_size, n - first);
      const std::span<const std::int64_t> idx(order.data() + first, static_cast<std::size_t>(count));
      Tensor src = augment(data.gather_src(idx), config.augment, trainer.rng());
      Tensor tgt = augment(data.gather_tgt(idx), config.augment, trainer.rng());
      const LossReport report = trainer.train_step(src, tgt);
      result.log.push_back(report);
      if (files) log << report.csv_row() << '\n' << std::flush;
      if (options.on_step) options.on_step(trainer, report);
      if (files && config.checkpoint_every > 0 && trainer.step() % config.checkpoint_every == 0) {
        save_checkpoint(options.out_dir / "checkpoints" / ("step_" + std::to_string(trainer.step()) + ".tgck"),
                        trainer.checkpoint());
      }
      if (files && config.sample_every > 0 && trainer.step() % config.sample_every == 0) {
        write_samples(trainer, data, manifest.has_ground_truth(),
                      options.out_dir / "samples" / ("step_" + std::to_string(trainer.step()) + ".png"));
      }
    }
  }
  result.final_checkpoint = trainer.checkpoint();
  if (files) save_checkpoint(options.out_dir / "checkpoint.tgck", result.final_checkpoint);
  return result;
}

Checkpoint pretrain_encoder(const TrainConfig& config, const PairManifest& manifest, const FitOptions& options) {
  if (manifest.pairs.empty()) throw Error(ErrorKind::InsufficientCorpus, "pretraining needs at least one pair");
  if (!manifest.has_ground_truth()) {
    throw Error(ErrorKind::MissingGroundTruth, "pretraining needs a strong-policy manifest, got " +
                                                   to_string(manifest.policy.kind));
  }
  TrainConfig c = config;
  c.policy = PairKind::Strong;
  c.weights = LossWeights{0.0, 0.0, 0.0, 0.0, 1.0};
  c.warm_start.reset();
  c.freeze_encoder_steps = 0;
  return fit(c, manifest, options).final_checkpoint;
}

}  // namespace typegan
