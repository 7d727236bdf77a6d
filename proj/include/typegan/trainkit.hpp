#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "typegan/checkpoint.hpp"
#include "typegan/losses.hpp"
#include "typegan/netarch.hpp"
#include "typegan/pairset.hpp"

namespace typegan {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct AugmentConfig {
  bool enabled = false;
  int max_shift_px = 8;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double fill = 1.0;

  /// Defaults with the shift scaled from 8 px at a 256 canvas.
  static AugmentConfig for_canvas(int canvas);
  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

struct TrainConfig {
  ModelSpec model;
  int batch_size = 16;
  int epochs = 100;
  AdamConfig adam;
  PairKind policy = PairKind::Strong;
  LossWeights weights;
  AugmentConfig augment;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> warm_start;
  std::int64_t freeze_encoder_steps = 0;
  bool const_stop_grad = false;
  int style_index = 0;
  std::int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::int64_t sample_every = 0;      // 0 disables periodic sample grids

  /// Desk-scale defaults: micro model, learning rate 1e-3.
  static TrainConfig micro(int canvas = 32, int base_channels = 4);

  /// Rejects w_l2 > 0 unless the policy is Strong, among other checks.
  void validate() const;

  /// Fields that determine the loss trajectory. Epoch count, cadence of side
  /// outputs and the warm-start path are excluded.
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  std::string config_hash() const;
};

/// Adaptive-moment optimizer with per-tensor step counts.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Updates every trainable tensor that currently requires a gradient.
  void step(ParamStore& params);

  void save(const std::string& prefix, std::map<std::string, Tensor>& out) const;
  void load(const std::string& prefix, const std::map<std::string, Tensor>& in);

  const AdamConfig& config() const { return cfg_; }

 private:
  struct Slot {
    Tensor m, v;
    std::int64_t t = 0;
  };
  AdamConfig cfg_;
  std::map<std::string, Slot> slots_;
};

/// Resamples one (H, W, C) image: output point p maps to source point
/// (p - center - shift) / scale + center. Bilinear; outside reads `fill`.
Tensor affine_resample(const Tensor& image, double shift_x, double shift_y, double scale, double fill);

/// Independent random shift and scale per image of an NHWC batch.
Tensor augment(const Tensor& batch, const AugmentConfig& cfg, Rng& rng);

/// Source/target images of a pair manifest, loaded into memory.
struct PairDataset {
  Tensor src;  // (N, canvas, canvas, 3)
  Tensor tgt;
  std::vector<char32_t> src_cps, tgt_cps;

  static PairDataset load(const PairManifest& manifest, int canvas);
  std::int64_t size() const { return static_cast<std::int64_t>(src_cps.size()); }
  Tensor gather_src(std::span<const std::int64_t> idx) const;
  Tensor gather_tgt(std::span<const std::int64_t> idx) const;
};

std::int64_t steps_per_epoch(std::int64_t n, int batch_size);

/// Example order for one epoch, a pure function of (n, seed, epoch).
std::vector<std::int64_t> epoch_order(std::int64_t n, std::uint64_t seed, std::int64_t epoch);

class Trainer {
 public:
  /// Throws InvalidConfig when the weights are not allowed under `config.policy`.
  explicit Trainer(const TrainConfig& config);

  const TrainConfig& config() const { return config_; }
  Generator& generator() { return gen_; }
  const Generator& generator() const { return gen_; }
  Discriminator& discriminator() { return disc_; }
  Rng& rng() { return rng_; }
  std::int64_t step() const { return step_; }

  /// One discriminator update then one generator update.
  LossReport train_step(const Tensor& src_batch, const Tensor& tgt_batch);

  Checkpoint checkpoint() const;
  /// Restores parameters, optimizer moments, rng state and step counter.
  /// Throws ConfigMismatch if the checkpoint came from a different config.
  void restore(const Checkpoint& ckpt);
  /// Copies encoder tensors from a checkpoint with an identical model spec.
  void warm_start(const Checkpoint& ckpt);

  /// Where to write a diagnostic archive when a loss turns non-finite.
  void set_dump_path(std::filesystem::path p) { dump_path_ = std::move(p); }

 private:
  [[noreturn]] void non_finite(const std::string& what, const std::map<std::string, Tensor>& extra);

  TrainConfig config_;
  Generator gen_;
  Discriminator disc_;
  Adam adam_g_, adam_d_;
  Rng rng_;
  std::int64_t step_ = 0;
  std::filesystem::path dump_path_;
};

/// Rebuilds a generator from a checkpoint's spec and tensors.
Generator load_generator(const Checkpoint& ckpt);
ModelSpec checkpoint_spec(const Checkpoint& ckpt);

struct FitOptions {
  std::filesystem::path out_dir;      // empty: no files written
  std::int64_t stop_after_step = -1;  // stop early once this many steps are done
  std::function<void(Trainer&, const LossReport&)> on_step;
};

struct FitResult {
  Checkpoint final_checkpoint;
  std::vector<LossReport> log;
};

/// Runs epochs x ceil(N / batch) steps from `resume` (or from scratch).
/// With an out_dir: train_log.csv, checkpoint.tgck, checkpoints/step_<N>.tgck
/// and samples/step_<N>.png.
FitResult fit(const TrainConfig& config, const PairManifest& manifest, const FitOptions& options = {},
              const std::optional<Checkpoint>& resume = std::nullopt);

/// Supervised warm-start run: Strong pairs, pixel L2 only. The encoder tensors
/// of the result seed later unsupervised runs.
Checkpoint pretrain_encoder(const TrainConfig& config, const PairManifest& manifest, const FitOptions& options = {});

}  // namespace typegan
