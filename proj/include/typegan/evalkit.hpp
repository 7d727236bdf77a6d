#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "typegan/checkpoint.hpp"
#include "typegan/netarch.hpp"
#include "typegan/pairset.hpp"

namespace typegan {

struct EvalReport {
  double mean_l2 = 0.0;
  std::map<char32_t, double> per_glyph_l2;
  std::int64_t n = 0;
  Phase phase_used = Phase::Infer;

  nlohmann::ordered_json to_json() const;
};

struct EvalOptions {
  int batch_size = 16;     // train-phase statistics are taken per batch
  std::uint64_t seed = 0;  // dropout stream for phase=train
  int style_index = 0;
};

/// Runs `gen` over (N, H, W, 3) images in the requested phase without touching
/// its running statistics or gradients.
Tensor run_generator(Generator& gen, const Tensor& images, Phase phase, const EvalOptions& opt = {});

/// Pixel L2 in [-1, 1] space against the ground-truth targets of a Strong
/// manifest; MissingGroundTruth otherwise.
EvalReport evaluate(const Checkpoint& ckpt, const PairManifest& manifest, Phase phase, const EvalOptions& opt = {});
void write_eval_report(const std::filesystem::path& path, const EvalReport& report);

/// Grid image with one row per glyph: source | truth (when given) | generated.
Tensor grid_image(const Tensor& src, const Tensor* truth, const Tensor& generated);

/// First `rows` pairs of the manifest as a grid PNG; the truth column is
/// present only for Strong manifests.
void sample_grid(const Checkpoint& ckpt, const PairManifest& manifest, std::size_t rows,
                 const std::filesystem::path& out, const EvalOptions& opt = {});

/// Per-channel min-max montage of one layer's activation, one tile per channel.
Tensor feature_montage(const Tensor& activation);

/// Writes <out_dir>/<layer>.png for each requested layer ("conv1".."convL",
/// "deconv1".."deconvL"). Returns the written paths. UnknownLayer on a bad name.
std::vector<std::filesystem::path> feature_maps(const Checkpoint& ckpt, const Tensor& glyph,
                                                const std::vector<std::string>& layers,
                                                const std::filesystem::path& out_dir, const EvalOptions& opt = {});

inline constexpr char kTuringKeyName[] = "ANSWER_KEY_DO_NOT_SHOW_PARTICIPANTS.json";

struct TuringPacket {
  std::vector<std::filesystem::path> images;
  std::vector<bool> is_generated;  // the key, one entry per slot
  std::uint64_t seed = 0;
  std::filesystem::path key_path;
};

/// Renders n ground-truth and n generated images of the first n pairs,
/// shuffles them with a seeded permutation and writes slot_<i>.png plus a key.
TuringPacket turing_packet(const Checkpoint& ckpt, const PairManifest& manifest, std::size_t n, std::uint64_t seed,
                           const std::filesystem::path& out_dir, const EvalOptions& opt = {});

std::vector<bool> read_turing_key(const std::filesystem::path& key_path);

/// Fraction of slots whose response ("generated" = true) matches the key.
double score_key(const std::vector<bool>& key, const std::vector<bool>& responses);

}  // namespace typegan
