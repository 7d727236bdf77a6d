#include "typegan/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "typegan/errors.hpp"
#include "typegan/glyphrender.hpp"
#include "typegan/trainkit.hpp"

namespace typegan {

namespace {

void require_truth(const PairManifest& m, const char* what) {
  if (!m.has_ground_truth()) {
    throw Error(ErrorKind::MissingGroundTruth,
                std::string(what) + " needs a strong-policy manifest, got " + to_string(m.policy.kind));
  }
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

Tensor load_images(const PairManifest& m, std::size_t count, bool targets, int canvas) {
  std::vector<Tensor> imgs;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& p = m.pairs[i];
    Tensor img = read_png(targets ? p.tgt_path : p.src_path);
    if (img.dim(0) != canvas || img.dim(1) != canvas) {
      throw Error(ErrorKind::ShapeMismatch, "image " + shape_to_string(img.shape()) + " does not match canvas " +
                                                std::to_string(canvas));
    }
    imgs.push_back(std::move(img));
  }
  return stack(imgs);
}

std::string slot_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "slot_%03zu.png", i);
  return buf;
}

}  // namespace

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["mean_l2"] = mean_l2;
  j["n"] = n;
  j["phase"] = to_string(phase_used);
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [cp, v] : per_glyph_l2) per[codepoint_label(cp)] = v;
  j["per_glyph_l2"] = per;
  return j;
}

Tensor run_generator(Generator& gen, const Tensor& images, Phase phase, const EvalOptions& opt) {
  if (opt.batch_size < 1) throw Error(ErrorKind::InvalidConfig, "eval batch_size must be >= 1");
  NoGradGuard no_grad;
  const Phase saved = gen.phase();
  gen.set_phase(phase);
  Rng dropout(opt.seed);
  ForwardContext ctx;
  ctx.dropout_rng = &dropout;
  ctx.update_running_stats = false;
  std::vector<Tensor> outs;
  try {
    for (std::int64_t first = 0; first < images.dim(0); first += opt.batch_size) {
      const std::int64_t count = std::min<std::int64_t>(opt.batch_size, images.dim(0) - first);
      outs.push_back(gen.generate(Var(images.slice_batch(first, count)), opt.style_index, ctx).value());
    }
  } catch (...) {
    gen.set_phase(saved);
    throw;
  }
  gen.set_phase(saved);
  return concat_batch(outs);
}

EvalReport evaluate(const Checkpoint& ckpt, const PairManifest& manifest, Phase phase, const EvalOptions& opt) {
  require_truth(manifest, "evaluate");
  if (manifest.pairs.empty()) throw Error(ErrorKind::EmptyManifest, "evaluation manifest has no pairs");
  Generator gen = load_generator(ckpt);
  const int canvas = gen.spec().canvas;
  const Tensor src = load_images(manifest, manifest.pairs.size(), false, canvas);
  const Tensor tgt = load_images(manifest, manifest.pairs.size(), true, canvas);
  const Tensor out = run_generator(gen, src, phase, opt);

  EvalReport r;
  r.phase_used = phase;
  r.n = static_cast<std::int64_t>(manifest.pairs.size());
  const std::int64_t per = out.numel() / r.n;
  double total = 0.0;
  for (std::int64_t i = 0; i < r.n; ++i) {
    double s = 0.0;
    for (std::int64_t k = i * per; k < (i + 1) * per; ++k) {
      const double d = out[k] - tgt[k];
      s += d * d;
    }
    const double l2 = s / static_cast<double>(per);
    r.per_glyph_l2[manifest.pairs[static_cast<std::size_t>(i)].src_cp] = l2;
    total += l2;
  }
  r.mean_l2 = total / static_cast<double>(r.n);
  return r;
}

void write_eval_report(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << report.to_json().dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

Tensor grid_image(const Tensor& src, const Tensor* truth, const Tensor& generated) {
  if (src.rank() != 4 || generated.shape() != src.shape() || (truth && truth->shape() != src.shape())) {
    throw Error(ErrorKind::ShapeMismatch, "grid columns must share one NHWC shape");
  }
  const std::int64_t rows = src.dim(0), h = src.dim(1), w = src.dim(2);
  std::vector<const Tensor*> cols{&src};
  if (truth) cols.push_back(truth);
  cols.push_back(&generated);
  const auto ncols = static_cast<std::int64_t>(cols.size());
  Tensor grid({rows * h, ncols * w});
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t k = 0; k < ncols; ++k)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) grid[(r * h + y) * ncols * w + k * w + x] = cols[k]->at(r, y, x, 0);
  return grid;
}

void sample_grid(const Checkpoint& ckpt, const PairManifest& manifest, std::size_t rows,
                 const std::filesystem::path& out, const EvalOptions& opt) {
  if (manifest.pairs.empty()) throw Error(ErrorKind::EmptyManifest, "grid of an empty manifest");
  rows = std::min(rows == 0 ? manifest.pairs.size() : rows, manifest.pairs.size());
  Generator gen = load_generator(ckpt);
  const int canvas = gen.spec().canvas;
  const Tensor src = load_images(manifest, rows, false, canvas);
  const Tensor gen_out = run_generator(gen, src, Phase::Infer, opt);
  if (manifest.has_ground_truth()) {
    const Tensor tgt = load_images(manifest, rows, true, canvas);
    write_png(out, grid_image(src, &tgt, gen_out));
  } else {
    write_png(out, grid_image(src, nullptr, gen_out));
  }
}

Tensor feature_montage(const Tensor& activation) {
  if (activation.rank() != 4 || activation.dim(0) < 1) {
    throw Error(ErrorKind::ShapeMismatch, "feature_montage expects (B, H, W, C)");
  }
  const std::int64_t h = activation.dim(1), w = activation.dim(2), c = activation.dim(3);
  const auto cols = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(c))));
  const std::int64_t rows = (c + cols - 1) / cols;
  Tensor montage({rows * h, cols * w}, -1.0);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double lo = activation.at(0, 0, 0, ch), hi = lo;
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        lo = std::min(lo, activation.at(0, y, x, ch));
        hi = std::max(hi, activation.at(0, y, x, ch));
      }
    const double span = hi - lo;
    const std::int64_t ty = ch / cols, tx = ch % cols;
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        const double unit = span > 0.0 ? (activation.at(0, y, x, ch) - lo) / span : 0.0;
        montage[(ty * h + y) * cols * w + tx * w + x] = unit * 2.0 - 1.0;
      }
  }
  return montage;
}

std::vector<std::filesystem::path> feature_maps(const Checkpoint& ckpt, const Tensor& glyph,
                                                const std::vector<std::string>& layers,
                                                const std::filesystem::path& out_dir, const EvalOptions& opt) {
  Generator gen = load_generator(ckpt);
  const int L = gen.spec().stages();
  for (const auto& name : layers) {
    bool ok = false;
    for (int i = 1; i <= L; ++i) ok = ok || name == "conv" + std::to_string(i) || name == "deconv" + std::to_string(i);
    if (!ok) {
      throw Error(ErrorKind::UnknownLayer, "'" + name + "' (valid: conv1..conv" + std::to_string(L) + ", deconv1..deconv" +
                                               std::to_string(L) + ")");
    }
  }
  const Tensor batch = glyph.rank() == 3 ? glyph.reshaped({1, glyph.dim(0), glyph.dim(1), glyph.dim(2)}) : glyph;
  std::map<std::string, Tensor> acts;
  {
    NoGradGuard no_grad;
    gen.set_phase(Phase::Infer);
    ForwardContext ctx;
    ctx.capture = &acts;
    gen.generate(Var(batch.slice_batch(0, 1)), opt.style_index, ctx);
  }
  ensure_dir(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& name : layers) {
    const auto path = out_dir / (name + ".png");
    write_png(path, feature_montage(acts.at(name)));
    written.push_back(path);
  }
  return written;
}

TuringPacket turing_packet(const Checkpoint& ckpt, const PairManifest& manifest, std::size_t n, std::uint64_t seed,
                           const std::filesystem::path& out_dir, const EvalOptions& opt) {
  require_truth(manifest, "turing_packet");
  if (n < 1 || n > manifest.pairs.size()) {
    throw Error(ErrorKind::InsufficientCorpus, "packet of " + std::to_string(n) + " needs that many pairs, manifest has " +
                                                   std::to_string(manifest.pairs.size()));
  }
  Generator gen = load_generator(ckpt);
  const int canvas = gen.spec().canvas;
  const Tensor src = load_images(manifest, n, false, canvas);
  const Tensor tgt = load_images(manifest, n, true, canvas);
  const Tensor fake = run_generator(gen, src, Phase::Infer, opt);

  std::vector<std::size_t> slots(2 * n);
  std::iota(slots.begin(), slots.end(), 0);  // [0, n) real, [n, 2n) generated
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(slots));

  ensure_dir(out_dir);
  TuringPacket packet;
  packet.seed = seed;
  nlohmann::ordered_json key;
  key["seed"] = seed;
  key["slots"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const bool generated = slots[i] >= n;
    const std::size_t item = generated ? slots[i] - n : slots[i];
    const Tensor& from = generated ? fake : tgt;
    const auto path = out_dir / slot_name(i);
    write_png(path, from.slice_batch(static_cast<std::int64_t>(item), 1).reshaped({canvas, canvas, 3}));
    packet.images.push_back(path);
    packet.is_generated.push_back(generated);
    key["slots"].push_back({{"image", slot_name(i)},
                            {"label", generated ? "generated" : "real"},
                            {"codepoint", codepoint_label(manifest.pairs[item].tgt_cp)}});
  }
  packet.key_path = out_dir / kTuringKeyName;
  std::ofstream out(packet.key_path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + packet.key_path.string());
  out << key.dump(2) << '\n';
  return packet;
}

std::vector<bool> read_turing_key(const std::filesystem::path& key_path) {
  std::ifstream in(key_path);
  if (!in) throw Error(ErrorKind::FileNotFound, key_path.string());
  std::vector<bool> key;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& s : j.at("slots")) key.push_back(s.at("label").get<std::string>() == "generated");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, key_path.string() + ": " + e.what());
  }
  return key;
}

double score_key(const std::vector<bool>& key, const std::vector<bool>& responses) {
  if (key.empty() || key.size() != responses.size()) {
    throw Error(ErrorKind::InvalidConfig, "need one response per slot (" + std::to_string(key.size()) + " slots, " +
                                              std::to_string(responses.size()) + " responses)");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < key.size(); ++i) hits += key[i] == responses[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(key.size());
}

}  // namespace typegan
