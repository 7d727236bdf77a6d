#include <algorithm>

#include "typegan/cli.hpp"

namespace typegan::cli {

namespace {

OptionSpec bare(std::string section, std::string key, std::string flag, ValueType type, std::string help) {
  return {std::move(section), std::move(key), std::move(flag), type, Value{}, false, std::move(help)};
}

OptionSpec opt(std::string section, std::string key, std::string flag, ValueType type, Value fallback,
               std::string help) {
  return {std::move(section), std::move(key), std::move(flag), type, std::move(fallback), true, std::move(help)};
}

using VT = ValueType;
using I = std::int64_t;

}  // namespace

const std::vector<OptionSpec>& option_registry() {
  static const std::vector<OptionSpec> options = {
      opt("", "seed", "seed", VT::Int, I{0}, "Seed for every random stream of the command"),

      bare("render", "src_font", "src-font", VT::String, "Source font file (TrueType/OpenType)"),
      bare("render", "tgt_font", "tgt-font", VT::String, "Target font file"),
      opt("render", "src_face", "src-face", VT::Int, I{0}, "Face index in a source font collection"),
      opt("render", "tgt_face", "tgt-face", VT::Int, I{0}, "Face index in a target font collection"),
      opt("render", "n", "n", VT::Int, I{1000}, "Number of shared codepoints to sample"),
      opt("render", "canvas", "canvas", VT::Int, I{256}, "Image side in pixels"),
      opt("render", "glyph_extent", "glyph-extent", VT::Int, I{0}, "Em box side in pixels; 0 scales 220/256 of canvas"),
      opt("render", "supersample", "supersample", VT::Int, I{2}, "Anti-aliasing samples per pixel axis"),
      opt("render", "out", "out", VT::String, std::string("corpus"), "Output directory"),

      bare("pair", "corpus", "corpus", VT::String, "Corpus manifest (corpus.jsonl)"),
      opt("pair", "policy", "policy", VT::String, std::string("strong"), "strong | soft | random"),
      bare("pair", "overlap", "overlap", VT::Float, "Overlap ratio in [0, 1]; random policy only"),
      opt("pair", "train", "train", VT::Int, I{900}, "Training split size"),
      opt("pair", "test", "test", VT::Int, I{100}, "Test split size"),
      opt("pair", "out", "out", VT::String, std::string("pairs"), "Output directory for train/test manifests"),

      opt("model", "canvas", "canvas", VT::Int, I{256}, "Image side; power of two >= 32"),
      opt("model", "base_channels", "base-channels", VT::Int, I{64}, "Channels of the first conv stage"),
      opt("model", "style_embed_dim", "style-embed-dim", VT::Int, I{128}, "Style embedding length"),
      opt("model", "num_styles", "num-styles", VT::Int, I{1}, "Rows of the style tables"),
      opt("model", "kernel", "kernel", VT::Int, I{5}, "Convolution kernel side"),
      opt("model", "dropout_p", "dropout-p", VT::Float, 0.5, "Dropout on deconv2 and deconv3"),
      opt("model", "leaky_slope", "leaky-slope", VT::Float, 0.2, "Leaky ReLU negative slope"),

      bare("train", "manifest", "manifest", VT::String, "Training pair manifest"),
      opt("train", "out", "out", VT::String, std::string("run"), "Run directory"),
      opt("train", "batch_size", "batch-size", VT::Int, I{16}, "Minibatch size"),
      opt("train", "epochs", "epochs", VT::Int, I{100}, "Training epochs"),
      opt("train", "learning_rate", "learning-rate", VT::Float, 2e-4, "Adam learning rate"),
      opt("train", "beta1", "beta1", VT::Float, 0.5, "Adam beta1"),
      opt("train", "beta2", "beta2", VT::Float, 0.999, "Adam beta2"),
      opt("train", "adam_eps", "adam-eps", VT::Float, 1e-8, "Adam epsilon"),
      opt("train", "freeze_encoder_steps", "freeze-encoder-steps", VT::Int, I{0}, "Steps with the encoder frozen"),
      opt("train", "const_stop_grad", "const-stop-grad", VT::Bool, false,
          "Treat encoder weights as constants inside f(G(x))"),
      opt("train", "style_index", "style-index", VT::Int, I{0}, "Target style row"),
      opt("train", "checkpoint_every", "checkpoint-every", VT::Int, I{0}, "Checkpoint cadence in steps; 0 = off"),
      opt("train", "sample_every", "sample-every", VT::Int, I{0}, "Sample grid cadence in steps; 0 = off"),
      bare("train", "resume", "resume", VT::String, "Checkpoint to resume from"),
      bare("train", "warm_start", "warm-start", VT::String, "Checkpoint whose encoder seeds this run"),

      opt("weights", "gan", "w-gan", VT::Float, 1.0, "Adversarial weight"),
      opt("weights", "const", "w-const", VT::Float, 1.0, "Encoder consistency weight"),
      opt("weights", "tid", "w-tid", VT::Float, 10.0, "Target identity weight"),
      opt("weights", "tv", "w-tv", VT::Float, 0.1, "Total variation weight"),
      opt("weights", "l2", "w-l2", VT::Float, 0.0, "Supervised pixel L2 weight (strong pairs only)"),

      opt("augment", "enabled", "augment", VT::Bool, false, "Random shift and scale of every training image"),
      bare("augment", "max_shift_px", "max-shift-px", VT::Int, "Largest shift in pixels; default 8 per 256 of canvas"),
      opt("augment", "scale_lo", "scale-lo", VT::Float, 0.9, "Smallest scale factor"),
      opt("augment", "scale_hi", "scale-hi", VT::Float, 1.1, "Largest scale factor"),

      bare("infer", "checkpoint", "checkpoint", VT::String, "Trained checkpoint"),
      bare("infer", "text", "text", VT::String, "UTF-8 characters to transfer (needs --font)"),
      bare("infer", "font", "font", VT::String, "Source font used with --text"),
      opt("infer", "face", "face", VT::Int, I{0}, "Face index for --font"),
      bare("infer", "manifest", "manifest", VT::String, "Pair manifest whose sources are transferred"),
      opt("infer", "out", "out", VT::String, std::string("infer"), "Output directory"),

      bare("eval", "checkpoint", "checkpoint", VT::String, "Trained checkpoint"),
      bare("eval", "manifest", "manifest", VT::String, "Strong-policy test manifest"),
      opt("eval", "phase", "phase", VT::String, std::string("infer"), "train | infer | both"),
      opt("eval", "batch_size", "batch-size", VT::Int, I{16}, "Images per forward pass"),
      bare("eval", "out", "out", VT::String, "Report file (JSON); stdout when omitted"),

      bare("grid", "checkpoint", "checkpoint", VT::String, "Trained checkpoint"),
      bare("grid", "manifest", "manifest", VT::String, "Pair manifest"),
      opt("grid", "rows", "rows", VT::Int, I{10}, "Glyph rows; 0 = all pairs"),
      opt("grid", "out", "out", VT::String, std::string("grid.png"), "Output PNG"),

      bare("featmaps", "checkpoint", "checkpoint", VT::String, "Trained checkpoint"),
      bare("featmaps", "image", "image", VT::String, "Glyph PNG to probe"),
      bare("featmaps", "text", "text", VT::String, "Single character to probe (needs --font)"),
      bare("featmaps", "font", "font", VT::String, "Font used with --text"),
      opt("featmaps", "face", "face", VT::Int, I{0}, "Face index for --font"),
      bare("featmaps", "layers", "layers", VT::String, "Comma-separated layer names; default conv1 and the last deconv"),
      opt("featmaps", "out", "out", VT::String, std::string("featmaps"), "Output directory"),

      bare("turing", "checkpoint", "checkpoint", VT::String, "Trained checkpoint"),
      bare("turing", "manifest", "manifest", VT::String, "Strong-policy manifest"),
      opt("turing", "n", "n", VT::Int, I{10}, "Real and generated images each"),
      opt("turing", "out", "out", VT::String, std::string("turing"), "Packet directory"),

      bare("score", "key", "key", VT::String, "Answer key written by the turing command"),
      bare("score", "responses", "responses", VT::String, "One line per slot: generated or real"),
  };
  return options;
}

const std::vector<CommandSpec>& command_registry() {
  static const std::vector<CommandSpec> commands = {
      {"render", "Rasterize glyphs shared by two fonts into a corpus", {"", "render"}},
      {"pair", "Split a corpus and build train/test pair manifests", {"", "pair"}},
      {"train", "Train the generator and discriminator", {"", "model", "train", "weights", "augment"}},
      {"pretrain", "Supervised pixel-L2 run whose encoder seeds later runs", {"", "model", "train", "augment"}},
      {"infer", "Transfer characters with a trained generator", {"infer"}},
      {"eval", "Pixel L2 against ground truth", {"eval"}},
      {"grid", "Source | truth | generated comparison grid", {"grid"}},
      {"featmaps", "Per-channel feature map montages", {"featmaps"}},
      {"turing", "Shuffled real/generated packet with a sealed key", {"", "turing"}},
      {"score", "Score responses against a turing key", {"score"}},
  };
  return commands;
}

std::vector<const OptionSpec*> options_for(const std::string& command) {
  std::vector<const OptionSpec*> out;
  const auto& cmds = command_registry();
  auto it = std::find_if(cmds.begin(), cmds.end(), [&](const CommandSpec& c) { return c.name == command; });
  if (it == cmds.end()) return out;
  for (const auto& o : option_registry()) {
    if (std::find(it->sections.begin(), it->sections.end(), o.section) != it->sections.end()) out.push_back(&o);
  }
  return out;
}

}  // namespace typegan::cli
