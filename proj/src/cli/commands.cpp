#include <CLI11.hpp>
#include <toml.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "typegan/checkpoint.hpp"
#include "typegan/cli.hpp"
#include "typegan/errors.hpp"
#include "typegan/evalkit.hpp"
#include "typegan/font.hpp"
#include "typegan/glyphrender.hpp"
#include "typegan/pairset.hpp"
#include "typegan/trainkit.hpp"

namespace typegan::cli {

namespace {

namespace fs = std::filesystem;

Value parse_value(const OptionSpec& o, const std::string& text) {
  auto bad = [&] { return Error(ErrorKind::InvalidConfig, "--" + o.flag + ": cannot parse '" + text + "'"); };
  switch (o.type) {
    case ValueType::String:
      return text;
    case ValueType::Int: {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) throw bad();
      return v;
    }
    case ValueType::Float: {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        throw bad();
      }
      if (used != text.size()) throw bad();
      return v;
    }
    case ValueType::Bool:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw bad();
  }
  throw bad();
}

Value from_toml(const OptionSpec& o, const toml::node& node) {
  auto bad = [&] { return Error(ErrorKind::InvalidConfig, "config key " + o.dotted() + " has the wrong type"); };
  switch (o.type) {
    case ValueType::String:
      if (auto v = node.value_exact<std::string>()) return *v;
      throw bad();
    case ValueType::Int:
      if (auto v = node.value_exact<std::int64_t>()) return *v;
      throw bad();
    case ValueType::Float:
      if (auto v = node.value_exact<double>()) return *v;
      if (auto v = node.value_exact<std::int64_t>()) return static_cast<double>(*v);
      throw bad();
    case ValueType::Bool:
      if (auto v = node.value_exact<bool>()) return *v;
      throw bad();
  }
  throw bad();
}

const OptionSpec* find_option(const std::string& section, const std::string& key) {
  for (const auto& o : option_registry()) {
    if (o.section == section && o.key == key) return &o;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  const auto& reg = option_registry();
  return std::any_of(reg.begin(), reg.end(), [&](const OptionSpec& o) { return o.section == section && !section.empty(); });
}

/// Reads the keys of `file` that belong to `sections`; keys of other known
/// sections are ignored so one file can drive every command.
void apply_toml(const fs::path& file, const std::vector<std::string>& sections, Settings& s) {
  toml::table root;
  try {
    root = toml::parse_file(file.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << file.string() << ": " << e.description() << " (line " << e.source().begin.line << ")";
    if (!fs::exists(file)) throw Error(ErrorKind::FileNotFound, file.string());
    throw Error(ErrorKind::InvalidConfig, msg.str());
  }
  auto wanted = [&](const std::string& sec) { return std::find(sections.begin(), sections.end(), sec) != sections.end(); };
  for (const auto& [k, node] : root) {
    const std::string key(k.str());
    if (const auto* table = node.as_table()) {
      if (!known_section(key)) throw Error(ErrorKind::InvalidConfig, "unknown config section [" + key + "]");
      for (const auto& [k2, inner] : *table) {
        const std::string key2(k2.str());
        const OptionSpec* o = find_option(key, key2);
        if (!o) throw Error(ErrorKind::InvalidConfig, "unknown config key " + key + "." + key2);
        if (!wanted(key)) continue;
        s.set(o->dotted(), from_toml(*o, inner));
        s.mark_given(o->dotted());
      }
    } else {
      const OptionSpec* o = find_option("", key);
      if (!o) throw Error(ErrorKind::InvalidConfig, "unknown top-level config key " + key);
      if (!wanted("")) continue;
      s.set(o->dotted(), from_toml(*o, node));
      s.mark_given(o->dotted());
    }
  }
}

struct Invocation {
  std::string command;
  Settings settings;
  bool force = false;
};

bool occupied(const fs::path& p) {
  std::error_code ec;
  if (!fs::exists(p, ec)) return false;
  if (fs::is_directory(p, ec)) return !fs::is_empty(p, ec);
  return true;
}

void claim_output(const fs::path& p, bool force) {
  if (occupied(p) && !force) {
    throw Error(ErrorKind::InvalidConfig, p.string() + " already exists; pass --force to overwrite");
  }
}

void claim_dir(const fs::path& p, bool force) {
  claim_output(p, force);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + p.string() + ": " + ec.message());
}

void write_run_record(const fs::path& path, const Invocation& inv) {
  nlohmann::ordered_json j;
  j["command"] = inv.command;
  j["version"] = kVersion;
  j["hash_algorithm"] = kHashAlgorithm;
  j["config_hash"] = inv.settings.hash();
  j["settings"] = nlohmann::ordered_json::parse(inv.settings.canonical());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::optional<std::string> maybe_str(const Settings& s, const std::string& key) {
  return s.has(key) ? std::optional<std::string>(s.str(key)) : std::nullopt;
}

std::string type_label(ValueType t) {
  switch (t) {
    case ValueType::String: return "TEXT";
    case ValueType::Int: return "INT";
    case ValueType::Float: return "FLOAT";
    case ValueType::Bool: return "BOOL";
  }
  return "TEXT";
}

std::string value_text(const Value& v) {
  return std::visit([](const auto& x) {
    std::ostringstream s;
    s << std::boolalpha << x;
    return s.str();
  }, v);
}

// ---------------------------------------------------------------- commands

int cmd_render(const Invocation& inv, std::ostream& out) {
  const Settings& s = inv.settings;
  const auto n = s.integer("render.n");
  if (n < 0) throw Error(ErrorKind::InvalidConfig, "--n must be >= 0");
  RenderConfig cfg = RenderConfig::for_canvas(static_cast<int>(s.integer("render.canvas")));
  if (s.integer("render.glyph_extent") > 0) cfg.glyph_extent = static_cast<int>(s.integer("render.glyph_extent"));
  cfg.supersample = static_cast<int>(s.integer("render.supersample"));
  cfg.validate();
  const fs::path out_dir = s.str("render.out");

  const FontHandle src = open_font(s.str("render.src_font"), static_cast<int>(s.integer("render.src_face")));
  const FontHandle tgt = open_font(s.str("render.tgt_font"), static_cast<int>(s.integer("render.tgt_face")));
  const auto cps = sample_codepoints(shared_codepoints(src, tgt), static_cast<std::size_t>(n),
                                     static_cast<std::uint64_t>(s.integer("seed")));
  claim_dir(out_dir, inv.force);
  const fs::path manifest = render_corpus(src, tgt, cps, cfg, out_dir);
  write_run_record(out_dir / "run_config.json", inv);
  out << "wrote " << cps.size() << " pairs to " << manifest.string() << '\n';
  return 0;
}

int cmd_pair(const Invocation& inv, std::ostream& out) {
  const Settings& s = inv.settings;
  PairPolicy policy;
  policy.kind = parse_pair_kind(s.str("pair.policy"));
  policy.seed = static_cast<std::uint64_t>(s.integer("seed"));
  if (policy.kind == PairKind::Random) {
    if (!s.has("pair.overlap")) throw Error(ErrorKind::InvalidConfig, "random policy needs --overlap");
    policy.overlap_ratio = s.real("pair.overlap");
  } else if (s.has("pair.overlap")) {
    throw Error(ErrorKind::InvalidConfig, "--overlap applies only to the random policy, not " + to_string(policy.kind));
  }
  policy.validate();
  const auto n_train = s.integer("pair.train"), n_test = s.integer("pair.test");
  if (n_train < 0 || n_test < 0) throw Error(ErrorKind::InvalidConfig, "split sizes must be >= 0");

  const CorpusManifest corpus = read_corpus_manifest(s.str("pair.corpus"));
  const auto [train, test] = split_corpus(corpus, static_cast<std::size_t>(n_train), static_cast<std::size_t>(n_test),
                                          policy.seed);
  const PairManifest train_m =
      build_pairs(train, policy, corpus, std::set<char32_t>(test.begin(), test.end()), Split::Train);
  PairPolicy strong;
  strong.seed = policy.seed;
  const PairManifest test_m = build_pairs(test, strong, corpus, {}, Split::Test);

  const fs::path dir = s.str("pair.out");
  claim_dir(dir, inv.force);
  write_pair_manifest(dir / "train.jsonl", train_m);
  write_pair_manifest(dir / "test.jsonl", test_m);
  write_run_record(dir / "run_config.json", inv);
  out << "train: " << train_m.size() << " pairs, overlap " << (train_m.size() ? measure_overlap(train_m) : 0.0)
      << "\ntest: " << test_m.size() << " pairs\n";
  return 0;
}

TrainConfig train_config(const Settings& s) {
  TrainConfig c;
  c.model.canvas = static_cast<int>(s.integer("model.canvas"));
  c.model.base_channels = static_cast<int>(s.integer("model.base_channels"));
  c.model.style_embed_dim = static_cast<int>(s.integer("model.style_embed_dim"));
  c.model.num_styles = static_cast<int>(s.integer("model.num_styles"));
  c.model.kernel = static_cast<int>(s.integer("model.kernel"));
  c.model.dropout_p = s.real("model.dropout_p");
  c.model.leaky_slope = s.real("model.leaky_slope");
  c.batch_size = static_cast<int>(s.integer("train.batch_size"));
  c.epochs = static_cast<int>(s.integer("train.epochs"));
  c.adam = {s.real("train.learning_rate"), s.real("train.beta1"), s.real("train.beta2"), s.real("train.adam_eps")};
  if (s.has("weights.gan")) {
    c.weights = {s.real("weights.gan"), s.real("weights.const"), s.real("weights.tid"), s.real("weights.tv"),
                 s.real("weights.l2")};
  }
  c.augment = AugmentConfig::for_canvas(c.model.canvas);
  c.augment.enabled = s.flag("augment.enabled");
  if (s.has("augment.max_shift_px")) c.augment.max_shift_px = static_cast<int>(s.integer("augment.max_shift_px"));
  c.augment.scale_lo = s.real("augment.scale_lo");
  c.augment.scale_hi = s.real("augment.scale_hi");
  c.seed = static_cast<std::uint64_t>(s.integer("seed"));
  c.freeze_encoder_steps = s.integer("train.freeze_encoder_steps");
  c.const_stop_grad = s.flag("train.const_stop_grad");
  c.style_index = static_cast<int>(s.integer("train.style_index"));
  c.checkpoint_every = s.integer("train.checkpoint_every");
  c.sample_every = s.integer("train.sample_every");
  if (auto w = maybe_str(s, "train.warm_start")) c.warm_start = *w;
  return c;
}

int cmd_train(const Invocation& inv, std::ostream& out, bool pretrain) {
  const Settings& s = inv.settings;
  const PairManifest manifest = read_pair_manifest(s.str("train.manifest"));
  TrainConfig c = train_config(s);
  c.policy = manifest.policy.kind;
  if (pretrain) {
    c.policy = PairKind::Strong;
    c.weights = LossWeights{0.0, 0.0, 0.0, 0.0, 1.0};
    c.warm_start.reset();
    if (!manifest.has_ground_truth()) {
      throw Error(ErrorKind::MissingGroundTruth, "pretrain needs a strong-policy manifest");
    }
  }
  c.validate();

  const fs::path dir = s.str("train.out");
  std::optional<Checkpoint> resume;
  if (auto r = maybe_str(s, "train.resume")) {
    resume = load_checkpoint(*r);
    std::error_code ec;
    fs::create_directories(dir, ec);
  } else {
    claim_dir(dir, inv.force);
  }
  if (c.warm_start) load_checkpoint(*c.warm_start);  // fail before training if unreadable
  write_run_record(dir / "run_config.json", inv);

  FitOptions opt;
  opt.out_dir = dir;
  FitResult r = pretrain ? FitResult{pretrain_encoder(c, manifest, opt), {}} : fit(c, manifest, opt, resume);
  out << "steps: " << r.final_checkpoint.meta.at("step").get<std::int64_t>() << '\n';
  if (!r.log.empty()) out << LossReport::csv_header() << '\n' << r.log.back().csv_row() << '\n';
  out << "checkpoint: " << (dir / "checkpoint.tgck").string() << '\n';
  return 0;
}

int cmd_infer(const Invocation& inv, std::ostream& out) {
  const Settings& s = inv.settings;
  const Checkpoint ckpt = load_checkpoint(s.str("infer.checkpoint"));
  Generator gen = load_generator(ckpt);
  const int canvas = gen.spec().canvas;
  const auto text = maybe_str(s, "infer.text");
  const auto manifest_path = maybe_str(s, "infer.manifest");
  if (text.has_value() == manifest_path.has_value()) {
    throw Error(ErrorKind::InvalidConfig, "give exactly one of --text or --manifest");
  }
  std::vector<char32_t> cps;
  std::vector<Tensor> images;
  if (text) {
    const auto font_path = maybe_str(s, "infer.font");
    if (!font_path) throw Error(ErrorKind::InvalidConfig, "--text needs --font");
    const FontHandle font = open_font(*font_path, static_cast<int>(s.integer("infer.face")));
    std::set<char32_t> seen;
    for (char32_t cp : decode_utf8(*text)) {
      if (!seen.insert(cp).second) continue;
      cps.push_back(cp);
      images.push_back(rasterize(font, cp, RenderConfig::for_canvas(canvas)).pixels);
    }
  } else {
    for (const auto& p : read_pair_manifest(*manifest_path).pairs) {
      cps.push_back(p.src_cp);
      images.push_back(read_png(p.src_path));
    }
  }
  if (images.empty()) throw Error(ErrorKind::InvalidConfig, "nothing to transfer");
  const fs::path dir = s.str("infer.out");
  claim_dir(dir, inv.force);
  const Tensor result = run_generator(gen, stack(images), Phase::Infer);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    write_png(dir / (codepoint_label(cps[i]) + ".png"),
              result.slice_batch(static_cast<std::int64_t>(i), 1).reshaped({canvas, canvas, 3}));
  }
  write_run_record(dir / "run_config.json", inv);
  out << "wrote " << cps.size() << " images to " << dir.string() << '\n';
  return 0;
}

int cmd_eval(const Invocation& inv, std::ostream& out) {
  const Settings& s = inv.settings;
  const PairManifest manifest = read_pair_manifest(s.str("eval.manifest"));
  if (!manifest.has_ground_truth()) {
    throw Error(ErrorKind::MissingGroundTruth, "evaluation needs a strong-policy manifest, got " +
                                                   to_string(manifest.policy.kind));
  }
  const std::string phase = s.str("eval.phase");
  std::vector<Phase> phases;
  if (phase == "both") {
    phases = {Phase::Train, Phase::Infer};
  } else {
    phases = {parse_phase(phase)};
  }
  const auto out_path = maybe_str(s, "eval.out");
  if (out_path) claim_output(*out_path, inv.force);
  const Checkpoint ckpt = load_checkpoint(s.str("eval.checkpoint"));
  EvalOptions opt;
  opt.batch_size = static_cast<int>(s.integer("eval.batch_size"));
  opt.seed = static_cast<std::uint64_t>(s.has("seed") ? s.integer("seed") : 0);

  nlohmann::ordered_json j;
  j["config_hash"] = inv.settings.hash();
  j["checkpoint_config_hash"] = ckpt.meta.value("config_hash", std::string());
  for (Phase p : phases) j[to_string(p)] = evaluate(ckpt, manifest, p, opt).to_json();
  const std::string text = j.dump(2);
  if (out_path) {
    std::ofstream f(*out_path, std::ios::trunc);
    if (!f) throw Error(ErrorKind::IoError, "cannot write " + *out_path);
    f << text << '\n';
  }
  out << text << '\n';
  return 0;
}

int cmd_grid(const Invocation& inv, std::ostream& out) {
  const Settings& s = inv.settings;
  const PairManifest manifest = read_pair_manifest(s.str("grid.manifest"));
  const fs::path path = s.str("grid.out");
  claim_output(path, inv.force);
  const auto rows = s.integer("grid.rows");
  if (rows < 0) throw Error(ErrorKind::InvalidConfig, "--rows must be >= 0");
  sample_grid(load_checkpoint(s.str("grid.checkpoint")), manifest, static_cast<std::size_t>(rows), path);
  auto record = path;
  record += ".run.json";
  write_run_record(record, inv);
  out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_featmaps(const Invocation& inv, std::ostream& out) {
  const Settings& s = inv.settings;
  const Checkpoint ckpt = load_checkpoint(s.str("featmaps.checkpoint"));
  const ModelSpec spec = checkpoint_spec(ckpt);
  Tensor glyph;
  if (auto image = maybe_str(s, "featmaps.image")) {
    glyph = read_png(*image);
  } else if (auto text = maybe_str(s, "featmaps.text")) {
    const auto font_path = maybe_str(s, "featmaps.font");
    if (!font_path) throw Error(ErrorKind::InvalidConfig, "--text needs --font");
    const auto cps = decode_utf8(*text);
    if (cps.size() != 1) throw Error(ErrorKind::InvalidConfig, "--text must be a single character");
    const FontHandle font = open_font(*font_path, static_cast<int>(s.integer("featmaps.face")));
    glyph = rasterize(font, cps[0], RenderConfig::for_canvas(spec.canvas)).pixels;
  } else {
    throw Error(ErrorKind::InvalidConfig, "give --image or --text with --font");
  }
  std::vector<std::string> layers;
  if (auto list = maybe_str(s, "featmaps.layers")) {
    std::stringstream ss(*list);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) layers.push_back(item);
    }
  } else {
    layers = {"conv1", "deconv" + std::to_string(spec.stages())};
  }
  const fs::path dir = s.str("featmaps.out");
  claim_dir(dir, inv.force);
  for (const auto& p : feature_maps(ckpt, glyph, layers, dir)) out << "wrote " << p.string() << '\n';
  write_run_record(dir / "run_config.json", inv);
  return 0;
}

int cmd_turing(const Invocation& inv, std::ostream& out) {
  const Settings& s = inv.settings;
  const PairManifest manifest = read_pair_manifest(s.str("turing.manifest"));
  const auto n = s.integer("turing.n");
  if (n < 1) throw Error(ErrorKind::InvalidConfig, "--n must be >= 1");
  const fs::path dir = s.str("turing.out");
  claim_dir(dir, inv.force);
  const TuringPacket packet = turing_packet(load_checkpoint(s.str("turing.checkpoint")), manifest,
                                            static_cast<std::size_t>(n), static_cast<std::uint64_t>(s.integer("seed")),
                                            dir);
  write_run_record(dir / "run_config.json", inv);
  out << "wrote " << packet.images.size() << " images; key: " << packet.key_path.string() << '\n';
  return 0;
}

int cmd_score(const Invocation& inv, std::ostream& out) {
  const Settings& s = inv.settings;
  const auto key = read_turing_key(s.str("score.key"));
  std::ifstream in(s.str("score.responses"));
  if (!in) throw Error(ErrorKind::FileNotFound, s.str("score.responses"));
  std::vector<bool> responses;
  for (std::string line; std::getline(in, line);) {
    line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }), line.end());
    if (line.empty()) continue;
    if (line == "generated" || line == "1") {
      responses.push_back(true);
    } else if (line == "real" || line == "0") {
      responses.push_back(false);
    } else {
      throw Error(ErrorKind::InvalidConfig, "response '" + line + "' is neither generated nor real");
    }
  }
  out << "accuracy: " << score_key(key, responses) << '\n';
  return 0;
}

int dispatch(const Invocation& inv, std::ostream& out) {
  const std::string& c = inv.command;
  if (c == "render") return cmd_render(inv, out);
  if (c == "pair") return cmd_pair(inv, out);
  if (c == "train") return cmd_train(inv, out, false);
  if (c == "pretrain") return cmd_train(inv, out, true);
  if (c == "infer") return cmd_infer(inv, out);
  if (c == "eval") return cmd_eval(inv, out);
  if (c == "grid") return cmd_grid(inv, out);
  if (c == "featmaps") return cmd_featmaps(inv, out);
  if (c == "turing") return cmd_turing(inv, out);
  if (c == "score") return cmd_score(inv, out);
  throw Error(ErrorKind::InvalidConfig, "unknown command " + c);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised typography style transfer"};
  app.set_version_flag("--version", std::string("typegan ") + kVersion + " (config hash: " + kHashAlgorithm + ")");
  app.require_subcommand(1);

  struct Bound {
    const OptionSpec* spec;
    CLI::Option* option;
    std::string text;
    bool on = false;
  };
  struct Sub {
    CLI::App* app;
    std::string config;
    bool force = false;
    std::vector<Bound> bound;
  };
  std::vector<Sub> subs;
  subs.reserve(command_registry().size());
  for (const auto& cmd : command_registry()) {
    Sub& sub = subs.emplace_back();
    sub.app = app.add_subcommand(cmd.name, cmd.help);
    sub.app->add_option("--config", sub.config, "TOML config file; flags override its values");
    sub.app->add_flag("--force", sub.force, "Overwrite existing outputs");
    const auto opts = options_for(cmd.name);
    sub.bound.reserve(opts.size());
    for (const OptionSpec* o : opts) {
      Bound& b = sub.bound.emplace_back();
      b.spec = o;
      std::string help = o->help + "  [" + o->dotted() + "]";
      if (o->type == ValueType::Bool) {
        b.option = sub.app->add_flag("--" + o->flag + ",!--no-" + o->flag, b.on, help);
      } else {
        b.option = sub.app->add_option("--" + o->flag, b.text, help)->type_name(type_label(o->type));
        if (o->has_fallback) b.option->default_str(value_text(o->fallback));
      }
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    for (auto& sub : subs) {
      if (!sub.app->parsed()) continue;
      Invocation inv;
      inv.command = sub.app->get_name();
      inv.force = sub.force;
      for (const auto& b : sub.bound) {
        if (b.spec->has_fallback) inv.settings.set(b.spec->dotted(), b.spec->fallback);
      }
      if (!sub.config.empty()) {
        const auto& cmds = command_registry();
        const auto it = std::find_if(cmds.begin(), cmds.end(), [&](const CommandSpec& c) { return c.name == inv.command; });
        apply_toml(sub.config, it->sections, inv.settings);
      }
      for (const auto& b : sub.bound) {
        if (b.option->count() == 0) continue;
        inv.settings.set(b.spec->dotted(), b.spec->type == ValueType::Bool ? Value(b.on) : parse_value(*b.spec, b.text));
        inv.settings.mark_given(b.spec->dotted());
      }
      return dispatch(inv, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}

}  // namespace typegan::cli
