#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "typegan/checkpoint.hpp"
#include "typegan/cli.hpp"
#include "typegan/evalkit.hpp"
#include "typegan/glyphrender.hpp"
#include "typegan/pairset.hpp"

using namespace typegan;
using typegan::testing::fixture;
using typegan::testing::read_bytes;
using typegan::testing::ScratchDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

std::vector<std::string> micro_model() {
  return {"--canvas", "32", "--base-channels", "2", "--style-embed-dim", "4", "--batch-size", "2"};
}

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// Corpus, strong/soft manifests and a one-epoch checkpoint built through the CLI.
struct Pipeline {
  ScratchDir dir{"cli_pipeline"};
  fs::path corpus, strong, soft, run;

  Pipeline() {
    const std::string font_a = fixture("synth_glyf.ttf").string(), font_b = fixture("synth_cff.otf").string();
    REQUIRE(call({"render", "--src-font", font_a, "--tgt-font", font_b, "--n", "6", "--canvas", "32", "--out",
                  (dir / "corpus").string()})
                .code == 0);
    corpus = dir / "corpus" / kCorpusManifestName;
    REQUIRE(call({"pair", "--corpus", corpus.string(), "--train", "4", "--test", "2", "--out", (dir / "strong").string()})
                .code == 0);
    REQUIRE(call({"pair", "--corpus", corpus.string(), "--policy", "soft", "--train", "4", "--test", "2", "--out",
                  (dir / "soft").string()})
                .code == 0);
    strong = dir / "strong";
    soft = dir / "soft";
    run = dir / "run";
    const auto r = call(std::vector<std::string>{"train", "--manifest", (strong / "train.jsonl").string(), "--epochs", "1",
                                                 "--out", run.string()} +
                        micro_model());
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("version and help") {
  const auto v = call({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(cli::kVersion) != std::string::npos);
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  for (const auto& cmd : cli::command_registry()) {
    CAPTURE(cmd.name);
    const auto h = call({cmd.name, "--help"});
    CHECK(h.code == 0);
    for (const cli::OptionSpec* o : cli::options_for(cmd.name)) {
      CAPTURE(o->flag);
      CHECK(h.out.find("--" + o->flag) != std::string::npos);
    }
    CHECK(h.out.find("--config") != std::string::npos);
    CHECK(h.out.find("--force") != std::string::npos);
  }
}

TEST_CASE("config keys and flags are in one-to-one correspondence per command") {
  for (const auto& cmd : cli::command_registry()) {
    std::set<std::string> flags, keys;
    for (const cli::OptionSpec* o : cli::options_for(cmd.name)) {
      CHECK(flags.insert(o->flag).second);
      CHECK(keys.insert(o->dotted()).second);
    }
    CHECK(flags.size() == keys.size());
  }
}

TEST_CASE("the executable reports its version") {
  const std::string cmd = std::string("\"") + TYPEGAN_EXE + "\" --version > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
}

TEST_CASE("exit codes follow the error kind") {
  ScratchDir dir("cli_errors");
  const std::string font_a = fixture("synth_glyf.ttf").string(), font_b = fixture("synth_cff.otf").string();
  const auto missing = call({"render", "--src-font", (dir / "nope.ttf").string(), "--tgt-font", font_b, "--out",
                             (dir / "x").string()});
  CHECK(missing.code == 3);
  CHECK(missing.err.find("nope.ttf") != std::string::npos);
  CHECK(call({"render", "--src-font", fixture("not_a_font.ttf").string(), "--tgt-font", font_b, "--out",
              (dir / "y").string()})
            .code == 3);
  CHECK(call({"render", "--src-font", font_a, "--tgt-font", font_b, "--n", "500", "--canvas", "32", "--out",
              (dir / "z").string()})
            .code == 2);
  CHECK(call({"render", "--src-font", font_a, "--tgt-font", font_b, "--canvas", "abc"}).code == 2);
  CHECK(call({"render", "--tgt-font", font_b, "--out", (dir / "w").string()}).code == 2);

  const Pipeline& p = pipeline();
  const std::string corpus = p.corpus.string();
  CHECK(call({"pair", "--corpus", corpus, "--policy", "soft", "--overlap", "0.5", "--out", (dir / "p1").string()}).code == 2);
  CHECK(call({"pair", "--corpus", corpus, "--policy", "random", "--out", (dir / "p2").string()}).code == 2);
  CHECK(call({"pair", "--corpus", corpus, "--policy", "loose", "--out", (dir / "p3").string()}).code == 2);
  CHECK(call({"pair", "--corpus", corpus, "--train", "5", "--test", "5", "--out", (dir / "p4").string()}).code == 2);

  const std::string ckpt = (p.run / "checkpoint.tgck").string();
  CHECK(call({"eval", "--checkpoint", ckpt, "--manifest", (p.soft / "train.jsonl").string()}).code == 2);
  CHECK(call({"eval", "--checkpoint", (dir / "none.tgck").string(), "--manifest", (p.strong / "test.jsonl").string()})
            .code == 3);
  CHECK(call(std::vector<std::string>{"train", "--manifest", (p.soft / "train.jsonl").string(), "--w-l2", "1", "--out",
                                      (dir / "t1").string()} +
             micro_model())
            .code == 2);
  CHECK_FALSE(fs::exists(dir / "t1"));
  CHECK(call({"featmaps", "--checkpoint", ckpt, "--image", (dir / "none.png").string(), "--out", (dir / "f").string()})
            .code == 3);
}

TEST_CASE("render and pair write manifests and a run record") {
  const Pipeline& p = pipeline();
  CHECK(read_corpus_manifest(p.corpus).rows.size() == 6);
  const auto rec = nlohmann::json::parse(std::ifstream(p.dir / "corpus" / "run_config.json"));
  CHECK(rec.at("command") == "render");
  CHECK(rec.at("hash_algorithm") == kHashAlgorithm);
  CHECK(rec.at("config_hash").get<std::string>().size() == 16);
  const PairManifest train = read_pair_manifest(p.strong / "train.jsonl");
  const PairManifest test = read_pair_manifest(p.strong / "test.jsonl");
  CHECK(train.size() == 4);
  CHECK(test.size() == 2);
  CHECK(test.policy.kind == PairKind::Strong);
  CHECK(read_pair_manifest(p.soft / "train.jsonl").policy.kind == PairKind::Soft);
  CHECK(read_pair_manifest(p.soft / "test.jsonl").policy.kind == PairKind::Strong);
  for (const auto& t : test.pairs)
    for (const auto& r : train.pairs) CHECK(t.src_cp != r.src_cp);
}

TEST_CASE("outputs are never overwritten without --force") {
  const Pipeline& p = pipeline();
  const std::string corpus = p.corpus.string();
  const auto before = read_bytes(p.strong / "train.jsonl");
  const auto again = call({"pair", "--corpus", corpus, "--train", "4", "--test", "2", "--seed", "9", "--out",
                           p.strong.string()});
  CHECK(again.code == 2);
  CHECK(again.err.find("--force") != std::string::npos);
  CHECK(read_bytes(p.strong / "train.jsonl") == before);
  ScratchDir dir("cli_force");
  CHECK(call({"pair", "--corpus", corpus, "--train", "4", "--test", "2", "--out", (dir / "a").string()}).code == 0);
  CHECK(call({"pair", "--corpus", corpus, "--train", "4", "--test", "2", "--seed", "1", "--out", (dir / "a").string(),
              "--force"})
            .code == 0);
  CHECK(call({"pair", "--corpus", corpus, "--train", "4", "--test", "2", "--out", (dir / "b").string()}).code == 0);
  const PairManifest a = read_pair_manifest(dir / "b" / "train.jsonl");
  const PairManifest b = read_pair_manifest(p.strong / "train.jsonl");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.pairs[i].tgt_cp == b.pairs[i].tgt_cp);
}

TEST_CASE("config files are overridden by flags and reject unknown keys") {
  const Pipeline& p = pipeline();
  ScratchDir dir("cli_config");
  write_text(dir / "ok.toml",
             "seed = 3\n[pair]\ntrain = 3\ntest = 1\npolicy = \"random\"\noverlap = 1.0\n"
             "[model]\ncanvas = 64\n");
  CHECK(call({"pair", "--config", (dir / "ok.toml").string(), "--corpus", p.corpus.string(), "--train", "2", "--out",
              (dir / "a").string()})
            .code == 0);
  const PairManifest m = read_pair_manifest(dir / "a" / "train.jsonl");
  CHECK(m.size() == 2);
  CHECK(m.policy.kind == PairKind::Random);
  CHECK(m.policy.seed == 3);
  CHECK(read_pair_manifest(dir / "a" / "test.jsonl").size() == 1);
  const auto rec = nlohmann::json::parse(std::ifstream(dir / "a" / "run_config.json"));
  CHECK(rec.at("settings").at("pair.train") == 2);

  write_text(dir / "bad_key.toml", "[pair]\ntrian = 3\n");
  CHECK(call({"pair", "--config", (dir / "bad_key.toml").string(), "--corpus", p.corpus.string(), "--out",
              (dir / "b").string()})
            .code == 2);
  write_text(dir / "bad_section.toml", "[pairs]\ntrain = 3\n");
  CHECK(call({"pair", "--config", (dir / "bad_section.toml").string(), "--corpus", p.corpus.string(), "--out",
              (dir / "c").string()})
            .code == 2);
  write_text(dir / "bad_type.toml", "[pair]\ntrain = \"three\"\n");
  CHECK(call({"pair", "--config", (dir / "bad_type.toml").string(), "--corpus", p.corpus.string(), "--out",
              (dir / "d").string()})
            .code == 2);
  CHECK(call({"pair", "--config", (dir / "missing.toml").string(), "--corpus", p.corpus.string()}).code == 3);
}

TEST_CASE("train, resume, eval, infer, grid, featmaps, turing and score") {
  const Pipeline& p = pipeline();
  ScratchDir dir("cli_flow");
  const std::string ckpt = (p.run / "checkpoint.tgck").string();
  CHECK(fs::exists(p.run / "train_log.csv"));
  CHECK(load_checkpoint(ckpt).meta.at("step") == 2);

  SUBCASE("resume extends a run") {
    const fs::path run = dir / "resumed";
    const auto base = std::vector<std::string>{"train", "--manifest", (p.strong / "train.jsonl").string(), "--out",
                                               run.string()} +
                      micro_model();
    CHECK(call(base + std::vector<std::string>{"--epochs", "1"}).code == 0);
    CHECK(call(base + std::vector<std::string>{"--epochs", "2"}).code == 2);
    CHECK(call(base + std::vector<std::string>{"--epochs", "2", "--resume", (run / "checkpoint.tgck").string()}).code ==
          0);
    CHECK(load_checkpoint(run / "checkpoint.tgck").meta.at("step") == 4);
    const fs::path straight = dir / "straight";
    CHECK(call(std::vector<std::string>{"train", "--manifest", (p.strong / "train.jsonl").string(), "--out",
                                        straight.string(), "--epochs", "2"} +
               micro_model())
              .code == 0);
    CHECK(read_bytes(run / "checkpoint.tgck") == read_bytes(straight / "checkpoint.tgck"));
    CHECK(read_bytes(run / "train_log.csv") == read_bytes(straight / "train_log.csv"));
    CHECK(call(base + std::vector<std::string>{"--epochs", "3", "--seed", "5", "--resume",
                                               (run / "checkpoint.tgck").string()})
              .code == 2);
  }

  SUBCASE("pretrain seeds a warm start") {
    const fs::path pre = dir / "pre";
    CHECK(call(std::vector<std::string>{"pretrain", "--manifest", (p.strong / "train.jsonl").string(), "--epochs", "1",
                                        "--out", pre.string()} +
               micro_model())
              .code == 0);
    CHECK(call(std::vector<std::string>{"pretrain", "--manifest", (p.soft / "train.jsonl").string(), "--epochs", "1",
                                        "--out", (dir / "pre2").string()} +
               micro_model())
              .code == 2);
    CHECK(call({"train", "--manifest", (p.soft / "train.jsonl").string(), "--no-such-flag", "--out",
                (dir / "w0").string()})
              .code == 2);
    CHECK(call(std::vector<std::string>{"train", "--manifest", (p.soft / "train.jsonl").string(), "--epochs", "1",
                                        "--warm-start", (pre / "checkpoint.tgck").string(), "--out",
                                        (dir / "warm").string()} +
               micro_model())
              .code == 0);
    const Checkpoint a = load_checkpoint(pre / "checkpoint.tgck");
    CHECK(a.meta.at("config").at("weights").at("l2") == 1.0);
  }

  SUBCASE("eval prints a report") {
    const auto r = call({"eval", "--checkpoint", ckpt, "--manifest", (p.strong / "test.jsonl").string(), "--phase", "both",
                         "--out", (dir / "eval.json").string()});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("train").at("n") == 2);
    CHECK(j.at("infer").at("mean_l2").get<double>() > 0.0);
    CHECK(j.at("checkpoint_config_hash") == load_checkpoint(ckpt).meta.at("config_hash"));
    CHECK(nlohmann::json::parse(std::ifstream(dir / "eval.json")) == j);
    CHECK(call({"eval", "--checkpoint", ckpt, "--manifest", (p.strong / "test.jsonl").string(), "--phase", "sideways"})
              .code == 2);
  }

  SUBCASE("infer transfers text and manifests") {
    const auto r = call({"infer", "--checkpoint", ckpt, "--text", "\xE6\xB0\xB8\xE6\xB0\xB8", "--font",
                         fixture("synth_glyf.ttf").string(), "--out", (dir / "inf").string()});
    REQUIRE(r.code == 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "inf")) files += e.path().extension() == ".png";
    CHECK(files == 1);
    const Tensor img = read_png(dir / "inf" / "U+6C38.png");
    CHECK(img.dim(0) == 32);
    CHECK(call({"infer", "--checkpoint", ckpt, "--text", "Z", "--font", fixture("synth_glyf.ttf").string(), "--out",
                (dir / "inf2").string()})
              .code == 3);
    CHECK(call({"infer", "--checkpoint", ckpt, "--text", "A", "--out", (dir / "inf3").string()}).code == 2);
    CHECK(call({"infer", "--checkpoint", ckpt, "--manifest", (p.soft / "train.jsonl").string(), "--out",
                (dir / "inf4").string()})
              .code == 0);
    std::size_t more = 0;
    for (const auto& e : fs::directory_iterator(dir / "inf4")) more += e.path().extension() == ".png";
    CHECK(more == 4);
  }

  SUBCASE("grid, featmaps, turing and score") {
    CHECK(call({"grid", "--checkpoint", ckpt, "--manifest", (p.strong / "train.jsonl").string(), "--rows", "2", "--out",
                (dir / "g.png").string()})
              .code == 0);
    const Tensor g = read_png(dir / "g.png");
    CHECK(g.dim(0) == 64);
    CHECK(g.dim(1) == 96);
    CHECK(fs::exists(dir / "g.png.run.json"));
    CHECK(call({"featmaps", "--checkpoint", ckpt, "--text", "A", "--font", fixture("synth_glyf.ttf").string(), "--out",
                (dir / "fm").string()})
              .code == 0);
    CHECK(fs::exists(dir / "fm" / "conv1.png"));
    CHECK(fs::exists(dir / "fm" / "deconv5.png"));
    CHECK(call({"featmaps", "--checkpoint", ckpt, "--text", "A", "--font", fixture("synth_glyf.ttf").string(), "--layers",
                "conv9", "--out", (dir / "fm2").string()})
              .code == 2);
    CHECK(call({"turing", "--checkpoint", ckpt, "--manifest", (p.strong / "train.jsonl").string(), "--n", "3", "--out",
                (dir / "tt").string()})
              .code == 0);
    const auto key = read_turing_key(dir / "tt" / kTuringKeyName);
    REQUIRE(key.size() == 6);
    std::string all_right, all_generated;
    for (bool k : key) {
      all_right += k ? "generated\n" : "real\n";
      all_generated += "generated\n";
    }
    write_text(dir / "right.txt", all_right);
    write_text(dir / "gen.txt", all_generated);
    const auto s1 = call({"score", "--key", (dir / "tt" / kTuringKeyName).string(), "--responses",
                          (dir / "right.txt").string()});
    CHECK(s1.code == 0);
    CHECK(s1.out.find('1') != std::string::npos);
    const auto s2 = call({"score", "--key", (dir / "tt" / kTuringKeyName).string(), "--responses",
                          (dir / "gen.txt").string()});
    CHECK(s2.code == 0);
    CHECK(s2.out.find("0.5") != std::string::npos);
    write_text(dir / "short.txt", "real\n");
    CHECK(call({"score", "--key", (dir / "tt" / kTuringKeyName).string(), "--responses", (dir / "short.txt").string()})
              .code == 2);
  }
}
