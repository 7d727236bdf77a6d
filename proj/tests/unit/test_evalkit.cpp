#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "test_support.hpp"
#include "typegan/errors.hpp"
#include "typegan/evalkit.hpp"
#include "typegan/glyphrender.hpp"
#include "typegan/trainkit.hpp"

using namespace typegan;
using typegan::testing::fixture;
using typegan::testing::random_tensor;
using typegan::testing::read_bytes;
using typegan::testing::ScratchDir;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::InvalidConfig;
}

struct World {
  ScratchDir dir{"evalkit_world"};
  CorpusManifest corpus;
  Checkpoint ckpt;

  World() {
    corpus = read_corpus_manifest(typegan::testing::render_pair_corpus(
        fixture("synth_glyf.ttf"), fixture("synth_cff.otf"), 6, 32, 1, dir / "corpus"));
    TrainConfig c = TrainConfig::micro(32, 2);
    c.batch_size = 3;
    Trainer t(c);
    Rng rng(1);
    t.train_step(random_tensor({3, 32, 32, 3}, rng), random_tensor({3, 32, 32, 3}, rng));
    ckpt = t.checkpoint();
  }

  PairManifest pairs(PairKind kind) const {
    std::vector<char32_t> cps;
    for (const auto& r : corpus.rows) cps.push_back(r.codepoint);
    PairPolicy p;
    p.kind = kind;
    p.seed = 2;
    return build_pairs(cps, p, corpus);
  }
};

World& world() {
  static World w;
  return w;
}

}  // namespace

TEST_CASE("evaluate measures pixel L2 against the ground truth") {
  const World& w = world();
  const PairManifest m = w.pairs(PairKind::Strong);
  const EvalReport r = evaluate(w.ckpt, m, Phase::Infer);
  CHECK(r.n == 6);
  CHECK(r.per_glyph_l2.size() == 6);
  CHECK(r.mean_l2 > 0.0);
  CHECK(r.mean_l2 <= 4.0);
  CHECK(r.phase_used == Phase::Infer);

  // Independent recomputation through the generator.
  Generator g = load_generator(w.ckpt);
  g.set_phase(Phase::Infer);
  const PairDataset d = PairDataset::load(m, 32);
  const Tensor out = g.generate(Var(d.src), 0).value();
  double sum = 0;
  for (std::int64_t i = 0; i < out.numel(); ++i) sum += (out[i] - d.tgt[i]) * (out[i] - d.tgt[i]);
  CHECK(r.mean_l2 == doctest::Approx(sum / static_cast<double>(out.numel())).epsilon(1e-12));

  const EvalReport t1 = evaluate(w.ckpt, m, Phase::Train);
  const EvalReport t2 = evaluate(w.ckpt, m, Phase::Train);
  CHECK(t1.phase_used == Phase::Train);
  CHECK(t1.mean_l2 == t2.mean_l2);
  CHECK(t1.mean_l2 != r.mean_l2);

  CHECK(kind_of([&] { evaluate(w.ckpt, w.pairs(PairKind::Soft), Phase::Infer); }) == ErrorKind::MissingGroundTruth);
  CHECK(kind_of([&] { evaluate(w.ckpt, w.pairs(PairKind::Random), Phase::Infer); }) == ErrorKind::MissingGroundTruth);
  PairManifest empty;
  CHECK(kind_of([&] { evaluate(w.ckpt, empty, Phase::Infer); }) == ErrorKind::EmptyManifest);

  ScratchDir dir("evalkit_report");
  write_eval_report(dir / "r.json", r);
  const auto bytes = read_bytes(dir / "r.json");
  const auto j = nlohmann::json::parse(std::string(bytes.begin(), bytes.end()));
  CHECK(j.at("n") == 6);
  CHECK(j.at("phase") == "infer");
}

TEST_CASE("evaluation is read-only") {
  const World& w = world();
  const std::string before = serialize_checkpoint(w.ckpt);
  Generator g = load_generator(w.ckpt);
  const auto params = g.params().snapshot();
  Rng rng(3);
  const Tensor x = random_tensor({4, 32, 32, 3}, rng);
  EvalOptions opt;
  opt.batch_size = 2;
  run_generator(g, x, Phase::Train, opt);
  run_generator(g, x, Phase::Infer, opt);
  CHECK(g.params().snapshot() == params);
  CHECK(g.phase() == Phase::Train);
  evaluate(w.ckpt, w.pairs(PairKind::Strong), Phase::Train);
  CHECK(serialize_checkpoint(w.ckpt) == before);
  opt.batch_size = 0;
  CHECK(kind_of([&] { run_generator(g, x, Phase::Infer, opt); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("sample grids") {
  const World& w = world();
  ScratchDir dir("evalkit_grid");
  sample_grid(w.ckpt, w.pairs(PairKind::Strong), 1, dir / "strong.png");
  const Tensor strong = read_png(dir / "strong.png");
  CHECK(strong.dim(0) == 32);
  CHECK(strong.dim(1) == 96);
  sample_grid(w.ckpt, w.pairs(PairKind::Soft), 10, dir / "soft.png");
  const Tensor soft = read_png(dir / "soft.png");
  CHECK(soft.dim(0) == 6 * 32);
  CHECK(soft.dim(1) == 64);
  sample_grid(w.ckpt, w.pairs(PairKind::Soft), 10, dir / "soft2.png");
  CHECK(read_bytes(dir / "soft.png") == read_bytes(dir / "soft2.png"));

  Rng rng(4);
  const Tensor a = random_tensor({2, 4, 4, 3}, rng), b = random_tensor({2, 4, 4, 3}, rng);
  const Tensor g = grid_image(a, &b, a);
  CHECK(g.shape() == Shape{8, 12});
  CHECK(g[(5 * 12) + 4 + 1] == b.at(1, 1, 1, 0));
  CHECK(kind_of([&] { grid_image(a, nullptr, Tensor({1, 4, 4, 3})); }) == ErrorKind::ShapeMismatch);
  CHECK(kind_of([&] { sample_grid(w.ckpt, PairManifest{}, 1, dir / "x.png"); }) == ErrorKind::EmptyManifest);
}

TEST_CASE("feature maps tile one cell per channel") {
  const World& w = world();
  ScratchDir dir("evalkit_features");
  const Tensor glyph = PairDataset::load(w.pairs(PairKind::Strong), 32).src.slice_batch(0, 1);
  const auto paths = feature_maps(w.ckpt, glyph, {"conv1", "conv3", "deconv5"}, dir / "maps");
  REQUIRE(paths.size() == 3);
  // conv1 has 2 channels of 16x16 on a 2x1 grid; conv3 has 8 of 4x4 on 3x3; deconv5 has 3 of 32x32 on 2x2.
  const Tensor c1 = read_png(paths[0]);
  CHECK(c1.dim(0) == 16);
  CHECK(c1.dim(1) == 32);
  const Tensor c3 = read_png(paths[1]);
  CHECK(c3.dim(0) == 12);
  CHECK(c3.dim(1) == 12);
  const Tensor d5 = read_png(paths[2]);
  CHECK(d5.dim(0) == 64);
  CHECK(d5.dim(1) == 64);
  CHECK(kind_of([&] { feature_maps(w.ckpt, glyph, {"conv6"}, dir / "bad"); }) == ErrorKind::UnknownLayer);
  CHECK(kind_of([&] { feature_maps(w.ckpt, glyph, {"fc"}, dir / "bad"); }) == ErrorKind::UnknownLayer);

  Tensor act({1, 2, 2, 2});
  act.at(0, 0, 0, 0) = 3.0;
  act.at(0, 1, 1, 0) = 1.0;
  const Tensor m = feature_montage(act);
  CHECK(m.shape() == Shape{2, 4});
  CHECK(m[0] == 1.0);
  CHECK(m[1] == -1.0);
  CHECK(m[5] == doctest::Approx(1.0 / 3.0 * 2.0 - 1.0));
  CHECK(m[2] == -1.0);  // constant channel maps to the low end
}

TEST_CASE("turing packets are balanced, seeded and scorable") {
  const World& w = world();
  ScratchDir dir("evalkit_turing");
  const PairManifest m = w.pairs(PairKind::Strong);
  const TuringPacket a = turing_packet(w.ckpt, m, 5, 11, dir / "a");
  CHECK(a.images.size() == 10);
  CHECK(std::count(a.is_generated.begin(), a.is_generated.end(), true) == 5);
  CHECK(a.key_path.filename() == kTuringKeyName);
  CHECK(read_turing_key(a.key_path) == a.is_generated);
  const TuringPacket b = turing_packet(w.ckpt, m, 5, 11, dir / "b");
  CHECK(b.is_generated == a.is_generated);
  for (std::size_t i = 0; i < a.images.size(); ++i) CHECK(read_bytes(a.images[i]) == read_bytes(b.images[i]));
  bool differs = false;
  for (std::uint64_t s = 12; s < 20 && !differs; ++s) {
    differs = turing_packet(w.ckpt, m, 5, s, dir / ("s" + std::to_string(s))).is_generated != a.is_generated;
  }
  CHECK(differs);

  CHECK(score_key(a.is_generated, a.is_generated) == 1.0);
  std::vector<bool> flipped(a.is_generated.size());
  std::transform(a.is_generated.begin(), a.is_generated.end(), flipped.begin(), [](bool v) { return !v; });
  CHECK(score_key(a.is_generated, flipped) == 0.0);
  CHECK(score_key({true, false, true, false}, {true, true, true, true}) == 0.5);
  CHECK(kind_of([] { score_key({true}, {true, false}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([&] { turing_packet(w.ckpt, m, 7, 1, dir / "c"); }) == ErrorKind::InsufficientCorpus);
  CHECK(kind_of([&] { turing_packet(w.ckpt, w.pairs(PairKind::Soft), 2, 1, dir / "d"); }) ==
        ErrorKind::MissingGroundTruth);
  CHECK(kind_of([&] { read_turing_key(dir / "none.json"); }) == ErrorKind::FileNotFound);
}
