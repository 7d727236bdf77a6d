#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "test_support.hpp"
#include "typegan/errors.hpp"
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

std::map<std::string, Tensor> trainable(const ParamStore& p) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, e] : p.entries()) {
    if (e.trainable) out.emplace(name, e.var.value());
  }
  return out;
}

TrainConfig tiny(PairKind policy = PairKind::Strong) {
  TrainConfig c = TrainConfig::micro(32, 2);
  c.batch_size = 3;
  c.epochs = 2;
  c.policy = policy;
  c.seed = 7;
  return c;
}

/// Six-glyph corpus from the fixture fonts and a manifest over all of it.
struct Corpus {
  ScratchDir dir{"trainkit_corpus"};
  CorpusManifest corpus;

  Corpus() {
    const auto path = typegan::testing::render_pair_corpus(fixture("synth_glyf.ttf"), fixture("synth_cff.otf"), 6, 32,
                                                           1, dir / "corpus");
    corpus = read_corpus_manifest(path);
  }

  PairManifest pairs(PairKind kind, std::uint64_t seed = 3) const {
    std::vector<char32_t> cps;
    for (const auto& r : corpus.rows) cps.push_back(r.codepoint);
    PairPolicy p;
    p.kind = kind;
    p.seed = seed;
    return build_pairs(cps, p, corpus);
  }
};

Corpus& shared_corpus() {
  static Corpus c;
  return c;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig c = tiny();
  CHECK_NOTHROW(c.validate());
  c.weights.l2 = 1.0;
  CHECK_NOTHROW(c.validate());
  for (PairKind k : {PairKind::Soft, PairKind::Random}) {
    c.policy = k;
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
    CHECK(kind_of([&] { Trainer t(c); }) == ErrorKind::InvalidConfig);
  }
  c = tiny();
  c.style_index = 1;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::UnknownStyleIndex);
  c = tiny();
  c.batch_size = 0;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
  c = tiny();
  c.weights.tid = -1.0;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
  c = tiny();
  c.adam.beta1 = 1.0;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
  c = tiny();
  c.augment.scale_lo = 1.2;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("config hash covers the trajectory and nothing else") {
  const TrainConfig a = tiny();
  TrainConfig b = a;
  b.epochs = 50;
  b.checkpoint_every = 3;
  b.sample_every = 4;
  b.warm_start = "/elsewhere.tgck";
  CHECK(a.config_hash() == b.config_hash());
  b.seed = 8;
  CHECK(a.config_hash() != b.config_hash());
  b = a;
  b.weights.tv = 0.2;
  CHECK(a.config_hash() != b.config_hash());
  CHECK(a.config_hash().size() == 16);
  const TrainConfig back = TrainConfig::from_json(a.to_json());
  CHECK(back.to_json() == a.to_json());
  CHECK(kind_of([] { TrainConfig::from_json(nlohmann::json::object()); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("adam follows the bias-corrected update") {
  ParamStore store;
  Var& w = store.add("w", Tensor({2}, std::vector<double>{1.0, -2.0}), true);
  Var& frozen = store.add("frozen", Tensor({1}, 5.0), true);
  frozen.set_requires_grad(false);
  store.add("stat", Tensor({1}, 3.0), false);
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam adam(cfg);
  // Gradient of sum(w * w) is 2w.
  auto grad_step = [&] {
    store.zero_grad();
    Var loss = ops::weighted_sum(std::array<std::pair<double, Var>, 1>{
        std::pair<double, Var>{2.0, ops::mean_squared_error(w, Var(Tensor({2})))}});
    backward(loss);
    adam.step(store);
  };
  grad_step();
  // First step: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  CHECK(w.value()[0] == doctest::Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
  CHECK(w.value()[1] == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(frozen.value()[0] == 5.0);
  CHECK(store.at("stat").value()[0] == 3.0);

  // Second step against an independent recurrence.
  const double w0 = w.value()[0];
  const double g1 = 2.0, g2 = 2.0 * w0;
  const double m = 0.5 * (0.5 * g1) + 0.5 * g2;
  const double v = 0.999 * (0.001 * g1 * g1) + 0.001 * g2 * g2;
  const double m_hat = m / (1 - 0.25), v_hat = v / (1 - 0.999 * 0.999);
  grad_step();
  CHECK(w.value()[0] == doctest::Approx(w0 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-12));

  std::map<std::string, Tensor> saved;
  adam.save("opt/", saved);
  CHECK(saved.at("opt/w/t")[0] == 2.0);
  CHECK_FALSE(saved.contains("opt/frozen/t"));
  Adam other(cfg);
  other.load("opt/", saved);
  std::map<std::string, Tensor> again;
  other.save("opt/", again);
  CHECK(again == saved);
}

TEST_CASE("augmentation") {
  Rng rng(1);
  const Tensor batch = random_tensor({4, 16, 16, 3}, rng);
  AugmentConfig cfg = AugmentConfig::for_canvas(32);
  CHECK(cfg.max_shift_px == 1);
  CHECK(AugmentConfig::for_canvas(256).max_shift_px == 8);
  CHECK(augment(batch, cfg, rng) == batch);

  SUBCASE("identity resample reproduces the image") {
    const Tensor img = batch.slice_batch(0, 1).reshaped({16, 16, 3});
    const Tensor out = affine_resample(img, 0.0, 0.0, 1.0, 1.0);
    for (std::int64_t i = 0; i < img.numel(); ++i) CHECK(out[i] == doctest::Approx(img[i]).epsilon(1e-12));
  }
  SUBCASE("integer shifts translate and fill") {
    const Tensor img = batch.slice_batch(0, 1).reshaped({16, 16, 3});
    const Tensor out = affine_resample(img, 2.0, -1.0, 1.0, 0.25);
    for (std::int64_t y = 0; y < 16; ++y)
      for (std::int64_t x = 0; x < 16; ++x) {
        const std::int64_t sy = y + 1, sx = x - 2;
        const double want = (sy < 16 && sx >= 0) ? img[(sy * 16 + sx) * 3 + 1] : 0.25;
        CHECK(out[(y * 16 + x) * 3 + 1] == doctest::Approx(want).epsilon(1e-12));
      }
  }
  SUBCASE("scaling about the center keeps a centered disk centered") {
    Tensor img({16, 16, 1}, 1.0);
    for (int y = 6; y < 10; ++y)
      for (int x = 6; x < 10; ++x) img[y * 16 + x] = -1.0;
    const Tensor out = affine_resample(img, 0.0, 0.0, 1.5, 1.0);
    double ink_in = 0, ink_out = 0;
    for (double v : img.values()) ink_in += (1 - v) / 2;
    for (double v : out.values()) ink_out += (1 - v) / 2;
    CHECK(ink_out == doctest::Approx(ink_in * 2.25).epsilon(0.01));
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 16; ++x) CHECK(out[y * 16 + x] == doctest::Approx(out[(15 - y) * 16 + x]).epsilon(1e-12));
  }
  SUBCASE("enabled augmentation is seeded, bounded and shape preserving") {
    cfg.enabled = true;
    cfg.max_shift_px = 3;
    Rng a(5), b(5), c(6);
    const Tensor x = augment(batch, cfg, a);
    CHECK(x == augment(batch, cfg, b));
    CHECK(x != augment(batch, cfg, c));
    CHECK(x.shape() == batch.shape());
    CHECK(x.min() >= -1.0);
    CHECK(x.max() <= 1.0);
    CHECK(x != batch);
  }
  CHECK(kind_of([&] { affine_resample(batch, 0, 0, 1, 1); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("epoch bookkeeping") {
  CHECK(steps_per_epoch(900, 16) == 57);
  CHECK(steps_per_epoch(16, 16) == 1);
  CHECK(steps_per_epoch(17, 16) == 2);
  CHECK(kind_of([] { steps_per_epoch(10, 0); }) == ErrorKind::InvalidConfig);
  auto order = epoch_order(100, 3, 0);
  CHECK(order == epoch_order(100, 3, 0));
  CHECK(order != epoch_order(100, 3, 1));
  CHECK(order != epoch_order(100, 4, 0));
  std::sort(order.begin(), order.end());
  std::vector<std::int64_t> iota(100);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(order == iota);
}

TEST_CASE("a zero learning rate leaves every trainable tensor untouched") {
  TrainConfig c = tiny();
  c.adam.learning_rate = 0.0;
  Trainer t(c);
  const auto g0 = trainable(t.generator().params());
  const auto d0 = trainable(t.discriminator().params());
  Rng rng(2);
  const LossReport r = t.train_step(random_tensor({3, 32, 32, 3}, rng), random_tensor({3, 32, 32, 3}, rng));
  CHECK(r.step == 1);
  CHECK(t.step() == 1);
  CHECK(r.all_finite());
  CHECK(trainable(t.generator().params()) == g0);
  CHECK(trainable(t.discriminator().params()) == d0);
}

TEST_CASE("a training step reports consistent losses and moves parameters") {
  TrainConfig c = tiny();
  c.weights = LossWeights{1.0, 1.0, 10.0, 0.1, 2.0};
  Trainer t(c);
  const auto g0 = trainable(t.generator().params());
  Rng rng(3);
  const LossReport r = t.train_step(random_tensor({3, 32, 32, 3}, rng), random_tensor({3, 32, 32, 3}, rng));
  CHECK(r.gan_d > 0.0);
  CHECK(r.total_d == doctest::Approx(r.gan_d).epsilon(1e-15));
  CHECK(r.total_g == doctest::Approx(r.gan_g + r.const_ + 10 * r.tid + 0.1 * r.tv + 2 * r.l2).epsilon(1e-12));
  CHECK(trainable(t.generator().params()) != g0);
}

TEST_CASE("encoder freezing holds the encoder for the configured steps") {
  TrainConfig c = tiny();
  c.freeze_encoder_steps = 1;
  Trainer t(c);
  Rng rng(4);
  const Tensor x = random_tensor({3, 32, 32, 3}, rng), y = random_tensor({3, 32, 32, 3}, rng);
  const auto before = trainable(t.generator().params());
  t.train_step(x, y);
  const auto after = trainable(t.generator().params());
  for (const auto& [name, v] : before) {
    CAPTURE(name);
    if (Generator::is_encoder_param(name)) CHECK(after.at(name) == v);
  }
  CHECK(after.at("gen/deconv1/kernel") != before.at("gen/deconv1/kernel"));
  t.train_step(x, y);
  CHECK(t.generator().params().at("gen/conv1/kernel").value() != before.at("gen/conv1/kernel"));
}

TEST_CASE("non-finite values stop training") {
  ScratchDir dir("trainkit_nonfinite");
  Rng rng(5);
  const Tensor x = random_tensor({3, 32, 32, 3}, rng), y = random_tensor({3, 32, 32, 3}, rng);
  Tensor bad = x;
  bad[10] = std::numeric_limits<double>::quiet_NaN();
  Trainer t(tiny());
  CHECK(kind_of([&] { t.train_step(bad, y); }) == ErrorKind::NonFiniteInput);
  CHECK(kind_of([&] { t.train_step(x, Tensor({2, 32, 32, 3})); }) == ErrorKind::ShapeMismatch);

  t.generator().params().at("gen/deconv3/kernel").mutable_value()[0] = std::numeric_limits<double>::infinity();
  t.set_dump_path(dir / "dump.tgck");
  try {
    t.train_step(x, y);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteLoss);
    CHECK(e.detail().find("gen/deconv3/kernel") != std::string::npos);
  }
  const Checkpoint dump = load_checkpoint(dir / "dump.tgck");
  CHECK(dump.meta.at("kind") == "non_finite_dump");
  CHECK(dump.tensors.contains("batch/src"));
  CHECK(t.step() == 0);
}

TEST_CASE("checkpoint restore and warm start") {
  Rng rng(6);
  const Tensor x = random_tensor({3, 32, 32, 3}, rng), y = random_tensor({3, 32, 32, 3}, rng);
  Trainer a(tiny());
  a.train_step(x, y);
  const Checkpoint ck = a.checkpoint();
  CHECK(ck.meta.at("step") == 1);
  CHECK(ck.meta.at("config_hash") == tiny().config_hash());

  Trainer b(tiny());
  b.restore(parse_checkpoint(serialize_checkpoint(ck)));
  CHECK(b.step() == 1);
  const LossReport ra = a.train_step(x, y);
  const LossReport rb = b.train_step(x, y);
  CHECK(ra.csv_row() == rb.csv_row());
  CHECK(serialize_checkpoint(a.checkpoint()) == serialize_checkpoint(b.checkpoint()));

  TrainConfig other = tiny();
  other.seed = 99;
  Trainer c(other);
  CHECK(kind_of([&] { c.restore(ck); }) == ErrorKind::ConfigMismatch);

  c.warm_start(ck);
  for (const auto& [name, e] : c.generator().params().entries()) {
    CAPTURE(name);
    if (Generator::is_encoder_param(name)) {
      CHECK(e.var.value() == ck.tensors.at(name));
    } else if (name.find("kernel") != std::string::npos) {
      CHECK(e.var.value() != ck.tensors.at(name));
    }
  }
  TrainConfig wider = tiny();
  wider.model.base_channels = 4;
  wider.model.style_embed_dim = 8;
  Trainer d(wider);
  CHECK(kind_of([&] { d.warm_start(ck); }) == ErrorKind::ConfigMismatch);

  const Generator g = load_generator(ck);
  CHECK(g.spec() == tiny().model);
  CHECK(g.params().snapshot() == tensors_with_prefix(ck, "gen/"));
}

TEST_CASE("fit writes its outputs and resumes onto the same trajectory") {
  const Corpus& data = shared_corpus();
  const PairManifest m = data.pairs(PairKind::Strong);
  TrainConfig c = tiny();
  c.batch_size = 4;
  c.checkpoint_every = 2;
  c.sample_every = 3;
  ScratchDir dir("trainkit_fit");

  FitOptions full;
  full.out_dir = dir / "full";
  const FitResult a = fit(c, m, full);
  CHECK(a.log.size() == 4);  // 2 epochs of ceil(6 / 4)
  CHECK(std::filesystem::exists(dir / "full" / "checkpoint.tgck"));
  CHECK(std::filesystem::exists(dir / "full" / "checkpoints" / "step_4.tgck"));
  CHECK(std::filesystem::exists(dir / "full" / "samples" / "step_3.png"));
  std::ifstream log(dir / "full" / "train_log.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 5);

  FitOptions part;
  part.out_dir = dir / "part";
  part.stop_after_step = 2;
  const FitResult first = fit(c, m, part);
  CHECK(first.log.size() == 2);
  FitOptions rest;
  rest.out_dir = dir / "part";
  const FitResult second = fit(c, m, rest, load_checkpoint(dir / "part" / "checkpoint.tgck"));
  CHECK(second.log.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(second.log[i].csv_row() == a.log[i + 2].csv_row());
  CHECK(read_bytes(dir / "part" / "checkpoint.tgck") == read_bytes(dir / "full" / "checkpoint.tgck"));
  CHECK(read_bytes(dir / "part" / "train_log.csv") == read_bytes(dir / "full" / "train_log.csv"));

  TrainConfig none = c;
  none.epochs = 0;
  const FitResult z = fit(none, m);
  CHECK(z.log.empty());
  CHECK(z.final_checkpoint.meta.at("step") == 0);

  CHECK(kind_of([&] { fit(tiny(PairKind::Soft), m); }) == ErrorKind::ConfigMismatch);
}

TEST_CASE("encoder pretraining") {
  const Corpus& data = shared_corpus();
  TrainConfig c = tiny();
  c.epochs = 1;
  const Checkpoint ck = pretrain_encoder(c, data.pairs(PairKind::Strong));
  CHECK(ck.meta.at("step") == 2);
  CHECK(ck.meta.at("config").at("weights").at("l2") == 1.0);
  CHECK(ck.meta.at("config").at("weights").at("gan") == 0.0);
  CHECK(kind_of([&] { pretrain_encoder(c, data.pairs(PairKind::Soft)); }) == ErrorKind::MissingGroundTruth);
  CHECK(kind_of([&] { pretrain_encoder(c, PairManifest{}); }) == ErrorKind::InsufficientCorpus);
  Trainer t(tiny(PairKind::Soft));
  CHECK_NOTHROW(t.warm_start(ck));
}

TEST_CASE("pair datasets load images in manifest order") {
  const Corpus& data = shared_corpus();
  const PairManifest m = data.pairs(PairKind::Soft);
  const PairDataset d = PairDataset::load(m, 32);
  CHECK(d.size() == 6);
  CHECK(d.src.shape() == Shape{6, 32, 32, 3});
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(d.tgt_cps[i] == m.pairs[i].tgt_cp);
  const std::array<std::int64_t, 2> idx{4, 1};
  CHECK(d.gather_tgt(idx).slice_batch(1, 1) == d.tgt.slice_batch(1, 1));
  CHECK(kind_of([&] { PairDataset::load(m, 64); }) == ErrorKind::ShapeMismatch);
  CHECK(kind_of([&] { PairDataset::load(PairManifest{}, 32); }) == ErrorKind::EmptyManifest);
}
