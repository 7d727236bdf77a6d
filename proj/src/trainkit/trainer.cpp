#include <array>

#include "typegan/errors.hpp"
#include "typegan/ops.hpp"
#include "typegan/trainkit.hpp"

namespace typegan {

namespace {

constexpr std::uint64_t kInitSalt = 0;
constexpr std::uint64_t kTrainSalt = 1;
constexpr int kFormatVersion = 1;

Rng init_rng(const TrainConfig& c) { return Rng(mix_seed(c.seed, kInitSalt)); }

void set_encoder_requires_grad(ParamStore& params, bool on) {
  for (auto& [name, e] : params.entries()) {
    if (e.trainable && Generator::is_encoder_param(name)) e.var.set_requires_grad(on);
  }
}

std::string non_finite_names(const ParamStore& params) {
  std::string out;
  for (const auto& [name, e] : params.entries()) {
    if (!e.var.value().all_finite()) out += (out.empty() ? "" : ", ") + name;
  }
  return out;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config)
    : config_((config.validate(), config)),
      gen_(config.model),
      disc_(config.model),
      adam_g_(config.adam),
      adam_d_(config.adam),
      rng_(mix_seed(config.seed, kTrainSalt)) {
  Rng r = init_rng(config_);
  gen_ = Generator(config_.model, r);
  disc_ = Discriminator(config_.model, r);
}

void Trainer::non_finite(const std::string& what, const std::map<std::string, Tensor>& extra) {
  std::string detail = what + " at step " + std::to_string(step_ + 1);
  const std::string bad_g = non_finite_names(gen_.params());
  const std::string bad_d = non_finite_names(disc_.params());
  if (!bad_g.empty() || !bad_d.empty()) detail += "; non-finite parameters: " + bad_g + (bad_g.empty() ? "" : " ") + bad_d;
  if (!dump_path_.empty()) {
    Checkpoint dump;
    dump.meta["kind"] = "non_finite_dump";
    dump.meta["step"] = step_ + 1;
    dump.meta["what"] = what;
    dump.tensors = extra;
    for (const auto& [name, t] : gen_.params().snapshot()) dump.tensors.emplace(name, t);
    for (const auto& [name, t] : disc_.params().snapshot()) dump.tensors.emplace(name, t);
    try {
      save_checkpoint(dump_path_, dump);
      detail += "; tensors dumped to " + dump_path_.string();
    } catch (const Error&) {
      detail += "; dump to " + dump_path_.string() + " failed";
    }
  }
  throw Error(ErrorKind::NonFiniteLoss, detail);
}

LossReport Trainer::train_step(const Tensor& src_batch, const Tensor& tgt_batch) {
  if (src_batch.shape() != tgt_batch.shape()) {
    throw Error(ErrorKind::ShapeMismatch, "source batch " + shape_to_string(src_batch.shape()) + " vs target batch " +
                                              shape_to_string(tgt_batch.shape()));
  }
  if (!src_batch.all_finite() || !tgt_batch.all_finite()) throw Error(ErrorKind::NonFiniteInput, "training batch");

  const LossWeights& w = config_.weights;
  const std::int64_t style = config_.style_index;
  const std::int64_t b = src_batch.dim(0);
  gen_.set_phase(Phase::Train);
  disc_.set_phase(Phase::Train);
  gen_.params().set_trainable_requires_grad(true);
  if (step_ < config_.freeze_encoder_steps) set_encoder_requires_grad(gen_.params(), false);
  disc_.params().set_trainable_requires_grad(true);

  const Var src(src_batch), tgt(tgt_batch);
  LossReport report;
  report.step = step_ + 1;
  try {
    ForwardContext gctx;
    gctx.dropout_rng = &rng_;
    const Generator::Encoded enc_src = gen_.encode(src, gctx);
    const Var fake_src = gen_.decode(enc_src, style, gctx);
    const Var fake_tgt = gen_.generate(tgt, style, gctx);

    // Discriminator update on (real target, G(source), G(target)).
    {
      const std::array<Var, 3> parts{tgt, fake_src.detach(), fake_tgt.detach()};
      const Var logits = disc_.discriminate(ops::concat_batch(parts));
      const auto gan = losses::gan_losses(ops::slice_batch(logits, 0, b), ops::slice_batch(logits, b, b),
                                          ops::slice_batch(logits, 2 * b, b));
      const Var total_d = losses::total_discriminator_loss(w, gan.d);
      report.gan_d = gan.d.value()[0];
      report.total_d = total_d.value()[0];
      if (!std::isfinite(report.total_d)) non_finite("discriminator loss", {{"batch/src", src_batch}});
      backward(total_d);
      adam_d_.step(disc_.params());
      disc_.params().zero_grad();
    }

    // Generator update against the refreshed, frozen discriminator.
    disc_.params().set_trainable_requires_grad(false);
    ForwardContext dctx;
    dctx.update_running_stats = false;
    const std::array<Var, 3> parts{tgt, fake_src, fake_tgt};
    const Var logits = disc_.discriminate(ops::concat_batch(parts), dctx);
    const auto gan = losses::gan_losses(ops::slice_batch(logits, 0, b), ops::slice_batch(logits, b, b),
                                        ops::slice_batch(logits, 2 * b, b));

    losses::GeneratorTerms terms;
    terms.gan_g = gan.g;
    ForwardContext fctx;
    fctx.update_running_stats = false;
    fctx.detach_params = config_.const_stop_grad;
    terms.const_ = losses::const_loss(enc_src.code, gen_.encode(fake_src, fctx).code);
    terms.tid = losses::tid_loss(tgt, fake_tgt);
    terms.tv = losses::tv_loss(fake_src);
    terms.l2 = losses::pixel_l2(fake_src, tgt);

    losses::GeneratorTerms weighted;
    // Zero-weight terms stay in the report but are kept out of the graph.
    weighted.gan_g = w.gan > 0 ? terms.gan_g : Var();
    weighted.const_ = w.const_ > 0 ? terms.const_ : Var();
    weighted.tid = w.tid > 0 ? terms.tid : Var();
    weighted.tv = w.tv > 0 ? terms.tv : Var();
    weighted.l2 = w.l2 > 0 ? terms.l2 : Var();
    const Var total_g = losses::total_generator_loss(w, weighted);

    report.gan_g = terms.gan_g.value()[0];
    report.const_ = terms.const_.value()[0];
    report.tid = terms.tid.value()[0];
    report.tv = terms.tv.value()[0];
    report.l2 = terms.l2.value()[0];
    report.total_g = total_g.value()[0];
    if (!report.all_finite()) {
      non_finite("generator loss",
                 {{"batch/src", src_batch}, {"batch/tgt", tgt_batch}, {"out/fake_src", fake_src.value()},
                  {"out/fake_tgt", fake_tgt.value()}});
    }
    backward(total_g);
    adam_g_.step(gen_.params());
    gen_.params().zero_grad();
  } catch (const Error& e) {
    gen_.params().zero_grad();
    disc_.params().zero_grad();
    if (e.kind() == ErrorKind::NonFiniteInput) non_finite(e.detail(), {{"batch/src", src_batch}, {"batch/tgt", tgt_batch}});
    throw;
  }
  disc_.params().set_trainable_requires_grad(true);
  if (!gen_.params().all_finite() || !disc_.params().all_finite()) non_finite("parameter update", {});
  ++step_;
  return report;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.meta["format"] = "typegan-checkpoint";
  c.meta["version"] = kFormatVersion;
  c.meta["spec"] = config_.model.to_json();
  c.meta["config"] = config_.to_json();
  c.meta["config_hash"] = config_.config_hash();
  c.meta["hash_algorithm"] = kHashAlgorithm;
  c.meta["step"] = step_;
  c.meta["seed"] = config_.seed;
  c.meta["generator_parameters"] = generator_parameter_count(config_.model);
  c.meta["discriminator_parameters"] = discriminator_parameter_count(config_.model);
  c.meta["rng_state"] = rng_.state();
  c.tensors = gen_.params().snapshot();
  for (auto& [name, t] : disc_.params().snapshot()) c.tensors.emplace(name, std::move(t));
  adam_g_.save("adam/", c.tensors);
  adam_d_.save("adam/", c.tensors);
  return c;
}

ModelSpec checkpoint_spec(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("spec")) throw Error(ErrorKind::ConfigMismatch, "checkpoint has no model spec");
  return ModelSpec::from_json(ckpt.meta.at("spec"));
}

void Trainer::restore(const Checkpoint& ckpt) {
  const std::string want = config_.config_hash();
  const std::string have = ckpt.meta.value("config_hash", std::string());
  if (have != want) {
    throw Error(ErrorKind::ConfigMismatch, "checkpoint config hash " + have + " differs from run config " + want);
  }
  gen_.params().load(tensors_with_prefix(ckpt, "gen/"));
  disc_.params().load(tensors_with_prefix(ckpt, "disc/"));
  adam_g_.load("adam/", tensors_with_prefix(ckpt, "adam/gen/"));
  adam_d_.load("adam/", tensors_with_prefix(ckpt, "adam/disc/"));
  rng_.set_state(ckpt.meta.at("rng_state").get<std::string>());
  step_ = ckpt.meta.at("step").get<std::int64_t>();
}

void Trainer::warm_start(const Checkpoint& ckpt) {
  const ModelSpec spec = checkpoint_spec(ckpt);
  if (!(spec == config_.model)) {
    throw Error(ErrorKind::ConfigMismatch,
                "warm-start checkpoint spec " + spec.to_json().dump() + " differs from " + config_.model.to_json().dump());
  }
  for (auto& [name, e] : gen_.params().entries()) {
    if (!Generator::is_encoder_param(name)) continue;
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw Error(ErrorKind::ConfigMismatch, "warm-start checkpoint lacks " + name);
    e.var.mutable_value() = it->second;
  }
}

Generator load_generator(const Checkpoint& ckpt) {
  Generator g(checkpoint_spec(ckpt));
  g.params().load(tensors_with_prefix(ckpt, "gen/"));
  return g;
}

}  // namespace typegan
