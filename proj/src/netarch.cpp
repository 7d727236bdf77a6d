#include "typegan/netarch.hpp"

#include <algorithm>
#include <bit>

#include "typegan/errors.hpp"

namespace typegan {

namespace {

constexpr double kInitStddev = 0.02;

Tensor normal_tensor(Shape shape, Rng* rng) {
  Tensor t(std::move(shape));
  if (rng) {
    for (auto& v : t.values()) v = kInitStddev * rng->normal();
  }
  return t;
}

void add_batch_norm(ParamStore& store, const std::string& prefix, std::int64_t c) {
  store.add(prefix + "/gamma", Tensor({c}, 1.0), true);
  store.add(prefix + "/beta", Tensor({c}, 0.0), true);
  store.add(prefix + "/running_mean", Tensor({c}, 0.0), false);
  store.add(prefix + "/running_var", Tensor({c}, 1.0), false);
}

Var batch_norm_layer(ParamStore& store, const std::string& prefix, const Var& x, Phase phase,
                     const ForwardContext& ctx, const Var& gamma, const Var& beta) {
  Var& mean = store.at(prefix + "/running_mean");
  Var& var = store.at(prefix + "/running_var");
  ops::RunningStats stats{mean.value(), var.value()};
  ops::NormOptions opt;
  opt.use_batch_stats = phase == Phase::Train;
  opt.update_running_stats = ctx.update_running_stats;
  Var out = ops::batch_norm(x, gamma, beta, stats, opt);
  if (opt.use_batch_stats && opt.update_running_stats) {
    mean.mutable_value() = std::move(stats.mean);
    var.mutable_value() = std::move(stats.var);
  }
  return out;
}

void record(const ForwardContext& ctx, const std::string& layer, const Shape& in, const Var& out) {
  if (ctx.trace) ctx.trace->push_back({layer, in, out.shape()});
}

void capture(const ForwardContext& ctx, const std::string& layer, const Var& out) {
  if (ctx.capture) (*ctx.capture)[layer] = out.value();
}

void require_images(const Var& x, int canvas, const char* who) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[0] < 1 || s[1] != canvas || s[2] != canvas || s[3] != 3) {
    throw Error(ErrorKind::ShapeMismatch, std::string(who) + " expects (B, " + std::to_string(canvas) + ", " +
                                              std::to_string(canvas) + ", 3), got " + shape_to_string(s));
  }
}

std::int64_t ksq(const ModelSpec& s) { return static_cast<std::int64_t>(s.kernel) * s.kernel; }

int disc_channels(const ModelSpec& s, int i) { return s.base_channels << (i - 1); }

}  // namespace

std::string to_string(Phase phase) { return phase == Phase::Train ? "train" : "infer"; }

Phase parse_phase(const std::string& text) {
  if (text == "train") return Phase::Train;
  if (text == "infer") return Phase::Infer;
  throw Error(ErrorKind::InvalidConfig, "unknown phase '" + text + "' (expected train|infer)");
}

// ---------------------------------------------------------------- ModelSpec

ModelSpec ModelSpec::micro(int canvas, int base_channels) {
  ModelSpec s;
  s.canvas = canvas;
  s.base_channels = base_channels;
  s.style_embed_dim = 2 * base_channels;
  return s;
}

void ModelSpec::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, "model: " + what); };
  if (canvas < 32 || !std::has_single_bit(static_cast<unsigned>(canvas))) bad("canvas must be a power of two >= 32");
  if (base_channels < 1) bad("base_channels must be >= 1");
  if (style_embed_dim < 0) bad("style_embed_dim must be >= 0");
  if (num_styles < 1) bad("num_styles must be >= 1");
  if (kernel < 1) bad("kernel must be >= 1");
  if (stride != 2) bad("stride must be 2");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) bad("dropout_p must be in [0, 1)");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) bad("leaky_slope must be in [0, 1)");
}

int ModelSpec::stages() const { return std::bit_width(static_cast<unsigned>(canvas)) - 1; }

int ModelSpec::conv_channels(int k) const { return base_channels * std::min(1 << (k - 1), 8); }

int ModelSpec::deconv_channels(int k) const { return k < stages() ? 2 * conv_channels(stages() - k) : 3; }

int ModelSpec::deconv_input_channels(int k) const {
  if (k == 1) return conv_channels(stages()) + style_embed_dim;
  return deconv_channels(k - 1) + conv_channels(stages() - k + 1);
}

nlohmann::ordered_json ModelSpec::to_json() const {
  nlohmann::ordered_json j;
  j["canvas"] = canvas;
  j["base_channels"] = base_channels;
  j["style_embed_dim"] = style_embed_dim;
  j["num_styles"] = num_styles;
  j["kernel"] = kernel;
  j["stride"] = stride;
  j["dropout_p"] = dropout_p;
  j["leaky_slope"] = leaky_slope;
  return j;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  try {
    s.canvas = j.at("canvas").get<int>();
    s.base_channels = j.at("base_channels").get<int>();
    s.style_embed_dim = j.at("style_embed_dim").get<int>();
    s.num_styles = j.at("num_styles").get<int>();
    s.kernel = j.at("kernel").get<int>();
    s.stride = j.at("stride").get<int>();
    s.dropout_p = j.at("dropout_p").get<double>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("model spec: ") + e.what());
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------- ParamStore

Var& ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  auto [it, inserted] = entries_.try_emplace(name, Entry{Var(std::move(value), trainable), trainable});
  if (!inserted) throw Error(ErrorKind::InvalidConfig, "duplicate parameter " + name);
  return it->second.var;
}

Var& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorKind::ConfigMismatch, "no parameter named " + name);
  return it->second.var;
}

const Var& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorKind::ConfigMismatch, "no parameter named " + name);
  return it->second.var;
}

std::int64_t ParamStore::trainable_count() const {
  std::int64_t n = 0;
  for (const auto& [name, e] : entries_) n += e.trainable ? e.var.value().numel() : 0;
  return n;
}

void ParamStore::set_trainable_requires_grad(bool on) {
  for (auto& [name, e] : entries_) {
    if (e.trainable) e.var.set_requires_grad(on);
  }
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) e.var.zero_grad();
}

bool ParamStore::all_finite() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const auto& kv) { return kv.second.var.value().all_finite(); });
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, e] : entries_) out.emplace(name, e.var.value());
  return out;
}

void ParamStore::load(const std::map<std::string, Tensor>& tensors) {
  for (auto& [name, e] : entries_) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(ErrorKind::ConfigMismatch, "checkpoint lacks " + name);
    if (it->second.shape() != e.var.shape()) {
      throw Error(ErrorKind::ConfigMismatch, name + " has shape " + shape_to_string(it->second.shape()) +
                                                 ", model expects " + shape_to_string(e.var.shape()));
    }
    e.var.mutable_value() = it->second;
  }
}

// ---------------------------------------------------------------- Generator

Generator::Generator(const ModelSpec& spec) : spec_(spec) {
  spec_.validate();
  const int L = spec_.stages();
  const std::int64_t k = spec_.kernel;
  for (int i = 1; i <= L; ++i) {
    const std::string name = "gen/conv" + std::to_string(i);
    const std::int64_t cin = i == 1 ? 3 : spec_.conv_channels(i - 1), cout = spec_.conv_channels(i);
    params_.add(name + "/kernel", Tensor({k, k, cin, cout}), true);
    if (i == 1) {
      params_.add(name + "/bias", Tensor({cout}), true);
    } else {
      add_batch_norm(params_, name + "/bn", cout);
    }
  }
  params_.add("gen/style_embedding", Tensor({spec_.num_styles, spec_.style_embed_dim}), true);
  for (int i = 1; i <= L; ++i) {
    const std::string name = "gen/deconv" + std::to_string(i);
    const std::int64_t cin = spec_.deconv_input_channels(i), cout = spec_.deconv_channels(i);
    params_.add(name + "/kernel", Tensor({k, k, cout, cin}), true);
    if (i < L) {
      add_batch_norm(params_, name + "/bn", cout);
    } else {
      params_.add(name + "/cin/gamma", Tensor({spec_.num_styles, cout}, 1.0), true);
      params_.add(name + "/cin/beta", Tensor({spec_.num_styles, cout}, 0.0), true);
    }
  }
}

Generator::Generator(const ModelSpec& spec, Rng& init_rng) : Generator(spec) {
  // Draw in a fixed, spec-determined order.
  std::vector<std::string> names;
  for (int i = 1; i <= spec_.stages(); ++i) names.push_back("gen/conv" + std::to_string(i) + "/kernel");
  names.push_back("gen/style_embedding");
  for (int i = 1; i <= spec_.stages(); ++i) names.push_back("gen/deconv" + std::to_string(i) + "/kernel");
  for (const auto& n : names) {
    Var& v = params_.at(n);
    v.mutable_value() = normal_tensor(v.shape(), &init_rng);
  }
}

bool Generator::is_encoder_param(const std::string& name) { return name.starts_with("gen/conv"); }

Var Generator::param(const std::string& name, const ForwardContext& ctx) {
  const Var& v = params_.at(name);
  return ctx.detach_params ? v.detach() : v;
}

Var Generator::norm(const std::string& prefix, const Var& x, const ForwardContext& ctx) {
  return batch_norm_layer(params_, prefix, x, phase_, ctx, param(prefix + "/gamma", ctx), param(prefix + "/beta", ctx));
}

Generator::Encoded Generator::encode(const Var& x, ForwardContext ctx) {
  require_images(x, spec_.canvas, "encode");
  const int L = spec_.stages();
  Encoded enc;
  Var h = x;
  for (int i = 1; i <= L; ++i) {
    const std::string name = "gen/conv" + std::to_string(i);
    const Shape in_shape = h.shape();
    Var out;
    if (i == 1) {
      out = ops::conv2d(h, param(name + "/kernel", ctx), param(name + "/bias", ctx), spec_.stride);
    } else {
      out = ops::conv2d(ops::leaky_relu(h, spec_.leaky_slope), param(name + "/kernel", ctx), Var(), spec_.stride);
      out = norm(name + "/bn", out, ctx);
    }
    record(ctx, name, in_shape, out);
    capture(ctx, "conv" + std::to_string(i), out);
    if (i < L) enc.skips.push_back(out);
    h = out;
  }
  enc.code = h;
  return enc;
}

Var Generator::decode(const Encoded& enc, std::int64_t style, ForwardContext ctx) {
  const int L = spec_.stages();
  const Shape& cs = enc.code.shape();
  if (cs.size() != 4 || cs[1] != 1 || cs[2] != 1 || cs[3] != spec_.conv_channels(L) ||
      enc.skips.size() != static_cast<std::size_t>(L - 1)) {
    throw Error(ErrorKind::ShapeMismatch, "decode got code " + shape_to_string(cs) + " with " +
                                              std::to_string(enc.skips.size()) + " skips");
  }
  if (style < 0 || style >= spec_.num_styles) {
    throw Error(ErrorKind::UnknownStyleIndex,
                "style " + std::to_string(style) + " outside [0, " + std::to_string(spec_.num_styles) + ")");
  }
  const bool train = phase_ == Phase::Train;
  Var h = ops::append_embedding(enc.code, param("gen/style_embedding", ctx), style);
  for (int i = 1; i <= L; ++i) {
    const std::string name = "gen/deconv" + std::to_string(i);
    const Shape in_shape = h.shape();
    Var y = ops::conv_transpose2d(ops::relu(h), param(name + "/kernel", ctx), Var(), spec_.stride);
    if (i < L) {
      y = norm(name + "/bn", y, ctx);
      if (train && (i == 2 || i == 3) && spec_.dropout_p > 0.0) {
        if (!ctx.dropout_rng) throw Error(ErrorKind::InvalidConfig, "train-phase decode needs a dropout rng");
        y = ops::dropout(y, spec_.dropout_p, *ctx.dropout_rng);
      }
      record(ctx, name, in_shape, y);
      capture(ctx, "deconv" + std::to_string(i), y);
      const Var& skip = enc.skips[static_cast<std::size_t>(L - i - 1)];
      if (skip.shape() != Shape{y.shape()[0], y.shape()[1], y.shape()[2], spec_.conv_channels(L - i)}) {
        throw Error(ErrorKind::ShapeMismatch, "skip from conv" + std::to_string(L - i) + " has shape " +
                                                  shape_to_string(skip.shape()));
      }
      h = ops::concat_channels(y, skip);
    } else {
      y = ops::conditional_instance_norm(y, param(name + "/cin/gamma", ctx), param(name + "/cin/beta", ctx), style);
      y = ops::tanh(y);
      record(ctx, name, in_shape, y);
      capture(ctx, "deconv" + std::to_string(i), y);
      h = y;
    }
  }
  return h;
}

Var Generator::generate(const Var& x, std::int64_t style, ForwardContext ctx) {
  return decode(encode(x, ctx), style, ctx);
}

// ---------------------------------------------------------------- Discriminator

Discriminator::Discriminator(const ModelSpec& spec) : spec_(spec) {
  spec_.validate();
  const std::int64_t k = spec_.kernel;
  for (int i = 1; i <= kStages; ++i) {
    const std::string name = "disc/conv" + std::to_string(i);
    const std::int64_t cin = i == 1 ? 3 : disc_channels(spec_, i - 1), cout = disc_channels(spec_, i);
    params_.add(name + "/kernel", Tensor({k, k, cin, cout}), true);
    if (i == 1) {
      params_.add(name + "/bias", Tensor({cout}), true);
    } else {
      add_batch_norm(params_, name + "/bn", cout);
    }
  }
  const std::int64_t side = spec_.canvas >> kStages;
  params_.add("disc/fc/weight", Tensor({side * side * disc_channels(spec_, kStages), kClasses}), true);
  params_.add("disc/fc/bias", Tensor({kClasses}), true);
}

Discriminator::Discriminator(const ModelSpec& spec, Rng& init_rng) : Discriminator(spec) {
  std::vector<std::string> names;
  for (int i = 1; i <= kStages; ++i) names.push_back("disc/conv" + std::to_string(i) + "/kernel");
  names.push_back("disc/fc/weight");
  for (const auto& n : names) {
    Var& v = params_.at(n);
    v.mutable_value() = normal_tensor(v.shape(), &init_rng);
  }
}

Var Discriminator::param(const std::string& name, const ForwardContext& ctx) {
  const Var& v = params_.at(name);
  return ctx.detach_params ? v.detach() : v;
}

Var Discriminator::discriminate(const Var& x, ForwardContext ctx) {
  require_images(x, spec_.canvas, "discriminate");
  Var h = x;
  for (int i = 1; i <= kStages; ++i) {
    const std::string name = "disc/conv" + std::to_string(i);
    const Shape in_shape = h.shape();
    Var y;
    if (i == 1) {
      y = ops::conv2d(h, param(name + "/kernel", ctx), param(name + "/bias", ctx), spec_.stride);
    } else {
      y = ops::conv2d(h, param(name + "/kernel", ctx), Var(), spec_.stride);
      y = batch_norm_layer(params_, name + "/bn", y, phase_, ctx, param(name + "/bn/gamma", ctx),
                           param(name + "/bn/beta", ctx));
    }
    y = ops::leaky_relu(y, spec_.leaky_slope);
    record(ctx, name, in_shape, y);
    h = y;
  }
  const Shape in_shape = h.shape();
  const std::int64_t batch = in_shape[0];
  Var flat = ops::reshape(h, {batch, shape_numel(in_shape) / batch});
  Var logits = ops::linear(flat, param("disc/fc/weight", ctx), param("disc/fc/bias", ctx));
  record(ctx, "disc/fc", in_shape, logits);
  return logits;
}

// ---------------------------------------------------------------- shape plan

std::vector<LayerRecord> planned_shapes(const ModelSpec& spec, std::int64_t batch) {
  spec.validate();
  const int L = spec.stages();
  std::vector<LayerRecord> out;
  for (int i = 1; i <= L; ++i) {
    const std::int64_t cin = i == 1 ? 3 : spec.conv_channels(i - 1);
    out.push_back({"gen/conv" + std::to_string(i),
                   {batch, spec.conv_side(i - 1), spec.conv_side(i - 1), cin},
                   {batch, spec.conv_side(i), spec.conv_side(i), spec.conv_channels(i)}});
  }
  for (int i = 1; i <= L; ++i) {
    const std::int64_t side = spec.conv_side(L - i + 1);
    out.push_back({"gen/deconv" + std::to_string(i),
                   {batch, side, side, spec.deconv_input_channels(i)},
                   {batch, 2 * side, 2 * side, spec.deconv_channels(i)}});
  }
  for (int i = 1; i <= Discriminator::kStages; ++i) {
    const std::int64_t cin = i == 1 ? 3 : disc_channels(spec, i - 1);
    out.push_back({"disc/conv" + std::to_string(i),
                   {batch, spec.conv_side(i - 1), spec.conv_side(i - 1), cin},
                   {batch, spec.conv_side(i), spec.conv_side(i), disc_channels(spec, i)}});
  }
  const std::int64_t side = spec.conv_side(Discriminator::kStages);
  out.push_back({"disc/fc", {batch, side, side, disc_channels(spec, Discriminator::kStages)}, {batch, 3}});
  return out;
}

std::int64_t generator_parameter_count(const ModelSpec& spec) {
  spec.validate();
  const int L = spec.stages();
  std::int64_t n = 0;
  for (int i = 1; i <= L; ++i) {
    const std::int64_t cin = i == 1 ? 3 : spec.conv_channels(i - 1), cout = spec.conv_channels(i);
    n += ksq(spec) * cin * cout + (i == 1 ? cout : 2 * cout);
  }
  n += static_cast<std::int64_t>(spec.num_styles) * spec.style_embed_dim;
  for (int i = 1; i <= L; ++i) {
    const std::int64_t cin = spec.deconv_input_channels(i), cout = spec.deconv_channels(i);
    n += ksq(spec) * cin * cout + (i < L ? 2 * cout : 2 * spec.num_styles * cout);
  }
  return n;
}

std::int64_t discriminator_parameter_count(const ModelSpec& spec) {
  spec.validate();
  std::int64_t n = 0;
  for (int i = 1; i <= Discriminator::kStages; ++i) {
    const std::int64_t cin = i == 1 ? 3 : disc_channels(spec, i - 1), cout = disc_channels(spec, i);
    n += ksq(spec) * cin * cout + (i == 1 ? cout : 2 * cout);
  }
  const std::int64_t side = spec.conv_side(Discriminator::kStages);
  n += side * side * disc_channels(spec, Discriminator::kStages) * Discriminator::kClasses + Discriminator::kClasses;
  return n;
}

}  // namespace typegan
