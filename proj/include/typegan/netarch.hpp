#pragma once

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "typegan/autograd.hpp"
#include "typegan/ops.hpp"
#include "typegan/rng.hpp"

namespace typegan {

enum class Phase { Train, Infer };

std::string to_string(Phase phase);
Phase parse_phase(const std::string& text);

/// Architecture hyperparameters. The number of stride-2 stages is
/// log2(canvas); at canvas 256 this is the eight-stage network.
struct ModelSpec {
  int canvas = 256;
  int base_channels = 64;
  int style_embed_dim = 128;
  int num_styles = 1;
  int kernel = 5;
  int stride = 2;
  double dropout_p = 0.5;
  double leaky_slope = 0.2;

  static ModelSpec full() { return {}; }
  static ModelSpec micro(int canvas = 32, int base_channels = 4);

  void validate() const;
  int stages() const;
  /// Output channels of encoder stage k, 1-based.
  int conv_channels(int k) const;
  /// Output channels of decoder stage k, 1-based.
  int deconv_channels(int k) const;
  /// Input channels of decoder stage k including the skip or style embedding.
  int deconv_input_channels(int k) const;
  /// Spatial side of the output of encoder stage k.
  int conv_side(int k) const { return canvas >> k; }

  nlohmann::ordered_json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
  bool operator==(const ModelSpec&) const = default;
};

/// Named tensors of one network. Trainable entries are learned; the rest are
/// running statistics.
class ParamStore {
 public:
  struct Entry {
    Var var;
    bool trainable = true;
  };

  Var& add(const std::string& name, Tensor value, bool trainable);
  Var& at(const std::string& name);
  const Var& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.contains(name); }

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

  std::int64_t trainable_count() const;
  void set_trainable_requires_grad(bool on);
  void zero_grad();
  bool all_finite() const;

  std::map<std::string, Tensor> snapshot() const;
  /// Copies matching tensors in; throws ConfigMismatch on a missing name or shape.
  void load(const std::map<std::string, Tensor>& tensors);

 private:
  std::map<std::string, Entry> entries_;
};

/// (layer, input shape, output shape) records gathered during a forward pass.
struct LayerRecord {
  std::string layer;
  Shape input;
  Shape output;
};

struct ForwardContext {
  Rng* dropout_rng = nullptr;        // required for train-phase decoding when dropout_p > 0
  bool update_running_stats = true;  // train phase only
  bool detach_params = false;        // treat parameters as constants in this pass
  std::vector<LayerRecord>* trace = nullptr;
  std::map<std::string, Tensor>* capture = nullptr;  // layer name -> activation
};

class Generator {
 public:
  struct Encoded {
    Var code;
    std::vector<Var> skips;  // skips[k-1] is the output of conv k, k < stages
  };

  explicit Generator(const ModelSpec& spec);
  Generator(const ModelSpec& spec, Rng& init_rng);

  const ModelSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  void set_phase(Phase phase) { phase_ = phase; }
  Phase phase() const { return phase_; }

  Encoded encode(const Var& x, ForwardContext ctx = {});
  Var decode(const Encoded& enc, std::int64_t style, ForwardContext ctx = {});
  Var generate(const Var& x, std::int64_t style, ForwardContext ctx = {});

  /// Whether a parameter name belongs to the encoder f.
  static bool is_encoder_param(const std::string& name);

 private:
  Var param(const std::string& name, const ForwardContext& ctx);
  Var norm(const std::string& prefix, const Var& x, const ForwardContext& ctx);

  ModelSpec spec_;
  ParamStore params_;
  Phase phase_ = Phase::Train;
};

/// Trinary classifier: 0 real target, 1 generated from source, 2 generated from target.
class Discriminator {
 public:
  static constexpr int kClasses = 3;
  static constexpr int kStages = 4;

  explicit Discriminator(const ModelSpec& spec);
  Discriminator(const ModelSpec& spec, Rng& init_rng);

  const ModelSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  void set_phase(Phase phase) { phase_ = phase; }
  Phase phase() const { return phase_; }

  Var discriminate(const Var& x, ForwardContext ctx = {});

 private:
  Var param(const std::string& name, const ForwardContext& ctx);

  ModelSpec spec_;
  ParamStore params_;
  Phase phase_ = Phase::Train;
};

/// Layer shapes implied by the spec for a batch of `batch` images, in the
/// order a forward pass records them: generator convs, deconvs, then
/// discriminator convs and fc.
std::vector<LayerRecord> planned_shapes(const ModelSpec& spec, std::int64_t batch);

std::int64_t generator_parameter_count(const ModelSpec& spec);
std::int64_t discriminator_parameter_count(const ModelSpec& spec);

}  // namespace typegan
