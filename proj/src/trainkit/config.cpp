#include <cmath>

#include "typegan/errors.hpp"
#include "typegan/trainkit.hpp"

namespace typegan {

TrainConfig TrainConfig::micro(int canvas, int base_channels) {
  TrainConfig c;
  c.model = ModelSpec::micro(canvas, base_channels);
  c.adam.learning_rate = 1e-3;
  c.augment = AugmentConfig::for_canvas(canvas);
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  weights.validate();
  augment.validate();
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (epochs < 0) bad("epochs must be >= 0");
  if (!(adam.learning_rate >= 0.0) || !std::isfinite(adam.learning_rate)) bad("learning_rate must be finite and >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    bad("adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) bad("adam eps must be > 0");
  if (freeze_encoder_steps < 0) bad("freeze_encoder_steps must be >= 0");
  if (checkpoint_every < 0 || sample_every < 0) bad("checkpoint/sample cadence must be >= 0");
  if (style_index < 0 || style_index >= model.num_styles) {
    throw Error(ErrorKind::UnknownStyleIndex, "style_index " + std::to_string(style_index) + " outside [0, " +
                                                  std::to_string(model.num_styles) + ")");
  }
  if (weights.l2 > 0.0 && policy != PairKind::Strong) {
    bad("w_l2 > 0 requires the strong pair policy; " + to_string(policy) + " pairs have no ground truth");
  }
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model.to_json();
  j["batch_size"] = batch_size;
  j["adam"] = {{"learning_rate", adam.learning_rate}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}};
  j["policy"] = to_string(policy);
  j["weights"] = {{"gan", weights.gan}, {"const", weights.const_}, {"tid", weights.tid}, {"tv", weights.tv},
                  {"l2", weights.l2}};
  j["augment"] = {{"enabled", augment.enabled},
                  {"max_shift_px", augment.max_shift_px},
                  {"scale_lo", augment.scale_lo},
                  {"scale_hi", augment.scale_hi},
                  {"fill", augment.fill}};
  j["seed"] = seed;
  j["freeze_encoder_steps"] = freeze_encoder_steps;
  j["const_stop_grad"] = const_stop_grad;
  j["style_index"] = style_index;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.model = ModelSpec::from_json(j.at("model"));
    c.batch_size = j.at("batch_size").get<int>();
    const auto& a = j.at("adam");
    c.adam = {a.at("learning_rate").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
              a.at("eps").get<double>()};
    c.policy = parse_pair_kind(j.at("policy").get<std::string>());
    const auto& w = j.at("weights");
    c.weights = {w.at("gan").get<double>(), w.at("const").get<double>(), w.at("tid").get<double>(),
                 w.at("tv").get<double>(), w.at("l2").get<double>()};
    const auto& g = j.at("augment");
    c.augment = {g.at("enabled").get<bool>(), g.at("max_shift_px").get<int>(), g.at("scale_lo").get<double>(),
                 g.at("scale_hi").get<double>(), g.at("fill").get<double>()};
    c.seed = j.at("seed").get<std::uint64_t>();
    c.freeze_encoder_steps = j.at("freeze_encoder_steps").get<std::int64_t>();
    c.const_stop_grad = j.at("const_stop_grad").get<bool>();
    c.style_index = j.at("style_index").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("train config: ") + e.what());
  }
  return c;
}

std::string TrainConfig::config_hash() const { return hash_hex(fnv1a64(to_json().dump())); }

}  // namespace typegan
