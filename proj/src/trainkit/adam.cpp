#include <cmath>

#include "typegan/errors.hpp"
#include "typegan/trainkit.hpp"

namespace typegan {

void Adam::step(ParamStore& params) {
  for (auto& [name, entry] : params.entries()) {
    if (!entry.trainable || !entry.var.requires_grad()) continue;
    Slot& s = slots_[name];
    Tensor& w = entry.var.mutable_value();
    const Tensor& g = entry.var.grad();
    if (s.m.shape() != w.shape()) {
      s.m = Tensor(w.shape());
      s.v = Tensor(w.shape());
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.t));
    const double step = cfg_.learning_rate / c1;
    const double root_c2 = std::sqrt(c2);
    for (std::int64_t i = 0; i < w.numel(); ++i) {
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= step * s.m[i] / (std::sqrt(s.v[i]) / root_c2 + cfg_.eps);
    }
  }
}

void Adam::save(const std::string& prefix, std::map<std::string, Tensor>& out) const {
  for (const auto& [name, s] : slots_) {
    out[prefix + name + "/m"] = s.m;
    out[prefix + name + "/v"] = s.v;
    out[prefix + name + "/t"] = Tensor({}, static_cast<double>(s.t));
  }
}

void Adam::load(const std::string& prefix, const std::map<std::string, Tensor>& in) {
  slots_.clear();
  for (const auto& [key, t] : in) {
    if (!key.starts_with(prefix) || !key.ends_with("/t")) continue;
    const std::string name = key.substr(prefix.size(), key.size() - prefix.size() - 2);
    auto m = in.find(prefix + name + "/m");
    auto v = in.find(prefix + name + "/v");
    if (m == in.end() || v == in.end()) throw Error(ErrorKind::ConfigMismatch, "incomplete optimizer state for " + name);
    slots_[name] = Slot{m->second, v->second, static_cast<std::int64_t>(t[0])};
  }
}

}  // namespace typegan
