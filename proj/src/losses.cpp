#include "typegan/losses.hpp"

#include <cmath>
#include <cstdio>
#include <utility>
#include <vector>

#include "typegan/errors.hpp"
#include "typegan/ops.hpp"

namespace typegan {

void LossWeights::validate() const {
  for (auto [name, v] : {std::pair{"w_gan", gan}, {"w_const", const_}, {"w_tid", tid}, {"w_tv", tv}, {"w_l2", l2}}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::InvalidConfig, std::string(name) + " must be finite and >= 0");
    }
  }
}

bool LossReport::all_finite() const {
  for (double v : {gan_d, gan_g, const_, tid, tv, l2, total_g, total_d}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string LossReport::csv_header() { return "step,gan_d,gan_g,const,tid,tv,l2,total_g,total_d"; }

std::string LossReport::csv_row() const {
  std::string row = std::to_string(step);
  char buf[40];
  for (double v : {gan_d, gan_g, const_, tid, tv, l2, total_g, total_d}) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    row += buf;
  }
  return row;
}

namespace losses {

GanLosses gan_losses(const Var& logits_real_target, const Var& logits_gen_from_source,
                     const Var& logits_gen_from_target) {
  const Var ce_real = ops::softmax_cross_entropy(logits_real_target, 0);
  const Var ce_src = ops::softmax_cross_entropy(logits_gen_from_source, 1);
  const Var ce_tgt = ops::softmax_cross_entropy(logits_gen_from_target, 2);
  // Each per-batch term is already a mean; weight by batch size for the mean
  // over all rows.
  const double n0 = static_cast<double>(logits_real_target.shape()[0]);
  const double n1 = static_cast<double>(logits_gen_from_source.shape()[0]);
  const double n2 = static_cast<double>(logits_gen_from_target.shape()[0]);
  const double nd = n0 + n1 + n2;
  const std::pair<double, Var> d_terms[] = {{n0 / nd, ce_real}, {n1 / nd, ce_src}, {n2 / nd, ce_tgt}};

  const Var g_src = ops::softmax_cross_entropy(logits_gen_from_source, 0);
  const Var g_tgt = ops::softmax_cross_entropy(logits_gen_from_target, 0);
  const double ng = n1 + n2;
  const std::pair<double, Var> g_terms[] = {{n1 / ng, g_src}, {n2 / ng, g_tgt}};
  return {ops::weighted_sum(d_terms), ops::weighted_sum(g_terms)};
}

Var const_loss(const Var& f_of_x, const Var& f_of_gx) { return ops::mean_squared_error(f_of_x, f_of_gx); }

Var tid_loss(const Var& x_target, const Var& g_of_x_target) {
  return ops::mean_squared_error(x_target, g_of_x_target);
}

Var tv_loss(const Var& image) { return ops::total_variation(image); }

Var pixel_l2(const Var& generated, const Var& truth) { return ops::mean_squared_error(generated, truth); }

Var total_generator_loss(const LossWeights& w, const GeneratorTerms& terms) {
  std::vector<std::pair<double, Var>> parts;
  for (auto [weight, term] : {std::pair{w.gan, terms.gan_g}, {w.const_, terms.const_}, {w.tid, terms.tid},
                              {w.tv, terms.tv}, {w.l2, terms.l2}}) {
    if (term.valid()) parts.emplace_back(weight, term);
  }
  return ops::weighted_sum(parts);
}

Var total_discriminator_loss(const LossWeights& w, const Var& gan_d) {
  const std::pair<double, Var> parts[] = {{w.gan, gan_d}};
  return ops::weighted_sum(parts);
}

}  // namespace losses
}  // namespace typegan
