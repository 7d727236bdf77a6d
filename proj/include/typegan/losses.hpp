#pragma once

#include <cstdint>
#include <string>

#include "typegan/autograd.hpp"

namespace typegan {

struct LossWeights {
  double gan = 1.0;
  double const_ = 1.0;
  double tid = 10.0;
  double tv = 0.1;
  double l2 = 0.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct LossReport {
  std::int64_t step = 0;
  double gan_d = 0, gan_g = 0, const_ = 0, tid = 0, tv = 0, l2 = 0;
  double total_g = 0, total_d = 0;

  bool all_finite() const;
  static std::string csv_header();
  std::string csv_row() const;
};

namespace losses {

struct GanLosses {
  Var d;
  Var g;
};

/// Trinary adversarial losses. Discriminator targets are (0, 1, 2) for
/// (real target, G(source), G(target)); the generator pushes both generated
/// batches toward class 0.
GanLosses gan_losses(const Var& logits_real_target, const Var& logits_gen_from_source,
                     const Var& logits_gen_from_target);

Var const_loss(const Var& f_of_x, const Var& f_of_gx);
Var tid_loss(const Var& x_target, const Var& g_of_x_target);
Var tv_loss(const Var& image);
Var pixel_l2(const Var& generated, const Var& truth);

struct GeneratorTerms {
  Var gan_g, const_, tid, tv, l2;
};

/// Weighted sum of the generator-side terms; invalid terms count as zero.
Var total_generator_loss(const LossWeights& w, const GeneratorTerms& terms);
Var total_discriminator_loss(const LossWeights& w, const Var& gan_d);

}  // namespace losses
}  // namespace typegan
