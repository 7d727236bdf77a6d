#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "typegan/autograd.hpp"
#include "typegan/rng.hpp"

// Differentiable tensor operations. Image tensors are NHWC.
namespace typegan::ops {

/// Geometry of a stride-s convolution with "same" padding between a large
/// (H, W) grid and the small ceil(H/s) x ceil(W/s) grid.
struct ConvGeometry {
  std::int64_t big_h = 0, big_w = 0;
  std::int64_t small_h = 0, small_w = 0;
  std::int64_t kernel = 5, stride = 2;
  std::int64_t pad_top = 0, pad_left = 0;

  static ConvGeometry same(std::int64_t big_h, std::int64_t big_w, std::int64_t kernel, std::int64_t stride);
};

/// x: (B, H, W, Cin); kernel: (k, k, Cin, Cout); bias: (Cout) or invalid Var.
Var conv2d(const Var& x, const Var& kernel, const Var& bias, std::int64_t stride);

/// Adjoint of conv2d. x: (B, h, w, Cin); kernel: (k, k, Cout, Cin);
/// output (B, h*stride, w*stride, Cout).
Var conv_transpose2d(const Var& x, const Var& kernel, const Var& bias, std::int64_t stride);

struct RunningStats {
  Tensor mean;
  Tensor var;
};

struct NormOptions {
  bool use_batch_stats = true;       // train phase
  bool update_running_stats = true;  // only meaningful with batch stats
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalization over (B, H, W).
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, RunningStats& stats, const NormOptions& opt);

/// Per-image, per-channel normalization over (H, W) with scale/shift taken
/// from row `style` of (S, C) tables.
Var conditional_instance_norm(const Var& x, const Var& gamma_table, const Var& beta_table, std::int64_t style,
                              double eps = 1e-5);

Var leaky_relu(const Var& x, double slope);
Var relu(const Var& x);
Var tanh(const Var& x);

/// Inverted dropout: zeroes with probability p, scales survivors by 1/(1-p).
Var dropout(const Var& x, double p, Rng& rng);

/// Concatenate along the channel (last) axis.
Var concat_channels(const Var& a, const Var& b);

/// Appends row `style` of an (S, E) table to every spatial position of x.
Var append_embedding(const Var& x, const Var& table, std::int64_t style);

/// Concatenate rank-4 batches along axis 0.
Var concat_batch(std::span<const Var> parts);

/// Images [first, first+count) of a batch.
Var slice_batch(const Var& x, std::int64_t first, std::int64_t count);

Var reshape(const Var& x, Shape shape);

/// x: (B, F); weight: (F, O); bias: (O).
Var linear(const Var& x, const Var& weight, const Var& bias);

Var mean_squared_error(const Var& a, const Var& b);

/// Mean softmax cross-entropy of (B, K) logits against one class for all rows.
Var softmax_cross_entropy(const Var& logits, std::int64_t target_class);

/// Anisotropic TV: (sum |dx| + sum |dy|) / numel over an NHWC batch.
Var total_variation(const Var& x);

/// Scalar sum of weight * term over scalar terms.
Var weighted_sum(std::span<const std::pair<double, Var>> terms);

}  // namespace typegan::ops
