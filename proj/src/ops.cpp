#include "typegan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "typegan/errors.hpp"

namespace typegan::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Upper bound on the im2col scratch buffer, in doubles.
constexpr std::int64_t kColBudget = std::int64_t{1} << 22;

void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

void require_rank4(const Tensor& t, const char* op) {
  require(t.rank() == 4, ErrorKind::ShapeMismatch,
          std::string(op) + " expects an NHWC tensor, got " + shape_to_string(t.shape()));
}

// Gathers a block of small-grid pixels [p0, p0+rows) of image b from the big
// grid into rows of k*k*C patch values.
void im2col(const double* big, const ConvGeometry& g, std::int64_t channels, std::int64_t p0, std::int64_t rows,
            double* cols) {
  const std::int64_t k = g.kernel;
  const std::int64_t width = k * k * channels;
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int64_t p = p0 + r;
    const std::int64_t oy = p / g.small_w, ox = p % g.small_w;
    double* dst = cols + r * width;
    for (std::int64_t ky = 0; ky < k; ++ky) {
      const std::int64_t iy = oy * g.stride - g.pad_top + ky;
      for (std::int64_t kx = 0; kx < k; ++kx) {
        const std::int64_t ix = ox * g.stride - g.pad_left + kx;
        double* cell = dst + (ky * k + kx) * channels;
        if (iy < 0 || iy >= g.big_h || ix < 0 || ix >= g.big_w) {
          std::fill(cell, cell + channels, 0.0);
        } else {
          const double* src = big + (iy * g.big_w + ix) * channels;
          std::copy(src, src + channels, cell);
        }
      }
    }
  }
}

// Scatter-adds patch rows back onto the big grid (adjoint of im2col).
void col2im(const double* cols, const ConvGeometry& g, std::int64_t channels, std::int64_t p0, std::int64_t rows,
            double* big) {
  const std::int64_t k = g.kernel;
  const std::int64_t width = k * k * channels;
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int64_t p = p0 + r;
    const std::int64_t oy = p / g.small_w, ox = p % g.small_w;
    const double* src = cols + r * width;
    for (std::int64_t ky = 0; ky < k; ++ky) {
      const std::int64_t iy = oy * g.stride - g.pad_top + ky;
      if (iy < 0 || iy >= g.big_h) continue;
      for (std::int64_t kx = 0; kx < k; ++kx) {
        const std::int64_t ix = ox * g.stride - g.pad_left + kx;
        if (ix < 0 || ix >= g.big_w) continue;
        const double* cell = src + (ky * k + kx) * channels;
        double* dst = big + (iy * g.big_w + ix) * channels;
        for (std::int64_t c = 0; c < channels; ++c) dst[c] += cell[c];
      }
    }
  }
}

std::int64_t chunk_rows(std::int64_t width, std::int64_t total) {
  return std::clamp<std::int64_t>(kColBudget / std::max<std::int64_t>(width, 1), 1, std::max<std::int64_t>(total, 1));
}

void add_bias(Tensor& out, const Tensor& bias) {
  const std::int64_t c = bias.numel();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += bias[i % c];
}

void bias_grad(const Tensor& dout, Node& bias) {
  if (!bias.requires_grad) return;
  auto& g = bias.ensure_grad();
  const std::int64_t c = g.numel();
  for (std::int64_t i = 0; i < dout.numel(); ++i) g[i % c] += dout[i];
}

}  // namespace

ConvGeometry ConvGeometry::same(std::int64_t big_h, std::int64_t big_w, std::int64_t kernel, std::int64_t stride) {
  ConvGeometry g;
  g.big_h = big_h;
  g.big_w = big_w;
  g.kernel = kernel;
  g.stride = stride;
  g.small_h = (big_h + stride - 1) / stride;
  g.small_w = (big_w + stride - 1) / stride;
  const std::int64_t pad_h = std::max<std::int64_t>((g.small_h - 1) * stride + kernel - big_h, 0);
  const std::int64_t pad_w = std::max<std::int64_t>((g.small_w - 1) * stride + kernel - big_w, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

Var conv2d(const Var& x, const Var& kernel, const Var& bias, std::int64_t stride) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  require_rank4(xv, "conv2d");
  require(kv.rank() == 4 && kv.dim(0) == kv.dim(1) && kv.dim(2) == xv.dim(3), ErrorKind::ShapeMismatch,
          "conv2d kernel " + shape_to_string(kv.shape()) + " does not fit input " + shape_to_string(xv.shape()));
  const std::int64_t batch = xv.dim(0), cin = xv.dim(3), cout = kv.dim(3);
  const auto g = ConvGeometry::same(xv.dim(1), xv.dim(2), kv.dim(0), stride);
  const std::int64_t width = g.kernel * g.kernel * cin;
  const std::int64_t pixels = g.small_h * g.small_w;
  const std::int64_t block = chunk_rows(width, pixels);

  Tensor out({batch, g.small_h, g.small_w, cout});
  std::vector<double> cols(static_cast<std::size_t>(block * width));
  ConstMatMap w(kv.data(), width, cout);
  for (std::int64_t b = 0; b < batch; ++b) {
    const double* img = xv.data() + b * g.big_h * g.big_w * cin;
    for (std::int64_t p0 = 0; p0 < pixels; p0 += block) {
      const std::int64_t rows = std::min(block, pixels - p0);
      im2col(img, g, cin, p0, rows, cols.data());
      MatMap o(out.data() + (b * pixels + p0) * cout, rows, cout);
      o.noalias() = ConstMatMap(cols.data(), rows, width) * w;
    }
  }
  std::vector<Var> inputs{x, kernel};
  if (bias.valid()) {
    add_bias(out, bias.value());
    inputs.push_back(bias);
  }

  return make_op(std::move(out), std::move(inputs), [g, width, pixels, block, batch, cin, cout](Node& self) {
    Node& xn = *self.inputs[0];
    Node& kn = *self.inputs[1];
    if (self.inputs.size() > 2) bias_grad(self.grad, *self.inputs[2]);
    const bool need_x = xn.requires_grad, need_k = kn.requires_grad;
    if (!need_x && !need_k) return;
    std::vector<double> cols(static_cast<std::size_t>(block * width));
    ConstMatMap w(kn.value.data(), width, cout);
    double* dx = need_x ? xn.ensure_grad().data() : nullptr;
    double* dk = need_k ? kn.ensure_grad().data() : nullptr;
    for (std::int64_t b = 0; b < batch; ++b) {
      const double* img = xn.value.data() + b * g.big_h * g.big_w * cin;
      for (std::int64_t p0 = 0; p0 < pixels; p0 += block) {
        const std::int64_t rows = std::min(block, pixels - p0);
        ConstMatMap dout(self.grad.data() + (b * pixels + p0) * cout, rows, cout);
        if (need_k) {
          im2col(img, g, cin, p0, rows, cols.data());
          MatMap(dk, width, cout).noalias() += ConstMatMap(cols.data(), rows, width).transpose() * dout;
        }
        if (need_x) {
          MatMap(cols.data(), rows, width).noalias() = dout * w.transpose();
          col2im(cols.data(), g, cin, p0, rows, dx + b * g.big_h * g.big_w * cin);
        }
      }
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& kernel, const Var& bias, std::int64_t stride) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  require_rank4(xv, "conv_transpose2d");
  require(kv.rank() == 4 && kv.dim(0) == kv.dim(1) && kv.dim(3) == xv.dim(3), ErrorKind::ShapeMismatch,
          "conv_transpose2d kernel " + shape_to_string(kv.shape()) + " does not fit input " +
              shape_to_string(xv.shape()));
  const std::int64_t batch = xv.dim(0), cin = xv.dim(3), cout = kv.dim(2);
  const auto g = ConvGeometry::same(xv.dim(1) * stride, xv.dim(2) * stride, kv.dim(0), stride);
  const std::int64_t width = g.kernel * g.kernel * cout;
  const std::int64_t pixels = g.small_h * g.small_w;
  const std::int64_t big_pixels = g.big_h * g.big_w;
  const std::int64_t block = chunk_rows(width, pixels);

  Tensor out({batch, g.big_h, g.big_w, cout});
  std::vector<double> cols(static_cast<std::size_t>(block * width));
  ConstMatMap w(kv.data(), width, cin);
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t p0 = 0; p0 < pixels; p0 += block) {
      const std::int64_t rows = std::min(block, pixels - p0);
      ConstMatMap xr(xv.data() + (b * pixels + p0) * cin, rows, cin);
      MatMap(cols.data(), rows, width).noalias() = xr * w.transpose();
      col2im(cols.data(), g, cout, p0, rows, out.data() + b * big_pixels * cout);
    }
  }
  std::vector<Var> inputs{x, kernel};
  if (bias.valid()) {
    add_bias(out, bias.value());
    inputs.push_back(bias);
  }

  return make_op(std::move(out), std::move(inputs),
                 [g, width, pixels, big_pixels, block, batch, cin, cout](Node& self) {
                   Node& xn = *self.inputs[0];
                   Node& kn = *self.inputs[1];
                   if (self.inputs.size() > 2) bias_grad(self.grad, *self.inputs[2]);
                   const bool need_x = xn.requires_grad, need_k = kn.requires_grad;
                   if (!need_x && !need_k) return;
                   std::vector<double> cols(static_cast<std::size_t>(block * width));
                   ConstMatMap w(kn.value.data(), width, cin);
                   double* dx = need_x ? xn.ensure_grad().data() : nullptr;
                   double* dk = need_k ? kn.ensure_grad().data() : nullptr;
                   for (std::int64_t b = 0; b < batch; ++b) {
                     const double* dimg = self.grad.data() + b * big_pixels * cout;
                     for (std::int64_t p0 = 0; p0 < pixels; p0 += block) {
                       const std::int64_t rows = std::min(block, pixels - p0);
                       im2col(dimg, g, cout, p0, rows, cols.data());
                       ConstMatMap dcols(cols.data(), rows, width);
                       if (need_x) MatMap(dx + (b * pixels + p0) * cin, rows, cin).noalias() += dcols * w;
                       if (need_k) {
                         ConstMatMap xr(xn.value.data() + (b * pixels + p0) * cin, rows, cin);
                         MatMap(dk, width, cin).noalias() += dcols.transpose() * xr;
                       }
                     }
                   }
                 });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, RunningStats& stats, const NormOptions& opt) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 2, ErrorKind::ShapeMismatch, "batch_norm needs rank >= 2");
  const std::int64_t c = xv.shape().back();
  const std::int64_t m = xv.numel() / c;
  require(gamma.value().numel() == c && beta.value().numel() == c, ErrorKind::ShapeMismatch,
          "batch_norm parameters do not match channel count " + std::to_string(c));
  if (stats.mean.numel() != c) stats.mean = Tensor({c}, 0.0);
  if (stats.var.numel() != c) stats.var = Tensor({c}, 1.0);

  std::vector<double> mean(c, 0.0), inv_std(c, 0.0);
  if (opt.use_batch_stats) {
    std::vector<double> var(c, 0.0);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < c; ++j) mean[j] += xv[i * c + j];
    for (auto& v : mean) v /= static_cast<double>(m);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < c; ++j) {
        const double d = xv[i * c + j] - mean[j];
        var[j] += d * d;
      }
    for (std::int64_t j = 0; j < c; ++j) {
      var[j] /= static_cast<double>(m);
      inv_std[j] = 1.0 / std::sqrt(var[j] + opt.eps);
      if (opt.update_running_stats) {
        const double unbiased = m > 1 ? var[j] * static_cast<double>(m) / static_cast<double>(m - 1) : var[j];
        stats.mean[j] = (1.0 - opt.momentum) * stats.mean[j] + opt.momentum * mean[j];
        stats.var[j] = (1.0 - opt.momentum) * stats.var[j] + opt.momentum * unbiased;
      }
    }
  } else {
    for (std::int64_t j = 0; j < c; ++j) {
      mean[j] = stats.mean[j];
      inv_std[j] = 1.0 / std::sqrt(stats.var[j] + opt.eps);
    }
  }

  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < c; ++j) {
      const double h = (xv[i * c + j] - mean[j]) * inv_std[j];
      xhat[i * c + j] = h;
      out[i * c + j] = gv[j] * h + bv[j];
    }

  const bool batch_stats = opt.use_batch_stats;
  return make_op(std::move(out), {x, gamma, beta},
                 [xhat = std::move(xhat), inv_std = std::move(inv_std), m, c, batch_stats](Node& self) {
                   Node& xn = *self.inputs[0];
                   Node& gn = *self.inputs[1];
                   Node& bn = *self.inputs[2];
                   const Tensor& dy = self.grad;
                   std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
                   for (std::int64_t i = 0; i < m; ++i)
                     for (std::int64_t j = 0; j < c; ++j) {
                       sum_dy[j] += dy[i * c + j];
                       sum_dy_xhat[j] += dy[i * c + j] * xhat[i * c + j];
                     }
                   if (gn.requires_grad) {
                     auto& g = gn.ensure_grad();
                     for (std::int64_t j = 0; j < c; ++j) g[j] += sum_dy_xhat[j];
                   }
                   if (bn.requires_grad) {
                     auto& g = bn.ensure_grad();
                     for (std::int64_t j = 0; j < c; ++j) g[j] += sum_dy[j];
                   }
                   if (!xn.requires_grad) return;
                   auto& dx = xn.ensure_grad();
                   const Tensor& gv = gn.value;
                   const double md = static_cast<double>(m);
                   for (std::int64_t i = 0; i < m; ++i)
                     for (std::int64_t j = 0; j < c; ++j) {
                       const double k = gv[j] * inv_std[j];
                       if (batch_stats) {
                         dx[i * c + j] +=
                             k / md * (md * dy[i * c + j] - sum_dy[j] - xhat[i * c + j] * sum_dy_xhat[j]);
                       } else {
                         dx[i * c + j] += k * dy[i * c + j];
                       }
                     }
                 });
}

Var conditional_instance_norm(const Var& x, const Var& gamma_table, const Var& beta_table, std::int64_t style,
                              double eps) {
  const Tensor& xv = x.value();
  require_rank4(xv, "conditional_instance_norm");
  const std::int64_t batch = xv.dim(0), hw = xv.dim(1) * xv.dim(2), c = xv.dim(3);
  const Tensor& gt = gamma_table.value();
  const Tensor& bt = beta_table.value();
  require(gt.rank() == 2 && gt.dim(1) == c && bt.shape() == gt.shape(), ErrorKind::ShapeMismatch,
          "conditional_instance_norm tables " + shape_to_string(gt.shape()) + " do not match channels " +
              std::to_string(c));
  if (style < 0 || style >= gt.dim(0)) {
    throw Error(ErrorKind::UnknownStyleIndex,
                "style " + std::to_string(style) + " outside table of " + std::to_string(gt.dim(0)));
  }

  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  std::vector<double> inv_std(static_cast<std::size_t>(batch * c));
  for (std::int64_t b = 0; b < batch; ++b) {
    const std::int64_t base = b * hw * c;
    for (std::int64_t j = 0; j < c; ++j) {
      double mean = 0.0;
      for (std::int64_t p = 0; p < hw; ++p) mean += xv[base + p * c + j];
      mean /= static_cast<double>(hw);
      double var = 0.0;
      for (std::int64_t p = 0; p < hw; ++p) {
        const double d = xv[base + p * c + j] - mean;
        var += d * d;
      }
      var /= static_cast<double>(hw);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[b * c + j] = is;
      for (std::int64_t p = 0; p < hw; ++p) {
        const std::int64_t idx = base + p * c + j;
        xhat[idx] = (xv[idx] - mean) * is;
        out[idx] = gt[style * c + j] * xhat[idx] + bt[style * c + j];
      }
    }
  }

  return make_op(std::move(out), {x, gamma_table, beta_table},
                 [xhat = std::move(xhat), inv_std = std::move(inv_std), batch, hw, c, style](Node& self) {
                   Node& xn = *self.inputs[0];
                   Node& gn = *self.inputs[1];
                   Node& bn = *self.inputs[2];
                   const Tensor& dy = self.grad;
                   const double n = static_cast<double>(hw);
                   for (std::int64_t b = 0; b < batch; ++b) {
                     const std::int64_t base = b * hw * c;
                     for (std::int64_t j = 0; j < c; ++j) {
                       double sum_dy = 0.0, sum_dy_xhat = 0.0;
                       for (std::int64_t p = 0; p < hw; ++p) {
                         const std::int64_t idx = base + p * c + j;
                         sum_dy += dy[idx];
                         sum_dy_xhat += dy[idx] * xhat[idx];
                       }
                       if (gn.requires_grad) gn.ensure_grad()[style * c + j] += sum_dy_xhat;
                       if (bn.requires_grad) bn.ensure_grad()[style * c + j] += sum_dy;
                       if (!xn.requires_grad) continue;
                       auto& dx = xn.ensure_grad();
                       const double k = gn.value[style * c + j] * inv_std[b * c + j] / n;
                       for (std::int64_t p = 0; p < hw; ++p) {
                         const std::int64_t idx = base + p * c + j;
                         dx[idx] += k * (n * dy[idx] - sum_dy - xhat[idx] * sum_dy_xhat);
                       }
                     }
                   }
                 });
}

Var leaky_relu(const Var& x, double slope) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : slope * v;
  return make_op(std::move(out), {x}, [slope](Node& self) {
    Node& xn = *self.inputs[0];
    auto& dx = xn.ensure_grad();
    for (std::int64_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[i] * (xn.value[i] > 0.0 ? 1.0 : slope);
  });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var tanh(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = std::tanh(v);
  return make_op(std::move(out), {x}, [](Node& self) {
    auto& dx = self.inputs[0]->ensure_grad();
    for (std::int64_t i = 0; i < dx.numel(); ++i) {
      const double y = self.value[i];
      dx[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Var dropout(const Var& x, double p, Rng& rng) {
  require(p >= 0.0 && p < 1.0, ErrorKind::InvalidConfig, "dropout probability must be in [0, 1)");
  if (p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask(x.shape());
  for (auto& m : mask.values()) m = rng.uniform() < p ? 0.0 : keep_scale;
  Tensor out = x.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
  return make_op(std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    auto& dx = self.inputs[0]->ensure_grad();
    for (std::int64_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[i] * mask[i];
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == bv.rank() && av.rank() >= 1 &&
              std::equal(av.shape().begin(), av.shape().end() - 1, bv.shape().begin()),
          ErrorKind::ShapeMismatch,
          "concat_channels of " + shape_to_string(av.shape()) + " and " + shape_to_string(bv.shape()));
  const std::int64_t ca = av.shape().back(), cb = bv.shape().back();
  const std::int64_t rows = ca ? av.numel() / ca : bv.numel() / cb;
  Shape shape = av.shape();
  shape.back() = ca + cb;
  Tensor out(shape);
  for (std::int64_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  return make_op(std::move(out), {a, b}, [rows, ca, cb](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    if (an.requires_grad) {
      auto& g = an.ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < ca; ++j) g[r * ca + j] += self.grad[r * (ca + cb) + j];
    }
    if (bn.requires_grad) {
      auto& g = bn.ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < cb; ++j) g[r * cb + j] += self.grad[r * (ca + cb) + ca + j];
    }
  });
}

Var append_embedding(const Var& x, const Var& table, std::int64_t style) {
  const Tensor& xv = x.value();
  const Tensor& tv = table.value();
  require(tv.rank() == 2, ErrorKind::ShapeMismatch, "embedding table must be (styles, dim)");
  if (style < 0 || style >= tv.dim(0)) {
    throw Error(ErrorKind::UnknownStyleIndex,
                "style " + std::to_string(style) + " outside table of " + std::to_string(tv.dim(0)));
  }
  const std::int64_t c = xv.shape().back(), e = tv.dim(1);
  const std::int64_t rows = xv.numel() / c;
  Shape shape = xv.shape();
  shape.back() = c + e;
  Tensor out(shape);
  for (std::int64_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + r * c, c, out.data() + r * (c + e));
    std::copy_n(tv.data() + style * e, e, out.data() + r * (c + e) + c);
  }
  return make_op(std::move(out), {x, table}, [rows, c, e, style](Node& self) {
    Node& xn = *self.inputs[0];
    Node& tn = *self.inputs[1];
    if (xn.requires_grad) {
      auto& g = xn.ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < c; ++j) g[r * c + j] += self.grad[r * (c + e) + j];
    }
    if (tn.requires_grad) {
      auto& g = tn.ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < e; ++j) g[style * e + j] += self.grad[r * (c + e) + c + j];
    }
  });
}

Var concat_batch(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::ShapeMismatch, "concat_batch of nothing");
  std::vector<Tensor> values;
  std::vector<std::int64_t> offsets;
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    values.push_back(p.value());
    offsets.push_back(offset);
    offset += p.value().numel();
  }
  Tensor out = typegan::concat_batch(values);
  return make_op(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& in = *self.inputs[i];
      if (!in.requires_grad) continue;
      auto& g = in.ensure_grad();
      for (std::int64_t j = 0; j < g.numel(); ++j) g[j] += self.grad[offsets[i] + j];
    }
  });
}

Var slice_batch(const Var& x, std::int64_t first, std::int64_t count) {
  Tensor out = x.value().slice_batch(first, count);
  const std::int64_t offset = first * (x.value().numel() / std::max<std::int64_t>(x.value().dim(0), 1));
  return make_op(std::move(out), {x}, [offset](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::int64_t j = 0; j < self.grad.numel(); ++j) g[offset + j] += self.grad[j];
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op(std::move(out), {x}, [](Node& self) {
    auto& dx = self.inputs[0]->ensure_grad();
    for (std::int64_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[i];
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require(xv.rank() == 2 && wv.rank() == 2 && xv.dim(1) == wv.dim(0), ErrorKind::ShapeMismatch,
          "linear of " + shape_to_string(xv.shape()) + " by " + shape_to_string(wv.shape()));
  const std::int64_t n = xv.dim(0), f = xv.dim(1), o = wv.dim(1);
  Tensor out({n, o});
  MatMap(out.data(), n, o).noalias() = ConstMatMap(xv.data(), n, f) * ConstMatMap(wv.data(), f, o);
  std::vector<Var> inputs{x, weight};
  if (bias.valid()) {
    require(bias.value().numel() == o, ErrorKind::ShapeMismatch, "linear bias size mismatch");
    add_bias(out, bias.value());
    inputs.push_back(bias);
  }
  return make_op(std::move(out), std::move(inputs), [n, f, o](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    if (self.inputs.size() > 2) bias_grad(self.grad, *self.inputs[2]);
    ConstMatMap dy(self.grad.data(), n, o);
    if (xn.requires_grad)
      MatMap(xn.ensure_grad().data(), n, f).noalias() += dy * ConstMatMap(wn.value.data(), f, o).transpose();
    if (wn.requires_grad)
      MatMap(wn.ensure_grad().data(), f, o).noalias() += ConstMatMap(xn.value.data(), n, f).transpose() * dy;
  });
}

Var mean_squared_error(const Var& a, const Var& b) {
  require(a.shape() == b.shape(), ErrorKind::ShapeMismatch,
          "mean_squared_error of " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  const std::int64_t n = a.value().numel();
  require(n > 0, ErrorKind::ShapeMismatch, "mean_squared_error of empty tensors");
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return make_op(Tensor({}, s / static_cast<double>(n)), {a, b}, [n](Node& self) {
    const double k = 2.0 * self.grad[0] / static_cast<double>(n);
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    if (an.requires_grad) {
      auto& g = an.ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) g[i] += k * (an.value[i] - bn.value[i]);
    }
    if (bn.requires_grad) {
      auto& g = bn.ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) g[i] -= k * (an.value[i] - bn.value[i]);
    }
  });
}

Var softmax_cross_entropy(const Var& logits, std::int64_t target_class) {
  const Tensor& lv = logits.value();
  require(lv.rank() == 2 && lv.dim(0) > 0, ErrorKind::ShapeMismatch,
          "softmax_cross_entropy expects (B, K) logits, got " + shape_to_string(lv.shape()));
  const std::int64_t n = lv.dim(0), k = lv.dim(1);
  require(target_class >= 0 && target_class < k, ErrorKind::InvalidConfig, "target class out of range");
  if (!lv.all_finite()) throw Error(ErrorKind::NonFiniteInput, "non-finite logits");
  Tensor probs(lv.shape());
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = lv.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::int64_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double log_z = mx + std::log(z);
    for (std::int64_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(row[j] - log_z);
    total += log_z - row[target_class];
  }
  return make_op(Tensor({}, total / static_cast<double>(n)), {logits},
                 [probs = std::move(probs), n, k, target_class](Node& self) {
                   auto& g = self.inputs[0]->ensure_grad();
                   const double s = self.grad[0] / static_cast<double>(n);
                   for (std::int64_t i = 0; i < n; ++i)
                     for (std::int64_t j = 0; j < k; ++j)
                       g[i * k + j] += s * (probs[i * k + j] - (j == target_class ? 1.0 : 0.0));
                 });
}

Var total_variation(const Var& x) {
  const Tensor& xv = x.value();
  require_rank4(xv, "total_variation");
  if (xv.dim(1) < 2 || xv.dim(2) < 2) {
    throw Error(ErrorKind::ShapeTooSmall, "total_variation needs spatial dims >= 2, got " + shape_to_string(xv.shape()));
  }
  const std::int64_t bsz = xv.dim(0), h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);
  double s = 0.0;
  for (std::int64_t b = 0; b < bsz; ++b)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t xx = 0; xx < w; ++xx)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const double v = xv.at(b, y, xx, ch);
          if (y + 1 < h) s += std::abs(xv.at(b, y + 1, xx, ch) - v);
          if (xx + 1 < w) s += std::abs(xv.at(b, y, xx + 1, ch) - v);
        }
  const double n = static_cast<double>(xv.numel());
  return make_op(Tensor({}, s / n), {x}, [bsz, h, w, c, n](Node& self) {
    Node& xn = *self.inputs[0];
    auto& g = xn.ensure_grad();
    const double k = self.grad[0] / n;
    const Tensor& v = xn.value;
    auto sign = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
    for (std::int64_t b = 0; b < bsz; ++b)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t xx = 0; xx < w; ++xx)
          for (std::int64_t ch = 0; ch < c; ++ch) {
            const double here = v.at(b, y, xx, ch);
            if (y + 1 < h) {
              const double s1 = k * sign(v.at(b, y + 1, xx, ch) - here);
              g.at(b, y + 1, xx, ch) += s1;
              g.at(b, y, xx, ch) -= s1;
            }
            if (xx + 1 < w) {
              const double s2 = k * sign(v.at(b, y, xx + 1, ch) - here);
              g.at(b, y, xx + 1, ch) += s2;
              g.at(b, y, xx, ch) -= s2;
            }
          }
  });
}

Var weighted_sum(std::span<const std::pair<double, Var>> terms) {
  double s = 0.0;
  std::vector<Var> inputs;
  std::vector<double> weights;
  for (const auto& [w, v] : terms) {
    require(v.value().numel() == 1, ErrorKind::ShapeMismatch, "weighted_sum takes scalar terms");
    s += w * v.value()[0];
    inputs.push_back(v);
    weights.push_back(w);
  }
  return make_op(Tensor({}, s), std::move(inputs), [weights = std::move(weights)](Node& self) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      Node& in = *self.inputs[i];
      if (in.requires_grad) in.ensure_grad()[0] += weights[i] * self.grad[0];
    }
  });
}

}  // namespace typegan::ops
