#include <cmath>

#include "typegan/errors.hpp"
#include "typegan/trainkit.hpp"

namespace typegan {

AugmentConfig AugmentConfig::for_canvas(int canvas) {
  AugmentConfig cfg;
  cfg.max_shift_px = static_cast<int>(std::lround(8.0 * canvas / 256.0));
  return cfg;
}

void AugmentConfig::validate() const {
  if (max_shift_px < 0) throw Error(ErrorKind::InvalidConfig, "augment: max_shift_px must be >= 0");
  if (!(scale_lo > 0.0 && scale_lo <= 1.0 && 1.0 <= scale_hi)) {
    throw Error(ErrorKind::InvalidConfig, "augment: scale range must satisfy 0 < lo <= 1 <= hi");
  }
  if (!(fill >= -1.0 && fill <= 1.0)) throw Error(ErrorKind::InvalidConfig, "augment: fill must lie in [-1, 1]");
}

Tensor affine_resample(const Tensor& image, double shift_x, double shift_y, double scale, double fill) {
  if (image.rank() != 3) throw Error(ErrorKind::ShapeMismatch, "affine_resample expects (H, W, C)");
  const std::int64_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  const double cx = w / 2.0, cy = h / 2.0;
  Tensor out(image.shape());
  auto read = [&](std::int64_t y, std::int64_t x, std::int64_t ch) {
    return (y < 0 || y >= h || x < 0 || x >= w) ? fill : image[(y * w + x) * c + ch];
  };
  for (std::int64_t y = 0; y < h; ++y) {
    const double sy = (y + 0.5 - cy - shift_y) / scale + cy - 0.5;
    const double fy = std::floor(sy);
    const double ty = sy - fy;
    const auto y0 = static_cast<std::int64_t>(fy);
    for (std::int64_t x = 0; x < w; ++x) {
      const double sx = (x + 0.5 - cx - shift_x) / scale + cx - 0.5;
      const double fx = std::floor(sx);
      const double tx = sx - fx;
      const auto x0 = static_cast<std::int64_t>(fx);
      for (std::int64_t ch = 0; ch < c; ++ch) {
        double v = (1 - ty) * (1 - tx) * read(y0, x0, ch);
        if (tx > 0) v += (1 - ty) * tx * read(y0, x0 + 1, ch);
        if (ty > 0) v += ty * (1 - tx) * read(y0 + 1, x0, ch);
        if (tx > 0 && ty > 0) v += ty * tx * read(y0 + 1, x0 + 1, ch);
        out[(y * w + x) * c + ch] = v;
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& batch, const AugmentConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return batch;
  cfg.validate();
  if (batch.rank() != 4) throw Error(ErrorKind::ShapeMismatch, "augment expects an NHWC batch");
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(batch.dim(0)));
  const double m = cfg.max_shift_px;
  for (std::int64_t b = 0; b < batch.dim(0); ++b) {
    const double dx = rng.uniform(-m, m);
    const double dy = rng.uniform(-m, m);
    const double s = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    const Tensor img = batch.slice_batch(b, 1).reshaped({batch.dim(1), batch.dim(2), batch.dim(3)});
    out.push_back(affine_resample(img, dx, dy, s, cfg.fill));
  }
  return stack(out);
}

}  // namespace typegan
