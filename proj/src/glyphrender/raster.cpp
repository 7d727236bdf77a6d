#include <algorithm>
#include <cmath>
#include <limits>

#include "typegan/errors.hpp"
#include "typegan/glyphrender.hpp"

namespace typegan {

namespace {

// Maximum chord deviation from the true curve, in supersampled pixels.
constexpr double kFlattenTolerance = 0.1;

struct Edge {
  double x0, y0, x1, y1;
};

class Flattener {
 public:
  explicit Flattener(double scale) : scale_(scale) {}

  void run(const Outline& outline) {
    for (const auto& cmd : outline.commands) {
      switch (cmd.kind) {
        case PathCommand::Kind::MoveTo:
          close();
          start_ = cur_ = map(cmd.pts[0]);
          open_ = true;
          break;
        case PathCommand::Kind::LineTo:
          line_to(map(cmd.pts[0]));
          break;
        case PathCommand::Kind::QuadTo: {
          const Point c = map(cmd.pts[0]), p = map(cmd.pts[1]);
          const double dd = std::hypot(cur_.x - 2 * c.x + p.x, cur_.y - 2 * c.y + p.y);
          const int n = segments(dd / (4 * kFlattenTolerance));
          const Point p0 = cur_;
          for (int i = 1; i <= n; ++i) {
            const double t = static_cast<double>(i) / n, u = 1 - t;
            line_to({u * u * p0.x + 2 * u * t * c.x + t * t * p.x, u * u * p0.y + 2 * u * t * c.y + t * t * p.y});
          }
          break;
        }
        case PathCommand::Kind::CubicTo: {
          const Point c1 = map(cmd.pts[0]), c2 = map(cmd.pts[1]), p = map(cmd.pts[2]);
          const Point p0 = cur_;
          const double m = std::max(std::hypot(p0.x - 2 * c1.x + c2.x, p0.y - 2 * c1.y + c2.y),
                                    std::hypot(c1.x - 2 * c2.x + p.x, c1.y - 2 * c2.y + p.y));
          const int n = segments(3 * m / (4 * kFlattenTolerance));
          for (int i = 1; i <= n; ++i) {
            const double t = static_cast<double>(i) / n, u = 1 - t;
            const double a = u * u * u, b = 3 * u * u * t, cc = 3 * u * t * t, d = t * t * t;
            line_to({a * p0.x + b * c1.x + cc * c2.x + d * p.x, a * p0.y + b * c1.y + cc * c2.y + d * p.y});
          }
          break;
        }
      }
    }
    close();
  }

  std::vector<Edge> edges;
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;

 private:
  static int segments(double squared) { return std::clamp(static_cast<int>(std::ceil(std::sqrt(squared))), 1, 256); }

  Point map(const Point& p) {
    // Font units (y up) to pixel units (y down), before centering.
    return {p.x * scale_, -p.y * scale_};
  }
  void extend(const Point& q) {
    min_x = std::min(min_x, q.x);
    max_x = std::max(max_x, q.x);
    min_y = std::min(min_y, q.y);
    max_y = std::max(max_y, q.y);
  }
  void line_to(const Point& p) {
    extend(cur_);
    extend(p);
    if (p.y != cur_.y) edges.push_back({cur_.x, cur_.y, p.x, p.y});
    cur_ = p;
  }
  void close() {
    if (open_) line_to(start_);
    open_ = false;
  }

  double scale_;
  Point start_{}, cur_{};
  bool open_ = false;
};

}  // namespace

RenderConfig RenderConfig::for_canvas(int canvas) {
  RenderConfig cfg;
  cfg.canvas = canvas;
  cfg.glyph_extent = static_cast<int>(std::lround(canvas * 220.0 / 256.0));
  return cfg;
}

void RenderConfig::validate() const {
  if (canvas < 1) throw Error(ErrorKind::InvalidConfig, "canvas must be positive");
  if (glyph_extent < 1 || glyph_extent > canvas)
    throw Error(ErrorKind::InvalidConfig, "glyph_extent must be in [1, canvas]");
  if (supersample < 1) throw Error(ErrorKind::InvalidConfig, "supersample must be >= 1");
}

Tensor rasterize_outline(const Outline& outline, double scale, const RenderConfig& cfg) {
  cfg.validate();
  const int s = cfg.supersample;
  const int n = cfg.canvas * s;
  Tensor image({cfg.canvas, cfg.canvas, 3}, 1.0);
  if (outline.empty()) return image;

  Flattener flat(scale * s);
  flat.run(outline);
  if (flat.edges.empty()) return image;
  const double ox = n / 2.0 - (flat.min_x + flat.max_x) / 2.0;
  const double oy = n / 2.0 - (flat.min_y + flat.max_y) / 2.0;

  std::vector<int> coverage(static_cast<std::size_t>(cfg.canvas) * static_cast<std::size_t>(cfg.canvas), 0);
  std::vector<std::pair<double, int>> crossings;
  for (int row = 0; row < n; ++row) {
    const double yc = row + 0.5 - oy;
    crossings.clear();
    for (const auto& e : flat.edges) {
      const double lo = std::min(e.y0, e.y1), hi = std::max(e.y0, e.y1);
      if (yc < lo || yc >= hi) continue;
      const double t = (yc - e.y0) / (e.y1 - e.y0);
      crossings.emplace_back(e.x0 + t * (e.x1 - e.x0) + ox, e.y1 > e.y0 ? 1 : -1);
    }
    if (crossings.empty()) continue;
    std::sort(crossings.begin(), crossings.end());
    int winding = 0;
    for (std::size_t k = 0; k + 1 < crossings.size(); ++k) {
      winding += crossings[k].second;
      if (winding == 0) continue;
      // Sample columns j whose centers j + 0.5 fall in [x_k, x_{k+1}).
      const int j0 = std::max(0, static_cast<int>(std::ceil(crossings[k].first - 0.5)));
      const int j1 = std::min(n, static_cast<int>(std::ceil(crossings[k + 1].first - 0.5)));
      int* line = coverage.data() + static_cast<std::size_t>(row / s) * static_cast<std::size_t>(cfg.canvas);
      for (int j = j0; j < j1; ++j) ++line[j / s];
    }
  }

  const double samples = static_cast<double>(s) * s;
  for (std::size_t p = 0; p < coverage.size(); ++p) {
    const double v = 1.0 - 2.0 * std::min(1.0, coverage[p] / samples);
    for (int c = 0; c < 3; ++c) image[static_cast<std::int64_t>(p) * 3 + c] = v;
  }
  return image;
}

GlyphImage rasterize(const FontHandle& font, char32_t codepoint, const RenderConfig& cfg) {
  cfg.validate();
  const Outline outline = font.outline(codepoint);
  GlyphImage g;
  g.pixels = rasterize_outline(outline, static_cast<double>(cfg.glyph_extent) / font.units_per_em(), cfg);
  g.codepoint = codepoint;
  g.font_id = font.font_id();
  g.canvas = cfg.canvas;
  return g;
}

}  // namespace typegan
