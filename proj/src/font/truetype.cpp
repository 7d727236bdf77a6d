#include <array>

#include "font_internal.hpp"

namespace typegan {

namespace {

constexpr int kMaxCompositeDepth = 8;

struct RawPoint {
  double x, y;
  bool on_curve;
};

struct Affine {
  double xx = 1, xy = 0, yx = 0, yy = 1, dx = 0, dy = 0;
  Point apply(double x, double y) const { return {xx * x + yx * y + dx, xy * x + yy * y + dy}; }
  Affine then(const Affine& outer) const {
    // outer(this(p))
    Affine r;
    r.xx = outer.xx * xx + outer.yx * xy;
    r.xy = outer.xy * xx + outer.yy * xy;
    r.yx = outer.xx * yx + outer.yx * yy;
    r.yy = outer.xy * yx + outer.yy * yy;
    const Point t = outer.apply(dx, dy);
    r.dx = t.x;
    r.dy = t.y;
    return r;
  }
};

std::span<const std::uint8_t> glyph_bytes(const FontData& f, std::uint32_t gid) {
  if (gid + 1 >= f.loca.size()) throw Error(ErrorKind::UnparsableFont, "glyph id out of range");
  const std::uint32_t start = f.loca[gid], end = f.loca[gid + 1];
  return f.reader().slice(f.glyf.offset + start, end - start);
}

void emit_contour(const std::vector<RawPoint>& pts, const Affine& m, Outline& out) {
  const std::size_t n = pts.size();
  if (n == 0) return;
  auto at = [&](std::size_t i) { return pts[i % n]; };
  auto xf = [&](double x, double y) { return m.apply(x, y); };

  // Start from an on-curve point (or the implied midpoint of two off-curve ones).
  std::size_t first = n;
  for (std::size_t i = 0; i < n; ++i)
    if (pts[i].on_curve) {
      first = i;
      break;
    }
  Point start;
  std::size_t begin = 0;
  if (first == n) {
    start = xf((pts[0].x + pts[n - 1].x) / 2, (pts[0].y + pts[n - 1].y) / 2);
    begin = 0;
  } else {
    start = xf(pts[first].x, pts[first].y);
    begin = first + 1;
  }
  out.commands.push_back({PathCommand::Kind::MoveTo, {start}});

  bool have_control = false;
  Point control{};
  for (std::size_t k = 0; k < n; ++k) {
    const RawPoint p = at(begin + k);
    const Point q = xf(p.x, p.y);
    if (p.on_curve) {
      if (have_control) out.commands.push_back({PathCommand::Kind::QuadTo, {control, q}});
      else out.commands.push_back({PathCommand::Kind::LineTo, {q}});
      have_control = false;
    } else {
      if (have_control) {
        const Point mid{(control.x + q.x) / 2, (control.y + q.y) / 2};
        out.commands.push_back({PathCommand::Kind::QuadTo, {control, mid}});
      }
      control = q;
      have_control = true;
    }
  }
  if (have_control) out.commands.push_back({PathCommand::Kind::QuadTo, {control, start}});
}

void simple_glyph(const ByteReader& r, std::int16_t contours, const Affine& m, Outline& out) {
  std::vector<std::uint16_t> ends(static_cast<std::size_t>(contours));
  std::size_t off = 10;
  for (auto& e : ends) {
    e = r.u16(off);
    off += 2;
  }
  const std::size_t n_points = ends.empty() ? 0 : std::size_t{ends.back()} + 1;
  off += 2 + r.u16(off);  // skip instructions

  std::vector<std::uint8_t> flags;
  flags.reserve(n_points);
  while (flags.size() < n_points) {
    const std::uint8_t f = r.u8(off++);
    flags.push_back(f);
    if (f & 0x08) {
      const std::uint8_t repeat = r.u8(off++);
      for (int i = 0; i < repeat; ++i) flags.push_back(f);
    }
  }
  flags.resize(n_points);

  std::vector<RawPoint> pts(n_points);
  std::int32_t x = 0;
  for (std::size_t i = 0; i < n_points; ++i) {
    const std::uint8_t f = flags[i];
    if (f & 0x02) {
      const int d = r.u8(off++);
      x += (f & 0x10) ? d : -d;
    } else if (!(f & 0x10)) {
      x += r.i16(off);
      off += 2;
    }
    pts[i].x = x;
    pts[i].on_curve = f & 0x01;
  }
  std::int32_t y = 0;
  for (std::size_t i = 0; i < n_points; ++i) {
    const std::uint8_t f = flags[i];
    if (f & 0x04) {
      const int d = r.u8(off++);
      y += (f & 0x20) ? d : -d;
    } else if (!(f & 0x20)) {
      y += r.i16(off);
      off += 2;
    }
    pts[i].y = y;
  }

  std::size_t first = 0;
  for (auto e : ends) {
    if (e < first || e >= n_points) throw Error(ErrorKind::UnparsableFont, "bad contour end point");
    emit_contour({pts.begin() + static_cast<std::ptrdiff_t>(first), pts.begin() + e + 1}, m, out);
    first = std::size_t{e} + 1;
  }
}

double f2dot14(std::int16_t v) { return v / 16384.0; }

void glyph_into(const FontData& f, std::uint32_t gid, const Affine& m, int depth, Outline& out) {
  if (depth > kMaxCompositeDepth) throw Error(ErrorKind::UnparsableFont, "composite glyph nesting too deep");
  const auto bytes = glyph_bytes(f, gid);
  if (bytes.empty()) return;
  const ByteReader r(bytes);
  const std::int16_t contours = r.i16(0);
  if (contours >= 0) {
    simple_glyph(r, contours, m, out);
    return;
  }
  std::size_t off = 10;
  std::uint16_t flags = 0;
  do {
    flags = r.u16(off);
    const std::uint16_t component = r.u16(off + 2);
    off += 4;
    double a1 = 0, a2 = 0;
    if (flags & 0x0001) {
      a1 = r.i16(off);
      a2 = r.i16(off + 2);
      off += 4;
    } else {
      a1 = static_cast<std::int8_t>(r.u8(off));
      a2 = static_cast<std::int8_t>(r.u8(off + 1));
      off += 2;
    }
    Affine local;
    if (flags & 0x0008) {
      local.xx = local.yy = f2dot14(r.i16(off));
      off += 2;
    } else if (flags & 0x0040) {
      local.xx = f2dot14(r.i16(off));
      local.yy = f2dot14(r.i16(off + 2));
      off += 4;
    } else if (flags & 0x0080) {
      local.xx = f2dot14(r.i16(off));
      local.xy = f2dot14(r.i16(off + 2));
      local.yx = f2dot14(r.i16(off + 4));
      local.yy = f2dot14(r.i16(off + 6));
      off += 8;
    }
    // Point-matched placement (ARGS_ARE_XY_VALUES clear) is not supported;
    // such components are placed without offset.
    if (flags & 0x0002) {
      local.dx = a1;
      local.dy = a2;
    }
    glyph_into(f, component, local.then(m), depth + 1, out);
  } while (flags & 0x0020);
}

bool has_contours(const FontData& f, std::uint32_t gid, int depth) {
  if (depth > kMaxCompositeDepth) throw Error(ErrorKind::UnparsableFont, "composite glyph nesting too deep");
  const auto bytes = glyph_bytes(f, gid);
  if (bytes.size() < 10) return false;
  const ByteReader r(bytes);
  const std::int16_t contours = r.i16(0);
  if (contours > 0) return true;
  if (contours == 0) return false;
  std::size_t off = 10;
  std::uint16_t flags = 0;
  do {
    flags = r.u16(off);
    if (has_contours(f, r.u16(off + 2), depth + 1)) return true;
    off += 4 + ((flags & 0x0001) ? 4 : 2);
    if (flags & 0x0008) off += 2;
    else if (flags & 0x0040) off += 4;
    else if (flags & 0x0080) off += 8;
  } while (flags & 0x0020);
  return false;
}

}  // namespace

Outline truetype_outline(const FontData& font, std::uint32_t gid) {
  Outline out;
  glyph_into(font, gid, Affine{}, 0, out);
  return out;
}

bool truetype_has_contours(const FontData& font, std::uint32_t gid) { return has_contours(font, gid, 0); }

}  // namespace typegan
