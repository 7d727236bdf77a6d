#include <cmath>
#include <optional>

#include "font_internal.hpp"

namespace typegan {

namespace {

using Bytes = std::span<const std::uint8_t>;

constexpr int kMaxSubrDepth = 10;
constexpr std::size_t kMaxStack = 513;

struct Index {
  std::vector<Bytes> items;
  std::size_t end = 0;  // offset just past the INDEX
};

Index read_index(const ByteReader& r, std::size_t off) {
  Index idx;
  const std::uint16_t count = r.u16(off);
  if (count == 0) {
    idx.end = off + 2;
    return idx;
  }
  const int off_size = r.u8(off + 2);
  if (off_size < 1 || off_size > 4) throw Error(ErrorKind::UnparsableFont, "bad CFF INDEX offSize");
  const std::size_t offsets = off + 3;
  const std::size_t data = offsets + (std::size_t{count} + 1) * static_cast<std::size_t>(off_size) - 1;
  idx.items.reserve(count);
  std::uint32_t prev = r.uint_n(offsets, off_size);
  for (std::size_t i = 1; i <= count; ++i) {
    const std::uint32_t cur = r.uint_n(offsets + i * static_cast<std::size_t>(off_size), off_size);
    if (cur < prev) throw Error(ErrorKind::UnparsableFont, "non-monotonic CFF INDEX");
    idx.items.push_back(r.slice(data + prev, cur - prev));
    prev = cur;
  }
  idx.end = data + prev;
  return idx;
}

/// Parsed DICT: operator (escaped ops as 1200 + b1) to operand list.
using Dict = std::map<int, std::vector<double>>;

Dict read_dict(Bytes bytes) {
  Dict dict;
  std::vector<double> operands;
  const ByteReader r(bytes);
  std::size_t i = 0;
  while (i < bytes.size()) {
    const int b0 = bytes[i];
    if (b0 <= 21) {
      int op = b0;
      ++i;
      if (b0 == 12) op = 1200 + r.u8(i++);
      dict[op] = operands;
      operands.clear();
    } else if (b0 == 28) {
      operands.push_back(r.i16(i + 1));
      i += 3;
    } else if (b0 == 29) {
      operands.push_back(r.i32(i + 1));
      i += 5;
    } else if (b0 == 30) {
      // Real number in packed BCD; the value is not needed for the keys used
      // here, so it is skipped and recorded as 0.
      ++i;
      bool done = false;
      while (!done) {
        const int b = r.u8(i++);
        done = (b & 0x0F) == 0x0F || (b >> 4) == 0x0F;
      }
      operands.push_back(0.0);
    } else if (b0 >= 32 && b0 <= 246) {
      operands.push_back(b0 - 139);
      ++i;
    } else if (b0 >= 247 && b0 <= 250) {
      operands.push_back((b0 - 247) * 256 + r.u8(i + 1) + 108);
      i += 2;
    } else if (b0 >= 251 && b0 <= 254) {
      operands.push_back(-(b0 - 251) * 256 - r.u8(i + 1) - 108);
      i += 2;
    } else {
      throw Error(ErrorKind::UnparsableFont, "bad CFF DICT byte " + std::to_string(b0));
    }
  }
  return dict;
}

std::optional<std::vector<double>> dict_get(const Dict& d, int op) {
  auto it = d.find(op);
  if (it == d.end()) return std::nullopt;
  return it->second;
}

std::vector<Bytes> read_private_subrs(const ByteReader& r, std::size_t cff_start, const Dict& font_dict) {
  auto priv = dict_get(font_dict, 18);
  if (!priv || priv->size() < 2) return {};
  const auto size = static_cast<std::size_t>((*priv)[0]);
  const std::size_t offset = cff_start + static_cast<std::size_t>((*priv)[1]);
  const Dict private_dict = read_dict(r.slice(offset, size));
  auto subrs = dict_get(private_dict, 19);
  if (!subrs || subrs->empty()) return {};
  return read_index(r, offset + static_cast<std::size_t>((*subrs)[0])).items;
}

int subr_bias(std::size_t count) {
  if (count < 1240) return 107;
  if (count < 33900) return 1131;
  return 32768;
}

/// Type 2 charstring interpreter producing an Outline.
class CharstringRunner {
 public:
  CharstringRunner(const CffFace& face, const std::vector<Bytes>& local) : face_(face), local_(local) {}

  Outline run(Bytes program) {
    execute(program, 0);
    return std::move(out_);
  }

 private:
  void execute(Bytes code, int depth) {
    if (depth > kMaxSubrDepth) throw Error(ErrorKind::UnparsableFont, "charstring subroutine nesting too deep");
    const ByteReader r(code);
    std::size_t i = 0;
    while (i < code.size()) {
      if (done_) return;
      const int b0 = code[i];
      if (b0 >= 32 || b0 == 28) {
        if (b0 == 28) {
          push(r.i16(i + 1));
          i += 3;
        } else if (b0 <= 246) {
          push(b0 - 139);
          i += 1;
        } else if (b0 <= 250) {
          push((b0 - 247) * 256 + r.u8(i + 1) + 108);
          i += 2;
        } else if (b0 <= 254) {
          push(-(b0 - 251) * 256 - r.u8(i + 1) - 108);
          i += 2;
        } else {
          push(r.i32(i + 1) / 65536.0);
          i += 5;
        }
        continue;
      }
      ++i;
      switch (b0) {
        case 1:   // hstem
        case 3:   // vstem
        case 18:  // hstemhm
        case 23:  // vstemhm
          stems(true);
          break;
        case 19:  // hintmask
        case 20:  // cntrmask
          stems(true);
          i += static_cast<std::size_t>((stem_count_ + 7) / 8);
          break;
        case 21:
          take_width(2);
          close_contour();
          move(arg(0), arg(1));
          clear();
          break;
        case 22:
          take_width(1);
          close_contour();
          move(arg(0), 0);
          clear();
          break;
        case 4:
          take_width(1);
          close_contour();
          move(0, arg(0));
          clear();
          break;
        case 5:
          for (std::size_t k = 0; k + 1 < stack_.size(); k += 2) line(stack_[k], stack_[k + 1]);
          clear();
          break;
        case 6:
        case 7: {
          bool horizontal = b0 == 6;
          for (double d : stack_) {
            horizontal ? line(d, 0) : line(0, d);
            horizontal = !horizontal;
          }
          clear();
          break;
        }
        case 8:
          for (std::size_t k = 0; k + 5 < stack_.size(); k += 6) curve_at(k);
          clear();
          break;
        case 24: {  // rcurveline
          std::size_t k = 0;
          for (; k + 7 < stack_.size(); k += 6) curve_at(k);
          if (k + 1 < stack_.size()) line(stack_[k], stack_[k + 1]);
          clear();
          break;
        }
        case 25: {  // rlinecurve
          std::size_t k = 0;
          for (; k + 7 < stack_.size(); k += 2) line(stack_[k], stack_[k + 1]);
          if (k + 5 < stack_.size()) curve_at(k);
          clear();
          break;
        }
        case 26: {  // vvcurveto
          std::size_t k = 0;
          double dx1 = 0;
          if (stack_.size() % 2 == 1) dx1 = stack_[k++];
          for (; k + 3 < stack_.size(); k += 4) {
            curve(dx1, stack_[k], stack_[k + 1], stack_[k + 2], 0, stack_[k + 3]);
            dx1 = 0;
          }
          clear();
          break;
        }
        case 27: {  // hhcurveto
          std::size_t k = 0;
          double dy1 = 0;
          if (stack_.size() % 2 == 1) dy1 = stack_[k++];
          for (; k + 3 < stack_.size(); k += 4) {
            curve(stack_[k], dy1, stack_[k + 1], stack_[k + 2], stack_[k + 3], 0);
            dy1 = 0;
          }
          clear();
          break;
        }
        case 30:  // vhcurveto
        case 31:  // hvcurveto
          alternating_curves(b0 == 31);
          clear();
          break;
        case 10: {
          const int index = static_cast<int>(pop()) + subr_bias(local_.size());
          if (index < 0 || static_cast<std::size_t>(index) >= local_.size())
            throw Error(ErrorKind::UnparsableFont, "callsubr index out of range");
          execute(local_[static_cast<std::size_t>(index)], depth + 1);
          break;
        }
        case 29: {
          const int index = static_cast<int>(pop()) + subr_bias(face_.global_subrs.size());
          if (index < 0 || static_cast<std::size_t>(index) >= face_.global_subrs.size())
            throw Error(ErrorKind::UnparsableFont, "callgsubr index out of range");
          execute(face_.global_subrs[static_cast<std::size_t>(index)], depth + 1);
          break;
        }
        case 11:  // return
          return;
        case 14:  // endchar
          if (!width_seen_ && (stack_.size() == 1 || stack_.size() == 5)) width_seen_ = true;
          close_contour();
          done_ = true;
          return;
        case 12:
          escape(r.u8(i++));
          break;
        default:
          throw Error(ErrorKind::UnparsableFont, "unsupported charstring operator " + std::to_string(b0));
      }
    }
  }

  void escape(int op) {
    switch (op) {
      case 35:  // flex
        need(13);
        curve_at(0);
        curve_at(6);
        break;
      case 34: {  // hflex
        need(7);
        const auto& s = stack_;
        curve(s[0], 0, s[1], s[2], s[3], 0);
        curve(s[4], 0, s[5], -s[2], s[6], 0);
        break;
      }
      case 36: {  // hflex1
        need(9);
        const auto& s = stack_;
        curve(s[0], s[1], s[2], s[3], s[4], 0);
        curve(s[5], 0, s[6], s[7], s[8], -(s[1] + s[3] + s[7]));
        break;
      }
      case 37: {  // flex1
        need(11);
        const auto& s = stack_;
        double dx = 0, dy = 0;
        for (int k = 0; k < 10; k += 2) {
          dx += s[static_cast<std::size_t>(k)];
          dy += s[static_cast<std::size_t>(k) + 1];
        }
        curve(s[0], s[1], s[2], s[3], s[4], s[5]);
        if (std::abs(dx) > std::abs(dy)) curve(s[6], s[7], s[8], s[9], s[10], -dy);
        else curve(s[6], s[7], s[8], s[9], -dx, s[10]);
        break;
      }
      case 9: need(1); stack_.back() = std::abs(stack_.back()); return;
      case 10: { const double b = pop(), a = pop(); push(a + b); return; }
      case 11: { const double b = pop(), a = pop(); push(a - b); return; }
      case 12: { const double b = pop(), a = pop(); push(b != 0 ? a / b : 0); return; }
      case 14: need(1); stack_.back() = -stack_.back(); return;
      case 18: pop(); return;
      case 24: { const double b = pop(), a = pop(); push(a * b); return; }
      case 26: need(1); stack_.back() = std::sqrt(std::abs(stack_.back())); return;
      case 27: need(1); push(stack_.back()); return;
      case 28: { const double b = pop(), a = pop(); push(b); push(a); return; }
      default:
        throw Error(ErrorKind::UnparsableFont, "unsupported charstring operator 12 " + std::to_string(op));
    }
    clear();
  }

  void need(std::size_t n) {
    if (stack_.size() < n) throw Error(ErrorKind::UnparsableFont, "charstring stack underflow");
  }
  void push(double v) {
    if (stack_.size() >= kMaxStack) throw Error(ErrorKind::UnparsableFont, "charstring stack overflow");
    stack_.push_back(v);
  }
  double pop() {
    need(1);
    const double v = stack_.back();
    stack_.pop_back();
    return v;
  }
  void clear() {
    stack_.clear();
    first_arg_ = 0;
  }
  double arg(std::size_t k) const {
    if (first_arg_ + k >= stack_.size()) throw Error(ErrorKind::UnparsableFont, "charstring stack underflow");
    return stack_[first_arg_ + k];
  }

  // The first stack-clearing operator may carry an extra leading width operand.
  void take_width(std::size_t expected) {
    if (!width_seen_ && stack_.size() > expected) first_arg_ = 1;
    width_seen_ = true;
  }
  void stems(bool clear_after) {
    if (!width_seen_ && stack_.size() % 2 == 1) first_arg_ = 1;
    width_seen_ = true;
    stem_count_ += static_cast<int>((stack_.size() - first_arg_) / 2);
    if (clear_after) clear();
  }

  void move(double dx, double dy) {
    x_ += dx;
    y_ += dy;
    out_.commands.push_back({PathCommand::Kind::MoveTo, {{x_, y_}}});
    open_ = true;
  }
  void ensure_open() {
    if (!open_) move(0, 0);
  }
  void line(double dx, double dy) {
    ensure_open();
    x_ += dx;
    y_ += dy;
    out_.commands.push_back({PathCommand::Kind::LineTo, {{x_, y_}}});
  }
  void curve(double dx1, double dy1, double dx2, double dy2, double dx3, double dy3) {
    ensure_open();
    const Point c1{x_ + dx1, y_ + dy1};
    const Point c2{c1.x + dx2, c1.y + dy2};
    x_ = c2.x + dx3;
    y_ = c2.y + dy3;
    out_.commands.push_back({PathCommand::Kind::CubicTo, {c1, c2, {x_, y_}}});
  }
  void curve_at(std::size_t k) {
    const auto& s = stack_;
    curve(s[k], s[k + 1], s[k + 2], s[k + 3], s[k + 4], s[k + 5]);
  }
  void alternating_curves(bool horizontal_first) {
    const auto& s = stack_;
    const std::size_t n = s.size();
    bool horizontal = horizontal_first;
    for (std::size_t k = 0; k + 3 < n; k += 4) {
      const bool last = k + 4 >= n - 1;
      const double extra = (last && n - k == 5) ? s[k + 4] : 0.0;
      if (horizontal) curve(s[k], 0, s[k + 1], s[k + 2], extra, s[k + 3]);
      else curve(0, s[k], s[k + 1], s[k + 2], s[k + 3], extra);
      horizontal = !horizontal;
    }
  }
  void close_contour() {
    // Drop degenerate contours that are a bare MoveTo.
    if (open_ && !out_.commands.empty() && out_.commands.back().kind == PathCommand::Kind::MoveTo) {
      out_.commands.pop_back();
    }
    open_ = false;
  }

  const CffFace& face_;
  const std::vector<Bytes>& local_;
  Outline out_;
  std::vector<double> stack_;
  std::size_t first_arg_ = 0;
  bool width_seen_ = false;
  bool done_ = false;
  bool open_ = false;
  int stem_count_ = 0;
  double x_ = 0, y_ = 0;
};

}  // namespace

void parse_cff(FontData& font, const TableRecord& table) {
  const ByteReader r = font.reader();
  const std::size_t start = table.offset;
  if (r.u8(start) != 1) throw Error(ErrorKind::UnparsableFont, "only CFF version 1 is supported");
  const std::size_t header_size = r.u8(start + 2);
  const Index names = read_index(r, start + header_size);
  const Index top_dicts = read_index(r, names.end);
  const Index strings = read_index(r, top_dicts.end);
  const Index gsubrs = read_index(r, strings.end);
  if (top_dicts.items.empty()) throw Error(ErrorKind::UnparsableFont, "CFF has no Top DICT");
  const Dict top = read_dict(top_dicts.items.front());

  CffFace& face = font.cff;
  face.global_subrs = gsubrs.items;
  auto charstrings = dict_get(top, 17);
  if (!charstrings || charstrings->empty()) throw Error(ErrorKind::UnparsableFont, "CFF without CharStrings");
  face.charstrings = read_index(r, start + static_cast<std::size_t>((*charstrings)[0])).items;
  if (face.charstrings.size() < static_cast<std::size_t>(font.num_glyphs)) {
    throw Error(ErrorKind::UnparsableFont, "CFF CharStrings count below maxp glyph count");
  }

  auto fd_array = dict_get(top, 1236);
  if (fd_array && !fd_array->empty()) {
    const Index fds = read_index(r, start + static_cast<std::size_t>((*fd_array)[0]));
    for (const auto& fd : fds.items) face.local_subrs.push_back(read_private_subrs(r, start, read_dict(fd)));
    auto fd_select = dict_get(top, 1237);
    if (!fd_select || fd_select->empty()) throw Error(ErrorKind::UnparsableFont, "CID CFF without FDSelect");
    const std::size_t off = start + static_cast<std::size_t>((*fd_select)[0]);
    const std::size_t n = face.charstrings.size();
    face.fd_select.assign(n, 0);
    const int format = r.u8(off);
    if (format == 0) {
      for (std::size_t g = 0; g < n; ++g) face.fd_select[g] = r.u8(off + 1 + g);
    } else if (format == 3) {
      const std::uint16_t ranges = r.u16(off + 1);
      for (std::uint16_t k = 0; k < ranges; ++k) {
        const std::size_t rec = off + 3 + 3 * std::size_t{k};
        const std::uint16_t first = r.u16(rec);
        const std::uint8_t fd = r.u8(rec + 2);
        const std::uint16_t next = r.u16(rec + 3);
        for (std::size_t g = first; g < next && g < n; ++g) face.fd_select[g] = fd;
      }
    } else {
      throw Error(ErrorKind::UnparsableFont, "unsupported FDSelect format " + std::to_string(format));
    }
    for (auto fd : face.fd_select) {
      if (fd >= face.local_subrs.size()) throw Error(ErrorKind::UnparsableFont, "FDSelect references missing FD");
    }
  } else {
    face.local_subrs.push_back(read_private_subrs(r, start, top));
  }
}

Outline cff_outline(const FontData& font, std::uint32_t gid) {
  const CffFace& face = font.cff;
  if (gid >= face.charstrings.size()) throw Error(ErrorKind::UnparsableFont, "glyph id out of range");
  const std::size_t fd = face.fd_select.empty() ? 0 : face.fd_select[gid];
  CharstringRunner runner(face, face.local_subrs[fd]);
  return runner.run(face.charstrings[gid]);
}

}  // namespace typegan
