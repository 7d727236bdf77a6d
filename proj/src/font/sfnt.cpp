#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "font_internal.hpp"

namespace typegan {

namespace {

constexpr std::uint32_t tag(const char (&s)[5]) {
  return (std::uint32_t(std::uint8_t(s[0])) << 24) | (std::uint32_t(std::uint8_t(s[1])) << 16) |
         (std::uint32_t(std::uint8_t(s[2])) << 8) | std::uint32_t(std::uint8_t(s[3]));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorKind::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t face_offset(const ByteReader& r, int face_index) {
  if (r.size() < 12) throw Error(ErrorKind::UnparsableFont, "file too small for an sfnt header");
  if (r.u32(0) == tag("ttcf")) {
    const std::uint32_t count = r.u32(8);
    if (face_index < 0 || static_cast<std::uint32_t>(face_index) >= count) {
      throw Error(ErrorKind::UnparsableFont,
                  "face index " + std::to_string(face_index) + " outside collection of " + std::to_string(count));
    }
    return r.u32(12 + 4 * static_cast<std::size_t>(face_index));
  }
  if (face_index != 0) throw Error(ErrorKind::UnparsableFont, "face index > 0 on a single-face font");
  return 0;
}

std::map<std::string, TableRecord> read_table_directory(const ByteReader& r, std::uint32_t base) {
  const std::uint32_t version = r.u32(base);
  if (version != 0x00010000u && version != tag("OTTO") && version != tag("true")) {
    throw Error(ErrorKind::UnparsableFont, "not a TrueType/OpenType file");
  }
  const std::uint16_t count = r.u16(base + 4);
  std::map<std::string, TableRecord> tables;
  for (std::uint16_t i = 0; i < count; ++i) {
    const std::size_t rec = base + 12 + 16 * std::size_t{i};
    auto name = r.slice(rec, 4);
    TableRecord t{r.u32(rec + 8), r.u32(rec + 12)};
    r.check(t.offset, t.length);
    tables[std::string(name.begin(), name.end())] = t;
  }
  return tables;
}

const TableRecord& require_table(const FontData& f, const std::string& name) {
  auto it = f.tables.find(name);
  if (it == f.tables.end()) throw Error(ErrorKind::UnparsableFont, "missing '" + name + "' table");
  return it->second;
}

void parse_cmap_format4(const ByteReader& r, std::size_t off, std::map<char32_t, std::uint32_t>& out) {
  const std::size_t seg_count = r.u16(off + 6) / 2;
  const std::size_t ends = off + 14;
  const std::size_t starts = ends + 2 * seg_count + 2;
  const std::size_t deltas = starts + 2 * seg_count;
  const std::size_t range_offsets = deltas + 2 * seg_count;
  for (std::size_t s = 0; s < seg_count; ++s) {
    const std::uint32_t end = r.u16(ends + 2 * s);
    const std::uint32_t start = r.u16(starts + 2 * s);
    const std::uint16_t delta = r.u16(deltas + 2 * s);
    const std::uint16_t range = r.u16(range_offsets + 2 * s);
    if (start > end) continue;
    for (std::uint32_t c = start; c <= end && c != 0xFFFF; ++c) {
      std::uint32_t gid = 0;
      if (range == 0) {
        gid = (c + delta) & 0xFFFFu;
      } else {
        const std::size_t addr = range_offsets + 2 * s + range + 2 * (c - start);
        gid = r.u16(addr);
        if (gid != 0) gid = (gid + delta) & 0xFFFFu;
      }
      if (gid != 0) out.emplace(static_cast<char32_t>(c), gid);
    }
  }
}

void parse_cmap_format12(const ByteReader& r, std::size_t off, std::map<char32_t, std::uint32_t>& out) {
  const std::uint32_t groups = r.u32(off + 12);
  for (std::uint32_t g = 0; g < groups; ++g) {
    const std::size_t rec = off + 16 + 12 * std::size_t{g};
    const std::uint32_t start = r.u32(rec), end = r.u32(rec + 4), first = r.u32(rec + 8);
    if (start > end || end > 0x10FFFF) throw Error(ErrorKind::UnparsableFont, "bad cmap group");
    for (std::uint32_t c = start; c <= end; ++c) {
      const std::uint32_t gid = first + (c - start);
      if (gid != 0) out.emplace(static_cast<char32_t>(c), gid);
    }
  }
}

std::map<char32_t, std::uint32_t> parse_cmap(const FontData& f) {
  const auto& t = require_table(f, "cmap");
  const ByteReader r = f.reader();
  const std::uint16_t count = r.u16(t.offset + 2);
  // Best Unicode subtable: a format 12 beats format 4.
  std::size_t best = 0;
  int best_rank = 0;
  for (std::uint16_t i = 0; i < count; ++i) {
    const std::size_t rec = t.offset + 4 + 8 * std::size_t{i};
    const std::uint16_t platform = r.u16(rec), encoding = r.u16(rec + 2);
    const std::size_t sub = t.offset + r.u32(rec + 4);
    const bool unicode = platform == 0 || (platform == 3 && (encoding == 1 || encoding == 10));
    if (!unicode) continue;
    const std::uint16_t format = r.u16(sub);
    const int rank = format == 12 ? 2 : (format == 4 ? 1 : 0);
    if (rank > best_rank) {
      best_rank = rank;
      best = sub;
    }
  }
  std::map<char32_t, std::uint32_t> out;
  if (best_rank == 2) parse_cmap_format12(r, best, out);
  else if (best_rank == 1) parse_cmap_format4(r, best, out);
  else throw Error(ErrorKind::UnparsableFont, "no Unicode cmap subtable (format 4 or 12)");
  return out;
}

}  // namespace

std::size_t Outline::contour_count() const {
  return static_cast<std::size_t>(std::count_if(commands.begin(), commands.end(), [](const PathCommand& c) {
    return c.kind == PathCommand::Kind::MoveTo;
  }));
}

Outline FontData::glyph_outline(std::uint32_t gid) const {
  return is_cff ? cff_outline(*this, gid) : truetype_outline(*this, gid);
}

FontHandle open_font(const std::filesystem::path& path, int face_index) {
  auto data = std::make_shared<FontData>();
  data->path = path;
  data->face_index = face_index;
  data->bytes = read_file(path);
  const ByteReader r = data->reader();

  const std::uint32_t base = face_offset(r, face_index);
  data->tables = read_table_directory(r, base);

  const auto& head = require_table(*data, "head");
  if (r.u32(head.offset + 12) != 0x5F0F3CF5u) throw Error(ErrorKind::UnparsableFont, "bad 'head' magic");
  data->units_per_em = r.u16(head.offset + 18);
  if (data->units_per_em == 0) throw Error(ErrorKind::UnparsableFont, "unitsPerEm is zero");
  data->num_glyphs = r.u16(require_table(*data, "maxp").offset + 4);

  if (auto it = data->tables.find("CFF "); it != data->tables.end()) {
    data->is_cff = true;
    parse_cff(*data, it->second);
  } else {
    const auto& loca = require_table(*data, "loca");
    data->glyf = require_table(*data, "glyf");
    const bool long_offsets = r.i16(head.offset + 50) != 0;
    data->loca.resize(static_cast<std::size_t>(data->num_glyphs) + 1);
    for (std::size_t i = 0; i < data->loca.size(); ++i) {
      data->loca[i] = long_offsets ? r.u32(loca.offset + 4 * i) : 2u * r.u16(loca.offset + 2 * i);
    }
    for (std::size_t i = 1; i < data->loca.size(); ++i) {
      if (data->loca[i] < data->loca[i - 1] || data->loca[i] > data->glyf.length) {
        throw Error(ErrorKind::UnparsableFont, "malformed 'loca' table");
      }
    }
  }

  data->cmap = parse_cmap(*data);
  for (const auto& [cp, gid] : data->cmap) {
    if (gid >= static_cast<std::uint32_t>(data->num_glyphs)) {
      throw Error(ErrorKind::UnparsableFont, "cmap references glyph " + std::to_string(gid) + " beyond maxp count");
    }
  }
  // Glyph inkedness is shared by every codepoint mapped to it.
  std::map<std::uint32_t, bool> inked_gid;
  for (const auto& [cp, gid] : data->cmap) {
    auto [it, fresh] = inked_gid.emplace(gid, false);
    if (fresh) {
      it->second = data->is_cff ? !cff_outline(*data, gid).empty() : truetype_has_contours(*data, gid);
    }
    if (it->second) data->inked.insert(cp);
  }

  FontHandle handle;
  handle.data_ = std::move(data);
  return handle;
}

const std::filesystem::path& FontHandle::path() const { return data_->path; }
int FontHandle::face_index() const { return data_->face_index; }
int FontHandle::units_per_em() const { return data_->units_per_em; }
const std::set<char32_t>& FontHandle::codepoint_set() const { return data_->inked; }
bool FontHandle::maps(char32_t cp) const { return data_->cmap.contains(cp); }
std::string FontHandle::outline_format() const { return data_->is_cff ? "CFF " : "glyf"; }

std::string FontHandle::font_id() const {
  return data_->path.filename().string() + "#" + std::to_string(data_->face_index);
}

Outline FontHandle::outline(char32_t cp) const {
  auto it = data_->cmap.find(cp);
  if (it == data_->cmap.end()) {
    throw Error(ErrorKind::MissingGlyph, codepoint_label(cp) + " is not mapped by " + font_id());
  }
  return data_->glyph_outline(it->second);
}

std::vector<char32_t> shared_codepoints(const FontHandle& a, const FontHandle& b) {
  std::vector<char32_t> out;
  std::set_intersection(a.codepoint_set().begin(), a.codepoint_set().end(), b.codepoint_set().begin(),
                        b.codepoint_set().end(), std::back_inserter(out));
  return out;
}

std::string codepoint_label(char32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
  return buf;
}

char32_t parse_codepoint_label(const std::string& label) {
  if (label.size() < 6 || label.size() > 8 || label[0] != 'U' || label[1] != '+') {
    throw Error(ErrorKind::InvalidConfig, "malformed codepoint label '" + label + "'");
  }
  std::uint32_t v = 0;
  for (std::size_t i = 2; i < label.size(); ++i) {
    const char c = label[i];
    std::uint32_t d = 0;
    if (c >= '0' && c <= '9') d = static_cast<std::uint32_t>(c - '0');
    else if (c >= 'A' && c <= 'F') d = static_cast<std::uint32_t>(c - 'A' + 10);
    else throw Error(ErrorKind::InvalidConfig, "malformed codepoint label '" + label + "'");
    v = v * 16 + d;
  }
  if (v > 0x10FFFF) throw Error(ErrorKind::InvalidConfig, "codepoint out of range '" + label + "'");
  return static_cast<char32_t>(v);
}

std::vector<char32_t> decode_utf8(const std::string& text) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  auto bad = [] { return Error(ErrorKind::InvalidConfig, "invalid UTF-8 text"); };
  while (i < text.size()) {
    const auto b0 = static_cast<std::uint8_t>(text[i]);
    int extra = 0;
    std::uint32_t cp = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      extra = 1;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      extra = 3;
      cp = b0 & 0x07;
    } else {
      throw bad();
    }
    if (i + static_cast<std::size_t>(extra) >= text.size()) throw bad();
    for (int k = 1; k <= extra; ++k) {
      const auto b = static_cast<std::uint8_t>(text[i + static_cast<std::size_t>(k)]);
      if ((b & 0xC0) != 0x80) throw bad();
      cp = (cp << 6) | (b & 0x3F);
    }
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) throw bad();
    out.push_back(static_cast<char32_t>(cp));
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

}  // namespace typegan
