#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "typegan/errors.hpp"
#include "typegan/font.hpp"

namespace typegan {

/// Bounds-checked big-endian reads over a font file.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t size() const { return bytes_.size(); }

  std::uint8_t u8(std::size_t off) const {
    check(off, 1);
    return bytes_[off];
  }
  std::uint16_t u16(std::size_t off) const {
    check(off, 2);
    return static_cast<std::uint16_t>((bytes_[off] << 8) | bytes_[off + 1]);
  }
  std::int16_t i16(std::size_t off) const { return static_cast<std::int16_t>(u16(off)); }
  std::uint32_t u32(std::size_t off) const {
    check(off, 4);
    return (std::uint32_t{bytes_[off]} << 24) | (std::uint32_t{bytes_[off + 1]} << 16) |
           (std::uint32_t{bytes_[off + 2]} << 8) | std::uint32_t{bytes_[off + 3]};
  }
  std::int32_t i32(std::size_t off) const { return static_cast<std::int32_t>(u32(off)); }
  /// Big-endian unsigned of 1..4 bytes.
  std::uint32_t uint_n(std::size_t off, int n) const {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | u8(off + static_cast<std::size_t>(i));
    return v;
  }
  std::span<const std::uint8_t> slice(std::size_t off, std::size_t len) const {
    check(off, len);
    return bytes_.subspan(off, len);
  }

  void check(std::size_t off, std::size_t len) const {
    if (off > bytes_.size() || len > bytes_.size() - off) {
      throw Error(ErrorKind::UnparsableFont, "read past end of data at offset " + std::to_string(off));
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
};

struct TableRecord {
  std::uint32_t offset = 0;
  std::uint32_t length = 0;
};

/// CFF Type 2 charstring program source for one face.
struct CffFace {
  std::vector<std::span<const std::uint8_t>> charstrings;
  std::vector<std::span<const std::uint8_t>> global_subrs;
  // One local subr set per font dict; non-CID fonts have exactly one.
  std::vector<std::vector<std::span<const std::uint8_t>>> local_subrs;
  std::vector<std::uint8_t> fd_select;  // per glyph; empty means fd 0
};

struct FontData {
  std::filesystem::path path;
  int face_index = 0;
  std::vector<std::uint8_t> bytes;
  std::map<std::string, TableRecord> tables;
  int units_per_em = 0;
  int num_glyphs = 0;
  bool is_cff = false;
  // TrueType
  std::vector<std::uint32_t> loca;
  TableRecord glyf;
  // CFF
  CffFace cff;

  std::map<char32_t, std::uint32_t> cmap;
  std::set<char32_t> inked;

  ByteReader reader() const { return ByteReader(bytes); }
  Outline glyph_outline(std::uint32_t gid) const;
};

// sfnt glyf outlines.
Outline truetype_outline(const FontData& font, std::uint32_t gid);
bool truetype_has_contours(const FontData& font, std::uint32_t gid);

// CFF (Type 2 charstrings).
void parse_cff(FontData& font, const TableRecord& table);
Outline cff_outline(const FontData& font, std::uint32_t gid);

}  // namespace typegan
