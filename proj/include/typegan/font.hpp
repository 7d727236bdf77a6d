#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace typegan {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// One outline drawing command in font units (y up). Contours are implicitly
/// closed at the next MoveTo and at the end of the outline.
struct PathCommand {
  enum class Kind { MoveTo, LineTo, QuadTo, CubicTo };
  Kind kind = Kind::MoveTo;
  // MoveTo/LineTo use pts[0]; QuadTo uses pts[0] (control), pts[1];
  // CubicTo uses pts[0], pts[1] (controls), pts[2].
  Point pts[3];
};

struct Outline {
  std::vector<PathCommand> commands;

  bool empty() const { return commands.empty(); }
  std::size_t contour_count() const;
};

struct FontData;

/// An opened TrueType/OpenType face. Immutable; copies share the parsed data
/// and are safe to use concurrently.
class FontHandle {
 public:
  const std::filesystem::path& path() const;
  int face_index() const;
  int units_per_em() const;

  /// Codepoints mapped by the cmap whose glyph has at least one contour.
  const std::set<char32_t>& codepoint_set() const;

  /// True if the cmap maps cp to a real glyph (blank glyphs included).
  bool maps(char32_t cp) const;

  /// Outline of cp's glyph; empty for blank glyphs. Throws MissingGlyph if
  /// cp is not mapped.
  Outline outline(char32_t cp) const;

  /// "<file name>#<face index>", used to tag rendered glyphs.
  std::string font_id() const;

  /// "glyf" or "CFF ".
  std::string outline_format() const;

 private:
  friend FontHandle open_font(const std::filesystem::path&, int);
  std::shared_ptr<const FontData> data_;
};

/// Parses a .ttf/.otf/.ttc file. Throws FileNotFound or UnparsableFont.
FontHandle open_font(const std::filesystem::path& path, int face_index = 0);

/// Sorted intersection of the two faces' codepoint sets.
std::vector<char32_t> shared_codepoints(const FontHandle& a, const FontHandle& b);

/// "U+6C38"-style label (at least four uppercase hex digits).
std::string codepoint_label(char32_t cp);
/// Inverse of codepoint_label; throws InvalidConfig on malformed input.
char32_t parse_codepoint_label(const std::string& label);

/// Decodes UTF-8 text into codepoints; throws InvalidConfig on bad input.
std::vector<char32_t> decode_utf8(const std::string& text);

}  // namespace typegan
