#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "typegan/font.hpp"
#include "typegan/tensor.hpp"

namespace typegan {

struct RenderConfig {
  int canvas = 256;
  int glyph_extent = 220;  // em box side in pixels
  int supersample = 2;

  /// Default config with the em box scaled in proportion to the canvas.
  static RenderConfig for_canvas(int canvas);
  void validate() const;
};

/// One rasterized character: canvas x canvas x 3 values in [-1, 1],
/// background +1, full ink -1, channels identical.
struct GlyphImage {
  Tensor pixels;
  char32_t codepoint = 0;
  std::string font_id;
  int canvas = 0;
};

/// Renders cp with its outline bounding box centered on the canvas. Blank
/// glyphs give an all +1 image. Throws MissingGlyph if cp is unmapped.
GlyphImage rasterize(const FontHandle& font, char32_t codepoint, const RenderConfig& cfg);

/// Scanline fill (non-zero winding) of an outline already in font units;
/// exposed for tests. `scale` maps font units to output pixels.
Tensor rasterize_outline(const Outline& outline, double scale, const RenderConfig& cfg);

/// Pixel <-> value mapping used for image files.
std::uint8_t value_to_pixel(double value);
double pixel_to_value(std::uint8_t pixel);

/// 8-bit grayscale PNG of channel 0 of a (H, W, C) or (H, W) tensor.
void write_png(const std::filesystem::path& path, const Tensor& image);
/// Writes raw 8-bit grayscale rows.
void write_png_gray8(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rows);
/// Loads a PNG as a (H, W, 3) tensor with value = pixel/255*2-1.
Tensor read_png(const std::filesystem::path& path);

struct CorpusRow {
  char32_t codepoint = 0;
  std::string src;  // relative to the manifest directory
  std::string tgt;
};

struct CorpusManifest {
  std::filesystem::path path;  // manifest file
  std::vector<CorpusRow> rows;

  std::filesystem::path directory() const { return path.parent_path(); }
  std::filesystem::path src_image(std::size_t i) const { return directory() / rows.at(i).src; }
  std::filesystem::path tgt_image(std::size_t i) const { return directory() / rows.at(i).tgt; }
  std::vector<char32_t> codepoints() const;
  const CorpusRow* find(char32_t cp) const;
};

inline constexpr const char* kCorpusManifestName = "corpus.jsonl";

/// Writes src/U+XXXX.png and tgt/U+XXXX.png per codepoint plus corpus.jsonl
/// (rows sorted by codepoint) under out_dir; returns the manifest path.
/// Throws MissingGlyph listing every codepoint absent from either font.
std::filesystem::path render_corpus(const FontHandle& src, const FontHandle& tgt, std::vector<char32_t> codepoints,
                                    const RenderConfig& cfg, const std::filesystem::path& out_dir);

CorpusManifest read_corpus_manifest(const std::filesystem::path& path);

/// Seeded sample of n codepoints from `pool`, returned sorted.
/// Throws InsufficientCorpus if n exceeds the pool.
std::vector<char32_t> sample_codepoints(const std::vector<char32_t>& pool, std::size_t n, std::uint64_t seed);

}  // namespace typegan
