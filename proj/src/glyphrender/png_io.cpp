#include <png.h>

#include <algorithm>
#include <cmath>

#include "typegan/errors.hpp"
#include "typegan/glyphrender.hpp"

namespace typegan {

std::uint8_t value_to_pixel(double value) {
  const double v = std::clamp(value, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::lround((v + 1.0) / 2.0 * 255.0));
}

double pixel_to_value(std::uint8_t pixel) { return pixel / 255.0 * 2.0 - 1.0; }

void write_png_gray8(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rows) {
  if (rows.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorKind::IoError, "pixel buffer does not match image size");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, rows.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::IoError, "cannot write " + path.string() + ": " + msg);
  }
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 2 && image.rank() != 3) {
    throw Error(ErrorKind::ShapeMismatch, "write_png expects (H, W) or (H, W, C), got " + shape_to_string(image.shape()));
  }
  const auto h = image.dim(0), w = image.dim(1);
  const std::int64_t c = image.rank() == 3 ? image.dim(2) : 1;
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(h * w));
  for (std::int64_t p = 0; p < h * w; ++p) rows[static_cast<std::size_t>(p)] = value_to_pixel(image[p * c]);
  write_png_gray8(path, static_cast<int>(w), static_cast<int>(h), rows);
}

Tensor read_png(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw Error(ErrorKind::FileNotFound, path.string());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw Error(ErrorKind::IoError, "cannot read " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::IoError, "cannot decode " + path.string() + ": " + msg);
  }
  const std::int64_t h = image.height, w = image.width;
  Tensor out({h, w, 3});
  for (std::int64_t p = 0; p < h * w; ++p) {
    const double v = pixel_to_value(buf[static_cast<std::size_t>(p)]);
    out[p * 3] = out[p * 3 + 1] = out[p * 3 + 2] = v;
  }
  return out;
}

}  // namespace typegan
