// SPDX-License-Identifier: Apache-2.0
#include "qixai/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <png.h>

#include "qixai/error.hpp"

namespace qixai {

namespace {

std::uint8_t channel(double x) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
}

}  // namespace

std::optional<Colormap> parse_colormap(std::string_view name) noexcept {
  if (name == "grayscale" || name == "gray") return Colormap::grayscale;
  if (name == "diverging" || name == "bwr") return Colormap::diverging;
  return std::nullopt;
}

std::string_view to_string(Colormap map) noexcept {
  return map == Colormap::grayscale ? "grayscale" : "diverging";
}

Colormap default_colormap(const Tensor& matrix) {
  const bool signed_values =
      std::any_of(matrix.data().begin(), matrix.data().end(), [](double v) { return v < 0.0; });
  return signed_values ? Colormap::diverging : Colormap::grayscale;
}

Rgb colormap_lookup(Colormap map, double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (map == Colormap::grayscale) {
    const auto v = channel(t);
    return {v, v, v};
  }
  if (t < 0.5) {
    const double s = t / 0.5;  // blue -> white
    return {channel(s), channel(s), 255};
  }
  const double s = (t - 0.5) / 0.5;  // white -> red
  return {255, channel(1.0 - s), channel(1.0 - s)};
}

RgbImage render_matrix(const Tensor& matrix, Colormap map, std::size_t scale) {
  if (matrix.rank() != 2) {
    throw DataError("render expects a rank-2 matrix, got shape " + shape_to_string(matrix.shape()));
  }
  if (scale < 1) throw UsageError("render scale must be at least 1");
  if (std::size_t bad = matrix.first_non_finite(); bad != matrix.size()) {
    throw DataError("matrix has a non-finite value at flat index " + std::to_string(bad));
  }

  const auto [lo, hi] = std::minmax_element(matrix.data().begin(), matrix.data().end());
  const double bound = std::max(std::abs(*lo), std::abs(*hi));
  auto normalize = [&](double v) {
    if (map == Colormap::diverging) return bound > 0.0 ? 0.5 + 0.5 * v / bound : 0.5;
    return *hi > *lo ? (v - *lo) / (*hi - *lo) : 0.5;
  };

  RgbImage image;
  image.width = matrix.cols() * scale;
  image.height = matrix.rows() * scale;
  image.pixels.resize(3 * image.width * image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      const Rgb rgb = colormap_lookup(map, normalize(matrix(y / scale, x / scale)));
      std::copy(rgb.begin(), rgb.end(), image.pixels.begin() + 3 * (y * image.width + x));
    }
  }
  return image;
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(),
                               static_cast<png_int_32>(3 * image.width), nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw IoError("cannot write PNG '" + path.string() + "': " + message);
  }
}

RgbImage read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError("cannot read PNG '" + path.string() + "': " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  RgbImage image;
  image.width = png.width;
  image.height = png.height;
  image.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw IoError("cannot decode PNG '" + path.string() + "': " + message);
  }
  return image;
}

}  // namespace qixai
