// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "qixai/tensor.hpp"

namespace qixai {

enum class Colormap {
  grayscale,  // min-max normalized, black -> white
  diverging,  // symmetric about 0, blue -> white -> red
};

std::optional<Colormap> parse_colormap(std::string_view name) noexcept;
std::string_view to_string(Colormap map) noexcept;

/// Diverging when any entry is negative, grayscale otherwise.
Colormap default_colormap(const Tensor& matrix);

using Rgb = std::array<std::uint8_t, 3>;

/// Color of a normalized position t in [0, 1].
Rgb colormap_lookup(Colormap map, double t);

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triplets

  Rgb at(std::size_t x, std::size_t y) const {
    const std::size_t o = 3 * (y * width + x);
    return {pixels[o], pixels[o + 1], pixels[o + 2]};
  }
};

/// One pixel per matrix cell (scale x scale block when scale > 1).
RgbImage render_matrix(const Tensor& matrix, Colormap map, std::size_t scale = 1);

void write_png(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

}  // namespace qixai
