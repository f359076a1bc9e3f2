#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tumorscope/explain.hpp"
#include "tumorscope/tensor.hpp"

// Deterministic rendering: colormaps, heatmap overlays, the 2x2 explanation
// composite with a built-in 5x7 caption font, and binary PPM (P6) files.
// Every channel value is computed in double and rounded half-up once.
namespace tumorscope {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct RgbImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triples

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, Rgb fill = {});
  Rgb at(std::size_t x, std::size_t y) const;
  void set(std::size_t x, std::size_t y, Rgb c);
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

enum class ColormapName : std::uint8_t { kJet, kSeismic, kGray };

struct ControlPoint {
  double t;
  std::array<double, 3> rgb;
};

const std::vector<ControlPoint>& colormap_points(ColormapName name);

// Unrounded interpolated colour; t must lie in [0, 1].
std::array<double, 3> colormap_value(double t, ColormapName name);
Rgb colormap_rgb(double t, ColormapName name);

// values: [h, w] or [1, h, w] in [0, 1].
RgbImage colormap_apply(const TensorF& values, ColormapName name);

// Grayscale rendering of a [0, 1] image.
RgbImage gray_image(const TensorF& base);

// (1 - alpha) * 255 * base + alpha * colormap(heat), rounded half-up.
RgbImage overlay(const TensorF& base, const TensorF& heat, double alpha = 0.4,
                 ColormapName name = ColormapName::kJet);

// Signed map to [0, 1] by v / (2 max|v|) + 0.5, so zero lands on 0.5.
TensorF symmetric_unit(const TensorF& signed_map);

inline constexpr std::size_t kGutter = 4;
inline constexpr std::size_t kGlyphWidth = 5;
inline constexpr std::size_t kGlyphHeight = 7;
inline constexpr std::size_t kCaptionHeight = kGlyphHeight + 4;

// Draws text in black with the 5x7 font (one blank column between glyphs).
// Lowercase letters render as uppercase; unknown characters as blanks.
void draw_text(RgbImage& image, std::size_t x, std::size_t y, const std::string& text,
               Rgb color = {0, 0, 0});

// Panels in order: original, Grad-CAM, LRP, SHAP, placed top-left,
// top-right, bottom-left, bottom-right. Each panel has a white caption strip
// above it; a 4 px white gutter separates columns and rows. Size:
// (2w + 4) x (2(h + caption) + 4).
RgbImage compose_grid(const std::array<RgbImage, 4>& panels,
                      const std::array<std::string, 4>& captions);

struct RenderConfig {
  double alpha = 0.4;  // heatmap weight in the Grad-CAM and SHAP overlays
};

// Builds the four panels from an explanation of `image` and composes them.
RgbImage render_explanation(const TensorF& image, const Explanation& explanation,
                            const RenderConfig& config = {});

std::vector<std::uint8_t> encode_ppm(const RgbImage& image);
RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

}  // namespace tumorscope
