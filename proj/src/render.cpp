#include "tumorscope/render.hpp"

#include <cmath>
#include <cstdio>
#include <string_view>

#include "tumorscope/binary_io.hpp"

namespace tumorscope {

RgbImage::RgbImage(std::size_t w, std::size_t h, Rgb fill) : width(w), height(h), pixels(3 * w * h) {
  for (std::size_t i = 0; i < w * h; ++i) {
    pixels[3 * i] = fill.r;
    pixels[3 * i + 1] = fill.g;
    pixels[3 * i + 2] = fill.b;
  }
}

Rgb RgbImage::at(std::size_t x, std::size_t y) const {
  const std::size_t i = 3 * (y * width + x);
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void RgbImage::set(std::size_t x, std::size_t y, Rgb c) {
  const std::size_t i = 3 * (y * width + x);
  pixels[i] = c.r;
  pixels[i + 1] = c.g;
  pixels[i + 2] = c.b;
}

const std::vector<ControlPoint>& colormap_points(ColormapName name) {
  static const std::vector<ControlPoint> jet{{0.0, {0, 0, 131}},
                                             {0.25, {0, 60, 255}},
                                             {0.5, {5, 255, 255}},
                                             {0.75, {255, 60, 0}},
                                             {1.0, {128, 0, 0}}};
  static const std::vector<ControlPoint> seismic{
      {0.0, {0, 0, 255}}, {0.5, {255, 255, 255}}, {1.0, {255, 0, 0}}};
  static const std::vector<ControlPoint> gray{{0.0, {0, 0, 0}}, {1.0, {255, 255, 255}}};
  switch (name) {
    case ColormapName::kJet: return jet;
    case ColormapName::kSeismic: return seismic;
    case ColormapName::kGray: return gray;
  }
  return gray;
}

namespace {

std::uint8_t round_channel(double v) {
  return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5));
}

void check_unit(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw Error("colormap: value " + std::to_string(t) + " outside [0, 1]");
  }
}

std::pair<std::size_t, std::size_t> plane_dims(const TensorF& t) {
  if (t.ndim() == 2) return {t.dim(0), t.dim(1)};
  if (t.ndim() == 3 && t.dim(0) == 1) return {t.dim(1), t.dim(2)};
  throw ShapeError("render: expected an [h, w] or [1, h, w] map, got " + shape_to_string(t.shape()));
}

}  // namespace

std::array<double, 3> colormap_value(double t, ColormapName name) {
  check_unit(t);
  const auto& pts = colormap_points(name);
  std::size_t k = 1;
  while (k + 1 < pts.size() && t > pts[k].t) ++k;
  const ControlPoint& a = pts[k - 1];
  const ControlPoint& b = pts[k];
  const double u = (t - a.t) / (b.t - a.t);
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) out[c] = a.rgb[c] + (b.rgb[c] - a.rgb[c]) * u;
  return out;
}

Rgb colormap_rgb(double t, ColormapName name) {
  const auto v = colormap_value(t, name);
  return {round_channel(v[0]), round_channel(v[1]), round_channel(v[2])};
}

RgbImage colormap_apply(const TensorF& values, ColormapName name) {
  const auto [h, w] = plane_dims(values);
  RgbImage img(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) img.set(x, y, colormap_rgb(values[y * w + x], name));
  return img;
}

RgbImage gray_image(const TensorF& base) {
  const auto [h, w] = plane_dims(base);
  RgbImage img(w, h);
  for (std::size_t i = 0; i < h * w; ++i) {
    check_unit(base[i]);
    const std::uint8_t g = round_channel(255.0 * base[i]);
    img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = g;
  }
  return img;
}

RgbImage overlay(const TensorF& base, const TensorF& heat, double alpha, ColormapName name) {
  const auto [h, w] = plane_dims(base);
  if (plane_dims(heat) != std::pair{h, w}) {
    throw ShapeError("overlay: base " + shape_to_string(base.shape()) + " and heat " +
                     shape_to_string(heat.shape()) + " differ");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("overlay: alpha must lie in [0, 1]");
  RgbImage img(w, h);
  for (std::size_t i = 0; i < h * w; ++i) {
    check_unit(base[i]);
    const double g = 255.0 * base[i];
    const auto c = colormap_value(heat[i], name);
    for (int k = 0; k < 3; ++k) {
      img.pixels[3 * i + static_cast<std::size_t>(k)] = round_channel((1.0 - alpha) * g + alpha * c[k]);
    }
  }
  return img;
}

TensorF symmetric_unit(const TensorF& signed_map) {
  double m = 0.0;
  for (const float v : signed_map.vec()) m = std::max(m, std::abs(static_cast<double>(v)));
  TensorF out(signed_map.shape(), 0.5f);
  if (m == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(std::clamp(signed_map[i] / (2.0 * m) + 0.5, 0.0, 1.0));
  }
  return out;
}

namespace {

struct Glyph {
  char c;
  std::uint8_t rows[kGlyphHeight];  // bit 4 is the leftmost column
};

constexpr Glyph kFont[] = {
    {'A', {0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'B', {0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110}},
    {'C', {0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110}},
    {'D', {0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110}},
    {'E', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111}},
    {'F', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'G', {0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111}},
    {'H', {0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'I', {0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'J', {0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100}},
    {'K', {0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001}},
    {'L', {0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111}},
    {'M', {0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001}},
    {'N', {0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001}},
    {'O', {0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'P', {0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'Q', {0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101}},
    {'R', {0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001}},
    {'S', {0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110}},
    {'T', {0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100}},
    {'U', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'V', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
    {'W', {0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010}},
    {'X', {0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001}},
    {'Y', {0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100}},
    {'Z', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111}},
    {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
    {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
    {'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
    {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
    {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
    {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
    {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
    {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
    {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
    {'-', {0b00000, 0b00000, 0b00000, 0b11111, 0b00000, 0b00000, 0b00000}},
    {'.', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100}},
    {'%', {0b11000, 0b11001, 0b00010, 0b00100, 0b01000, 0b10011, 0b00011}},
    {'/', {0b00000, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b00000}},
    {':', {0b00000, 0b01100, 0b01100, 0b00000, 0b01100, 0b01100, 0b00000}},
    {'+', {0b00000, 0b00100, 0b00100, 0b11111, 0b00100, 0b00100, 0b00000}},
    {'=', {0b00000, 0b00000, 0b11111, 0b00000, 0b11111, 0b00000, 0b00000}},
    {'(', {0b00010, 0b00100, 0b01000, 0b01000, 0b01000, 0b00100, 0b00010}},
    {')', {0b01000, 0b00100, 0b00010, 0b00010, 0b00010, 0b00100, 0b01000}},
    {'_', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b11111}},
};

const Glyph* find_glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : kFont) {
    if (g.c == c) return &g;
  }
  return nullptr;
}

void blit(RgbImage& dst, const RgbImage& src, std::size_t x0, std::size_t y0) {
  for (std::size_t y = 0; y < src.height; ++y)
    for (std::size_t x = 0; x < src.width; ++x) dst.set(x0 + x, y0 + y, src.at(x, y));
}

// Caption text clipped to the strip [x0, x0 + width).
void draw_caption(RgbImage& image, std::size_t x0, std::size_t y0, std::size_t width,
                  const std::string& text) {
  RgbImage strip(width, kCaptionHeight, {255, 255, 255});
  draw_text(strip, 2, 2, text);
  blit(image, strip, x0, y0);
}

}  // namespace

void draw_text(RgbImage& image, std::size_t x, std::size_t y, const std::string& text, Rgb color) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const Glyph* g = find_glyph(text[i]);
    if (!g) continue;
    const std::size_t gx = x + i * (kGlyphWidth + 1);
    for (std::size_t r = 0; r < kGlyphHeight; ++r) {
      for (std::size_t c = 0; c < kGlyphWidth; ++c) {
        if (!((g->rows[r] >> (kGlyphWidth - 1 - c)) & 1U)) continue;
        const std::size_t px = gx + c, py = y + r;
        if (px < image.width && py < image.height) image.set(px, py, color);
      }
    }
  }
}

RgbImage compose_grid(const std::array<RgbImage, 4>& panels, const std::array<std::string, 4>& captions) {
  const std::size_t w = panels[0].width, h = panels[0].height;
  for (const auto& p : panels) {
    if (p.width != w || p.height != h) throw ShapeError("compose_grid: panels differ in size");
  }
  const std::size_t cell_h = kCaptionHeight + h;
  RgbImage out(2 * w + kGutter, 2 * cell_h + kGutter, {255, 255, 255});
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t x0 = (i % 2) * (w + kGutter);
    const std::size_t y0 = (i / 2) * (cell_h + kGutter);
    draw_caption(out, x0, y0, w, captions[i]);
    blit(out, panels[i], x0, y0 + kCaptionHeight);
  }
  return out;
}

RgbImage render_explanation(const TensorF& image, const Explanation& e, const RenderConfig& config) {
  const auto [h, w] = plane_dims(image);
  const TensorF relevance = e.lrp.relevance.cast<float>();
  TensorF shap_map({h, w});
  const std::size_t m = e.shap.grid_rows * e.shap.grid_cols;
  if (h == w && m > 0) {
    for (std::size_t i = 0; i < m; ++i) {
      const PatchBounds pb = patch_bounds(h, e.shap.grid_rows, e.shap.grid_cols, i);
      for (std::size_t y = pb.y0; y < pb.y1; ++y)
        for (std::size_t x = pb.x0; x < pb.x1; ++x) shap_map[y * w + x] = static_cast<float>(e.shap.values[i]);
    }
  }
  char original[48], shap[48];
  std::snprintf(original, sizeof original, "MRI P=%.3f", e.probability);
  std::snprintf(shap, sizeof shap, "SHAP +%.2f%%", e.shap.pos_pct);
  const std::array<RgbImage, 4> panels{
      gray_image(image), overlay(image, e.gradcam.heatmap, config.alpha, ColormapName::kJet),
      colormap_apply(symmetric_unit(relevance), ColormapName::kSeismic),
      overlay(image, symmetric_unit(shap_map), config.alpha, ColormapName::kSeismic)};
  return compose_grid(panels, {original, "GRAD-CAM", "LRP", shap});
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
  if (image.pixels.size() != 3 * image.width * image.height) {
    throw ShapeError("ppm: pixel buffer does not match dimensions");
  }
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t += static_cast<char>(bytes[pos++]);
    return t;
  };
  if (token() != "P6") throw Error("ppm: not a binary P6 file");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw Error("ppm: malformed header");
  }
  if (maxval != 255) throw Error("ppm: only maxval 255 is supported");
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos || bytes.size() - pos != 3 * w * h) throw Error("ppm: raster size mismatch");
  RgbImage img(w, h);
  std::copy(bytes.begin() + static_cast<long>(pos), bytes.end(), img.pixels.begin());
  return img;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  io::write_file(path, encode_ppm(image));
}

RgbImage read_ppm(const std::filesystem::path& path) { return decode_ppm(io::read_file(path)); }

}  // namespace tumorscope
