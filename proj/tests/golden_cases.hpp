#pragma once

// Golden render cases shared by the render unit test and the acceptance
// binary. Each case regenerates its image from fixed seeds; the checksum is
// FNV-1a 64 of the encoded PPM and the same bytes are stored in tests/golden.

#include <array>
#include <string>

#include "tumorscope/datapipe.hpp"
#include "tumorscope/render.hpp"

namespace tumorscope::golden {

struct Case {
  const char* file;
  const char* checksum;
  RgbImage (*make)();
};

inline RgbImage white_pixel() { return RgbImage(1, 1, {255, 255, 255}); }

// Analytic panels: ramps and a signed diagonal, no model involved.
inline RgbImage analytic_composite() {
  const std::size_t s = 48;
  TensorF base({1, s, s}), heat({s, s}), signed_map({s, s});
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      base[y * s + x] = static_cast<float>(x) / static_cast<float>(s - 1);
      heat[y * s + x] = static_cast<float>(y) / static_cast<float>(s - 1);
      signed_map[y * s + x] = static_cast<float>(x) - static_cast<float>(y);
    }
  }
  const std::array<RgbImage, 4> panels{
      gray_image(base), overlay(base, heat),
      colormap_apply(symmetric_unit(signed_map), ColormapName::kSeismic),
      overlay(base, symmetric_unit(signed_map), 0.4, ColormapName::kSeismic)};
  return compose_grid(panels, {"MRI P=0.987", "GRAD-CAM", "LRP", "SHAP +68.75%"});
}

inline Model small_model(std::uint64_t seed) {
  ModelConfig mc;
  mc.input_side = 120;
  mc.hidden_units = 16;
  mc.seed = seed;
  return build_model(mc);
}

// Untrained model on uniform noise, exact-mode SHAP on a 4x4 grid.
inline RgbImage noise_composite() {
  const Model m = small_model(13);
  Rng rng(10);
  TensorF img({1, 120, 120});
  for (auto& v : img.vec()) v = static_cast<float>(rng.uniform());
  ExplainConfig ec;
  ec.shap.grid_rows = 4;
  ec.shap.grid_cols = 4;
  return render_explanation(img, combined_explanation(m, img, ec));
}

// Untrained model on the central axial slice of a synthetic tumour volume,
// sampling-mode SHAP on the default 8x8 grid.
inline RgbImage synthetic_slice_composite() {
  Rng rng(29);
  const SynthVolume sv = synth_volume({64, true}, rng);
  const auto slices = extract_slices(sv.image, sv.mask, 8);
  const TensorF img = normalize_and_crop(slices[4].image, 120);
  const Model m = small_model(29);
  ExplainConfig ec;
  ec.shap.seed = 5;
  return render_explanation(img, combined_explanation(m, img, ec));
}

inline const std::array<Case, 4>& cases() {
  static const std::array<Case, 4> all{{
      {"white_1x1.ppm", "601d6398bf10a06a", &white_pixel},
      {"analytic_composite.ppm", "988e401e4b084b0c", &analytic_composite},
      {"model_composite.ppm", "c8aee1be5d998022", &noise_composite},
      {"synthetic_slice_composite.ppm", "c10c1ade2631e1b8", &synthetic_slice_composite},
  }};
  return all;
}

}  // namespace tumorscope::golden
