#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tumorscope/model.hpp"

// Attribution methods: Grad-CAM on the last conv layer, epsilon-rule LRP
// with a per-layer conservation audit, and KernelSHAP over image patches
// with a brute-force Shapley oracle.
namespace tumorscope {

enum class Target : std::uint8_t { kTumour, kNonTumour };

std::string to_string(Target t);

struct GradCamResult {
  std::vector<double> channel_weights;  // alpha_k
  TensorF raw_map;                      // [h, w], >= 0
  TensorF heatmap;                      // [S, S], in [0, 1]
};

// Score is the logit (tumour) or its negation (non-tumour); activations are
// the last conv layer's post-ReLU output.
GradCamResult grad_cam(const Model& model, const TensorF& image, Target target = Target::kTumour);

// Min-max to [0, 1]; constant maps become zeros.
TensorF normalize_unit(const TensorF& map);

// Bilinear resize of an [h, w] map to [side, side], pixel centres aligned
// (half-pixel convention) and edges clamped.
TensorF upsample_bilinear(const TensorF& map, std::size_t side);

struct LrpLayerAudit {
  std::string layer;
  double relevance_out = 0.0;  // sum of relevance arriving at the layer output
  double relevance_in = 0.0;   // sum passed to the layer input
  double bias_absorbed = 0.0;
  double eps_absorbed = 0.0;
  // relevance_out - relevance_in - bias_absorbed - eps_absorbed
  double residual() const { return relevance_out - relevance_in - bias_absorbed - eps_absorbed; }
};

struct LrpResult {
  TensorD relevance;               // [1, S, S], signed
  double output_relevance = 0.0;   // +/- logit
  std::vector<LrpLayerAudit> audit;  // output layer first

  double total_absorbed() const;
  // |sum(relevance) + absorbed - output| / |output| (0 when output is 0).
  double conservation_drift() const;
};

inline constexpr double kLrpEpsilonRel = 1e-6;

// One epsilon-rule step through a dense layer: z = W x + b, stabilizer
// eps_rel * max|z| with sign(0) = +1, R_in = x * (W^T s), s = R / (z + eps).
struct LrpStep {
  TensorD relevance_in;
  double bias_absorbed = 0.0;
  double eps_absorbed = 0.0;
};
LrpStep lrp_dense_step(const TensorD& x, const TensorD& weights, const TensorD& bias,
                       const TensorD& relevance_out, double eps_rel = kLrpEpsilonRel);
LrpStep lrp_conv_step(const TensorD& x, const TensorD& weights, const TensorD& bias,
                      const TensorD& relevance_out, double eps_rel = kLrpEpsilonRel);

// Runs an inference pass in double precision and propagates relevance from
// the output back to the input pixels.
LrpResult lrp(const Model& model, const TensorF& image, Target target = Target::kTumour,
              double eps_rel = kLrpEpsilonRel);

// Score function over coalitions: bit i set means feature i is present.
using CoalitionFn = std::function<double(const std::vector<bool>&)>;

inline constexpr std::size_t kShapExactMax = 4096;  // enumerate when 2^M <= this

struct ShapValues {
  double base_value = 0.0;     // f(empty coalition)
  double full_value = 0.0;     // f(all features)
  std::vector<double> values;  // phi_i
  bool exact = false;
};

// Kernel-weighted least squares with phi_0 = f(empty) and
// phi_0 + sum(phi) = f(full) enforced exactly. Enumerates every coalition
// when 2^M <= kShapExactMax, otherwise samples n_samples coalitions from the
// Shapley kernel distribution.
ShapValues kernel_shap_values(const CoalitionFn& f, std::size_t m, std::size_t n_samples,
                              std::uint64_t seed);

// Full enumeration of the Shapley formula; M <= 12.
std::vector<double> brute_shapley(const CoalitionFn& f, std::size_t m);

struct ShapConfig {
  std::size_t grid_rows = 8;
  std::size_t grid_cols = 8;
  std::size_t n_samples = 1024;
  std::uint64_t seed = 0;
};

struct ShapResult {
  std::size_t grid_rows = 0, grid_cols = 0;
  std::vector<double> values;  // row-major over the grid
  double base_value = 0.0;
  double full_value = 0.0;
  bool exact = false;
  double pos_pct = 0.0, neg_pct = 0.0;
};

struct PatchBounds {
  std::size_t y0, y1, x0, x1;  // half-open
};
// Grid tiling; the last row/column absorbs the remainder.
PatchBounds patch_bounds(std::size_t side, std::size_t rows, std::size_t cols, std::size_t index);

// Features are grid patches; absent patches take the baseline's pixels.
// Scores are the sigmoid probability.
ShapResult kernel_shap(const Model& model, const TensorF& image, const ShapConfig& config,
                       const TensorF* baseline = nullptr);

struct SignPercentages {
  double positive = 0.0, negative = 0.0;
};
// phi >= 0 counts as positive.
SignPercentages shap_sign_percentages(const std::vector<double>& values);
// "68.75% positive / 31.25% negative"
std::string format_sign_percentages(const SignPercentages& p);

struct ExplainConfig {
  ShapConfig shap;
  double lrp_eps_rel = kLrpEpsilonRel;
};

struct Explanation {
  double probability = 0.0;
  int predicted = 0;
  Target target = Target::kTumour;
  GradCamResult gradcam;
  LrpResult lrp;
  ShapResult shap;

  std::string to_json() const;
};

// Target is the predicted class at threshold 0.5.
Explanation combined_explanation(const Model& model, const TensorF& image,
                                 const ExplainConfig& config = {});

// Smallest set of highest-valued pixels holding at least `fraction` of the
// total (non-negative) mass; returns a 0/1 mask of the same shape.
TensorF top_mass_region(const TensorF& heatmap, double fraction = 0.10);
double iou(const TensorF& a, const TensorF& b);

}  // namespace tumorscope
