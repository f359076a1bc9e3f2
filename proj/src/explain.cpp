#include "tumorscope/explain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "tumorscope/ops.hpp"

namespace tumorscope {

std::string to_string(Target t) { return t == Target::kTumour ? "tumour" : "non_tumour"; }

TensorF normalize_unit(const TensorF& map) {
  const auto [lo_it, hi_it] = std::minmax_element(map.vec().begin(), map.vec().end());
  const double lo = *lo_it, hi = *hi_it;
  TensorF out(map.shape());
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < map.size(); ++i) {
    out[i] = static_cast<float>((map[i] - lo) / (hi - lo));
  }
  return out;
}

TensorF upsample_bilinear(const TensorF& map, std::size_t side) {
  const std::size_t h = map.dim(map.ndim() - 2), w = map.dim(map.ndim() - 1);
  TensorF out({side, side});
  auto coord = [](std::size_t i, std::size_t in, std::size_t outn) {
    const double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) /
                         static_cast<double>(outn) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  for (std::size_t y = 0; y < side; ++y) {
    const double sy = coord(y, h, side);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < side; ++x) {
      const double sx = coord(x, w, side);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = sx - static_cast<double>(x0);
      const double top = (1 - tx) * map[y0 * w + x0] + tx * map[y0 * w + x1];
      const double bot = (1 - tx) * map[y1 * w + x0] + tx * map[y1 * w + x1];
      out[y * side + x] = static_cast<float>((1 - ty) * top + ty * bot);
    }
  }
  return out;
}

GradCamResult grad_cam(const Model& model, const TensorF& image, Target target) {
  const auto last = model.last_conv_index();
  if (!last) throw Error("grad_cam: model has no convolutional layer");
  const ForwardResult fr = forward(model, image);
  const TensorF& a = fr.cache.layers[*last].post;
  const TensorF g = gradient_wrt_layer_output(model, fr.cache, target == Target::kTumour ? 1.0 : -1.0, *last);
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2), plane = h * w;
  GradCamResult r;
  r.channel_weights.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += g[k * plane + i];
    r.channel_weights[k] = s / static_cast<double>(plane);
  }
  r.raw_map = TensorF({h, w});
  for (std::size_t i = 0; i < plane; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) s += r.channel_weights[k] * a[k * plane + i];
    r.raw_map[i] = static_cast<float>(std::max(s, 0.0));
  }
  r.heatmap = upsample_bilinear(normalize_unit(r.raw_map), model.config.input_side);
  return r;
}

double LrpResult::total_absorbed() const {
  double s = 0.0;
  for (const auto& a : audit) s += a.bias_absorbed + a.eps_absorbed;
  return s;
}

double LrpResult::conservation_drift() const {
  if (output_relevance == 0.0) return 0.0;
  double total = 0.0;
  for (const double v : relevance.vec()) total += v;
  return std::abs(total + total_absorbed() - output_relevance) / std::abs(output_relevance);
}

namespace {

// Shared epsilon-rule bookkeeping once z and the backward map are known.
template <typename Backward>
LrpStep lrp_step(const TensorD& x, const TensorD& z, const TensorD& bias, std::size_t per_bias,
                 const TensorD& relevance_out, double eps_rel, Backward backward) {
  if (relevance_out.size() != z.size()) {
    throw ShapeError("lrp: relevance " + shape_to_string(relevance_out.shape()) +
                     " does not match layer output " + shape_to_string(z.shape()));
  }
  double zmax = 0.0;
  for (const double v : z.vec()) zmax = std::max(zmax, std::abs(v));
  const double eps = eps_rel * zmax;
  TensorD s(z.shape());
  LrpStep step;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double denom = z[k] + (z[k] >= 0.0 ? eps : -eps);
    s[k] = denom != 0.0 ? relevance_out[k] / denom : 0.0;
    const double b = bias[k / per_bias];
    step.bias_absorbed += s[k] * b;
    step.eps_absorbed += relevance_out[k] - s[k] * z[k];
  }
  const TensorD c = backward(s);
  step.relevance_in = TensorD(x.shape());
  for (std::size_t j = 0; j < x.size(); ++j) step.relevance_in[j] = x[j] * c[j];
  return step;
}

}  // namespace

LrpStep lrp_dense_step(const TensorD& x, const TensorD& weights, const TensorD& bias,
                       const TensorD& relevance_out, double eps_rel) {
  const TensorD z = ops::dense(x, weights, bias);
  return lrp_step(x, z, bias, 1, relevance_out, eps_rel,
                  [&](const TensorD& s) { return ops::dense_backward_input(weights, s); });
}

LrpStep lrp_conv_step(const TensorD& x, const TensorD& weights, const TensorD& bias,
                      const TensorD& relevance_out, double eps_rel) {
  const TensorD z = ops::conv2d(x, weights, bias);
  return lrp_step(x, z, bias, z.dim(1) * z.dim(2), relevance_out.reshaped(z.shape()), eps_rel,
                  [&](const TensorD& s) { return ops::conv2d_backward_input(weights, s, x.shape()); });
}

LrpResult lrp(const Model& model, const TensorF& image, Target target, double eps_rel) {
  const std::size_t side = model.config.input_side;
  if (image.shape() != Shape{1, side, side}) {
    throw ShapeError("lrp: image " + shape_to_string(image.shape()) + " does not match the model input");
  }
  const std::size_t n = model.layers.size();
  std::vector<TensorD> inputs(n), weights(n), biases(n);
  std::vector<std::vector<std::uint32_t>> argmax(n);
  TensorD x = image.cast<double>();
  double logit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Layer& l = model.layers[i];
    inputs[i] = x;
    switch (l.kind) {
      case LayerKind::kConv2D:
      case LayerKind::kDense: {
        weights[i] = l.weights.cast<double>();
        biases[i] = l.bias.cast<double>();
        TensorD z = l.kind == LayerKind::kConv2D ? ops::conv2d(x, weights[i], biases[i])
                                                 : ops::dense(x, weights[i], biases[i]);
        if (l.activation == Activation::kReLU) {
          x = ops::relu(z);
        } else {
          x = std::move(z);  // the sigmoid head keeps the logit
        }
        break;
      }
      case LayerKind::kMaxPool: {
        auto pr = ops::maxpool2d(x);
        argmax[i] = std::move(pr.argmax);
        x = std::move(pr.output);
        break;
      }
      case LayerKind::kFlatten:
        x = x.reshaped({x.size()});
        break;
      case LayerKind::kDropout:
        break;
    }
  }
  logit = x[0];

  LrpResult result;
  result.output_relevance = target == Target::kTumour ? logit : -logit;
  TensorD r({1}, result.output_relevance);
  for (std::size_t i = n; i-- > 0;) {
    const Layer& l = model.layers[i];
    LrpLayerAudit audit;
    audit.layer = l.name;
    for (const double v : r.vec()) audit.relevance_out += v;
    switch (l.kind) {
      case LayerKind::kConv2D:
      case LayerKind::kDense: {
        LrpStep step = l.kind == LayerKind::kConv2D
                           ? lrp_conv_step(inputs[i], weights[i], biases[i], r, eps_rel)
                           : lrp_dense_step(inputs[i], weights[i], biases[i], r, eps_rel);
        audit.bias_absorbed = step.bias_absorbed;
        audit.eps_absorbed = step.eps_absorbed;
        r = std::move(step.relevance_in);
        break;
      }
      case LayerKind::kMaxPool: {
        TensorD in(inputs[i].shape());
        for (std::size_t o = 0; o < r.size(); ++o) in[argmax[i][o]] += r[o];
        r = std::move(in);
        break;
      }
      case LayerKind::kFlatten:
        r = r.reshaped(inputs[i].shape());
        break;
      case LayerKind::kDropout:
        break;
    }
    for (const double v : r.vec()) audit.relevance_in += v;
    result.audit.push_back(std::move(audit));
  }
  result.relevance = std::move(r);
  return result;
}

namespace {

double binomial(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

std::vector<bool> bits_of(std::uint64_t mask, std::size_t m) {
  std::vector<bool> z(m);
  for (std::size_t i = 0; i < m; ++i) z[i] = (mask >> i) & 1U;
  return z;
}

}  // namespace

ShapValues kernel_shap_values(const CoalitionFn& f, std::size_t m, std::size_t n_samples,
                              std::uint64_t seed) {
  if (m < 2) throw Error("kernel_shap: need at least 2 features");
  ShapValues out;
  out.base_value = f(std::vector<bool>(m, false));
  out.full_value = f(std::vector<bool>(m, true));
  const double delta = out.full_value - out.base_value;
  out.exact = m < 63 && (std::uint64_t{1} << m) <= kShapExactMax;

  std::vector<std::vector<bool>> coalitions;
  std::vector<double> weights;
  if (out.exact) {
    for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << m); ++mask) {
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      coalitions.push_back(bits_of(mask, m));
      weights.push_back(static_cast<double>(m - 1) /
                        (binomial(m, s) * static_cast<double>(s) * static_cast<double>(m - s)));
    }
  } else {
    if (n_samples < m + 2) {
      throw Error("kernel_shap: sampling mode needs at least M+2 samples (M = " + std::to_string(m) + ")");
    }
    // Coalition sizes are drawn with probability proportional to the total
    // kernel weight of each size, so every sample carries unit weight.
    std::vector<double> cdf;
    double acc = 0.0;
    for (std::size_t s = 1; s < m; ++s) {
      acc += static_cast<double>(m - 1) / (static_cast<double>(s) * static_cast<double>(m - s));
      cdf.push_back(acc);
    }
    Rng rng(derive_seed(seed, "explain/shap"));
    std::vector<std::size_t> idx(m);
    for (std::size_t n = 0; n < n_samples; ++n) {
      const double u = rng.uniform() * acc;
      const std::size_t s = 1 + static_cast<std::size_t>(
                                    std::upper_bound(cdf.begin(), cdf.end() - 1, u) - cdf.begin());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::vector<bool> z(m, false);
      for (std::size_t k = 0; k < s; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.below(m - k));
        std::swap(idx[k], idx[j]);
        z[idx[k]] = true;
      }
      coalitions.push_back(std::move(z));
      weights.push_back(1.0);
    }
  }

  // Eliminate the last feature via the efficiency constraint.
  const std::size_t p = m - 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  Eigen::VectorXd row(static_cast<Eigen::Index>(p));
  for (std::size_t c = 0; c < coalitions.size(); ++c) {
    const auto& z = coalitions[c];
    const double zl = z[p] ? 1.0 : 0.0;
    for (std::size_t i = 0; i < p; ++i) row[static_cast<Eigen::Index>(i)] = (z[i] ? 1.0 : 0.0) - zl;
    const double y = f(z) - out.base_value - zl * delta;
    a.noalias() += weights[c] * row * row.transpose();
    b.noalias() += weights[c] * y * row;
  }
  const Eigen::VectorXd phi = a.completeOrthogonalDecomposition().solve(b);
  out.values.resize(m);
  double sum = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    out.values[i] = phi[static_cast<Eigen::Index>(i)];
    sum += out.values[i];
  }
  out.values[p] = delta - sum;
  return out;
}

std::vector<double> brute_shapley(const CoalitionFn& f, std::size_t m) {
  if (m == 0) return {};
  if (m > 12) throw Error("brute_shapley: M > 12 is too expensive to enumerate");
  const std::uint64_t count = std::uint64_t{1} << m;
  std::vector<double> v(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) v[mask] = f(bits_of(mask, m));
  std::vector<double> fact(m + 1, 1.0);
  for (std::size_t i = 1; i <= m; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> phi(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      phi[i] += fact[s] * fact[m - s - 1] / fact[m] * (v[mask | bit] - v[mask]);
    }
  }
  return phi;
}

PatchBounds patch_bounds(std::size_t side, std::size_t rows, std::size_t cols, std::size_t index) {
  const std::size_t r = index / cols, c = index % cols;
  const std::size_t ph = side / rows, pw = side / cols;
  return {r * ph, r + 1 == rows ? side : (r + 1) * ph, c * pw, c + 1 == cols ? side : (c + 1) * pw};
}

ShapResult kernel_shap(const Model& model, const TensorF& image, const ShapConfig& config,
                       const TensorF* baseline) {
  const std::size_t side = model.config.input_side;
  if (image.shape() != Shape{1, side, side}) {
    throw ShapeError("kernel_shap: image does not match the model input");
  }
  if (config.grid_rows == 0 || config.grid_cols == 0 || config.grid_rows > side ||
      config.grid_cols > side) {
    throw Error("kernel_shap: invalid patch grid");
  }
  const TensorF base = baseline ? *baseline : TensorF(image.shape());
  if (base.shape() != image.shape()) throw ShapeError("kernel_shap: baseline shape differs from image");
  const std::size_t m = config.grid_rows * config.grid_cols;
  std::vector<PatchBounds> patches;
  for (std::size_t i = 0; i < m; ++i) patches.push_back(patch_bounds(side, config.grid_rows, config.grid_cols, i));
  const CoalitionFn f = [&](const std::vector<bool>& z) {
    TensorF img = base;
    for (std::size_t i = 0; i < m; ++i) {
      if (!z[i]) continue;
      const auto& pb = patches[i];
      for (std::size_t y = pb.y0; y < pb.y1; ++y)
        for (std::size_t x = pb.x0; x < pb.x1; ++x) img[y * side + x] = image[y * side + x];
    }
    return forward(model, img).probability;
  };
  const ShapValues sv = kernel_shap_values(f, m, config.n_samples, config.seed);
  ShapResult r;
  r.grid_rows = config.grid_rows;
  r.grid_cols = config.grid_cols;
  r.values = sv.values;
  r.base_value = sv.base_value;
  r.full_value = sv.full_value;
  r.exact = sv.exact;
  const SignPercentages pct = shap_sign_percentages(r.values);
  r.pos_pct = pct.positive;
  r.neg_pct = pct.negative;
  return r;
}

SignPercentages shap_sign_percentages(const std::vector<double>& values) {
  if (values.empty()) throw Error("shap_sign_percentages: no values");
  const auto pos = std::count_if(values.begin(), values.end(), [](double v) { return v >= 0.0; });
  SignPercentages p;
  p.positive = 100.0 * static_cast<double>(pos) / static_cast<double>(values.size());
  p.negative = 100.0 - p.positive;
  return p;
}

std::string format_sign_percentages(const SignPercentages& p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%% positive / %.2f%% negative", p.positive, p.negative);
  return buf;
}

Explanation combined_explanation(const Model& model, const TensorF& image, const ExplainConfig& config) {
  Explanation e;
  e.probability = forward(model, image).probability;
  e.predicted = e.probability >= 0.5 ? 1 : 0;
  e.target = e.predicted == 1 ? Target::kTumour : Target::kNonTumour;
  e.gradcam = grad_cam(model, image, e.target);
  e.lrp = lrp(model, image, e.target, config.lrp_eps_rel);
  e.shap = kernel_shap(model, image, config.shap);
  return e;
}

std::string Explanation::to_json() const {
  using nlohmann::json;
  json raw = json::array();
  for (std::size_t y = 0; y < gradcam.raw_map.dim(0); ++y) {
    json row = json::array();
    for (std::size_t x = 0; x < gradcam.raw_map.dim(1); ++x) {
      row.push_back(gradcam.raw_map[y * gradcam.raw_map.dim(1) + x]);
    }
    raw.push_back(std::move(row));
  }
  json audit = json::array();
  for (const auto& a : lrp.audit) {
    audit.push_back({{"layer", a.layer},
                     {"relevance_out", a.relevance_out},
                     {"relevance_in", a.relevance_in},
                     {"bias_absorbed", a.bias_absorbed},
                     {"eps_absorbed", a.eps_absorbed}});
  }
  double rel_sum = 0.0, rel_pos = 0.0;
  for (const double v : lrp.relevance.vec()) {
    rel_sum += v;
    rel_pos += std::max(v, 0.0);
  }
  json shap_grid = json::array();
  for (std::size_t r = 0; r < shap.grid_rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < shap.grid_cols; ++c) row.push_back(shap.values[r * shap.grid_cols + c]);
    shap_grid.push_back(std::move(row));
  }
  const json doc = {
      {"probability", probability},
      {"predicted", predicted},
      {"target", to_string(target)},
      {"gradcam", {{"channel_weights", gradcam.channel_weights}, {"raw_map", raw}}},
      {"lrp",
       {{"output_relevance", lrp.output_relevance},
        {"relevance_sum", rel_sum},
        {"positive_relevance_sum", rel_pos},
        {"absorbed", lrp.total_absorbed()},
        {"conservation_drift", lrp.conservation_drift()},
        {"audit", audit}}},
      {"shap",
       {{"grid", {shap.grid_rows, shap.grid_cols}},
        {"base_value", shap.base_value},
        {"output_value", shap.full_value},
        {"exact", shap.exact},
        {"values", shap_grid},
        {"pos_pct", shap.pos_pct},
        {"neg_pct", shap.neg_pct},
        {"summary", format_sign_percentages({shap.pos_pct, shap.neg_pct})}}}};
  return doc.dump(2) + "\n";
}

TensorF top_mass_region(const TensorF& heatmap, double fraction) {
  TensorF mask(heatmap.shape());
  double total = 0.0;
  for (const float v : heatmap.vec()) total += std::max(v, 0.0f);
  if (!(total > 0.0)) return mask;
  std::vector<std::size_t> order(heatmap.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return heatmap[a] > heatmap[b]; });
  double acc = 0.0;
  for (const std::size_t i : order) {
    if (acc >= fraction * total) break;
    mask[i] = 1.0f;
    acc += std::max(heatmap[i], 0.0f);
  }
  return mask;
}

double iou(const TensorF& a, const TensorF& b) {
  if (a.size() != b.size()) throw ShapeError("iou: masks differ in size");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] > 0.5f, y = b[i] > 0.5f;
    inter += x && y ? 1 : 0;
    uni += x || y ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace tumorscope
