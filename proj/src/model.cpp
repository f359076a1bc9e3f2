#include "tumorscope/model.hpp"

#include <cmath>

#include "tumorscope/binary_io.hpp"
#include "tumorscope/ops.hpp"

namespace tumorscope {

std::string to_string(Variant v) {
  return v == Variant::kImproved ? "improved" : "original";
}

Variant parse_variant(const std::string& s) {
  if (s == "original") return Variant::kOriginal;
  if (s == "improved") return Variant::kImproved;
  throw Error("unknown model variant '" + s + "' (expected original|improved)");
}

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kConv2D: return "Conv2D";
    case LayerKind::kMaxPool: return "MaxPooling2D";
    case LayerKind::kFlatten: return "Flatten";
    case LayerKind::kDense: return "Dense";
    case LayerKind::kDropout: return "Dropout";
  }
  return "?";
}

namespace {

struct ConvStage {
  std::size_t filters;
  std::size_t kernel;
};

std::vector<ConvStage> conv_stages(Variant v) {
  std::vector<ConvStage> stages = {{16, 3}, {32, 5}, {64, 7}, {32, 9}};
  // The improved model's extra layer: a fifth conv+pool stage.
  if (v == Variant::kImproved) stages.push_back({32, 3});
  return stages;
}

// Layer skeletons (no parameters allocated) in forward order.
std::vector<Layer> architecture(const ModelConfig& config) {
  std::vector<Layer> layers;
  const auto stages = conv_stages(config.variant);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const std::string idx = std::to_string(s + 1);
    layers.push_back({LayerKind::kConv2D, "conv" + idx, Activation::kReLU,
                      stages[s].filters, stages[s].kernel, {}, {}});
    layers.push_back({LayerKind::kMaxPool, "pool" + idx, Activation::kNone, 0, 2, {}, {}});
  }
  layers.push_back({LayerKind::kFlatten, "flatten", Activation::kNone, 0, 0, {}, {}});
  layers.push_back({LayerKind::kDense, "dense1", Activation::kReLU, config.hidden_units, 0, {}, {}});
  layers.push_back({LayerKind::kDropout, "dropout", Activation::kNone, 0, 0, {}, {}});
  layers.push_back({LayerKind::kDense, "dense2", Activation::kSigmoid, 1, 0, {}, {}});
  return layers;
}

std::string describe(const Layer& l, float dropout_p) {
  switch (l.kind) {
    case LayerKind::kConv2D:
      return std::to_string(l.units) + " filters, " + std::to_string(l.kernel) +
             "x" + std::to_string(l.kernel) + " kernel";
    case LayerKind::kMaxPool: return "2x2 pool size";
    case LayerKind::kDropout: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "p = %g", static_cast<double>(dropout_p));
      return buf;
    }
    default: return "";
  }
}

Model build_skeleton(const ModelConfig& config) {
  const ShapeTrace trace = shape_trace(config);
  if (!trace.ok()) throw ShapeError(*trace.error);
  Model model{config, architecture(config)};
  Shape in = {1, config.input_side, config.input_side};
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Layer& l = model.layers[i];
    if (l.kind == LayerKind::kConv2D) {
      l.weights = TensorF({l.units, in[0], l.kernel, l.kernel});
      l.bias = TensorF({l.units});
    } else if (l.kind == LayerKind::kDense) {
      l.weights = TensorF({l.units, shape_size(in)});
      l.bias = TensorF({l.units});
    }
    in = trace.rows[i].output;
  }
  return model;
}

}  // namespace

std::size_t Model::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

std::optional<std::size_t> Model::last_conv_index() const {
  std::optional<std::size_t> idx;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::kConv2D) idx = i;
  }
  return idx;
}

std::size_t ShapeTrace::total_params() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.params;
  return n;
}

ShapeTrace shape_trace(const ModelConfig& config) {
  ShapeTrace trace;
  if (config.input_side == 0) {
    trace.error = "input_side must be positive";
    trace.failing_layer = "input";
    return trace;
  }
  if (config.hidden_units == 0) {
    trace.error = "hidden_units must be positive";
    trace.failing_layer = "dense1";
    return trace;
  }
  if (!(config.dropout_p >= 0.0f && config.dropout_p < 1.0f)) {
    trace.error = "dropout_p must be in [0, 1)";
    trace.failing_layer = "dropout";
    return trace;
  }
  Shape shape = {1, config.input_side, config.input_side};
  for (const Layer& l : architecture(config)) {
    ShapeRow row{l.name, l.kind, l.activation, describe(l, config.dropout_p), {}, 0};
    switch (l.kind) {
      case LayerKind::kConv2D: {
        if (shape[1] < l.kernel || shape[2] < l.kernel) {
          trace.error = l.name + ": " + std::to_string(l.kernel) + "x" +
                        std::to_string(l.kernel) + " kernel on a " +
                        std::to_string(shape[1]) + "x" + std::to_string(shape[2]) +
                        " map (input_side " + std::to_string(config.input_side) +
                        " too small for the " + to_string(config.variant) +
                        " variant)";
          trace.failing_layer = l.name;
          return trace;
        }
        row.params = l.units * (shape[0] * l.kernel * l.kernel + 1);
        shape = {l.units, shape[1] - l.kernel + 1, shape[2] - l.kernel + 1};
        break;
      }
      case LayerKind::kMaxPool:
        if (shape[1] < 2 || shape[2] < 2) {
          trace.error = l.name + ": 2x2 pool on a " + std::to_string(shape[1]) +
                        "x" + std::to_string(shape[2]) + " map";
          trace.failing_layer = l.name;
          return trace;
        }
        shape = {shape[0], shape[1] / 2, shape[2] / 2};
        break;
      case LayerKind::kFlatten:
        shape = {shape_size(shape)};
        break;
      case LayerKind::kDense:
        row.params = l.units * (shape[0] + 1);
        shape = {l.units};
        break;
      case LayerKind::kDropout:
        break;
    }
    row.output = shape;
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

Model build_model(const ModelConfig& config) {
  Model model = build_skeleton(config);
  Rng rng(derive_seed(config.seed, "model/init"));
  for (Layer& l : model.layers) {
    if (!l.has_params()) continue;
    const std::size_t fan_in = l.weights.size() / l.units;
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& w : l.weights.vec()) w = static_cast<float>(rng.normal() * std_dev);
    l.bias.fill(0.0f);
  }
  return model;
}

ForwardResult forward(const Model& model, const TensorF& image, bool training,
                      Rng& rng) {
  const std::size_t s = model.config.input_side;
  if (image.shape() != Shape{1, s, s}) {
    throw ShapeError("forward: expected image of shape " +
                     shape_to_string({1, s, s}) + ", got " +
                     shape_to_string(image.shape()));
  }
  ForwardResult result;
  ActivationCache& cache = result.cache;
  cache.input = image;
  cache.layers.resize(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    const TensorF& x = cache.layer_input(i);
    LayerCache& lc = cache.layers[i];
    switch (l.kind) {
      case LayerKind::kConv2D:
        lc.pre = ops::conv2d(x, l.weights, l.bias);
        break;
      case LayerKind::kDense:
        lc.pre = ops::dense(x, l.weights, l.bias);
        break;
      case LayerKind::kMaxPool: {
        auto pooled = ops::maxpool2d(x);
        lc.post = std::move(pooled.output);
        lc.argmax = std::move(pooled.argmax);
        break;
      }
      case LayerKind::kFlatten:
        lc.post = x.reshaped({x.size()});
        break;
      case LayerKind::kDropout: {
        auto d = ops::dropout(x, model.config.dropout_p, rng, training);
        lc.post = std::move(d.output);
        lc.dropout_mask = std::move(d.mask);
        break;
      }
    }
    if (l.has_params()) {
      switch (l.activation) {
        case Activation::kReLU: lc.post = ops::relu(lc.pre); break;
        case Activation::kSigmoid: lc.post = ops::sigmoid(lc.pre); break;
        case Activation::kNone: lc.post = lc.pre; break;
      }
    }
  }
  const LayerCache& last = cache.layers.back();
  if (last.pre.size() != 1) throw ShapeError("forward: model head must emit one logit");
  cache.logit = last.pre[0];
  result.probability = ops::sigmoid(static_cast<double>(cache.logit));
  return result;
}

ForwardResult forward(const Model& model, const TensorF& image) {
  Rng unused(0);
  return forward(model, image, false, unused);
}

ModelGrads ModelGrads::zeros_like(const Model& model) {
  ModelGrads g;
  for (const auto& l : model.layers) {
    g.weights.push_back(l.has_params() ? TensorF(l.weights.shape()) : TensorF());
    g.bias.push_back(l.has_params() ? TensorF(l.bias.shape()) : TensorF());
  }
  return g;
}

void ModelGrads::add(const ModelGrads& other) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto& w = weights[i].vec();
    const auto& ow = other.weights[i].vec();
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += ow[j];
    auto& b = bias[i].vec();
    const auto& ob = other.bias[i].vec();
    for (std::size_t j = 0; j < b.size(); ++j) b[j] += ob[j];
  }
}

void ModelGrads::scale(float s) {
  for (auto& t : weights) for (auto& v : t.vec()) v *= s;
  for (auto& t : bias) for (auto& v : t.vec()) v *= s;
}

namespace {

constexpr std::size_t kNoStop = static_cast<std::size_t>(-1);

// Walks the cache backwards. Returns the gradient w.r.t. the output of layer
// `stop` (if given); otherwise fills `grads` for every parameterized layer.
TensorF propagate(const Model& model, const ActivationCache& cache,
                  double dlogit, std::size_t stop, ModelGrads* grads) {
  const std::size_t n = model.layers.size();
  if (cache.layers.size() != n) throw Error("activation cache does not match model");
  if (stop != kNoStop && stop >= n - 1) {
    throw Error("gradient_wrt_layer_output: layer index out of range");
  }
  // Gradient w.r.t. the pre-activation of the head is dlogit itself.
  TensorF g({1}, static_cast<float>(dlogit));
  bool g_is_pre = true;
  for (std::size_t i = n; i-- > 0;) {
    const Layer& l = model.layers[i];
    const LayerCache& lc = cache.layers[i];
    if (i == stop) return g;
    const bool need_input_grad = i > 0 && (stop == kNoStop ? true : i > stop);
    if (!need_input_grad && grads == nullptr) break;
    if (l.has_params() && !g_is_pre) {
      if (l.activation == Activation::kReLU) {
        g = ops::relu_backward(lc.pre, g);
      } else if (l.activation == Activation::kSigmoid) {
        g = ops::sigmoid_backward(lc.pre, g);
      }
    }
    g_is_pre = false;
    const TensorF& x = cache.layer_input(i);
    switch (l.kind) {
      case LayerKind::kConv2D: {
        if (grads) {
          auto cg = ops::conv2d_backward(x, l.weights, g, need_input_grad);
          grads->weights[i] = std::move(cg.weights);
          grads->bias[i] = std::move(cg.bias);
          g = std::move(cg.input);
        } else {
          g = ops::conv2d_backward_input(l.weights, g, x.shape());
        }
        break;
      }
      case LayerKind::kDense: {
        if (grads) {
          auto dg = ops::dense_backward(x, l.weights, g);
          grads->weights[i] = std::move(dg.weights);
          grads->bias[i] = std::move(dg.bias);
          g = std::move(dg.input);
        } else {
          g = ops::dense_backward_input(l.weights, g);
        }
        break;
      }
      case LayerKind::kMaxPool:
        g = ops::maxpool2d_backward(g, lc.argmax, x.shape());
        break;
      case LayerKind::kFlatten:
        g = g.reshaped(x.shape());
        break;
      case LayerKind::kDropout:
        g = ops::dropout_backward(g, lc.dropout_mask);
        break;
    }
    if (!need_input_grad) break;
  }
  return g;
}

}  // namespace

ModelGrads backward(const Model& model, const ActivationCache& cache,
                    double dlogit) {
  ModelGrads grads = ModelGrads::zeros_like(model);
  propagate(model, cache, dlogit, kNoStop, &grads);
  return grads;
}

TensorF gradient_wrt_layer_output(const Model& model,
                                  const ActivationCache& cache, double dlogit,
                                  std::size_t layer_index) {
  return propagate(model, cache, dlogit, layer_index, nullptr);
}

// Checkpoint format (little-endian):
//   "TSCP" u32 version u8 variant u32 input_side f32 dropout_p u32 hidden_units
//   u32 tensor_count, then per tensor: u16 name_len, name, u8 ndim,
//   ndim x u32 dims, raw f32 data.
std::vector<std::uint8_t> serialize_checkpoint(const Model& model) {
  io::ByteWriter w;
  w.bytes("TSCP");
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(model.config.variant));
  w.u32(static_cast<std::uint32_t>(model.config.input_side));
  w.f32(model.config.dropout_p);
  w.u32(static_cast<std::uint32_t>(model.config.hidden_units));
  std::uint32_t count = 0;
  for (const auto& l : model.layers) count += l.has_params() ? 2 : 0;
  w.u32(count);
  auto put_tensor = [&w](const std::string& name, const TensorF& t) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(t.ndim()));
    for (const auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (const float v : t.vec()) w.f32(v);
  };
  for (const auto& l : model.layers) {
    if (!l.has_params()) continue;
    put_tensor(l.name + ".weight", l.weights);
    put_tensor(l.name + ".bias", l.bias);
  }
  return std::move(w.buffer());
}

Model deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  using K = CheckpointErrorKind;
  if (bytes.size() >= 4 && std::string(bytes.begin(), bytes.begin() + 4) != "TSCP") {
    throw CheckpointError(K::kBadMagic, "checkpoint: bad magic");
  }
  try {
    io::ByteReader r(bytes);
    r.str(4);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
      throw CheckpointError(K::kUnsupportedVersion,
                            "checkpoint: unsupported version " + std::to_string(version));
    }
    ModelConfig config;
    const std::uint8_t variant = r.u8();
    if (variant > 1) {
      throw CheckpointError(K::kShapeInconsistent, "checkpoint: unknown variant code");
    }
    config.variant = static_cast<Variant>(variant);
    config.input_side = r.u32();
    config.dropout_p = r.f32();
    config.hidden_units = r.u32();
    const std::uint32_t count = r.u32();

    Model model;
    try {
      model = build_skeleton(config);
    } catch (const ShapeError& e) {
      throw CheckpointError(K::kShapeInconsistent,
                            std::string("checkpoint: invalid configuration: ") + e.what());
    }
    std::vector<std::pair<std::string, TensorF*>> expected;
    for (auto& l : model.layers) {
      if (!l.has_params()) continue;
      expected.emplace_back(l.name + ".weight", &l.weights);
      expected.emplace_back(l.name + ".bias", &l.bias);
    }
    if (count != expected.size()) {
      throw CheckpointError(K::kShapeInconsistent,
                            "checkpoint: expected " + std::to_string(expected.size()) +
                                " tensors, file has " + std::to_string(count));
    }
    for (auto& [name, tensor] : expected) {
      const std::string got = r.str(r.u16());
      const std::size_t ndim = r.u8();
      Shape dims(ndim);
      for (auto& d : dims) d = r.u32();
      if (got != name || dims != tensor->shape()) {
        throw CheckpointError(K::kShapeInconsistent,
                              "checkpoint: tensor '" + got + "' " + shape_to_string(dims) +
                                  " does not match expected '" + name + "' " +
                                  shape_to_string(tensor->shape()));
      }
      for (auto& v : tensor->vec()) v = r.f32();
    }
    if (r.remaining() != 0) {
      throw CheckpointError(K::kShapeInconsistent, "checkpoint: trailing bytes after last tensor");
    }
    return model;
  } catch (const io::TruncatedError& e) {
    throw CheckpointError(K::kTruncated, std::string("checkpoint: truncated file (") + e.what() + ")");
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  try {
    io::write_file(path, serialize_checkpoint(model));
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(CheckpointErrorKind::kIo, e.what());
  }
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_file(path);
  } catch (const Error& e) {
    throw CheckpointError(CheckpointErrorKind::kIo, e.what());
  }
  return deserialize_checkpoint(bytes);
}

}  // namespace tumorscope
