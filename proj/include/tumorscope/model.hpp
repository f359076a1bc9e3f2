#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tumorscope/rng.hpp"
#include "tumorscope/tensor.hpp"

namespace tumorscope {

enum class Variant : std::uint8_t { kOriginal = 0, kImproved = 1 };

enum class LayerKind : std::uint8_t { kConv2D, kMaxPool, kFlatten, kDense, kDropout };

enum class Activation : std::uint8_t { kNone, kReLU, kSigmoid };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
std::string to_string(LayerKind k);

struct ModelConfig {
  Variant variant = Variant::kOriginal;
  std::size_t input_side = 240;
  float dropout_p = 0.5f;
  std::size_t hidden_units = 8192;
  std::uint64_t seed = 0;

  // The seed only drives initialization and is not persisted in checkpoints.
  bool same_architecture(const ModelConfig& o) const {
    return variant == o.variant && input_side == o.input_side &&
           dropout_p == o.dropout_p && hidden_units == o.hidden_units;
  }
};

struct Layer {
  LayerKind kind = LayerKind::kConv2D;
  std::string name;
  Activation activation = Activation::kNone;
  std::size_t units = 0;   // conv filters or dense outputs
  std::size_t kernel = 0;  // conv kernel side
  TensorF weights;         // empty for parameter-free layers
  TensorF bias;

  bool has_params() const { return kind == LayerKind::kConv2D || kind == LayerKind::kDense; }
  std::size_t param_count() const { return has_params() ? weights.size() + bias.size() : 0; }
};

struct Model {
  ModelConfig config;
  std::vector<Layer> layers;

  std::size_t param_count() const;
  // Index of the last convolutional layer, if any.
  std::optional<std::size_t> last_conv_index() const;
};

struct ShapeRow {
  std::string name;
  LayerKind kind;
  Activation activation;
  std::string configuration;  // e.g. "16 filters, 3x3 kernel"
  Shape output;
  std::size_t params = 0;
};

struct ShapeTrace {
  std::vector<ShapeRow> rows;  // rows up to (not including) the failing layer
  std::optional<std::string> error;
  std::string failing_layer;

  bool ok() const { return !error.has_value(); }
  std::size_t total_params() const;
};

// Symbolic shape walk over the architecture for a config. Never throws for
// size problems; the first layer whose input is smaller than its window is
// reported in `error` / `failing_layer`.
ShapeTrace shape_trace(const ModelConfig& config);

// Builds and initializes (Kaiming fan-in normal weights, zero biases) from
// config.seed. Throws ShapeError when shape_trace reports a problem.
Model build_model(const ModelConfig& config);

struct LayerCache {
  TensorF pre;   // pre-activation (conv/dense with an activation only)
  TensorF post;  // layer output
  std::vector<std::uint32_t> argmax;  // max-pool winners
  TensorF dropout_mask;
};

struct ActivationCache {
  TensorF input;
  std::vector<LayerCache> layers;
  float logit = 0.0f;

  // Input to layer i (the image for i == 0).
  const TensorF& layer_input(std::size_t i) const {
    return i == 0 ? input : layers[i - 1].post;
  }
};

struct ForwardResult {
  double probability = 0.5;
  ActivationCache cache;
};

// Image must be [1, S, S] with S == config.input_side. The rng is consumed
// only in training mode (dropout).
ForwardResult forward(const Model& model, const TensorF& image, bool training,
                      Rng& rng);

// Inference-only convenience.
ForwardResult forward(const Model& model, const TensorF& image);

struct ModelGrads {
  std::vector<TensorF> weights;  // parallel to Model::layers, empty if no params
  std::vector<TensorF> bias;

  static ModelGrads zeros_like(const Model& model);
  void add(const ModelGrads& other);
  void scale(float s);
};

// Backpropagates d(loss)/d(logit) through the cached forward pass and returns
// parameter gradients.
ModelGrads backward(const Model& model, const ActivationCache& cache,
                    double dlogit);

// Gradient of (dlogit * logit) w.r.t. the output of layer `layer_index`.
TensorF gradient_wrt_layer_output(const Model& model,
                                  const ActivationCache& cache, double dlogit,
                                  std::size_t layer_index);

enum class CheckpointErrorKind {
  kIo,
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kShapeInconsistent,
};

class CheckpointError : public Error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace tumorscope
