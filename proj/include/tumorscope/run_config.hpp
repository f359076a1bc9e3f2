#pragma once

#include <filesystem>
#include <string>

#include "tumorscope/datapipe.hpp"
#include "tumorscope/evaluation.hpp"
#include "tumorscope/explain.hpp"
#include "tumorscope/model.hpp"
#include "tumorscope/render.hpp"
#include "tumorscope/training.hpp"

// The JSON run configuration shared by every command. Sections mirror the
// module config types; unknown keys anywhere are rejected.
//
//   data:    interval, target_side, min_nonblack_ratio, min_edge_score,
//            split {train, val, test}, balance_val_test, seed
//   model:   variant, hidden_units, dropout
//   train:   preset, lr, decay, batch_size, epochs, augment, seed,
//            scheduler {enabled, gamma, every_epochs}, adam {beta1, beta2, eps}
//   explain: grid_rows, grid_cols, n_samples, seed, lrp_eps_rel
//   render:  alpha
//   eval:    threshold, blur_threshold, partial_threshold
//
// train.preset is applied first; explicit train keys then override it. The
// model's input side always comes from the dataset, and its initialization
// seed is derive_seed(train.seed, "model/init").
namespace tumorscope {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct EvalConfig {
  double threshold = 0.5;
  MisclassThresholds misclass;
};

struct RunConfig {
  PreprocessConfig data;
  ModelConfig model;
  std::string preset = "original";
  TrainConfig train = train_preset("original");
  ExplainConfig explain;
  RenderConfig render;
  EvalConfig eval;

  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  // Full document with every key, suitable for from_json.
  std::string to_json() const;
  void validate() const;
};

}  // namespace tumorscope
