#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tumorscope/datapipe.hpp"
#include "tumorscope/model.hpp"

// Adam + logit-domain BCE training with inverse-time decay and an optional
// step scheduler, per-epoch validation, checkpointing and a History CSV.
namespace tumorscope {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct StepScheduler {
  bool enabled = false;
  double gamma = 0.5;
  std::size_t every_epochs = 10;
};

struct TrainConfig {
  double lr = 1e-4;
  double decay = 2e-5;  // inverse-time: lr / (1 + decay * global_step)
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  StepScheduler scheduler;
  AdamHyper adam;
  bool augment = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// "original" (batch 32), "original_b128" (batch 128) and "improved"
// (decay 1e-4, batch 64, step scheduler on). All use lr 1e-4.
TrainConfig train_preset(const std::string& name);
std::vector<std::string> train_preset_names();

struct AdamState {
  std::vector<std::vector<float>> m;  // one buffer per parameter tensor
  std::vector<std::vector<float>> v;
  std::uint64_t t = 0;

  static AdamState for_model(const Model& model);
};

// One Adam update on a flat buffer; `t` is the 1-based step number used for
// bias correction.
void adam_update(std::span<float> theta, std::span<const float> grad, std::span<float> m,
                 std::span<float> v, std::uint64_t t, double lr, const AdamHyper& hyper = {});
void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t t, double lr, const AdamHyper& hyper = {});

// Increments state.t and updates every parameter tensor of the model.
void adam_step(Model& model, const ModelGrads& grads, AdamState& state, double lr,
               const AdamHyper& hyper = {});

double lr_schedule(std::size_t epoch, std::uint64_t global_step, const TrainConfig& config);

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t steps = 0;
};

// One pass over `records` in a seed-derived shuffled order. Each sample's
// augmentation and dropout draw from a stream keyed by (seed, epoch,
// position), so results do not depend on the worker count.
EpochStats train_epoch(Model& model, const std::vector<SliceRecord>& records,
                       const TrainConfig& config, AdamState& state, std::size_t epoch,
                       std::uint64_t& global_step);

// Inference-mode probabilities, in record order.
std::vector<double> predict(const Model& model, const std::vector<SliceRecord>& records);

// Mean BCE and accuracy (threshold 0.5) in inference mode.
EpochStats evaluate_loss(const Model& model, const std::vector<SliceRecord>& records);

struct HistoryRow {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct History {
  std::vector<HistoryRow> rows;

  std::string to_csv() const;
  static History from_csv(const std::string& text);
};

struct FitResult {
  Model model;       // after the last epoch
  Model best_model;  // lowest validation loss
  std::size_t best_epoch = 0;
  History history;
};

// With an output directory, writes epoch_NNN.tscp after every epoch,
// best.tscp whenever validation loss improves (strictly), and history.csv.
FitResult fit(Model model, const DatasetSplit& split, const TrainConfig& config,
              const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace tumorscope
