#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "tumorscope/binary_io.hpp"
#include "tumorscope/training.hpp"

namespace tumorscope {
namespace {

namespace fs = std::filesystem;

ModelConfig small_config(std::uint64_t seed = 3) {
  ModelConfig c;
  c.input_side = 120;
  c.hidden_units = 16;
  c.seed = seed;
  return c;
}

// Positives carry a bright square at a seed-dependent position.
std::vector<SliceRecord> toy_records(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SliceRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    SliceRecord r;
    r.image = TensorF({1, 120, 120});
    for (auto& v : r.image.vec()) v = static_cast<float>(0.3 * rng.uniform());
    r.label = static_cast<int>(i % 2);
    if (r.label) {
      const std::size_t y = 30 + rng.below(50), x = 30 + rng.below(50);
      for (std::size_t dy = 0; dy < 14; ++dy)
        for (std::size_t dx = 0; dx < 14; ++dx) r.image.at(0, y + dy, x + dx) = 1.0f;
      r.mask_pixels = 196;
    }
    r.subject_id = "t" + std::to_string(i % 5);
    r.slice_index = i;
    out.push_back(std::move(r));
  }
  return out;
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) { setenv("TUMORSCOPE_THREADS", value, 1); }
  ~ThreadsEnv() { unsetenv("TUMORSCOPE_THREADS"); }
};

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
  Model m = build_model(small_config());
  const Model before = m;
  AdamState s = AdamState::for_model(m);
  adam_step(m, ModelGrads::zeros_like(m), s, 1e-3);
  EXPECT_EQ(s.t, 1u);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    EXPECT_EQ(m.layers[i].weights, before.layers[i].weights);
    EXPECT_EQ(m.layers[i].bias, before.layers[i].bias);
  }
}

TEST(Adam, FirstStepMagnitudeIsScaleInvariant) {
  const double lr = 1e-3;
  for (double g = 1e-6; g <= 1e3; g *= 10.0) {
    for (const double sign : {1.0, -1.0}) {
      std::vector<double> theta{0.5}, grad{sign * g}, m{0.0}, v{0.0};
      adam_update(std::span<double>(theta), std::span<const double>(grad), m, v, 1, lr);
      const double expected = lr * g / (g + 1e-8);
      EXPECT_NEAR(std::abs(theta[0] - 0.5), expected, 1e-15) << g;
      EXPECT_EQ(theta[0] < 0.5, sign > 0);
    }
  }
}

TEST(Adam, QuadraticDescentMatchesRecurrence) {
  std::vector<double> theta{1.0}, m{0.0}, v{0.0};
  double om = 0.0, ov = 0.0, oth = 1.0;
  double prev = 1.0;
  for (std::uint64_t t = 1; t <= 10; ++t) {
    std::vector<double> grad{2.0 * theta[0]};
    adam_update(std::span<double>(theta), std::span<const double>(grad), m, v, t, 0.1);
    const double g = 2.0 * oth;
    om = 0.9 * om + 0.1 * g;
    ov = 0.999 * ov + 0.001 * g * g;
    oth -= 0.1 * (om / (1 - std::pow(0.9, t))) / (std::sqrt(ov / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(theta[0], oth, 1e-14);
    EXPECT_LT(theta[0] * theta[0], prev);
    prev = theta[0] * theta[0];
  }
}

TEST(Adam, SizeMismatchThrows) {
  std::vector<float> a(3), b(2), m(3), v(3);
  EXPECT_THROW(adam_update(std::span<float>(a), std::span<const float>(b), m, v, 1, 0.1), ShapeError);
}

TEST(LrSchedule, DecayAndSteps) {
  TrainConfig c = train_preset("original");
  EXPECT_EQ(lr_schedule(0, 0, c), 1e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(0, 50000, c), 5e-5);
  TrainConfig s;
  s.decay = 0.0;
  s.scheduler.enabled = true;
  EXPECT_DOUBLE_EQ(lr_schedule(20, 0, s), 0.25 * s.lr);
  EXPECT_DOUBLE_EQ(lr_schedule(9, 0, s), s.lr);
  EXPECT_DOUBLE_EQ(lr_schedule(10, 0, s), 0.5 * s.lr);
}

TEST(Presets, Values) {
  const auto o = train_preset("original");
  EXPECT_EQ(o.lr, 1e-4);
  EXPECT_EQ(o.decay, 2e-5);
  EXPECT_EQ(o.batch_size, 32u);
  EXPECT_FALSE(o.scheduler.enabled);
  EXPECT_EQ(train_preset("original_b128").batch_size, 128u);
  const auto i = train_preset("improved");
  EXPECT_EQ(i.lr, 1e-4);
  EXPECT_EQ(i.decay, 1e-4);
  EXPECT_EQ(i.batch_size, 64u);
  EXPECT_TRUE(i.scheduler.enabled);
  EXPECT_EQ(i.scheduler.gamma, 0.5);
  EXPECT_EQ(i.scheduler.every_epochs, 10u);
  EXPECT_THROW(train_preset("fast"), Error);
}

TEST(TrainEpoch, ZeroModelSingleSampleLossIsLn2) {
  Model m = build_model(small_config());
  for (auto& l : m.layers) {
    l.weights.fill(0.0f);
    l.bias.fill(0.0f);
  }
  auto recs = toy_records(1, 1);
  TrainConfig c;
  AdamState s = AdamState::for_model(m);
  std::uint64_t step = 0;
  const EpochStats e = train_epoch(m, recs, c, s, 0, step);
  EXPECT_DOUBLE_EQ(e.loss, std::log(2.0));
  EXPECT_EQ(e.steps, 1u);
  EXPECT_EQ(step, 1u);
}

TEST(TrainEpoch, LastPartialBatchIsKept) {
  Model m = build_model(small_config());
  TrainConfig c;
  c.batch_size = 4;
  AdamState s = AdamState::for_model(m);
  std::uint64_t step = 0;
  EXPECT_EQ(train_epoch(m, toy_records(10, 2), c, s, 0, step).steps, 3u);
}

TEST(TrainEpoch, EmptySetAndWrongSideThrow) {
  Model m = build_model(small_config());
  TrainConfig c;
  AdamState s = AdamState::for_model(m);
  std::uint64_t step = 0;
  EXPECT_THROW(train_epoch(m, {}, c, s, 0, step), Error);
  auto recs = toy_records(2, 1);
  recs[1].image = TensorF({1, 100, 100});
  EXPECT_THROW(train_epoch(m, recs, c, s, 0, step), ShapeError);
}

TEST(TrainEpoch, BitwiseReproducibleAcrossThreadCounts) {
  const auto recs = toy_records(12, 4);
  TrainConfig c;
  c.batch_size = 5;
  c.seed = 17;
  auto run = [&](const char* threads) {
    ThreadsEnv env(threads);
    Model m = build_model(small_config());
    AdamState s = AdamState::for_model(m);
    std::uint64_t step = 0;
    train_epoch(m, recs, c, s, 0, step);
    train_epoch(m, recs, c, s, 1, step);
    return serialize_checkpoint(m);
  };
  const auto a = run("1");
  EXPECT_EQ(a, run("1"));
  EXPECT_EQ(a, run("3"));
}

TEST(TrainEpoch, TinyLearningRateLeavesParameters) {
  Model m = build_model(small_config());
  const Model before = m;
  TrainConfig c;
  c.lr = 1e-50;
  AdamState s = AdamState::for_model(m);
  std::uint64_t step = 0;
  for (std::size_t e = 0; e < 3; ++e) train_epoch(m, toy_records(6, 5), c, s, e, step);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    for (std::size_t j = 0; j < m.layers[i].weights.size(); ++j) {
      ASSERT_EQ(m.layers[i].weights[j], before.layers[i].weights[j]);
    }
    for (std::size_t j = 0; j < m.layers[i].bias.size(); ++j) {
      ASSERT_EQ(m.layers[i].bias[j], before.layers[i].bias[j]);
    }
  }
}

TEST(Fit, LossDecreasesOnToyTask) {
  DatasetSplit split;
  split.train = toy_records(200, 6);
  split.val = toy_records(40, 7);
  TrainConfig c;
  c.epochs = 5;
  c.lr = 1e-3;
  c.seed = 2;
  const FitResult r = fit(build_model(small_config(8)), split, c);
  ASSERT_EQ(r.history.rows.size(), 5u);
  EXPECT_LT(r.history.rows.back().train_loss, r.history.rows.front().train_loss);
  for (const auto& row : r.history.rows) {
    EXPECT_GE(row.train_acc, 0.0);
    EXPECT_LE(row.train_acc, 1.0);
    EXPECT_GE(row.train_loss, 0.0);
  }
}

TEST(Fit, WritesCheckpointsAndHistory) {
  const auto dir = fs::temp_directory_path() / "tumorscope_fit_test";
  fs::remove_all(dir);
  DatasetSplit split;
  split.train = toy_records(8, 1);
  split.val = toy_records(4, 2);
  TrainConfig c;
  c.epochs = 3;
  c.lr = 1e-3;
  const FitResult r = fit(build_model(small_config()), split, c, dir);
  ASSERT_EQ(r.history.rows.size(), 3u);
  for (const char* f : {"epoch_001.tscp", "epoch_002.tscp", "epoch_003.tscp", "best.tscp", "history.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  double best = 1e300;
  for (const auto& row : r.history.rows) best = std::min(best, row.val_loss);
  EXPECT_EQ(r.history.rows[r.best_epoch - 1].val_loss, best);
  EXPECT_DOUBLE_EQ(evaluate_loss(load_checkpoint(dir / "best.tscp"), split.val).loss, best);

  const auto text = io::read_file(dir / "history.csv");
  const History back = History::from_csv(std::string(text.begin(), text.end()));
  ASSERT_EQ(back.rows.size(), 3u);
  EXPECT_EQ(back.to_csv(), r.history.to_csv());
  fs::remove_all(dir);
}

TEST(Fit, SingleEpochHistory) {
  DatasetSplit split;
  split.train = toy_records(4, 1);
  split.val = toy_records(2, 2);
  TrainConfig c;
  c.epochs = 1;
  const FitResult r = fit(build_model(small_config()), split, c);
  EXPECT_EQ(r.history.rows.size(), 1u);
  EXPECT_EQ(r.best_epoch, 1u);
}

TEST(History, CsvFormat) {
  History h;
  h.rows.push_back({1, 0.5, 0.75, 0.25, 1.0});
  EXPECT_EQ(h.to_csv(), "epoch,train_loss,train_acc,val_loss,val_acc\n1,0.5,0.75,0.25,1\n");
  EXPECT_THROW(History::from_csv("bad\n"), Error);
}

}  // namespace
}  // namespace tumorscope
