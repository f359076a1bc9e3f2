#include "tumorscope/training.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "tumorscope/binary_io.hpp"
#include "tumorscope/ops.hpp"
#include "tumorscope/parallel.hpp"

namespace tumorscope {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error("train config: lr must be positive");
  if (!(decay >= 0.0)) throw Error("train config: decay must be non-negative");
  if (batch_size < 1) throw Error("train config: batch_size must be at least 1");
  if (epochs < 1) throw Error("train config: epochs must be at least 1");
  if (scheduler.enabled && (scheduler.every_epochs < 1 || !(scheduler.gamma > 0.0))) {
    throw Error("train config: scheduler needs gamma > 0 and every_epochs >= 1");
  }
}

TrainConfig train_preset(const std::string& name) {
  TrainConfig c;
  if (name == "original") return c;
  if (name == "original_b128") {
    c.batch_size = 128;
    return c;
  }
  if (name == "improved") {
    c.decay = 1e-4;
    c.batch_size = 64;
    c.scheduler.enabled = true;
    return c;
  }
  throw Error("unknown training preset '" + name + "'");
}

std::vector<std::string> train_preset_names() { return {"original", "original_b128", "improved"}; }

AdamState AdamState::for_model(const Model& model) {
  AdamState s;
  for (const auto& l : model.layers) {
    s.m.emplace_back(l.weights.size(), 0.0f);
    s.v.emplace_back(l.weights.size(), 0.0f);
    s.m.emplace_back(l.bias.size(), 0.0f);
    s.v.emplace_back(l.bias.size(), 0.0f);
  }
  return s;
}

namespace {

template <typename T>
void adam_update_impl(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v,
                      std::uint64_t t, double lr, const AdamHyper& h) {
  if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw ShapeError("adam: parameter, gradient and moment sizes differ");
  }
  if (t == 0) throw Error("adam: step number is 1-based");
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double mhat = mi / c1, vhat = vi / c2;
    theta[i] = static_cast<T>(theta[i] - lr * mhat / (std::sqrt(vhat) + h.eps));
  }
}

}  // namespace

void adam_update(std::span<float> theta, std::span<const float> grad, std::span<float> m,
                 std::span<float> v, std::uint64_t t, double lr, const AdamHyper& hyper) {
  adam_update_impl(theta, grad, m, v, t, lr, hyper);
}

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t t, double lr, const AdamHyper& hyper) {
  adam_update_impl(theta, grad, m, v, t, lr, hyper);
}

void adam_step(Model& model, const ModelGrads& grads, AdamState& state, double lr,
               const AdamHyper& hyper) {
  if (grads.weights.size() != model.layers.size() || state.m.size() != 2 * model.layers.size()) {
    throw ShapeError("adam_step: gradients or optimizer state do not match the model");
  }
  ++state.t;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Layer& l = model.layers[i];
    if (!l.has_params()) continue;
    adam_update(l.weights.data(), std::span<const float>(grads.weights[i].data()), state.m[2 * i],
                state.v[2 * i], state.t, lr, hyper);
    adam_update(l.bias.data(), std::span<const float>(grads.bias[i].data()), state.m[2 * i + 1],
                state.v[2 * i + 1], state.t, lr, hyper);
  }
}

double lr_schedule(std::size_t epoch, std::uint64_t global_step, const TrainConfig& config) {
  double lr = config.lr / (1.0 + config.decay * static_cast<double>(global_step));
  if (config.scheduler.enabled) {
    lr *= std::pow(config.scheduler.gamma,
                   static_cast<double>(epoch / config.scheduler.every_epochs));
  }
  return lr;
}

namespace {

void check_side(const Model& model, const SliceRecord& r) {
  const std::size_t s = model.config.input_side;
  if (r.image.shape() != Shape{1, s, s}) {
    throw ShapeError("slice " + r.subject_id + "/" + to_string(r.view) + "/" +
                     std::to_string(r.slice_index) + " has shape " +
                     shape_to_string(r.image.shape()) + ", model expects [1, " +
                     std::to_string(s) + ", " + std::to_string(s) + "]");
  }
}

struct SampleResult {
  ModelGrads grads;
  double loss = 0.0;
  bool correct = false;
};

}  // namespace

EpochStats train_epoch(Model& model, const std::vector<SliceRecord>& records,
                       const TrainConfig& config, AdamState& state, std::size_t epoch,
                       std::uint64_t& global_step) {
  config.validate();
  if (records.empty()) throw Error("train_epoch: empty training set");
  for (const auto& r : records) check_side(model, r);
  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng order_rng(derive_seed(config.seed, "train/shuffle", epoch));
  shuffle(order.begin(), order.end(), order_rng);

  // Samples are processed in waves of `workers` and reduced in position
  // order, so the summed gradient is identical for any thread count.
  const std::size_t workers = worker_count();
  EpochStats stats;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += config.batch_size) {
    const std::size_t end = std::min(n, start + config.batch_size);
    ModelGrads total = ModelGrads::zeros_like(model);
    for (std::size_t w0 = start; w0 < end; w0 += workers) {
      const std::size_t w1 = std::min(end, w0 + workers);
      std::vector<SampleResult> wave(w1 - w0);
      parallel_for(wave.size(), [&](std::size_t k) {
        const std::size_t pos = w0 + k;
        const SliceRecord& r = records[order[pos]];
        Rng rng(derive_seed(config.seed, "train/sample", epoch * n + pos));
        const TensorF image = config.augment ? augment(r.image, rng) : r.image;
        const ForwardResult fr = forward(model, image, true, rng);
        const ops::BceResult bce = ops::bce_loss(fr.cache.logit, r.label);
        wave[k].grads = backward(model, fr.cache, bce.grad_logit);
        wave[k].loss = bce.loss;
        wave[k].correct = (fr.probability >= 0.5) == (r.label == 1);
      });
      for (const auto& s : wave) {
        total.add(s.grads);
        loss_sum += s.loss;
        correct += s.correct ? 1 : 0;
      }
    }
    total.scale(1.0f / static_cast<float>(end - start));
    adam_step(model, total, state, lr_schedule(epoch, global_step, config), config.adam);
    ++global_step;
    ++stats.steps;
  }
  stats.loss = loss_sum / static_cast<double>(n);
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return stats;
}

std::vector<double> predict(const Model& model, const std::vector<SliceRecord>& records) {
  for (const auto& r : records) check_side(model, r);
  std::vector<double> out(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    out[i] = forward(model, records[i].image).probability;
  });
  return out;
}

EpochStats evaluate_loss(const Model& model, const std::vector<SliceRecord>& records) {
  if (records.empty()) throw Error("evaluate_loss: empty record set");
  for (const auto& r : records) check_side(model, r);
  std::vector<std::pair<double, bool>> per(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const ForwardResult fr = forward(model, records[i].image);
    per[i] = {ops::bce_loss(fr.cache.logit, records[i].label).loss,
              (fr.probability >= 0.5) == (records[i].label == 1)};
  });
  EpochStats s;
  std::size_t correct = 0;
  for (const auto& [loss, ok] : per) {
    s.loss += loss;
    correct += ok ? 1 : 0;
  }
  s.loss /= static_cast<double>(records.size());
  s.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
  return s;
}

std::string History::to_csv() const {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.train_loss,
                  r.train_acc, r.val_loss, r.val_acc);
    out += line;
  }
  return out;
}

History History::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_loss,train_acc,val_loss,val_acc") {
    throw Error("history csv: unexpected header");
  }
  History h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    HistoryRow r;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf", &r.epoch, &r.train_loss, &r.train_acc,
                    &r.val_loss, &r.val_acc) != 5) {
      throw Error("history csv: malformed row '" + line + "'");
    }
    h.rows.push_back(r);
  }
  return h;
}

FitResult fit(Model model, const DatasetSplit& split, const TrainConfig& config,
              const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  if (split.val.empty()) throw Error("fit: validation set is empty");
  if (out_dir) std::filesystem::create_directories(*out_dir);
  AdamState state = AdamState::for_model(model);
  std::uint64_t global_step = 0;
  FitResult result{model, model, 0, {}};
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const EpochStats tr = train_epoch(model, split.train, config, state, epoch, global_step);
    const EpochStats va = evaluate_loss(model, split.val);
    result.history.rows.push_back({epoch + 1, tr.loss, tr.accuracy, va.loss, va.accuracy});
    if (out_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03zu.tscp", epoch + 1);
      save_checkpoint(model, *out_dir / name);
    }
    if (va.loss < best_loss) {
      best_loss = va.loss;
      result.best_model = model;
      result.best_epoch = epoch + 1;
      if (out_dir) save_checkpoint(model, *out_dir / "best.tscp");
    }
    if (out_dir) io::write_text(*out_dir / "history.csv", result.history.to_csv());
  }
  result.model = std::move(model);
  return result;
}

}  // namespace tumorscope
