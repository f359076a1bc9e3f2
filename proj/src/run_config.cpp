#include "tumorscope/run_config.hpp"

#include <set>

#include "json.hpp"
#include "tumorscope/binary_io.hpp"

namespace tumorscope {
namespace {

using nlohmann::json;

// Reads typed keys from one JSON object and rejects any key it never asked for.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError("config: " + label() + " must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: " + join(key) + " has the wrong type");
    }
  }

  bool has(const char* key) const { return doc_.contains(key); }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(doc_.contains(key) ? doc_.at(key) : empty, join(key));
  }

  void finish() const {
    for (const auto& [k, v] : doc_.items()) {
      if (!seen_.count(k)) throw ConfigError("config: unknown key " + join(k));
    }
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string label() const { return path_.empty() ? "document" : path_; }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c;
  Section root(doc, "");

  Section data = root.sub("data");
  data.read("interval", c.data.interval);
  data.read("target_side", c.data.target_side);
  data.read("min_nonblack_ratio", c.data.thresholds.min_nonblack_ratio);
  data.read("min_edge_score", c.data.thresholds.min_edge_score);
  data.read("balance_val_test", c.data.balance_val_test);
  data.read("seed", c.data.seed);
  Section split = data.sub("split");
  split.read("train", c.data.ratios.train);
  split.read("val", c.data.ratios.val);
  split.read("test", c.data.ratios.test);
  split.finish();
  data.finish();

  Section model = root.sub("model");
  std::string variant = to_string(c.model.variant);
  model.read("variant", variant);
  model.read("hidden_units", c.model.hidden_units);
  model.read("dropout", c.model.dropout_p);
  model.finish();
  try {
    c.model.variant = parse_variant(variant);
  } catch (const Error& e) {
    throw ConfigError(std::string("config: model.variant: ") + e.what());
  }

  Section train = root.sub("train");
  train.read("preset", c.preset);
  try {
    c.train = train_preset(c.preset);
  } catch (const Error& e) {
    throw ConfigError(std::string("config: train.preset: ") + e.what());
  }
  train.read("lr", c.train.lr);
  train.read("decay", c.train.decay);
  train.read("batch_size", c.train.batch_size);
  train.read("epochs", c.train.epochs);
  train.read("augment", c.train.augment);
  train.read("seed", c.train.seed);
  Section sched = train.sub("scheduler");
  sched.read("enabled", c.train.scheduler.enabled);
  sched.read("gamma", c.train.scheduler.gamma);
  sched.read("every_epochs", c.train.scheduler.every_epochs);
  sched.finish();
  Section adam = train.sub("adam");
  adam.read("beta1", c.train.adam.beta1);
  adam.read("beta2", c.train.adam.beta2);
  adam.read("eps", c.train.adam.eps);
  adam.finish();
  train.finish();

  Section ex = root.sub("explain");
  ex.read("grid_rows", c.explain.shap.grid_rows);
  ex.read("grid_cols", c.explain.shap.grid_cols);
  ex.read("n_samples", c.explain.shap.n_samples);
  ex.read("seed", c.explain.shap.seed);
  ex.read("lrp_eps_rel", c.explain.lrp_eps_rel);
  ex.finish();

  Section render = root.sub("render");
  render.read("alpha", c.render.alpha);
  render.finish();

  Section ev = root.sub("eval");
  ev.read("threshold", c.eval.threshold);
  ev.read("blur_threshold", c.eval.misclass.blur);
  ev.read("partial_threshold", c.eval.misclass.partial);
  ev.finish();

  root.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return from_json(std::string(bytes.begin(), bytes.end()));
}

std::string RunConfig::to_json() const {
  const json doc = {
      {"data",
       {{"interval", data.interval},
        {"target_side", data.target_side},
        {"min_nonblack_ratio", data.thresholds.min_nonblack_ratio},
        {"min_edge_score", data.thresholds.min_edge_score},
        {"split", {{"train", data.ratios.train}, {"val", data.ratios.val}, {"test", data.ratios.test}}},
        {"balance_val_test", data.balance_val_test},
        {"seed", data.seed}}},
      {"model",
       {{"variant", to_string(model.variant)},
        {"hidden_units", model.hidden_units},
        {"dropout", model.dropout_p}}},
      {"train",
       {{"preset", preset},
        {"lr", train.lr},
        {"decay", train.decay},
        {"batch_size", train.batch_size},
        {"epochs", train.epochs},
        {"augment", train.augment},
        {"seed", train.seed},
        {"scheduler",
         {{"enabled", train.scheduler.enabled},
          {"gamma", train.scheduler.gamma},
          {"every_epochs", train.scheduler.every_epochs}}},
        {"adam", {{"beta1", train.adam.beta1}, {"beta2", train.adam.beta2}, {"eps", train.adam.eps}}}}},
      {"explain",
       {{"grid_rows", explain.shap.grid_rows},
        {"grid_cols", explain.shap.grid_cols},
        {"n_samples", explain.shap.n_samples},
        {"seed", explain.shap.seed},
        {"lrp_eps_rel", explain.lrp_eps_rel}}},
      {"render", {{"alpha", render.alpha}}},
      {"eval",
       {{"threshold", eval.threshold},
        {"blur_threshold", eval.misclass.blur},
        {"partial_threshold", eval.misclass.partial}}}};
  return doc.dump(2) + "\n";
}

void RunConfig::validate() const {
  try {
    train.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (data.interval < 1) throw ConfigError("config: data.interval must be at least 1");
  if (data.target_side < 1) throw ConfigError("config: data.target_side must be positive");
  if (data.ratios.train < 0 || data.ratios.val < 0 || data.ratios.test < 0 ||
      data.ratios.train + data.ratios.val + data.ratios.test != 100) {
    throw ConfigError("config: data.split percentages must be non-negative and sum to 100");
  }
  if (model.hidden_units < 1) throw ConfigError("config: model.hidden_units must be positive");
  if (!(model.dropout_p >= 0.0f && model.dropout_p < 1.0f)) {
    throw ConfigError("config: model.dropout must lie in [0, 1)");
  }
  if (explain.shap.grid_rows < 1 || explain.shap.grid_cols < 1) {
    throw ConfigError("config: explain grid must be at least 1x1");
  }
  if (!(explain.lrp_eps_rel >= 0.0)) throw ConfigError("config: explain.lrp_eps_rel must be >= 0");
  if (!(render.alpha >= 0.0 && render.alpha <= 1.0)) {
    throw ConfigError("config: render.alpha must lie in [0, 1]");
  }
  if (!(eval.threshold >= 0.0 && eval.threshold <= 1.0)) {
    throw ConfigError("config: eval.threshold must lie in [0, 1]");
  }
}

}  // namespace tumorscope
