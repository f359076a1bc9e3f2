// tumorscope: synth, preprocess, train, eval, explain and report.
// Exit codes: 0 success, 1 runtime failure (one diagnostic line), 2 usage error.

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tumorscope/binary_io.hpp"
#include "tumorscope/nifti.hpp"
#include "tumorscope/pipeline.hpp"

namespace {

using nlohmann::json;
using namespace tumorscope;

// Config file (if any) with command-line overrides patched in, so flags win
// and every value passes the same schema validation.
struct ConfigSource {
  std::string path;
  json patch = json::object();

  template <class T>
  void set(const std::optional<T>& flag, const char* section, const char* key) {
    if (flag) patch[section][key] = *flag;
  }

  RunConfig resolve() const {
    json doc = json::object();
    if (!path.empty()) {
      const auto bytes = io::read_file(path);
      try {
        doc = json::parse(bytes.begin(), bytes.end());
      } catch (const json::exception& e) {
        throw ConfigError("config: " + path + ": invalid JSON: " + e.what());
      }
      if (!doc.is_object()) throw ConfigError("config: " + path + " must hold a JSON object");
    }
    doc.merge_patch(patch);
    return RunConfig::from_json(doc.dump());
  }
};

const std::vector<SliceRecord>& pick_split(const DatasetSplit& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "val") return d.val;
  return d.test;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tumorscope: brain-MRI slice classification with Grad-CAM, LRP and SHAP explanations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tumorscope 0.1.0");
  const std::vector<std::string> splits{"train", "val", "test"};

  // synth
  auto* synth = app.add_subcommand("synth", "Write synthetic volume/mask NIfTI pairs and volumes.json");
  CohortSpec cohort;
  std::string synth_out;
  synth->add_option("--subjects", cohort.subjects, "Number of subjects (>= 3)")->required()->check(CLI::Range(3, 100000));
  synth->add_option("--tumour-rate", cohort.tumour_rate, "Fraction of subjects with a tumour")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  synth->add_option("--size", cohort.size, "Voxels per axis (>= 32)")->capture_default_str()->check(CLI::Range(32, 1024));
  synth->add_option("--seed", cohort.seed, "Seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Volumes to a split, balanced slice dataset");
  ConfigSource prep_cfg;
  std::string prep_manifest, prep_out;
  std::optional<std::size_t> interval, target_side;
  std::optional<double> min_nonblack, min_edge;
  std::optional<std::uint64_t> prep_seed;
  bool balance = false;
  prep->add_option("--manifest", prep_manifest, "Volume manifest (volumes.json)")->required()->check(CLI::ExistingFile);
  prep->add_option("--out", prep_out, "Dataset directory")->required();
  prep->add_option("--config", prep_cfg.path, "Run config JSON")->check(CLI::ExistingFile);
  prep->add_option("--interval", interval, "Slice interval (default 5)");
  prep->add_option("--target-side", target_side, "Output side in pixels (default 240)");
  prep->add_option("--min-nonblack-ratio", min_nonblack, "Informativeness: tissue fraction (default 0.10)");
  prep->add_option("--min-edge-score", min_edge, "Informativeness: mean Sobel magnitude (default 0.01)");
  prep->add_option("--seed", prep_seed, "Split/undersampling seed");
  prep->add_flag("--balance-val-test", balance, "Also undersample val and test");

  // train
  auto* train = app.add_subcommand("train", "Train a model; writes checkpoints and history.csv");
  ConfigSource train_cfg;
  std::string train_data, train_out;
  std::optional<std::string> preset, variant;
  std::optional<std::size_t> epochs, batch, hidden;
  std::optional<double> lr;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--data", train_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--config", train_cfg.path, "Run config JSON")->check(CLI::ExistingFile);
  train->add_option("--preset", preset, "original | original_b128 | improved")
      ->check(CLI::IsMember(train_preset_names()));
  train->add_option("--variant", variant, "Architecture: original | improved")->check(CLI::IsMember({"original", "improved"}));
  train->add_option("--epochs", epochs, "Epochs");
  train->add_option("--batch-size", batch, "Batch size");
  train->add_option("--lr", lr, "Initial learning rate");
  train->add_option("--hidden-units", hidden, "Dense hidden units (default 8192)");
  train->add_option("--seed", train_seed, "Training seed");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (or stored scores); writes the report JSON");
  ConfigSource eval_cfg;
  std::string eval_data, eval_ckpt, eval_scores, eval_out, eval_split = "test";
  std::optional<double> eval_threshold;
  eval->add_option("--data", eval_data, "Dataset directory")->check(CLI::ExistingDirectory);
  eval->add_option("--checkpoint", eval_ckpt, "Model checkpoint (.tscp)")->check(CLI::ExistingFile);
  eval->add_option("--scores", eval_scores, "CSV of label,score rows instead of data + checkpoint")
      ->check(CLI::ExistingFile)->excludes("--data")->excludes("--checkpoint");
  eval->add_option("--out", eval_out, "Report JSON path")->required();
  eval->add_option("--split", eval_split, "Split to evaluate")->capture_default_str()->check(CLI::IsMember(splits));
  eval->add_option("--threshold", eval_threshold, "Decision threshold (default 0.5)");
  eval->add_option("--config", eval_cfg.path, "Run config JSON")->check(CLI::ExistingFile);

  // explain
  auto* explain = app.add_subcommand("explain", "Grad-CAM, LRP and SHAP for one slice; writes JSON + composite PPM");
  ConfigSource ex_cfg;
  std::string ex_ckpt, ex_slice, ex_out;
  std::optional<std::size_t> grid, samples;
  std::optional<std::uint64_t> ex_seed;
  explain->add_option("--checkpoint", ex_ckpt, "Model checkpoint (.tscp)")->required()->check(CLI::ExistingFile);
  explain->add_option("--slice", ex_slice, "Slice file (.tssl)")->required()->check(CLI::ExistingFile);
  explain->add_option("--out", ex_out, "Output directory")->required();
  explain->add_option("--grid", grid, "SHAP patch grid side (default 8)");
  explain->add_option("--samples", samples, "KernelSHAP coalition samples (default 1024)");
  explain->add_option("--seed", ex_seed, "KernelSHAP seed");
  explain->add_option("--config", ex_cfg.path, "Run config JSON")->check(CLI::ExistingFile);

  // report
  auto* report = app.add_subcommand("report", "Misclassification audit with a composite per FP/FN");
  ConfigSource rep_cfg;
  std::string rep_data, rep_ckpt, rep_out, rep_split = "test";
  std::optional<double> rep_threshold;
  report->add_option("--data", rep_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--checkpoint", rep_ckpt, "Model checkpoint (.tscp)")->required()->check(CLI::ExistingFile);
  report->add_option("--out", rep_out, "Output directory")->required();
  report->add_option("--split", rep_split, "Split to audit")->capture_default_str()->check(CLI::IsMember(splits));
  report->add_option("--threshold", rep_threshold, "Decision threshold (default 0.5)");
  report->add_option("--config", rep_cfg.path, "Run config JSON")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*eval && eval_scores.empty() && (eval_data.empty() || eval_ckpt.empty())) {
    std::fprintf(stderr, "usage error: eval needs --scores, or both --data and --checkpoint\n");
    return 2;
  }

  try {
    if (*synth) {
      const auto entries = synthesize_cohort(synth_out, cohort);
      std::printf("wrote %zu subjects to %s\n", entries.size(), synth_out.c_str());
    } else if (*prep) {
      prep_cfg.set(interval, "data", "interval");
      prep_cfg.set(target_side, "data", "target_side");
      prep_cfg.set(min_nonblack, "data", "min_nonblack_ratio");
      prep_cfg.set(min_edge, "data", "min_edge_score");
      prep_cfg.set(prep_seed, "data", "seed");
      if (balance) prep_cfg.patch["data"]["balance_val_test"] = true;
      const RunConfig cfg = prep_cfg.resolve();
      PreprocessStats stats;
      const DatasetSplit split = preprocess(read_volume_manifest(prep_manifest), cfg.data, &stats);
      write_dataset(prep_out, split);
      std::printf("extracted %zu, informative %zu; train %zu, val %zu, test %zu\n", stats.extracted,
                  stats.informative, split.train.size(), split.val.size(), split.test.size());
    } else if (*train) {
      train_cfg.set(preset, "train", "preset");
      train_cfg.set(variant, "model", "variant");
      train_cfg.set(epochs, "train", "epochs");
      train_cfg.set(batch, "train", "batch_size");
      train_cfg.set(lr, "train", "lr");
      train_cfg.set(hidden, "model", "hidden_units");
      train_cfg.set(train_seed, "train", "seed");
      const RunConfig cfg = train_cfg.resolve();
      const FitResult r = train_to_dir(read_dataset(train_data), cfg, train_out);
      const HistoryRow& last = r.history.rows.back();
      std::printf("epochs %zu, final val loss %.6f, val acc %.4f, best epoch %zu\n", last.epoch,
                  last.val_loss, last.val_acc, r.best_epoch);
    } else if (*eval) {
      eval_cfg.set(eval_threshold, "eval", "threshold");
      const RunConfig cfg = eval_cfg.resolve();
      EvalReport rep;
      if (!eval_scores.empty()) {
        std::vector<int> labels;
        std::vector<double> scores;
        read_scores_csv(eval_scores, labels, scores);
        rep = evaluate_scores(labels, scores, cfg.eval.threshold);
      } else {
        const DatasetSplit data = read_dataset(eval_data);
        rep = evaluate_model(load_checkpoint(eval_ckpt), pick_split(data, eval_split), cfg.eval);
      }
      io::write_text(eval_out, rep.to_json());
      std::printf("precision %.4f recall %.4f f1 %.4f accuracy %.4f auc %.4f\n", rep.metrics.precision,
                  rep.metrics.recall, rep.metrics.f1, rep.metrics.accuracy, rep.roc.auc);
    } else if (*explain) {
      ex_cfg.set(grid, "explain", "grid_rows");
      ex_cfg.set(grid, "explain", "grid_cols");
      ex_cfg.set(samples, "explain", "n_samples");
      ex_cfg.set(ex_seed, "explain", "seed");
      const RunConfig cfg = ex_cfg.resolve();
      const TensorF image = decode_slice(io::read_file(ex_slice));
      const std::string id = std::filesystem::path(ex_slice).stem().string();
      const ExplainArtifacts a = explain_to_dir(load_checkpoint(ex_ckpt), image, id, cfg, ex_out);
      std::printf("p(tumour) %.6f, target %s, SHAP %s\n", a.explanation.probability,
                  to_string(a.explanation.target).c_str(),
                  format_sign_percentages({a.explanation.shap.pos_pct, a.explanation.shap.neg_pct}).c_str());
      std::printf("wrote %s and %s\n", a.json_path.string().c_str(), a.ppm_path.string().c_str());
    } else if (*report) {
      rep_cfg.set(rep_threshold, "eval", "threshold");
      const RunConfig cfg = rep_cfg.resolve();
      const DatasetSplit data = read_dataset(rep_data);
      const AuditSummary s = audit_to_dir(load_checkpoint(rep_ckpt), pick_split(data, rep_split), cfg, rep_out);
      const MisclassReport& m = s.report.misclass;
      std::printf("fn %zu (poor_quality %llu, partial_tumour %llu, other %llu); "
                  "fp %zu (poor_quality %llu, anomaly_like %llu); %zu composites\n",
                  m.false_negatives.size(), static_cast<unsigned long long>(m.fn_poor_quality),
                  static_cast<unsigned long long>(m.fn_partial_tumour), static_cast<unsigned long long>(m.fn_other),
                  m.false_positives.size(), static_cast<unsigned long long>(m.fp_poor_quality),
                  static_cast<unsigned long long>(m.fp_anomaly_like), s.composites.size());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", one_line(e.what()).c_str());
    return 1;
  } catch (const NiftiError& e) {
    std::fprintf(stderr, "nifti error: %s\n", one_line(e.what()).c_str());
    return 1;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "shape error: %s\n", one_line(e.what()).c_str());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", one_line(e.what()).c_str());
    return 1;
  }
  return 0;
}
