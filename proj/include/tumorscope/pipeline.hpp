#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tumorscope/run_config.hpp"

// End-to-end steps shared by the command-line tool and the bindings. Each
// step reads and writes the on-disk formats of the underlying modules.
namespace tumorscope {

// Model for a dataset of the given side, initialized from
// derive_seed(train.seed, "model/init").
Model init_model(const RunConfig& config, std::size_t input_side);

// Runs fit() and writes epoch checkpoints, best.tscp, last.tscp,
// history.csv and the resolved config.json into out_dir.
FitResult train_to_dir(const DatasetSplit& data, const RunConfig& config,
                       const std::filesystem::path& out_dir);

EvalReport evaluate_model(const Model& model, const std::vector<SliceRecord>& records,
                          const EvalConfig& config = {});

struct ExplainArtifacts {
  Explanation explanation;
  std::filesystem::path json_path;
  std::filesystem::path ppm_path;  // <id>_combined.ppm
};

ExplainArtifacts explain_to_dir(const Model& model, const TensorF& image, const std::string& id,
                                const RunConfig& config, const std::filesystem::path& out_dir);

struct AuditSummary {
  EvalReport report;
  std::vector<std::filesystem::path> composites;  // one per FP/FN, in report order
};

// Misclassification audit: writes report.json, misclassified.csv and one
// explanation (JSON + composite) per false positive and false negative.
AuditSummary audit_to_dir(const Model& model, const std::vector<SliceRecord>& records,
                          const RunConfig& config, const std::filesystem::path& out_dir);

// "label,score" rows (header optional) for evaluating stored scores.
void read_scores_csv(const std::filesystem::path& path, std::vector<int>& labels,
                     std::vector<double>& scores);

}  // namespace tumorscope
