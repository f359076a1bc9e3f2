#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tumorscope/datapipe.hpp"

// Classification metrics: confusion matrix, precision/recall/F1, ROC/AUC and
// the misclassification breakdown by image quality.
namespace tumorscope {

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::uint64_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Predicts positive iff score >= threshold.
ConfusionMatrix confusion(const std::vector<double>& scores, const std::vector<int>& labels,
                          double threshold = 0.5);

// Zero denominators give 0.0 and set the matching flag.
struct Metrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;
  bool precision_degenerate = false, recall_degenerate = false;
  bool f1_degenerate = false, accuracy_degenerate = false;
  bool degenerate() const {
    return precision_degenerate || recall_degenerate || f1_degenerate || accuracy_degenerate;
  }
};

Metrics prf1(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0, tpr = 0.0;
  double threshold = 0.0;  // score at which this point is reached
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.0;
};

// Sweeps thresholds over the unique scores in descending order, tied scores
// forming one step; trapezoid AUC computed from integer counts.
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Variance of the 4-neighbour Laplacian response over interior pixels.
double laplacian_variance(const TensorF& image);

struct MisclassThresholds {
  double blur = 0.0005;
  double partial = 0.01;
};

struct MisclassEntry {
  std::size_t index = 0;  // position in the evaluated record list
  std::string subject_id;
  std::string view;
  std::size_t slice_index = 0;
  int label = 0;
  double score = 0.0;
  double blur = 0.0;
  double tumour_fraction = 0.0;  // mask pixels / in-brain (> 0.05) pixels
  std::string bin;
};

// False negatives: poor_quality, partial_tumour or other. False positives:
// poor_quality or anomaly_like.
struct MisclassReport {
  std::vector<MisclassEntry> false_negatives;
  std::vector<MisclassEntry> false_positives;
  std::uint64_t fn_poor_quality = 0, fn_partial_tumour = 0, fn_other = 0;
  std::uint64_t fp_poor_quality = 0, fp_anomaly_like = 0;
};

MisclassReport misclass_report(const std::vector<SliceRecord>& records,
                               const std::vector<double>& scores, double threshold = 0.5,
                               const MisclassThresholds& thresholds = {});

struct EvalReport {
  double threshold = 0.5;
  ConfusionMatrix confusion;
  Metrics metrics;
  RocCurve roc;
  MisclassReport misclass;
  bool has_misclass = true;  // false when scored without images (JSON null)

  std::string to_json() const;
};

EvalReport evaluate(const std::vector<SliceRecord>& records, const std::vector<double>& scores,
                    double threshold = 0.5, const MisclassThresholds& thresholds = {});

// Metrics and ROC only, for stored (label, score) pairs.
EvalReport evaluate_scores(const std::vector<int>& labels, const std::vector<double>& scores,
                           double threshold = 0.5);

}  // namespace tumorscope
