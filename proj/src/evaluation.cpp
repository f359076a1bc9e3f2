#include "tumorscope/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"

namespace tumorscope {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw Error("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                std::to_string(labels.size()) + ")");
  }
  for (const int l : labels) {
    if (l != 0 && l != 1) throw Error("labels must be 0 or 1");
  }
}

double ratio(std::uint64_t num, std::uint64_t den, bool& degenerate) {
  degenerate = den == 0;
  return degenerate ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix confusion(const std::vector<double>& scores, const std::vector<int>& labels,
                          double threshold) {
  check_inputs(scores, labels);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      (pred ? cm.tp : cm.fn) += 1;
    } else {
      (pred ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

Metrics prf1(const ConfusionMatrix& cm) {
  Metrics m;
  m.precision = ratio(cm.tp, cm.tp + cm.fp, m.precision_degenerate);
  m.recall = ratio(cm.tp, cm.tp + cm.fn, m.recall_degenerate);
  m.accuracy = ratio(cm.tp + cm.tn, cm.total(), m.accuracy_degenerate);
  const double denom = m.precision + m.recall;
  m.f1_degenerate = denom == 0.0;
  m.f1 = m.f1_degenerate ? 0.0 : 2.0 * m.precision * m.recall / denom;
  return m;
}

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_inputs(scores, labels);
  const auto pos = static_cast<std::uint64_t>(std::count(labels.begin(), labels.end(), 1));
  const std::uint64_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw Error("roc_auc: both classes must be present");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::uint64_t tp = 0, fp = 0;
  // Twice the area in units of one positive-negative pair.
  std::uint64_t area2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const std::uint64_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
    area2 += (fp - fp0) * (tp + tp0);
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  roc.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

double laplacian_variance(const TensorF& image) {
  const std::size_t h = image.dim(image.ndim() - 2), w = image.dim(image.ndim() - 1);
  if (h < 3 || w < 3) return 0.0;
  const float* p = image.data().data();
  std::vector<double> resp;
  resp.reserve((h - 2) * (w - 2));
  for (std::size_t y = 1; y + 1 < h; ++y) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      resp.push_back(static_cast<double>(p[(y - 1) * w + x]) + p[(y + 1) * w + x] +
                     p[y * w + x - 1] + p[y * w + x + 1] - 4.0 * p[y * w + x]);
    }
  }
  double mean = 0.0;
  for (const double r : resp) mean += r;
  mean /= static_cast<double>(resp.size());
  double var = 0.0;
  for (const double r : resp) var += (r - mean) * (r - mean);
  return var / static_cast<double>(resp.size());
}

MisclassReport misclass_report(const std::vector<SliceRecord>& records,
                               const std::vector<double>& scores, double threshold,
                               const MisclassThresholds& thresholds) {
  if (records.size() != scores.size()) throw Error("misclass_report: records and scores differ in length");
  MisclassReport rep;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SliceRecord& r = records[i];
    const bool pred = scores[i] >= threshold;
    if (pred == (r.label == 1)) continue;
    MisclassEntry e;
    e.index = i;
    e.subject_id = r.subject_id;
    e.view = to_string(r.view);
    e.slice_index = r.slice_index;
    e.label = r.label;
    e.score = scores[i];
    e.blur = laplacian_variance(r.image);
    std::size_t brain = 0;
    for (const float v : r.image.vec()) brain += v > kNonBlackLevel ? 1 : 0;
    const std::size_t area = brain > 0 ? brain : r.image.size();
    e.tumour_fraction = static_cast<double>(r.mask_pixels) / static_cast<double>(area);
    const bool poor = e.blur < thresholds.blur;
    if (r.label == 1) {
      e.bin = poor ? "poor_quality" : e.tumour_fraction < thresholds.partial ? "partial_tumour" : "other";
      (poor ? rep.fn_poor_quality : e.bin == "partial_tumour" ? rep.fn_partial_tumour : rep.fn_other) += 1;
      rep.false_negatives.push_back(std::move(e));
    } else {
      e.bin = poor ? "poor_quality" : "anomaly_like";
      (poor ? rep.fp_poor_quality : rep.fp_anomaly_like) += 1;
      rep.false_positives.push_back(std::move(e));
    }
  }
  return rep;
}

EvalReport evaluate(const std::vector<SliceRecord>& records, const std::vector<double>& scores,
                    double threshold, const MisclassThresholds& thresholds) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  EvalReport rep;
  rep.threshold = threshold;
  rep.confusion = confusion(scores, labels, threshold);
  rep.metrics = prf1(rep.confusion);
  rep.roc = roc_auc(scores, labels);
  rep.misclass = misclass_report(records, scores, threshold, thresholds);
  return rep;
}

EvalReport evaluate_scores(const std::vector<int>& labels, const std::vector<double>& scores,
                           double threshold) {
  EvalReport rep;
  rep.threshold = threshold;
  rep.confusion = confusion(scores, labels, threshold);
  rep.metrics = prf1(rep.confusion);
  rep.roc = roc_auc(scores, labels);
  rep.has_misclass = false;
  return rep;
}

namespace {

nlohmann::json entry_json(const MisclassEntry& e) {
  return {{"index", e.index}, {"subject_id", e.subject_id}, {"view", e.view},
          {"slice_index", e.slice_index}, {"label", e.label}, {"score", e.score},
          {"blur", e.blur}, {"tumour_fraction", e.tumour_fraction}, {"bin", e.bin}};
}

}  // namespace

std::string EvalReport::to_json() const {
  using nlohmann::json;
  json roc_points = json::array();
  for (const auto& p : roc.points) roc_points.push_back({p.fpr, p.tpr});
  json fns = json::array(), fps = json::array();
  for (const auto& e : misclass.false_negatives) fns.push_back(entry_json(e));
  for (const auto& e : misclass.false_positives) fps.push_back(entry_json(e));
  json misclass_doc = nullptr;
  if (has_misclass) {
    misclass_doc = {
        {"false_negative_bins",
         {{"poor_quality", misclass.fn_poor_quality},
          {"partial_tumour", misclass.fn_partial_tumour},
          {"other", misclass.fn_other}}},
        {"false_positive_bins",
         {{"poor_quality", misclass.fp_poor_quality}, {"anomaly_like", misclass.fp_anomaly_like}}},
        {"false_negatives", fns},
        {"false_positives", fps}};
  }
  const json doc = {
      {"threshold", threshold},
      {"confusion", {{"tp", confusion.tp}, {"fp", confusion.fp}, {"fn", confusion.fn}, {"tn", confusion.tn}}},
      {"metrics",
       {{"precision", metrics.precision},
        {"recall", metrics.recall},
        {"f1", metrics.f1},
        {"accuracy", metrics.accuracy},
        {"degenerate", metrics.degenerate()}}},
      {"auc", roc.auc},
      {"roc", roc_points},
      {"misclassification", misclass_doc}};
  return doc.dump(2) + "\n";
}

}  // namespace tumorscope
