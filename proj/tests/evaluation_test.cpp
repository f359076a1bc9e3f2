#include <gtest/gtest.h>

#include "json.hpp"
#include "tumorscope/evaluation.hpp"

namespace tumorscope {
namespace {

// Fraction of positive-negative pairs ranked correctly, ties counting half.
double pair_statistic(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

SliceRecord textured_record(int label, std::size_t mask_pixels, std::size_t side = 200) {
  SliceRecord r;
  r.image = TensorF({1, side, side});
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) r.image.at(0, y, x) = ((x + y) % 2) ? 0.9f : 0.3f;
  r.label = label;
  r.mask_pixels = mask_pixels;
  r.subject_id = "s";
  return r;
}

TEST(Confusion, PerfectPairAndTieRule) {
  EXPECT_EQ(confusion({0.9, 0.1}, {1, 0}), (ConfusionMatrix{1, 0, 0, 1}));
  EXPECT_EQ(confusion({0.5}, {0}), (ConfusionMatrix{0, 1, 0, 0}));
  EXPECT_EQ(confusion({0.5}, {1}), (ConfusionMatrix{1, 0, 0, 0}));
  EXPECT_THROW(confusion({0.5}, {1, 0}), Error);
  EXPECT_THROW(confusion({0.5}, {2}), Error);
}

TEST(Confusion, LabelSwapSymmetry) {
  Rng rng(4);
  std::vector<double> s, sf;
  std::vector<int> l, lf;
  for (int i = 0; i < 200; ++i) {
    // Dyadic scores keep 1 - s exact.
    const double v = static_cast<double>(rng.below(64)) / 64.0 + 1.0 / 128.0;
    s.push_back(v);
    sf.push_back(1.0 - v);
    l.push_back(static_cast<int>(rng.below(2)));
    lf.push_back(1 - l.back());
  }
  const auto a = confusion(s, l), b = confusion(sf, lf);
  EXPECT_EQ(a.total(), 200u);
  EXPECT_EQ(a.tp, b.tn);
  EXPECT_EQ(a.tn, b.tp);
  EXPECT_EQ(a.fp, b.fn);
  EXPECT_EQ(a.fn, b.fp);
}

TEST(Prf1, ImprovedModelMatrix) {
  const Metrics m = prf1({2353, 96, 376, 2633});
  EXPECT_NEAR(m.precision, 0.9608, 0.0005);
  EXPECT_NEAR(m.recall, 0.8622, 0.0005);
  EXPECT_NEAR(m.f1, 0.9088, 0.0005);
  // Matrix-implied accuracy; the headline 0.9124 does not follow from these counts.
  EXPECT_NEAR(m.accuracy, 4986.0 / 5458.0, 1e-15);
  EXPECT_NEAR(m.accuracy, 0.9135, 0.00005);
  EXPECT_FALSE(m.degenerate());
}

TEST(Prf1, DegenerateCases) {
  const Metrics m = prf1({0, 0, 5, 5});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_TRUE(m.precision_degenerate);
  EXPECT_FALSE(m.recall_degenerate);
  EXPECT_TRUE(m.f1_degenerate);
  EXPECT_TRUE(prf1({}).accuracy_degenerate);
}

TEST(RocAuc, KnownValues) {
  EXPECT_DOUBLE_EQ(roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}).auc, 1.0);
  EXPECT_DOUBLE_EQ(roc_auc({0.4, 0.4, 0.4}, {1, 0, 1}).auc, 0.5);
  EXPECT_DOUBLE_EQ(roc_auc({0.8, 0.6, 0.6, 0.3}, {1, 0, 1, 0}).auc, 0.875);
  EXPECT_THROW(roc_auc({0.1, 0.2}, {1, 1}), Error);
}

TEST(RocAuc, CurveIsMonotoneFromOriginToOne) {
  const RocCurve c = roc_auc({0.8, 0.6, 0.6, 0.3, 0.3}, {1, 0, 1, 0, 1});
  ASSERT_EQ(c.points.size(), 4u);
  EXPECT_EQ(c.points.front().fpr, 0.0);
  EXPECT_EQ(c.points.front().tpr, 0.0);
  EXPECT_EQ(c.points.back().fpr, 1.0);
  EXPECT_EQ(c.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    EXPECT_GE(c.points[i].fpr, c.points[i - 1].fpr);
    EXPECT_GE(c.points[i].tpr, c.points[i - 1].tpr);
  }
}

TEST(RocAuc, MatchesPairStatistic) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(29);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(8)) / 8.0;
      l[i] = static_cast<int>(rng.below(2));
    }
    l[0] = 0;
    l[1] = 1;
    EXPECT_NEAR(roc_auc(s, l).auc, pair_statistic(s, l), 1e-12);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    EXPECT_DOUBLE_EQ(roc_auc(t, l).auc, roc_auc(s, l).auc);
  }
}

TEST(Misclass, LaplacianVarianceOracle) {
  // Checkerboard of 0/1: interior responses are +4 and -4 in equal number.
  TensorF cb({1, 6, 6});
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 6; ++x) cb.at(0, y, x) = static_cast<float>((x + y) % 2);
  EXPECT_DOUBLE_EQ(laplacian_variance(cb), 16.0);
  TensorF ramp({1, 10, 10});
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 10; ++x) ramp.at(0, y, x) = 0.05f * static_cast<float>(x);
  EXPECT_NEAR(laplacian_variance(ramp), 0.0, 1e-12);
}

TEST(Misclass, EmptyWhenAllCorrect) {
  const std::vector<SliceRecord> recs{textured_record(1, 50), textured_record(0, 0)};
  const auto rep = misclass_report(recs, {0.9, 0.1});
  EXPECT_TRUE(rep.false_negatives.empty());
  EXPECT_TRUE(rep.false_positives.empty());
}

TEST(Misclass, Binning) {
  std::vector<SliceRecord> recs;
  recs.push_back(textured_record(1, 3));  // partial tumour
  recs.push_back(textured_record(1, 5000));  // other
  SliceRecord smooth = textured_record(1, 5000);
  smooth.image.fill(0.5f);
  recs.push_back(smooth);  // poor quality
  recs.push_back(textured_record(0, 0));  // anomaly-like
  SliceRecord smooth_neg = smooth;
  smooth_neg.label = 0;
  smooth_neg.mask_pixels = 0;
  recs.push_back(smooth_neg);  // poor quality
  const auto rep = misclass_report(recs, {0.1, 0.2, 0.3, 0.9, 0.8});
  ASSERT_EQ(rep.false_negatives.size(), 3u);
  ASSERT_EQ(rep.false_positives.size(), 2u);
  EXPECT_EQ(rep.false_negatives[0].bin, "partial_tumour");
  EXPECT_DOUBLE_EQ(rep.false_negatives[0].tumour_fraction, 3.0 / 40000.0);
  EXPECT_EQ(rep.false_negatives[1].bin, "other");
  EXPECT_EQ(rep.false_negatives[2].bin, "poor_quality");
  EXPECT_EQ(rep.false_positives[0].bin, "anomaly_like");
  EXPECT_EQ(rep.false_positives[1].bin, "poor_quality");
  EXPECT_EQ(rep.fn_poor_quality + rep.fn_partial_tumour + rep.fn_other, 3u);
  EXPECT_EQ(rep.fp_poor_quality + rep.fp_anomaly_like, 2u);
}

TEST(EvalReportTest, JsonShape) {
  std::vector<SliceRecord> recs{textured_record(1, 3, 8), textured_record(0, 0, 8),
                                textured_record(1, 30, 8)};
  const EvalReport rep = evaluate(recs, {0.2, 0.1, 0.7});
  const auto doc = nlohmann::json::parse(rep.to_json());
  EXPECT_EQ(doc["confusion"]["tp"], 1);
  EXPECT_EQ(doc["confusion"]["fn"], 1);
  EXPECT_DOUBLE_EQ(doc["auc"].get<double>(), 1.0);
  EXPECT_EQ(doc["misclassification"]["false_negatives"].size(), 1u);
  EXPECT_EQ(doc["roc"].front(), nlohmann::json::array({0.0, 0.0}));
  EXPECT_EQ(rep.to_json(), evaluate(recs, {0.2, 0.1, 0.7}).to_json());
}

}  // namespace
}  // namespace tumorscope
