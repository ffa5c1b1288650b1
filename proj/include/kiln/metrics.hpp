#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kiln/bbox.hpp"

namespace kiln::eval {

/// Intersection over union of two boxes; 0 when the union has zero area.
double iou(const BBox &a, const BBox &b);

struct MatchResult {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  /// (prediction index, ground-truth index) in the order they were matched.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> pair_iou;
};

/// Greedy one-to-one matching in descending IoU; a pair matches when
/// IoU >= threshold. Equal IoUs resolve to the lower prediction index, then
/// the lower ground-truth index.
MatchResult match_detections(std::span<const BBox> preds, std::span<const BBox> gts,
                             double iou_threshold = 0.3);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// P, R and F1 with every 0/0 taken as 0.
PrecisionRecall detection_f1(std::size_t tp, std::size_t fp, std::size_t fn);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<std::string> warnings;

  // Detection mode only.
  std::size_t tp = 0, fp = 0, fn = 0;
  bool detection = false;
};

/// One-vs-rest per-class metrics and their unweighted means over all C
/// classes. Classes absent from the truth still count (as 0) with a warning.
MetricsReport node_classification_report(std::span<const int> predicted, std::span<const int> truth,
                                         int num_classes);

/// Detection counts folded into a single-class report.
MetricsReport detection_report(const MatchResult &match);

std::string to_json(const MetricsReport &report);
std::string to_table(const MetricsReport &report);

} // namespace kiln::eval
