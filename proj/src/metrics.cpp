#include "kiln/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "kiln/error.hpp"

namespace kiln::eval {

double iou(const BBox &a, const BBox &b) {
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const double inter = iw > 0.0 && ih > 0.0 ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return inter / uni;
}

MatchResult match_detections(std::span<const BBox> preds, std::span<const BBox> gts,
                             double iou_threshold) {
  struct Candidate {
    double iou;
    std::size_t pred, gt;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(preds[p], gts[g]);
      if (v >= iou_threshold && v > 0.0) candidates.push_back({v, p, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate &a, const Candidate &b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });

  MatchResult result;
  std::vector<bool> pred_used(preds.size(), false), gt_used(gts.size(), false);
  for (const auto &c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = gt_used[c.gt] = true;
    result.pairs.emplace_back(c.pred, c.gt);
    result.pair_iou.push_back(c.iou);
  }
  result.tp = result.pairs.size();
  result.fp = preds.size() - result.tp;
  result.fn = gts.size() - result.tp;
  return result;
}

PrecisionRecall detection_f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrecisionRecall out;
  const auto t = static_cast<double>(tp);
  if (tp + fp > 0) out.precision = t / static_cast<double>(tp + fp);
  if (tp + fn > 0) out.recall = t / static_cast<double>(tp + fn);
  if (out.precision + out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

MetricsReport node_classification_report(std::span<const int> predicted, std::span<const int> truth,
                                         int num_classes) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "prediction and truth arrays differ in length");
  }
  if (num_classes < 1) throw Error(ErrorCode::InvalidArgument, "need at least one class");
  const auto C = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> tp(C, 0), pred_count(C, 0), true_count(C, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if (p < 0 || t < 0 || p >= num_classes || t >= num_classes) {
      throw Error(ErrorCode::InvalidArgument, "label out of range at index " + std::to_string(i));
    }
    ++pred_count[static_cast<std::size_t>(p)];
    ++true_count[static_cast<std::size_t>(t)];
    if (p == t) {
      ++tp[static_cast<std::size_t>(p)];
      ++correct;
    }
  }

  MetricsReport report;
  report.per_class.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    const auto fp = pred_count[c] - tp[c];
    const auto fn = true_count[c] - tp[c];
    const auto pr = detection_f1(tp[c], fp, fn);
    report.per_class[c] = {pr.precision, pr.recall, pr.f1, true_count[c]};
    if (true_count[c] == 0) {
      report.warnings.push_back("class " + std::to_string(c) + " is absent from the truth labels");
    }
    report.macro_precision += pr.precision;
    report.macro_recall += pr.recall;
    report.macro_f1 += pr.f1;
  }
  report.macro_precision /= static_cast<double>(C);
  report.macro_recall /= static_cast<double>(C);
  report.macro_f1 /= static_cast<double>(C);
  report.accuracy =
      truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  return report;
}

MetricsReport detection_report(const MatchResult &match) {
  MetricsReport report;
  report.detection = true;
  report.tp = match.tp;
  report.fp = match.fp;
  report.fn = match.fn;
  const auto pr = detection_f1(match.tp, match.fp, match.fn);
  report.per_class.push_back({pr.precision, pr.recall, pr.f1, match.tp + match.fn});
  report.macro_precision = pr.precision;
  report.macro_recall = pr.recall;
  report.macro_f1 = pr.f1;
  return report;
}

std::string to_json(const MetricsReport &report) {
  nlohmann::ordered_json j;
  if (report.detection) {
    j["tp"] = report.tp;
    j["fp"] = report.fp;
    j["fn"] = report.fn;
    j["precision"] = report.macro_precision;
    j["recall"] = report.macro_recall;
    j["f1"] = report.macro_f1;
  } else {
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
      const auto &m = report.per_class[c];
      classes.push_back({{"class", c},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support}});
    }
    j["per_class"] = std::move(classes);
    j["macro_precision"] = report.macro_precision;
    j["macro_recall"] = report.macro_recall;
    j["macro_f1"] = report.macro_f1;
    j["accuracy"] = report.accuracy;
  }
  j["warnings"] = report.warnings;
  return j.dump(2);
}

std::string to_table(const MetricsReport &report) {
  std::string out;
  char line[160];
  if (report.detection) {
    std::snprintf(line, sizeof line, "%6s %6s %6s %10s %10s %10s\n", "TP", "FP", "FN", "precision",
                  "recall", "f1");
    out += line;
    std::snprintf(line, sizeof line, "%6zu %6zu %6zu %10.4f %10.4f %10.4f\n", report.tp, report.fp,
                  report.fn, report.macro_precision, report.macro_recall, report.macro_f1);
    out += line;
    return out;
  }
  std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %8s\n", "class", "precision", "recall", "f1",
                "support");
  out += line;
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto &m = report.per_class[c];
    std::snprintf(line, sizeof line, "%-8zu %10.4f %10.4f %10.4f %8zu\n", c, m.precision, m.recall,
                  m.f1, m.support);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-8s %10.4f %10.4f %10.4f\n", "macro", report.macro_precision,
                report.macro_recall, report.macro_f1);
  out += line;
  std::snprintf(line, sizeof line, "accuracy %.4f\n", report.accuracy);
  out += line;
  for (const auto &w : report.warnings) out += "warning: " + w + "\n";
  return out;
}

} // namespace kiln::eval
