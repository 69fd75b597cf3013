#pragma once

// Evaluation metrics: mIoU from a confusion matrix, panoptic quality with
// stuff/thing splits, mean absolute angular error and balanced accuracy.
// Accumulators use integer counters and compensated sums, so the order in
// which images are added does not matter.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "emsa/instance_codec.hpp"
#include "emsa/label_map.hpp"
#include "emsa/orientation.hpp"
#include "emsa/panoptic.hpp"
#include "emsa/spectrum.hpp"

namespace emsa {

class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Neumaier-compensated sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// ---------------------------------------------------------------- mIoU

struct SemanticReport {
  std::map<std::int32_t, double> iou;  // classes present in GT or prediction
  double miou = 0.0;
};

/// Rows: GT id, columns: predicted id (0 = void). Void GT pixels are skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::int32_t num_classes)
      : n_(num_classes + 1), counts_(std::size_t(n_) * std::size_t(n_), 0) {}

  void add(const LabelMap& pred, const LabelMap& gt) {
    require_same_extents(pred, gt, "prediction vs ground truth");
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const auto g = gt.data[i], p = pred.data[i];
      if (g < 0 || g >= n_) throw MetricError("GT id " + std::to_string(g) + " outside spectrum");
      if (p < 0 || p >= n_) {
        throw MetricError("predicted id " + std::to_string(p) + " outside spectrum");
      }
      if (g == ClassSpectrum::void_id) continue;
      ++counts_[std::size_t(g) * n_ + std::size_t(p)];
    }
  }

  std::uint64_t operator()(std::int32_t gt, std::int32_t pred) const {
    return counts_[std::size_t(gt) * n_ + std::size_t(pred)];
  }

  SemanticReport report() const {
    std::uint64_t total = 0;
    for (auto c : counts_) total += c;
    if (total == 0) throw MetricError("mIoU undefined: ground truth is entirely void");
    SemanticReport r;
    double sum = 0.0;
    for (std::int32_t c = 1; c < n_; ++c) {
      std::uint64_t tp = (*this)(c, c), fn = 0, fp = 0;
      for (std::int32_t k = 0; k < n_; ++k) {
        if (k != c) {
          fn += (*this)(c, k);
          fp += (*this)(k, c);
        }
      }
      if (tp + fp + fn == 0) continue;
      const double iou = double(tp) / double(tp + fp + fn);
      r.iou[c] = iou;
      sum += iou;
    }
    r.miou = r.iou.empty() ? 0.0 : sum / double(r.iou.size());
    return r;
  }

 private:
  std::int32_t n_;
  std::vector<std::uint64_t> counts_;
};

inline SemanticReport miou(const LabelMap& pred, const LabelMap& gt, const ClassSpectrum& spectrum) {
  ConfusionMatrix cm(spectrum.num_classes());
  cm.add(pred, gt);
  return cm.report();
}

// ---------------------------------------------------------------- PQ

struct PanopticClassStats {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  double iou_sum = 0.0;

  double denominator() const { return double(tp) + 0.5 * double(fp) + 0.5 * double(fn); }
  double rq() const { return denominator() > 0 ? double(tp) / denominator() : 0.0; }
  double sq() const { return tp > 0 ? iou_sum / double(tp) : 0.0; }
  double pq() const { return denominator() > 0 ? iou_sum / denominator() : 0.0; }
};

struct QualityTriple {
  double pq = 0.0, rq = 0.0, sq = 0.0;
  std::size_t classes = 0;
};

struct PanopticReport {
  std::map<std::int32_t, PanopticClassStats> per_class;
  std::optional<QualityTriple> all, stuff, things;
};

/// One matched (GT segment, predicted segment) pair; stuff segments use
/// instance id 0.
struct SegmentMatch {
  std::int32_t semantic = 0;
  std::int32_t gt_instance = 0;
  std::int32_t pred_instance = 0;
  double iou = 0.0;
};

/// Segment identity: stuff -> (class, 0); thing -> (class, instance).
/// GT thing pixels without an instance id are treated as void.
class PanopticQuality {
 public:
  explicit PanopticQuality(ClassSpectrum spectrum) : spectrum_(std::move(spectrum)) {}

  std::vector<SegmentMatch> add(const PanopticMap& pred, const PanopticMap& gt) {
    require_same_extents(pred.semantic, gt.semantic, "prediction vs ground truth");
    require_same_extents(pred.semantic, pred.instance, "prediction semantic vs instance");
    require_same_extents(gt.semantic, gt.instance, "ground truth semantic vs instance");

    using Key = std::pair<std::int32_t, std::int32_t>;
    std::map<Key, std::uint64_t> gt_area, pred_area;
    std::map<std::pair<Key, Key>, std::uint64_t> overlap;
    for (std::size_t i = 0; i < gt.semantic.size(); ++i) {
      const auto gs = gt.semantic.data[i], ps = pred.semantic.data[i];
      if (!spectrum_.contains(gs) || !spectrum_.contains(ps)) {
        throw MetricError("panoptic semantic id outside spectrum at pixel " + std::to_string(i));
      }
      if (gt.instance.data[i] < 0 || pred.instance.data[i] < 0) {
        throw MetricError("malformed panoptic map: negative instance id");
      }
      if (spectrum_.is_void(gs)) continue;
      if (spectrum_.is_thing(gs) && gt.instance.data[i] == 0) continue;
      const Key g{gs, spectrum_.is_stuff(gs) ? 0 : gt.instance.data[i]};
      ++gt_area[g];
      if (spectrum_.is_void(ps)) continue;
      const Key p{ps, spectrum_.is_stuff(ps) ? 0 : pred.instance.data[i]};
      ++pred_area[p];
      if (g.first == p.first) ++overlap[{g, p}];
    }

    std::vector<SegmentMatch> matches;
    std::set<Key> gt_matched, pred_matched;
    for (const auto& [pair, inter] : overlap) {
      const auto& [g, p] = pair;
      const double uni = double(gt_area[g] + pred_area[p] - inter);
      const double iou = double(inter) / uni;
      if (iou > 0.5) {
        gt_matched.insert(g);
        pred_matched.insert(p);
        auto& s = stats_[g.first];
        ++s.tp;
        iou_sums_[g.first].add(iou);
        matches.push_back({g.first, g.second, p.second, iou});
      }
    }
    for (const auto& [g, area] : gt_area) {
      if (!gt_matched.contains(g)) ++stats_[g.first].fn;
    }
    for (const auto& [p, area] : pred_area) {
      if (!pred_matched.contains(p)) ++stats_[p.first].fp;
    }
    return matches;
  }

  PanopticReport report(const std::set<std::int32_t>& excluded = {}) const {
    PanopticReport r;
    for (const auto& [cls, s] : stats_) {
      auto copy = s;
      auto it = iou_sums_.find(cls);
      copy.iou_sum = it == iou_sums_.end() ? 0.0 : it->second.value();
      r.per_class[cls] = copy;
    }
    auto average = [&](auto&& include) -> std::optional<QualityTriple> {
      QualityTriple q;
      for (const auto& [cls, s] : r.per_class) {
        if (excluded.contains(cls) || spectrum_.panoptic_excluded.contains(cls)) continue;
        if (s.denominator() == 0.0 || !include(cls)) continue;
        q.pq += s.pq();
        q.rq += s.rq();
        q.sq += s.sq();
        ++q.classes;
      }
      if (q.classes == 0) return std::nullopt;
      q.pq /= double(q.classes);
      q.rq /= double(q.classes);
      q.sq /= double(q.classes);
      return q;
    };
    r.all = average([](std::int32_t) { return true; });
    r.stuff = average([&](std::int32_t c) { return spectrum_.is_stuff(c); });
    r.things = average([&](std::int32_t c) { return spectrum_.is_thing(c); });
    return r;
  }

 private:
  ClassSpectrum spectrum_;
  std::map<std::int32_t, PanopticClassStats> stats_;
  std::map<std::int32_t, CompensatedSum> iou_sums_;
};

inline PanopticReport panoptic_quality(const PanopticMap& pred, const PanopticMap& gt,
                                       const ClassSpectrum& spectrum,
                                       const std::set<std::int32_t>& excluded = {}) {
  PanopticQuality pq(spectrum);
  pq.add(pred, gt);
  return pq.report(excluded);
}

// ---------------------------------------------------------------- MAAE

/// Running mean of angular errors; absent when nothing was evaluated.
class MaaeAccumulator {
 public:
  void add(double error_deg) {
    sum_.add(error_deg);
    ++count_;
  }
  std::size_t count() const { return count_; }
  std::optional<double> mean() const {
    if (count_ == 0) return std::nullopt;
    return sum_.value() / double(count_);
  }

 private:
  CompensatedSum sum_;
  std::size_t count_ = 0;
};

/// Pairs GT orientations with predictions. Without `matching`, prediction
/// ids are GT ids (orientations predicted on GT instances). With a
/// GT -> prediction matching, unmatched GT instances are not penalized.
inline void accumulate_maae(MaaeAccumulator& acc, const OrientationMap& pred,
                            const OrientationMap& gt,
                            const std::map<std::int32_t, std::int32_t>* matching = nullptr) {
  for (const auto& [gt_id, gt_angle] : gt) {
    std::int32_t pred_id = gt_id;
    if (matching) {
      auto m = matching->find(gt_id);
      if (m == matching->end()) continue;
      pred_id = m->second;
    }
    auto p = pred.find(pred_id);
    if (p == pred.end()) continue;
    acc.add(angular_error(p->second, gt_angle));
  }
}

inline std::optional<double> maae(const OrientationMap& pred, const OrientationMap& gt,
                                  const std::map<std::int32_t, std::int32_t>* matching = nullptr) {
  MaaeAccumulator acc;
  accumulate_maae(acc, pred, gt, matching);
  return acc.mean();
}

/// GT instance id -> predicted instance id for matched thing segments.
inline std::map<std::int32_t, std::int32_t> instance_matching(
    const std::vector<SegmentMatch>& matches) {
  std::map<std::int32_t, std::int32_t> out;
  for (const auto& m : matches) {
    if (m.gt_instance != 0) out[m.gt_instance] = m.pred_instance;
  }
  return out;
}

// ---------------------------------------------------------------- bAcc

/// Mean per-class recall over classes present in the GT; id 0 is void and
/// excluded.
class BalancedAccuracy {
 public:
  void add(std::int32_t pred, std::int32_t gt) {
    if (gt == 0) return;
    ++total_[gt];
    if (pred == gt) ++correct_[gt];
  }

  double value() const {
    if (total_.empty()) throw MetricError("balanced accuracy undefined: no non-void samples");
    double sum = 0.0;
    for (const auto& [cls, n] : total_) {
      auto it = correct_.find(cls);
      sum += double(it == correct_.end() ? 0 : it->second) / double(n);
    }
    return sum / double(total_.size());
  }

 private:
  std::map<std::int32_t, std::uint64_t> total_, correct_;
};

inline double balanced_accuracy(const std::vector<std::int32_t>& pred,
                                const std::vector<std::int32_t>& gt) {
  if (pred.size() != gt.size()) throw MetricError("scene prediction / GT length mismatch");
  BalancedAccuracy b;
  for (std::size_t i = 0; i < gt.size(); ++i) b.add(pred[i], gt[i]);
  return b.value();
}

// ---------------------------------------------------------------- report

struct MetricReport {
  std::optional<SemanticReport> semantic;
  std::optional<PanopticReport> panoptic;
  std::optional<double> maae_gt_instances;
  std::optional<double> maae_matched;
  std::optional<double> balanced_accuracy;
};

inline nlohmann::json to_json_value(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json report_to_json(const MetricReport& r, const ClassSpectrum& spectrum) {
  nlohmann::json j;
  if (r.semantic) {
    nlohmann::json per;
    for (const auto& [cls, iou] : r.semantic->iou) per[spectrum.classes.at(cls)] = iou;
    j["miou"] = r.semantic->miou;
    j["iou_per_class"] = per;
  }
  if (r.panoptic) {
    auto triple = [](const std::optional<QualityTriple>& q) {
      if (!q) return nlohmann::json(nullptr);
      return nlohmann::json{{"pq", q->pq}, {"rq", q->rq}, {"sq", q->sq}, {"classes", q->classes}};
    };
    j["panoptic"] = {{"all", triple(r.panoptic->all)},
                     {"stuff", triple(r.panoptic->stuff)},
                     {"things", triple(r.panoptic->things)}};
    nlohmann::json per;
    for (const auto& [cls, s] : r.panoptic->per_class) {
      per[spectrum.classes.at(cls)] = {{"pq", s.pq()}, {"rq", s.rq()}, {"sq", s.sq()},
                                       {"tp", s.tp},   {"fp", s.fp},   {"fn", s.fn}};
    }
    j["panoptic_per_class"] = per;
  }
  j["maae_gt_instances"] = to_json_value(r.maae_gt_instances);
  j["maae_matched"] = to_json_value(r.maae_matched);
  j["balanced_accuracy"] = to_json_value(r.balanced_accuracy);
  return j;
}

}  // namespace emsa
