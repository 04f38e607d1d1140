#include "asformer/metrics.hpp"

#include "asformer/errors.hpp"

#include <algorithm>

namespace asformer::metrics {

std::vector<Segment> extract_segments(std::span<const int> labels) {
  std::vector<Segment> segs;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (segs.empty() || segs.back().label != labels[t]) {
      segs.push_back({labels[t], t, t + 1});
    } else {
      segs.back().end = t + 1;
    }
  }
  return segs;
}

double framewise_accuracy(std::span<const int> pred, std::span<const int> gt) {
  if (pred.size() != gt.size()) {
    throw DataError("accuracy: prediction has " + std::to_string(pred.size()) +
                    " frames, ground truth " + std::to_string(gt.size()));
  }
  if (gt.empty()) throw DataError("accuracy: empty sequences");
  std::size_t correct = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) correct += pred[t] == gt[t] ? 1 : 0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(gt.size());
}

namespace {

std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<int> segment_labels(std::span<const int> labels) {
  std::vector<int> out;
  for (const Segment& s : extract_segments(labels)) out.push_back(s.label);
  return out;
}

}  // namespace

double edit_score(std::span<const int> pred, std::span<const int> gt) {
  if (gt.empty()) throw DataError("edit score: empty ground truth");
  if (pred.empty()) return 0.0;
  const auto p = segment_labels(pred);
  const auto g = segment_labels(gt);
  const double dist = static_cast<double>(levenshtein(p, g));
  const double norm = static_cast<double>(std::max(p.size(), g.size()));
  return std::max(0.0, 100.0 * (1.0 - dist / norm));
}

double OverlapCounts::f1() const {
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 200.0 * precision * recall / (precision + recall);
}

OverlapCounts overlap_counts(const std::vector<Segment>& pred, const std::vector<Segment>& gt,
                             double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw ConfigError("F1 overlap threshold must be in (0, 1], got " + std::to_string(tau));
  }
  OverlapCounts counts;
  std::vector<bool> matched(gt.size(), false);
  for (const Segment& p : pred) {
    double best_iou = 0.0;
    std::size_t best = gt.size();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      double iou = 0.0;
      if (gt[g].label == p.label) {
        const std::size_t lo = std::max(p.start, gt[g].start);
        const std::size_t hi = std::min(p.end, gt[g].end);
        const double inter = hi > lo ? static_cast<double>(hi - lo) : 0.0;
        const double uni = static_cast<double>(std::max(p.end, gt[g].end) -
                                               std::min(p.start, gt[g].start));
        iou = inter / uni;
      }
      if (best == gt.size() || iou > best_iou) {
        best_iou = iou;
        best = g;
      }
    }
    if (best < gt.size() && best_iou >= tau && !matched[best]) {
      ++counts.tp;
      matched[best] = true;
    } else {
      ++counts.fp;
    }
  }
  counts.fn = static_cast<std::size_t>(std::count(matched.begin(), matched.end(), false));
  return counts;
}

double f1_at_k(const std::vector<Segment>& pred, const std::vector<Segment>& gt, double tau) {
  return overlap_counts(pred, gt, tau).f1();
}

EvalReport evaluate(std::span<const int> pred, std::span<const int> gt) {
  if (pred.size() != gt.size()) {
    throw DataError("evaluate: prediction has " + std::to_string(pred.size()) +
                    " frames, ground truth " + std::to_string(gt.size()));
  }
  if (gt.empty()) throw DataError("evaluate: empty sequences");
  EvalReport r;
  r.total_frames = gt.size();
  for (std::size_t t = 0; t < gt.size(); ++t) r.correct_frames += pred[t] == gt[t] ? 1 : 0;
  r.accuracy = framewise_accuracy(pred, gt);
  r.edit = edit_score(pred, gt);
  const auto ps = extract_segments(pred);
  const auto gs = extract_segments(gt);
  for (std::size_t i = 0; i < kOverlapThresholds.size(); ++i) {
    r.counts[i] = overlap_counts(ps, gs, kOverlapThresholds[i]);
    r.f1[i] = r.counts[i].f1();
  }
  return r;
}

void ReportAccumulator::add(const EvalReport& report) {
  ++videos_;
  edit_sum_ += report.edit;
  correct_ += report.correct_frames;
  frames_ += report.total_frames;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    counts_[i].tp += report.counts[i].tp;
    counts_[i].fp += report.counts[i].fp;
    counts_[i].fn += report.counts[i].fn;
  }
}

EvalReport ReportAccumulator::summary() const {
  EvalReport r;
  if (videos_ == 0) return r;
  r.correct_frames = correct_;
  r.total_frames = frames_;
  r.accuracy = 100.0 * static_cast<double>(correct_) / static_cast<double>(frames_);
  r.edit = edit_sum_ / static_cast<double>(videos_);
  r.counts = counts_;
  for (std::size_t i = 0; i < counts_.size(); ++i) r.f1[i] = counts_[i].f1();
  return r;
}

}  // namespace asformer::metrics
