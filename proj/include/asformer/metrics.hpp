#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace asformer::metrics {

struct Segment {
  int label = 0;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive

  bool operator==(const Segment&) const = default;
};

/// Maximal runs of equal labels, in temporal order.
std::vector<Segment> extract_segments(std::span<const int> labels);

double framewise_accuracy(std::span<const int> pred, std::span<const int> gt);

/// 100 * (1 - levenshtein(segment labels) / max(|pred segs|, |gt segs|)), floored at 0.
double edit_score(std::span<const int> pred, std::span<const int> gt);

struct OverlapCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double f1() const;
};

/// Greedy matching in prediction order; each prediction takes its highest-IoU
/// ground-truth segment (lowest index on ties) and counts as a true positive
/// if IoU >= tau and that segment is still unmatched.
OverlapCounts overlap_counts(const std::vector<Segment>& pred, const std::vector<Segment>& gt,
                             double tau);
double f1_at_k(const std::vector<Segment>& pred, const std::vector<Segment>& gt, double tau);

inline constexpr std::array<double, 3> kOverlapThresholds = {0.10, 0.25, 0.50};

struct EvalReport {
  double accuracy = 0.0;
  double edit = 0.0;
  std::array<double, 3> f1{};
  std::array<OverlapCounts, 3> counts{};
  std::size_t correct_frames = 0;
  std::size_t total_frames = 0;
};

EvalReport evaluate(std::span<const int> pred, std::span<const int> gt);

/// Dataset-level aggregate: frames and tp/fp/fn are pooled, edit is averaged
/// over videos.
class ReportAccumulator {
 public:
  void add(const EvalReport& report);
  EvalReport summary() const;
  std::size_t videos() const noexcept { return videos_; }

 private:
  std::size_t videos_ = 0;
  double edit_sum_ = 0.0;
  std::size_t correct_ = 0;
  std::size_t frames_ = 0;
  std::array<OverlapCounts, 3> counts_{};
};

}  // namespace asformer::metrics
