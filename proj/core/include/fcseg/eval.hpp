#pragma once

#include <span>
#include <string>
#include <vector>

#include "fcseg/corpus.hpp"

namespace fcseg {

/// Half-open frame interval [begin, end) carrying one label.
struct Segment {
  std::string label;
  int begin = 0;
  int end = 0;

  int length() const { return end - begin; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Run-collapse of framewise labels into segments.
std::vector<Segment> segments_of(const FrameLabels& labels);

/// Frame accuracy pooled over all frames of all videos.
double mof(const FrameLabels& pred, const FrameLabels& gt);
double mof(std::span<const FrameLabels> pred, std::span<const FrameLabels> gt);

/// Mean over ground-truth segments of the best IoU with any predicted
/// segment of the same label (0 if there is none).
double jaccard_iou(const std::vector<Segment>& pred, const std::vector<Segment>& gt);
double jaccard_iou(std::span<const std::vector<Segment>> pred,
                   std::span<const std::vector<Segment>> gt);

/// Mean over positionally paired segments of |G ∩ P| / |P|.
double jaccard_iod(const std::vector<Segment>& pred, const std::vector<Segment>& gt);
double jaccard_iod(std::span<const std::vector<Segment>> pred,
                   std::span<const std::vector<Segment>> gt);

struct MetricRow {
  std::string metric;
  std::string split;
  double value = 0.0;
};

/// "metric,split,value" header plus one row per metric.
std::string format_report_csv(std::span<const MetricRow> rows);
std::string format_report_summary(std::span<const MetricRow> rows);

}  // namespace fcseg
