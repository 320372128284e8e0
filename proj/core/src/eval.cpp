#include "fcseg/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "fcseg/error.hpp"

namespace fcseg {

std::vector<Segment> segments_of(const FrameLabels& labels) {
  std::vector<Segment> out;
  for (int t = 0; t < static_cast<int>(labels.size()); ++t) {
    if (out.empty() || out.back().label != labels[t]) {
      out.push_back({labels[t], t, t + 1});
    } else {
      out.back().end = t + 1;
    }
  }
  return out;
}

namespace {

int overlap(const Segment& a, const Segment& b) {
  return std::max(0, std::min(a.end, b.end) - std::max(a.begin, b.begin));
}

struct Tally {
  double sum = 0.0;
  long long count = 0;
  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

void add_iou(Tally& tally, const std::vector<Segment>& pred, const std::vector<Segment>& gt) {
  for (const auto& g : gt) {
    double best = 0.0;
    for (const auto& p : pred) {
      if (p.label != g.label) continue;
      const int inter = overlap(g, p);
      const int uni = g.length() + p.length() - inter;
      if (uni > 0) best = std::max(best, static_cast<double>(inter) / uni);
    }
    tally.sum += best;
    ++tally.count;
  }
}

void add_iod(Tally& tally, const std::vector<Segment>& pred, const std::vector<Segment>& gt) {
  if (pred.size() != gt.size()) {
    throw DomainError("IoD needs one predicted segment per ground-truth segment (" +
                      std::to_string(pred.size()) + " vs " + std::to_string(gt.size()) + ")");
  }
  for (std::size_t n = 0; n < gt.size(); ++n) {
    if (pred[n].length() > 0) tally.sum += static_cast<double>(overlap(gt[n], pred[n])) / pred[n].length();
    ++tally.count;
  }
}

}  // namespace

double mof(std::span<const FrameLabels> pred, std::span<const FrameLabels> gt) {
  if (pred.size() != gt.size()) throw DomainError("MoF: video count mismatch");
  long long correct = 0;
  long long total = 0;
  for (std::size_t v = 0; v < gt.size(); ++v) {
    if (pred[v].size() != gt[v].size()) {
      throw DomainError("MoF: prediction has " + std::to_string(pred[v].size()) +
                        " frames, ground truth " + std::to_string(gt[v].size()));
    }
    for (std::size_t t = 0; t < gt[v].size(); ++t) correct += pred[v][t] == gt[v][t];
    total += static_cast<long long>(gt[v].size());
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

double mof(const FrameLabels& pred, const FrameLabels& gt) {
  return mof(std::span(&pred, 1), std::span(&gt, 1));
}

double jaccard_iou(std::span<const std::vector<Segment>> pred,
                   std::span<const std::vector<Segment>> gt) {
  if (pred.size() != gt.size()) throw DomainError("IoU: video count mismatch");
  Tally tally;
  for (std::size_t v = 0; v < gt.size(); ++v) add_iou(tally, pred[v], gt[v]);
  return tally.mean();
}

double jaccard_iou(const std::vector<Segment>& pred, const std::vector<Segment>& gt) {
  return jaccard_iou(std::span(&pred, 1), std::span(&gt, 1));
}

double jaccard_iod(std::span<const std::vector<Segment>> pred,
                   std::span<const std::vector<Segment>> gt) {
  if (pred.size() != gt.size()) throw DomainError("IoD: video count mismatch");
  Tally tally;
  for (std::size_t v = 0; v < gt.size(); ++v) add_iod(tally, pred[v], gt[v]);
  return tally.mean();
}

double jaccard_iod(const std::vector<Segment>& pred, const std::vector<Segment>& gt) {
  return jaccard_iod(std::span(&pred, 1), std::span(&gt, 1));
}

std::string format_report_csv(std::span<const MetricRow> rows) {
  std::ostringstream os;
  os << "metric,split,value\n" << std::setprecision(6) << std::fixed;
  for (const auto& row : rows) os << row.metric << ',' << row.split << ',' << row.value << '\n';
  return os.str();
}

std::string format_report_summary(std::span<const MetricRow> rows) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  for (const auto& row : rows) {
    os << std::left << std::setw(6) << row.metric << " (" << row.split << "): " << 100.0 * row.value
       << "%\n";
  }
  return os.str();
}

}  // namespace fcseg
