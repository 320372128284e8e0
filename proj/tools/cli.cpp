#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fcseg/corpus.hpp"
#include "fcseg/error.hpp"
#include "fcseg/eval.hpp"
#include "fcseg/model.hpp"
#include "fcseg/trainer.hpp"

namespace fcseg::cli {

namespace fs = std::filesystem;

namespace {

struct GenOptions {
  std::string out;
  int videos = 20;
  int test_videos = 0;
  int classes = 3;
  int dim = 16;
  int phases = 2;
  std::string mean_len = "60";
  double jitter = 0.2;
  double noise = 0.5;
  int orderings = 3;
  std::uint64_t seed = 1;
};

struct TrainOptionsCli {
  std::string data;
  std::string out;
  std::string log;
  std::string metrics;
  TrainConfig config;
  bool no_reestimate = false;
  bool cold_start = false;
};

struct SegmentOptions {
  std::string model;
  std::string data;
  std::string out;
};

struct AlignOptions {
  std::string model;
  std::string data;
  std::string transcripts;
  std::string out;
};

struct EvalOptions {
  std::string pred;
  std::string gt;
  std::string task = "segmentation";
  std::string split = "test";
  std::string report;
};

std::vector<double> parse_lengths(const std::string& text) {
  std::vector<double> lengths;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      lengths.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--mean-len", "expected a number or comma-separated list");
    }
  }
  if (lengths.empty()) throw CLI::ValidationError("--mean-len", "empty list");
  return lengths;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

int run_gen(const GenOptions& o, std::ostream& out) {
  SynthConfig config;
  config.num_classes = o.classes;
  config.num_videos = o.videos + o.test_videos;
  config.feature_dim = o.dim;
  config.phases_per_class = o.phases;
  config.mean_len_per_class = parse_lengths(o.mean_len);
  config.len_jitter = o.jitter;
  config.noise_sigma = o.noise;
  config.num_orderings = o.orderings;
  config.seed = o.seed;
  try {
    config.validate();
  } catch (const DomainError& e) {
    throw CLI::ValidationError("gen", e.what());
  }
  Dataset all = generate_synthetic(config);
  const fs::path root(o.out);
  ensure_directory(root);
  if (o.test_videos == 0) {
    save_dataset(root, all);
    out << "wrote " << all.samples.size() << " videos to " << root.string() << "\n";
    return kOk;
  }
  Dataset train{{}, all.label_set};
  Dataset test{{}, all.label_set};
  for (std::size_t v = 0; v < all.samples.size(); ++v) {
    (static_cast<int>(v) < o.videos ? train : test).samples.push_back(std::move(all.samples[v]));
  }
  save_dataset(root / "train", train);
  save_dataset(root / "test", test);
  out << "wrote " << train.samples.size() << " training and " << test.samples.size()
      << " test videos to " << root.string() << "\n";
  return kOk;
}

int run_train(TrainOptionsCli o, std::ostream& out) {
  o.config.reestimate = !o.no_reestimate;
  o.config.warm_start = !o.cold_start;
  const Dataset dataset = load_dataset(o.data);
  const fs::path model_path(o.out);
  const fs::path log_path = o.log.empty() ? fs::path(o.out + ".log") : fs::path(o.log);
  const fs::path metrics_path =
      o.metrics.empty() ? fs::path(o.out + ".metrics.csv") : fs::path(o.metrics);

  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write '" + log_path.string() + "'");
  auto progress = [&](const IterationLog& entry) {
    const std::string line = format_progress(entry);
    out << line << "\n";
    log << line << "\n";
  };
  const FitResult result = fit(dataset, o.config, progress);
  if (result.stopped_at) {
    const std::string line = "stopped at iteration " + std::to_string(*result.stopped_at);
    out << line << "\n";
    log << line << "\n";
  }
  save_model(model_path, result.model);
  write_text(metrics_path, format_metrics_csv(result.log));
  out << "model written to " << model_path.string() << "\n";
  return kOk;
}

std::vector<std::string> feature_ids(const fs::path& data) {
  const fs::path dir = data / "features";
  if (!fs::is_directory(dir)) throw IoError("no feature directory '" + dir.string() + "'");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".ftr") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string summary_line(const std::string& id, const Transcript& transcript, double score) {
  std::ostringstream os;
  os << id << '\t';
  for (std::size_t n = 0; n < transcript.size(); ++n) os << (n ? " " : "") << transcript[n];
  os << '\t' << std::setprecision(10) << score << '\n';
  return os.str();
}

int run_segment(const SegmentOptions& o, std::ostream& out) {
  const Model model = load_model(o.model);
  const auto ids = feature_ids(o.data);
  const fs::path dir(o.out);
  ensure_directory(dir);
  const DecodingGraph graph = build_graph(model.grammar, model.space, model.transitions);
  std::string summary;
  for (const auto& id : ids) {
    const auto features = load_features(fs::path(o.data) / "features" / (id + ".ftr"));
    const Segmentation result = segment_video(model, graph, features);
    save_frame_labels(dir / (id + ".txt"), result.frame_labels);
    save_alignment(dir / (id + ".align.csv"), result.alignment, model.space, model.label_set);
    summary += summary_line(id, result.transcript, result.score);
  }
  write_text(dir / "summary.txt", summary);
  out << summary;
  return kOk;
}

int run_align(const AlignOptions& o, std::ostream& out) {
  const Model model = load_model(o.model);
  const TranscriptTable table = load_transcripts(o.transcripts);
  for (const auto& [id, transcript] : table) model.action_ids(transcript);
  const fs::path dir(o.out);
  ensure_directory(dir);
  std::string summary;
  for (const auto& [id, transcript] : table) {
    const auto features = load_features(fs::path(o.data) / "features" / (id + ".ftr"));
    Segmentation result;
    try {
      result = align_video(model, features, transcript);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("video '" + id + "': " + e.what(), id);
    }
    save_frame_labels(dir / (id + ".txt"), result.frame_labels);
    save_alignment(dir / (id + ".align.csv"), result.alignment, model.space, model.label_set);
    summary += summary_line(id, result.transcript, result.score);
  }
  write_text(dir / "summary.txt", summary);
  out << summary;
  return kOk;
}

int run_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  const fs::path gt_dir(o.gt);
  if (!fs::is_directory(gt_dir)) throw IoError("no ground-truth directory '" + o.gt + "'");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(gt_dir)) {
    if (entry.path().extension() == ".txt") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw IoError("no ground-truth label files in '" + o.gt + "'");

  std::vector<FrameLabels> pred, gt;
  for (const auto& id : ids) {
    gt.push_back(load_frame_labels(gt_dir / (id + ".txt")));
    pred.push_back(load_frame_labels(fs::path(o.pred) / (id + ".txt")));
    if (pred.back().size() != gt.back().size()) {
      throw DomainError("video '" + id + "': prediction has " + std::to_string(pred.back().size()) +
                        " frames, ground truth " + std::to_string(gt.back().size()));
    }
  }
  std::vector<std::vector<Segment>> pred_segments, gt_segments;
  for (std::size_t v = 0; v < ids.size(); ++v) {
    pred_segments.push_back(segments_of(pred[v]));
    gt_segments.push_back(segments_of(gt[v]));
  }
  std::vector<MetricRow> rows;
  if (o.task == "segmentation") {
    rows.push_back({"mof", o.split, mof(pred, gt)});
    rows.push_back({"iou", o.split, jaccard_iou(pred_segments, gt_segments)});
  } else {
    rows.push_back({"mof", o.split, mof(pred, gt)});
    rows.push_back({"iod", o.split, jaccard_iod(pred_segments, gt_segments)});
  }
  const std::string csv = format_report_csv(rows);
  out << csv;
  err << format_report_summary(rows);
  if (!o.report.empty()) write_text(o.report, csv);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weakly supervised temporal action segmentation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--videos", gen.videos, "Number of (training) videos")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--test-videos", gen.test_videos,
                      "Extra held-out videos; when > 0 writes DIR/train and DIR/test")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes, "Action classes")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "Feature dimension")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--phases", gen.phases, "Latent phases per class")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--mean-len", gen.mean_len,
                      "Mean instance length: one value or one per class, comma-separated")
      ->capture_default_str();
  gen_cmd->add_option("--jitter", gen.jitter, "Relative length jitter in [0, 1)")
      ->check(CLI::Range(0.0, 0.999999))->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise sigma")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_option("--orderings", gen.orderings, "Distinct class orderings")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();

  TrainOptionsCli train;
  auto* train_cmd = app.add_subcommand("train", "Train a model from transcripts");
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--out", train.out, "Model file to write")->required();
  train_cmd->add_option("--m", train.config.frames_per_subaction, "Frames per subaction")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--theta", train.config.theta, "Stop threshold")
      ->check(CLI::Range(1e-12, 0.999999))->capture_default_str();
  train_cmd->add_option("--hidden", train.config.hidden_dim, "GRU hidden size")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--lr", train.config.learning_rate, "Learning rate")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--batch", train.config.batch_size, "Minibatch size")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--passes", train.config.passes_per_iteration,
                        "Training passes per iteration")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--max-iters", train.config.max_iters, "Maximum iterations")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--seed", train.config.seed, "Random seed")->capture_default_str();
  train_cmd->add_flag("--no-reestimate", train.no_reestimate, "Keep subaction counts fixed");
  train_cmd->add_flag("--cold-start", train.cold_start, "Re-initialize the network every iteration");
  train_cmd->add_option("--log", train.log, "Iteration log (default MODEL.log)");
  train_cmd->add_option("--metrics", train.metrics, "Metrics CSV (default MODEL.metrics.csv)");

  SegmentOptions segment;
  auto* segment_cmd = app.add_subcommand("segment", "Decode videos under the model grammar");
  segment_cmd->add_option("--model", segment.model, "Model file")->required();
  segment_cmd->add_option("--data", segment.data, "Dataset directory")->required();
  segment_cmd->add_option("--out", segment.out, "Output directory")->required();

  AlignOptions align_opts;
  auto* align_cmd = app.add_subcommand("align", "Force-align videos to given transcripts");
  align_cmd->add_option("--model", align_opts.model, "Model file")->required();
  align_cmd->add_option("--data", align_opts.data, "Dataset directory")->required();
  align_cmd->add_option("--transcripts", align_opts.transcripts, "Transcript file")->required();
  align_cmd->add_option("--out", align_opts.out, "Output directory")->required();

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score framewise predictions");
  eval_cmd->add_option("--pred", eval.pred, "Prediction directory")->required();
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth directory")->required();
  eval_cmd->add_option("--task", eval.task, "segmentation or alignment")
      ->check(CLI::IsMember({"segmentation", "alignment"}))->capture_default_str();
  eval_cmd->add_option("--split", eval.split, "Split name for the report")->capture_default_str();
  eval_cmd->add_option("--report", eval.report, "Also write the CSV report here");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen, out);
    if (*train_cmd) return run_train(train, out);
    if (*segment_cmd) return run_segment(segment, out);
    if (*align_cmd) return run_align(align_opts, out);
    if (*eval_cmd) return run_eval(eval, out, err);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kDomain;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDomain;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

}  // namespace fcseg::cli
