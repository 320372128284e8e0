#include "fcseg/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fcseg/error.hpp"

namespace fcseg {

namespace fs = std::filesystem;

int Dataset::action_id(const std::string& label) const {
  auto it = std::find(label_set.begin(), label_set.end(), label);
  if (it == label_set.end()) throw DomainError("unknown action label '" + label + "'");
  return static_cast<int>(it - label_set.begin());
}

std::vector<int> Dataset::action_ids(const Transcript& transcript) const {
  std::vector<int> ids;
  ids.reserve(transcript.size());
  for (const auto& label : transcript) ids.push_back(action_id(label));
  return ids;
}

void Dataset::validate() const {
  std::set<std::string> labels(label_set.begin(), label_set.end());
  if (labels.size() != label_set.size()) throw DomainError("duplicate entry in label set");
  std::set<std::string> ids;
  for (const auto& sample : samples) {
    if (!ids.insert(sample.id).second) throw DomainError("duplicate video id '" + sample.id + "'");
    if (sample.transcript.empty()) throw DomainError("empty transcript for '" + sample.id + "'");
    for (const auto& label : sample.transcript) {
      if (!labels.count(label)) {
        throw DomainError("video '" + sample.id + "' uses unknown label '" + label + "'");
      }
    }
    validate_features(sample.features);
    if (sample.ground_truth) {
      if (static_cast<int>(sample.ground_truth->size()) != sample.num_frames()) {
        throw DomainError("ground truth length mismatch for '" + sample.id + "'");
      }
      if (collapse_runs(*sample.ground_truth) != collapse_runs(sample.transcript)) {
        throw DomainError("ground truth of '" + sample.id + "' disagrees with its transcript");
      }
    }
  }
}

double SynthConfig::mean_len(int cls) const {
  if (mean_len_per_class.size() == 1) return mean_len_per_class.front();
  return mean_len_per_class.at(cls);
}

void SynthConfig::validate() const {
  if (num_classes < 1 || num_videos < 1 || feature_dim < 1 || phases_per_class < 1 ||
      num_orderings < 1) {
    throw DomainError("synthetic config: all counts must be >= 1");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw DomainError("synthetic config: noise_sigma must be >= 0");
  }
  if (!(len_jitter >= 0.0 && len_jitter < 1.0)) {
    throw DomainError("synthetic config: len_jitter must lie in [0, 1)");
  }
  if (mean_len_per_class.size() != 1 &&
      static_cast<int>(mean_len_per_class.size()) != num_classes) {
    throw DomainError("synthetic config: need one mean length or one per class");
  }
  for (double len : mean_len_per_class) {
    if (!(len >= 1.0) || !std::isfinite(len)) {
      throw DomainError("synthetic config: mean lengths must be >= 1");
    }
  }
}

namespace {

std::string zero_padded(const std::string& prefix, int value, int width) {
  std::ostringstream os;
  os << prefix << std::setw(width) << std::setfill('0') << value;
  return os.str();
}

int digits(int n) { return n < 10 ? 1 : 1 + digits(n / 10); }

// Even split of `total` into `parts`, remainder to the earliest parts.
std::vector<int> even_split(int total, int parts) {
  std::vector<int> out(parts, total / parts);
  for (int i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit_interval(-1.0, 1.0);

  const int D = config.feature_dim;
  const int P = config.phases_per_class;
  const int G = config.num_classes;

  Dataset dataset;
  const int label_width = std::max(2, digits(G - 1));
  for (int c = 0; c < G; ++c) dataset.label_set.push_back(zero_padded("a", c, label_width));

  std::vector<std::vector<Eigen::VectorXd>> means(G, std::vector<Eigen::VectorXd>(P));
  for (int c = 0; c < G; ++c) {
    for (int p = 0; p < P; ++p) {
      Eigen::VectorXd mu(D);
      for (int d = 0; d < D; ++d) mu[d] = kPhaseMeanScale * unit_normal(rng);
      means[c][p] = mu;
    }
  }

  std::vector<std::vector<int>> orderings;
  for (int o = 0; o < config.num_orderings; ++o) {
    std::vector<int> perm(G);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    orderings.push_back(std::move(perm));
  }

  std::uniform_int_distribution<int> pick_ordering(0, config.num_orderings - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int id_width = std::max(4, digits(config.num_videos - 1));

  for (int v = 0; v < config.num_videos; ++v) {
    const auto& order = orderings[pick_ordering(rng)];
    std::vector<int> lengths;
    for (int c : order) {
      const double raw = config.mean_len(c) * (1.0 + config.len_jitter * unit_interval(rng));
      lengths.push_back(std::max(P, static_cast<int>(std::lround(raw))));
    }
    const int T = std::accumulate(lengths.begin(), lengths.end(), 0);

    VideoSample sample;
    sample.id = zero_padded("v", v, id_width);
    sample.features.resize(T, D);
    FrameLabels gt;
    gt.reserve(T);
    int t = 0;
    for (std::size_t n = 0; n < order.size(); ++n) {
      const int c = order[n];
      sample.transcript.push_back(dataset.label_set[c]);
      const auto phase_lengths = even_split(lengths[n], P);
      for (int p = 0; p < P; ++p) {
        for (int k = 0; k < phase_lengths[p]; ++k, ++t) {
          for (int d = 0; d < D; ++d) {
            const double value = means[c][p][d] + config.noise_sigma * noise(rng);
            // Stored at float precision so the binary format round-trips.
            sample.features(t, d) = static_cast<double>(static_cast<float>(value));
          }
          gt.push_back(dataset.label_set[c]);
        }
      }
    }
    sample.ground_truth = std::move(gt);
    dataset.samples.push_back(std::move(sample));
  }
  return dataset;
}

void validate_features(const FrameMatrix& features) {
  if (features.rows() < 1 || features.cols() < 1) throw FormatError("empty feature matrix");
  if (!features.allFinite()) throw FormatError("feature matrix contains non-finite values");
}

namespace {

constexpr char kFeatureMagic[4] = {'F', 'T', 'R', '1'};

void put_u32(std::ostream& os, std::uint32_t value) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFFu);
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(const unsigned char* bytes) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return value;
}

std::string read_file(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content,
                std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

FrameMatrix load_features(const fs::path& path) {
  const std::string bytes = read_file(path, std::ios::in | std::ios::binary);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) {
    throw FormatError("'" + path.string() + "': missing FTR1 header");
  }
  const std::uint32_t rows = get_u32(data + 4);
  const std::uint32_t cols = get_u32(data + 8);
  if (rows == 0 || cols == 0) throw FormatError("'" + path.string() + "': zero dimension");
  const std::uint64_t expected = 12 + 4ull * rows * cols;
  if (bytes.size() != expected) {
    throw FormatError("'" + path.string() + "': body holds " +
                      std::to_string((bytes.size() - 12) / 4.0) + " floats, header declares " +
                      std::to_string(std::uint64_t{rows} * cols));
  }
  FrameMatrix features(rows, cols);
  const unsigned char* p = data + 12;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c, p += 4) {
      const float value = std::bit_cast<float>(get_u32(p));
      if (!std::isfinite(value)) {
        throw FormatError("'" + path.string() + "': non-finite value at frame " +
                          std::to_string(r));
      }
      features(r, c) = value;
    }
  }
  return features;
}

void save_features(const fs::path& path, const FrameMatrix& features) {
  validate_features(features);
  std::ostringstream os(std::ios::binary);
  os.write(kFeatureMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(features.rows()));
  put_u32(os, static_cast<std::uint32_t>(features.cols()));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(features(r, c))));
    }
  }
  write_file(path, os.str(), std::ios::out | std::ios::binary);
}

TranscriptTable parse_transcripts(const std::string& text) {
  TranscriptTable table;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string id;
    if (!(tokens >> id)) continue;
    Transcript transcript;
    for (std::string label; tokens >> label;) transcript.push_back(label);
    if (transcript.empty()) {
      throw FormatError("transcript line " + std::to_string(line_no) + ": no actions for '" +
                        id + "'");
    }
    if (!table.emplace(id, std::move(transcript)).second) {
      throw FormatError("transcript line " + std::to_string(line_no) + ": duplicate id '" + id +
                        "'");
    }
  }
  return table;
}

TranscriptTable load_transcripts(const fs::path& path) { return parse_transcripts(read_file(path)); }

void save_transcripts(const fs::path& path, const TranscriptTable& table) {
  std::ostringstream os;
  for (const auto& [id, transcript] : table) {
    os << id;
    for (const auto& label : transcript) os << ' ' << label;
    os << '\n';
  }
  write_file(path, os.str());
}

FrameLabels load_frame_labels(const fs::path& path) {
  std::istringstream lines(read_file(path));
  FrameLabels labels;
  for (std::string line; std::getline(lines, line);) {
    std::istringstream tokens(line);
    std::string label, extra;
    if (!(tokens >> label)) {
      throw FormatError("'" + path.string() + "': empty label at line " +
                        std::to_string(labels.size() + 1));
    }
    if (tokens >> extra) {
      throw FormatError("'" + path.string() + "': more than one token at line " +
                        std::to_string(labels.size() + 1));
    }
    labels.push_back(std::move(label));
  }
  return labels;
}

void save_frame_labels(const fs::path& path, const FrameLabels& labels) {
  std::ostringstream os;
  for (const auto& label : labels) os << label << '\n';
  write_file(path, os.str());
}

std::vector<std::string> collapse_runs(const FrameLabels& labels) {
  std::vector<std::string> runs;
  for (const auto& label : labels) {
    if (runs.empty() || runs.back() != label) runs.push_back(label);
  }
  return runs;
}

std::vector<std::string> label_set_of(const TranscriptTable& table) {
  std::set<std::string> labels;
  for (const auto& [id, transcript] : table) labels.insert(transcript.begin(), transcript.end());
  return {labels.begin(), labels.end()};
}

void save_dataset(const fs::path& dir, const Dataset& dataset) {
  std::error_code ec;
  fs::create_directories(dir / "features", ec);
  if (ec) throw IoError("cannot create '" + (dir / "features").string() + "': " + ec.message());
  TranscriptTable table;
  bool any_gt = false;
  for (const auto& sample : dataset.samples) {
    table[sample.id] = sample.transcript;
    save_features(dir / "features" / (sample.id + ".ftr"), sample.features);
    if (sample.ground_truth) {
      if (!any_gt) {
        fs::create_directories(dir / "groundtruth", ec);
        if (ec) throw IoError("cannot create '" + (dir / "groundtruth").string() + "'");
        any_gt = true;
      }
      save_frame_labels(dir / "groundtruth" / (sample.id + ".txt"), *sample.ground_truth);
    }
  }
  save_transcripts(dir / "transcripts.txt", table);
}

Dataset load_dataset(const fs::path& dir) {
  const TranscriptTable table = load_transcripts(dir / "transcripts.txt");
  Dataset dataset;
  dataset.label_set = label_set_of(table);
  for (const auto& [id, transcript] : table) {
    VideoSample sample;
    sample.id = id;
    sample.transcript = transcript;
    sample.features = load_features(dir / "features" / (id + ".ftr"));
    const fs::path gt = dir / "groundtruth" / (id + ".txt");
    if (fs::exists(gt)) sample.ground_truth = load_frame_labels(gt);
    dataset.samples.push_back(std::move(sample));
  }
  dataset.validate();
  return dataset;
}

}  // namespace fcseg
