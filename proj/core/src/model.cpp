#include "fcseg/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fcseg/error.hpp"

namespace fcseg {

using nlohmann::json;

int Model::action_id(const std::string& label) const {
  auto it = std::find(label_set.begin(), label_set.end(), label);
  if (it == label_set.end()) throw DomainError("unknown action label '" + label + "'");
  return static_cast<int>(it - label_set.begin());
}

std::vector<int> Model::action_ids(const Transcript& transcript) const {
  std::vector<int> ids;
  for (const auto& label : transcript) ids.push_back(action_id(label));
  return ids;
}

Transcript Model::labels_of(std::span<const int> actions) const {
  Transcript out;
  for (int a : actions) out.push_back(label_set.at(a));
  return out;
}

FrameLabels Model::frame_labels(const Alignment& alignment) const {
  FrameLabels out;
  out.reserve(alignment.states.size());
  for (int s : alignment.states) out.push_back(label_set.at(space.action_of(s)));
  return out;
}

ScoreMatrix Model::scores(const FrameMatrix& features) const {
  return to_likelihood(posteriors(params, features), prior);
}

void Model::validate() const {
  if (static_cast<int>(label_set.size()) != space.num_actions()) {
    throw DomainError("model: label set and subaction space disagree");
  }
  params.validate();
  if (params.num_outputs() != space.num_states() || prior.size() != space.num_states() ||
      transitions.num_states() != space.num_states()) {
    throw DomainError("model: component sizes disagree with the subaction space");
  }
  if (grammar.max_action() >= space.num_actions()) throw DomainError("model: grammar uses unknown action");
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw FormatError("model: matrix data does not match its shape");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++].get<double>();
  }
  return m;
}

}  // namespace

std::string to_document(const Model& model) {
  json params = json::object();
  model.params.for_each([&](const char* name, const auto& tensor) {
    params[name] = matrix_to_json(Eigen::MatrixXd(tensor));
  });
  json transcripts = json::array();
  for (const auto& t : model.grammar.transcripts()) transcripts.push_back(model.labels_of(t));

  json doc = {
      {"format", kModelFormat},
      {"labels", model.label_set},
      {"subaction_counts", model.space.counts()},
      {"dims",
       {{"input", model.params.input_dim()},
        {"hidden", model.params.hidden_dim()},
        {"outputs", model.params.num_outputs()}}},
      {"gru", std::move(params)},
      {"prior", std::vector<double>(model.prior.data(), model.prior.data() + model.prior.size())},
      {"self_loop_probs", model.transitions.self_probs()},
      {"grammar", std::move(transcripts)},
  };
  return doc.dump(1) + "\n";
}

Model parse_model(const std::string& document) {
  try {
    const json doc = json::parse(document);
    if (doc.at("format").get<std::string>() != kModelFormat) {
      throw FormatError(std::string("model: expected format tag ") + kModelFormat);
    }
    Model model;
    model.label_set = doc.at("labels").get<std::vector<std::string>>();
    model.space = SubactionSpace(doc.at("subaction_counts").get<std::vector<int>>());
    const auto& gru = doc.at("gru");
    model.params.for_each([&](const char* name, auto& tensor) {
      const Eigen::MatrixXd m = matrix_from_json(gru.at(name));
      if constexpr (std::decay_t<decltype(tensor)>::ColsAtCompileTime == 1) {
        if (m.cols() != 1) throw FormatError(std::string("model: ") + name + " must be a column");
      }
      tensor = m;
    });
    const auto prior = doc.at("prior").get<std::vector<double>>();
    model.prior = Eigen::Map<const Eigen::VectorXd>(prior.data(), static_cast<Eigen::Index>(prior.size()));
    model.transitions = TransitionModel(doc.at("self_loop_probs").get<std::vector<double>>());
    for (const auto& t : doc.at("grammar")) model.grammar.add(model.action_ids(t.get<Transcript>()));
    const auto& dims = doc.at("dims");
    if (dims.at("input").get<int>() != model.params.input_dim() ||
        dims.at("hidden").get<int>() != model.params.hidden_dim() ||
        dims.at("outputs").get<int>() != model.params.num_outputs()) {
      throw FormatError("model: declared dimensions disagree with parameters");
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << to_document(model);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

Segmentation segment_video(const Model& model, const DecodingGraph& graph,
                           const FrameMatrix& features) {
  auto decoded = decode(model.scores(features), graph);
  Segmentation out;
  out.transcript = model.labels_of(decoded.transcript);
  out.frame_labels = model.frame_labels(decoded.alignment);
  out.alignment = std::move(decoded.alignment);
  out.score = decoded.score;
  return out;
}

Segmentation segment_video(const Model& model, const FrameMatrix& features) {
  return segment_video(model, build_graph(model.grammar, model.space, model.transitions), features);
}

Segmentation align_video(const Model& model, const FrameMatrix& features,
                         const Transcript& transcript) {
  const auto actions = model.action_ids(transcript);
  auto aligned = align(model.scores(features), actions, model.space, model.transitions);
  Segmentation out;
  out.transcript = transcript;
  out.frame_labels = model.frame_labels(aligned.alignment);
  out.alignment = std::move(aligned.alignment);
  out.score = aligned.score;
  return out;
}

}  // namespace fcseg
