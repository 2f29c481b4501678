#include "avfp/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace avfp {

namespace {

constexpr char kMagic[8] = {'A', 'V', 'F', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

// Doubles travel through JSON as their IEEE bit patterns so that reloads are
// exact regardless of the JSON number formatter.
nlohmann::json bits_of(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(std::bit_cast<std::uint64_t>(v[i]));
  return out;
}

Eigen::VectorXd vector_from_bits(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(j[i].get<std::uint64_t>());
  }
  return v;
}

}  // namespace

Eigen::MatrixXd Model::window(const FeatureSequence& seq, Eigen::Index start) const {
  const int F = embedder.config().window_len;
  if (start < 0 || start + F > seq.length()) throw Error("window exceeds sequence bounds");
  Eigen::MatrixXd frames = seq.frames.middleRows(start, F).cast<double>();
  return normalization.apply(frames);
}

Eigen::VectorXd Model::embed(const FeatureSequence& seq, Eigen::Index start) const {
  return embedder.forward(window(seq, start));
}

nlohmann::json config_to_json(const EmbedderConfig& c) {
  nlohmann::json j{{"input_dim", c.input_dim},
                   {"heads", c.heads},
                   {"attention_dim", c.attention_dim},
                   {"projection_dim", c.projection_dim},
                   {"window_len", c.window_len},
                   {"seed", c.seed}};
  if (c.graph) {
    j["graph_encoder"] = {{"layers", c.graph->layers}, {"hidden_dim", c.graph->hidden_dim}};
  } else {
    j["graph_encoder"] = nullptr;
  }
  return j;
}

EmbedderConfig config_from_json(const nlohmann::json& j) {
  EmbedderConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.heads = j.value("heads", c.heads);
  c.attention_dim = j.value("attention_dim", c.attention_dim);
  c.projection_dim = j.value("projection_dim", c.projection_dim);
  c.window_len = j.value("window_len", c.window_len);
  c.seed = j.value("seed", c.seed);
  if (j.contains("graph_encoder") && !j["graph_encoder"].is_null()) {
    GraphEncoderConfig g;
    g.layers = j["graph_encoder"].value("layers", g.layers);
    g.hidden_dim = j["graph_encoder"].value("hidden_dim", g.hidden_dim);
    c.graph = g;
  }
  return c;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["model_id"] = model.model_id;
  header["config"] = config_to_json(model.embedder.config());
  if (const AdjacencyGraph* g = model.embedder.graph()) {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [i, j] : g->edges) edges.push_back({i, j});
    header["graph"] = {{"nodes", g->nodes}, {"edges", edges}};
  }
  header["normalization"] = {{"mean_bits", bits_of(model.normalization.mean)},
                             {"stddev_bits", bits_of(model.normalization.stddev)},
                             {"flagged", model.normalization.flagged}};
  header["training"] = model.training;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(len));
  const auto& params = model.embedder.params();
  const std::uint64_t count = static_cast<std::uint64_t>(params.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + file);
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError(file + ": not a model checkpoint");
  }
  if (!in.read(reinterpret_cast<char*>(&version), sizeof version) || version != kVersion) {
    throw IoError(file + ": unsupported checkpoint version");
  }
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len)) throw IoError(file + ": truncated");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw IoError(file + ": truncated");
  const nlohmann::json header = nlohmann::json::parse(text);

  std::uint64_t count = 0;
  if (!in.read(reinterpret_cast<char*>(&count), sizeof count)) throw IoError(file + ": truncated");
  Eigen::VectorXd params(static_cast<Eigen::Index>(count));
  if (!in.read(reinterpret_cast<char*>(params.data()),
               static_cast<std::streamsize>(count * sizeof(double)))) {
    throw IoError(file + ": truncated");
  }

  std::optional<AdjacencyGraph> graph;
  if (header.contains("graph")) {
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : header["graph"]["edges"]) edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    graph = AdjacencyGraph::from_edges(header["graph"]["nodes"].get<int>(), edges);
  }
  NormalizationParams norm;
  norm.mean = vector_from_bits(header["normalization"]["mean_bits"]);
  norm.stddev = vector_from_bits(header["normalization"]["stddev_bits"]);
  norm.flagged = header["normalization"]["flagged"].get<std::vector<int>>();

  return Model{header.value("model_id", std::string("model")),
               Embedder(config_from_json(header["config"]), std::move(graph), std::move(params)),
               std::move(norm), header.value("training", nlohmann::json::object())};
}

}  // namespace avfp
