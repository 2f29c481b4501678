#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "avfp/feature_store.hpp"
#include "avfp/types.hpp"

namespace avfp {

// Undirected per-frame landmark graph. Self-connections are implicit.
struct AdjacencyGraph {
  int nodes = 0;
  std::vector<std::pair<int, int>> edges;  // i < j, sorted, unique
  std::vector<int> degree;
  bool connected = false;

  static AdjacencyGraph from_edges(int nodes, const std::vector<std::pair<int, int>>& edges);
  // Row-normalized (A + I): each node averages itself and its neighbours.
  Eigen::SparseMatrix<double> averaging_operator() const;
};

// Edge-list CSV with lines "i,j" (0-based). An optional "i,j" header is
// skipped; explicit self-loops and duplicates are dropped.
AdjacencyGraph load_adjacency_csv(const std::filesystem::path& path, int nodes = kLandmarkPoints);
void save_adjacency_csv(const AdjacencyGraph& graph, const std::filesystem::path& path);

struct GraphEncoderConfig {
  int layers = 2;
  int hidden_dim = 32;
};

struct EmbedderConfig {
  int input_dim = 32;  // D: per-frame features entering attention pooling
  int heads = 4;
  int attention_dim = 32;
  int projection_dim = 16;  // d
  int window_len = 32;      // F
  std::optional<GraphEncoderConfig> graph;
  std::uint64_t seed = 1;

  // Width of one raw frame: input_dim, or 2 * nodes with a graph encoder.
  int frame_dim(const AdjacencyGraph* graph) const;
  void validate(const AdjacencyGraph* graph) const;
};

// Intermediate values of one forward pass, kept for backward().
struct ForwardCache {
  Eigen::MatrixXd frames;  // F x D after the optional graph encoder
  Eigen::MatrixXd keys;    // F x A
  Eigen::MatrixXd values;  // F x A
  Eigen::MatrixXd attention;  // F x H, each column sums to 1
  Eigen::VectorXd pooled;     // A, concatenated head outputs
  Eigen::VectorXd global;     // D, the pooled descriptor after the output map
  Eigen::VectorXd projected;  // d, before normalization
  Eigen::VectorXd embedding;  // d, unit norm
  // Graph encoder, per frame and layer: aggregated input and activation.
  std::vector<std::vector<Eigen::MatrixXd>> graph_inputs;
  std::vector<std::vector<Eigen::MatrixXd>> graph_outputs;
};

// Multi-head temporal attention pooling followed by a linear projection and
// L2 normalization. With a graph encoder, each frame (L landmarks) first
// passes through degree-normalized message passing and mean pooling.
//
// All weights live in one flat vector. forward/backward are pure functions
// of (params, input).
class Embedder {
 public:
  Embedder(EmbedderConfig config, std::optional<AdjacencyGraph> graph = std::nullopt);
  Embedder(EmbedderConfig config, std::optional<AdjacencyGraph> graph, Eigen::VectorXd params);

  const EmbedderConfig& config() const { return config_; }
  const AdjacencyGraph* graph() const { return graph_ ? &*graph_ : nullptr; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& mutable_params() { return params_; }
  Eigen::Index param_count() const { return params_.size(); }

  Eigen::VectorXd forward(const Eigen::MatrixXd& window) const;
  Eigen::VectorXd forward(const Eigen::MatrixXd& window, ForwardCache& cache) const;

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(embedding).
  void backward(const ForwardCache& cache, const Eigen::VectorXd& grad_embedding,
                Eigen::VectorXd& grad) const;

  // One frame of landmarks (L x 2) to its descriptor.
  Eigen::VectorXd graph_encode(const Eigen::MatrixXd& landmarks) const;

  // Offsets of parameter groups in the flat vector, for targeted checks.
  struct Layout {
    struct Block {
      Eigen::Index offset = 0;
      Eigen::Index rows = 0;
      Eigen::Index cols = 0;
      Eigen::Index size() const { return rows * cols; }
    };
    std::vector<Block> graph_weights, graph_biases;
    Block key_w, key_b, value_w, value_b, queries, out_w, out_b, proj_w, proj_b;
    Eigen::Index total = 0;
  };
  const Layout& layout() const { return layout_; }

 private:
  using Map = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using MutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  Map view(const Layout::Block& b) const;
  static MutMap view(Eigen::VectorXd& v, const Layout::Block& b);

  void build_layout();
  void initialize();
  Eigen::VectorXd encode_frame(const Eigen::MatrixXd& landmarks, std::vector<Eigen::MatrixXd>* inputs,
                               std::vector<Eigen::MatrixXd>* outputs) const;

  EmbedderConfig config_;
  std::optional<AdjacencyGraph> graph_;
  Eigen::SparseMatrix<double> averaging_;
  Layout layout_;
  Eigen::VectorXd params_;
};

// max(0, |a-p|^2 - |a-n|^2 + margin)
double triplet_loss(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                    const Eigen::VectorXd& negative, double margin);

struct TripletIndex {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

struct LossAndGradient {
  double loss = 0.0;  // mean over triplets
  double active_fraction = 0.0;
  Eigen::VectorXd gradient;
};

// Mean triplet loss over `triplets` (indices into `windows`) and its exact
// gradient. Each distinct window is embedded once.
LossAndGradient triplet_batch_gradient(const Embedder& embedder,
                                       std::span<const Eigen::MatrixXd> windows,
                                       std::span<const TripletIndex> triplets, double margin);

// Loss only; used by finite-difference checks and probe evaluation.
double triplet_batch_loss(const Embedder& embedder, std::span<const Eigen::MatrixXd> windows,
                          std::span<const TripletIndex> triplets, double margin);

}  // namespace avfp
