#include "avfp/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <set>

#include "avfp/rng.hpp"
#include "csv.hpp"

namespace avfp {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* layer) {
  if (!m.allFinite()) throw NonFiniteError(std::string("non-finite values after ") + layer);
}

void require_finite(const Eigen::VectorXd& v, const char* layer) {
  if (!v.allFinite()) throw NonFiniteError(std::string("non-finite values after ") + layer);
}

}  // namespace

// ---------------------------------------------------------------------------
// AdjacencyGraph

AdjacencyGraph AdjacencyGraph::from_edges(int nodes,
                                          const std::vector<std::pair<int, int>>& edges) {
  if (nodes <= 0) throw Error("graph needs at least one node");
  std::set<std::pair<int, int>> unique;
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= nodes || j >= nodes) {
      throw Error("edge (" + std::to_string(i) + "," + std::to_string(j) +
                  ") out of range for " + std::to_string(nodes) + " nodes");
    }
    if (i == j) continue;
    unique.emplace(std::min(i, j), std::max(i, j));
  }
  AdjacencyGraph g;
  g.nodes = nodes;
  g.edges.assign(unique.begin(), unique.end());
  g.degree.assign(static_cast<std::size_t>(nodes), 0);
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(nodes));
  for (auto [i, j] : g.edges) {
    ++g.degree[i];
    ++g.degree[j];
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<bool> seen(static_cast<std::size_t>(nodes), false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int reached = 1;
  while (!q.empty()) {
    const int n = q.front();
    q.pop();
    for (int m : adj[n]) {
      if (!seen[m]) {
        seen[m] = true;
        ++reached;
        q.push(m);
      }
    }
  }
  g.connected = reached == nodes;
  return g;
}

Eigen::SparseMatrix<double> AdjacencyGraph::averaging_operator() const {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(nodes) + 2 * edges.size());
  for (int i = 0; i < nodes; ++i) entries.emplace_back(i, i, 1.0 / (degree[i] + 1));
  for (auto [i, j] : edges) {
    entries.emplace_back(i, j, 1.0 / (degree[i] + 1));
    entries.emplace_back(j, i, 1.0 / (degree[j] + 1));
  }
  Eigen::SparseMatrix<double> m(nodes, nodes);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

AdjacencyGraph load_adjacency_csv(const std::filesystem::path& path, int nodes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::pair<int, int>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == "i,j") continue;
    const auto fields = csv::split(line);
    if (fields.size() != 2) throw ParseError(path.string(), line_no, "expected 'i,j'");
    edges.emplace_back(csv::parse_int(fields[0], path.string(), line_no),
                       csv::parse_int(fields[1], path.string(), line_no));
  }
  return AdjacencyGraph::from_edges(nodes, edges);
}

void save_adjacency_csv(const AdjacencyGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "i,j\n";
  for (auto [i, j] : graph.edges) out << i << ',' << j << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// EmbedderConfig

int EmbedderConfig::frame_dim(const AdjacencyGraph* g) const {
  if (this->graph) return 2 * (g ? g->nodes : kLandmarkPoints);
  return input_dim;
}

void EmbedderConfig::validate(const AdjacencyGraph* g) const {
  if (input_dim < 2) throw Error("input_dim must be at least 2");
  if (projection_dim < 1 || projection_dim >= input_dim) {
    throw Error("projection_dim must satisfy 1 <= d < input_dim");
  }
  if (heads < 1 || attention_dim < heads || attention_dim % heads != 0) {
    throw Error("heads must divide attention_dim");
  }
  if (window_len < 2) throw Error("window_len must be at least 2");
  if (graph) {
    if (!g) throw Error("graph encoder configured without an adjacency graph");
    if (graph->layers < 1) throw Error("graph encoder needs at least one layer");
    if (graph->hidden_dim != input_dim) {
      throw Error("graph encoder hidden_dim must equal input_dim");
    }
  }
}

// ---------------------------------------------------------------------------
// Embedder

Embedder::Embedder(EmbedderConfig config, std::optional<AdjacencyGraph> graph)
    : config_(std::move(config)), graph_(std::move(graph)) {
  if (!config_.graph) graph_.reset();
  config_.validate(this->graph());
  if (graph_) averaging_ = graph_->averaging_operator();
  build_layout();
  initialize();
}

Embedder::Embedder(EmbedderConfig config, std::optional<AdjacencyGraph> graph,
                   Eigen::VectorXd params)
    : config_(std::move(config)), graph_(std::move(graph)) {
  if (!config_.graph) graph_.reset();
  config_.validate(this->graph());
  if (graph_) averaging_ = graph_->averaging_operator();
  build_layout();
  if (params.size() != layout_.total) {
    throw Error("parameter vector has " + std::to_string(params.size()) + " entries, expected " +
                std::to_string(layout_.total));
  }
  if (!params.allFinite()) throw Error("parameter vector contains non-finite values");
  params_ = std::move(params);
}

void Embedder::build_layout() {
  Eigen::Index offset = 0;
  auto block = [&](Eigen::Index rows, Eigen::Index cols) {
    Layout::Block b{offset, rows, cols};
    offset += rows * cols;
    return b;
  };
  const Eigen::Index D = config_.input_dim;
  const Eigen::Index A = config_.attention_dim;
  const Eigen::Index H = config_.heads;
  if (config_.graph) {
    Eigen::Index in = 2;
    for (int l = 0; l < config_.graph->layers; ++l) {
      layout_.graph_weights.push_back(block(in, config_.graph->hidden_dim));
      layout_.graph_biases.push_back(block(1, config_.graph->hidden_dim));
      in = config_.graph->hidden_dim;
    }
  }
  layout_.key_w = block(D, A);
  layout_.key_b = block(1, A);
  layout_.value_w = block(D, A);
  layout_.value_b = block(1, A);
  layout_.queries = block(H, A / H);
  layout_.out_w = block(A, D);
  layout_.out_b = block(1, D);
  layout_.proj_w = block(D, config_.projection_dim);
  layout_.proj_b = block(1, config_.projection_dim);
  layout_.total = offset;
}

void Embedder::initialize() {
  params_ = Eigen::VectorXd::Zero(layout_.total);
  Rng rng(config_.seed);
  auto fill = [&](const Layout::Block& b, double scale) {
    for (Eigen::Index i = 0; i < b.size(); ++i) params_[b.offset + i] = scale * rng.normal();
  };
  for (const auto& b : layout_.graph_weights) fill(b, 1.0 / std::sqrt(double(b.rows)));
  fill(layout_.key_w, 1.0 / std::sqrt(double(layout_.key_w.rows)));
  fill(layout_.value_w, 1.0 / std::sqrt(double(layout_.value_w.rows)));
  fill(layout_.queries, 1.0);
  fill(layout_.out_w, 1.0 / std::sqrt(double(layout_.out_w.rows)));
  fill(layout_.proj_w, 1.0 / std::sqrt(double(layout_.proj_w.rows)));
}

Embedder::Map Embedder::view(const Layout::Block& b) const {
  return Map(params_.data() + b.offset, b.rows, b.cols);
}

Embedder::MutMap Embedder::view(Eigen::VectorXd& v, const Layout::Block& b) {
  return MutMap(v.data() + b.offset, b.rows, b.cols);
}

Eigen::VectorXd Embedder::encode_frame(const Eigen::MatrixXd& landmarks,
                                       std::vector<Eigen::MatrixXd>* inputs,
                                       std::vector<Eigen::MatrixXd>* outputs) const {
  Eigen::MatrixXd h = landmarks;
  for (std::size_t l = 0; l < layout_.graph_weights.size(); ++l) {
    Eigen::MatrixXd aggregated = averaging_ * h;
    Eigen::MatrixXd pre = aggregated * view(layout_.graph_weights[l]);
    pre.rowwise() += view(layout_.graph_biases[l]).row(0);
    h = pre.array().tanh().matrix();
    if (inputs) inputs->push_back(std::move(aggregated));
    if (outputs) outputs->push_back(h);
  }
  return h.colwise().mean().transpose();
}

Eigen::VectorXd Embedder::graph_encode(const Eigen::MatrixXd& landmarks) const {
  if (!graph_) throw Error("embedder has no graph encoder");
  if (landmarks.rows() != graph_->nodes || landmarks.cols() != 2) {
    throw Error("expected " + std::to_string(graph_->nodes) + "x2 landmarks, got " +
                std::to_string(landmarks.rows()) + "x" + std::to_string(landmarks.cols()));
  }
  return encode_frame(landmarks, nullptr, nullptr);
}

Eigen::VectorXd Embedder::forward(const Eigen::MatrixXd& window) const {
  ForwardCache cache;
  return forward(window, cache);
}

Eigen::VectorXd Embedder::forward(const Eigen::MatrixXd& window, ForwardCache& cache) const {
  const int F = config_.window_len;
  const int H = config_.heads;
  const int head_dim = config_.attention_dim / H;
  if (window.rows() != F || window.cols() != config_.frame_dim(graph())) {
    throw Error("window shape " + std::to_string(window.rows()) + "x" +
                std::to_string(window.cols()) + " does not match " + std::to_string(F) + "x" +
                std::to_string(config_.frame_dim(graph())));
  }

  if (graph_) {
    const int L = graph_->nodes;
    cache.frames.resize(F, config_.input_dim);
    cache.graph_inputs.assign(static_cast<std::size_t>(F), {});
    cache.graph_outputs.assign(static_cast<std::size_t>(F), {});
    for (int f = 0; f < F; ++f) {
      Eigen::MatrixXd landmarks(L, 2);
      for (int i = 0; i < L; ++i) {
        landmarks(i, 0) = window(f, 2 * i);
        landmarks(i, 1) = window(f, 2 * i + 1);
      }
      cache.frames.row(f) =
          encode_frame(landmarks, &cache.graph_inputs[f], &cache.graph_outputs[f]).transpose();
    }
    require_finite(cache.frames, "graph encoder");
  } else {
    cache.frames = window;
  }

  cache.keys = cache.frames * view(layout_.key_w);
  cache.keys.rowwise() += view(layout_.key_b).row(0);
  cache.values = cache.frames * view(layout_.value_w);
  cache.values.rowwise() += view(layout_.value_b).row(0);
  require_finite(cache.keys, "key projection");
  require_finite(cache.values, "value projection");

  const auto queries = view(layout_.queries);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  cache.attention.resize(F, H);
  cache.pooled.resize(config_.attention_dim);
  for (int h = 0; h < H; ++h) {
    Eigen::VectorXd logits =
        cache.keys.middleCols(h * head_dim, head_dim) * queries.row(h).transpose() * scale;
    const double peak = logits.maxCoeff();
    Eigen::VectorXd w = (logits.array() - peak).exp().matrix();
    w /= w.sum();
    cache.attention.col(h) = w;
    cache.pooled.segment(h * head_dim, head_dim) =
        cache.values.middleCols(h * head_dim, head_dim).transpose() * w;
  }
  require_finite(cache.pooled, "attention pooling");

  cache.global = view(layout_.out_w).transpose() * cache.pooled +
                 view(layout_.out_b).row(0).transpose();
  cache.projected = view(layout_.proj_w).transpose() * cache.global +
                    view(layout_.proj_b).row(0).transpose();
  require_finite(cache.projected, "projection");
  const double norm = cache.projected.norm();
  if (!(norm > 0.0)) throw Error("zero-norm projection; cannot normalize embedding");
  cache.embedding = cache.projected / norm;
  return cache.embedding;
}

void Embedder::backward(const ForwardCache& cache, const Eigen::VectorXd& grad_embedding,
                        Eigen::VectorXd& grad) const {
  if (grad.size() != layout_.total) grad = Eigen::VectorXd::Zero(layout_.total);
  const int H = config_.heads;
  const int head_dim = config_.attention_dim / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  // L2 normalization: dz/du = (I - z z^T) / |u|
  const double norm = cache.projected.norm();
  const Eigen::VectorXd g_proj =
      (grad_embedding - cache.embedding * cache.embedding.dot(grad_embedding)) / norm;

  view(grad, layout_.proj_w) += cache.global * g_proj.transpose();
  view(grad, layout_.proj_b).row(0) += g_proj.transpose();
  const Eigen::VectorXd g_global = view(layout_.proj_w) * g_proj;

  view(grad, layout_.out_w) += cache.pooled * g_global.transpose();
  view(grad, layout_.out_b).row(0) += g_global.transpose();
  const Eigen::VectorXd g_pooled = view(layout_.out_w) * g_global;

  const auto queries = view(layout_.queries);
  auto g_queries = view(grad, layout_.queries);
  Eigen::MatrixXd g_keys = Eigen::MatrixXd::Zero(cache.keys.rows(), cache.keys.cols());
  Eigen::MatrixXd g_values = Eigen::MatrixXd::Zero(cache.values.rows(), cache.values.cols());
  for (int h = 0; h < H; ++h) {
    const auto w = cache.attention.col(h);
    const Eigen::VectorXd g_head = g_pooled.segment(h * head_dim, head_dim);
    const auto values_h = cache.values.middleCols(h * head_dim, head_dim);
    const auto keys_h = cache.keys.middleCols(h * head_dim, head_dim);

    g_values.middleCols(h * head_dim, head_dim) += w * g_head.transpose();
    const Eigen::VectorXd g_w = values_h * g_head;
    // softmax: dL/dlogit_t = w_t (g_t - sum_s w_s g_s)
    const Eigen::VectorXd g_logits = w.cwiseProduct((g_w.array() - w.dot(g_w)).matrix());
    g_keys.middleCols(h * head_dim, head_dim) += scale * g_logits * queries.row(h);
    g_queries.row(h) += scale * (keys_h.transpose() * g_logits).transpose();
  }

  view(grad, layout_.key_w) += cache.frames.transpose() * g_keys;
  view(grad, layout_.key_b).row(0) += g_keys.colwise().sum();
  view(grad, layout_.value_w) += cache.frames.transpose() * g_values;
  view(grad, layout_.value_b).row(0) += g_values.colwise().sum();

  if (!graph_) return;

  const Eigen::MatrixXd g_frames =
      g_keys * view(layout_.key_w).transpose() + g_values * view(layout_.value_w).transpose();
  const Eigen::SparseMatrix<double> averaging_t = averaging_.transpose();
  const int L = graph_->nodes;
  const int layers = static_cast<int>(layout_.graph_weights.size());
  for (Eigen::Index f = 0; f < g_frames.rows(); ++f) {
    const auto& inputs = cache.graph_inputs[static_cast<std::size_t>(f)];
    const auto& outputs = cache.graph_outputs[static_cast<std::size_t>(f)];
    // Mean pooling over nodes.
    Eigen::MatrixXd g_h = (Eigen::VectorXd::Ones(L) * g_frames.row(f)) / static_cast<double>(L);
    for (int l = layers - 1; l >= 0; --l) {
      const Eigen::MatrixXd g_pre =
          g_h.cwiseProduct((1.0 - outputs[l].array().square()).matrix());
      view(grad, layout_.graph_weights[l]) += inputs[l].transpose() * g_pre;
      view(grad, layout_.graph_biases[l]).row(0) += g_pre.colwise().sum();
      if (l > 0) g_h = averaging_t * (g_pre * view(layout_.graph_weights[l]).transpose());
    }
  }
}

// ---------------------------------------------------------------------------

double triplet_loss(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                    const Eigen::VectorXd& negative, double margin) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw Error("triplet embeddings differ in dimension");
  }
  return std::max(0.0, (anchor - positive).squaredNorm() - (anchor - negative).squaredNorm() +
                           margin);
}

namespace {

struct EmbeddedWindows {
  std::vector<std::size_t> used;  // distinct window indices, ascending
  std::map<std::size_t, std::size_t> slot;
  std::vector<ForwardCache> caches;
};

EmbeddedWindows embed_used(const Embedder& embedder, std::span<const Eigen::MatrixXd> windows,
                           std::span<const TripletIndex> triplets) {
  EmbeddedWindows e;
  std::set<std::size_t> used;
  for (const auto& t : triplets) {
    for (std::size_t i : {t.anchor, t.positive, t.negative}) {
      if (i >= windows.size()) throw Error("triplet references a missing window");
      used.insert(i);
    }
  }
  e.used.assign(used.begin(), used.end());
  e.caches.resize(e.used.size());
  for (std::size_t k = 0; k < e.used.size(); ++k) {
    e.slot[e.used[k]] = k;
    embedder.forward(windows[e.used[k]], e.caches[k]);
  }
  return e;
}

}  // namespace

LossAndGradient triplet_batch_gradient(const Embedder& embedder,
                                       std::span<const Eigen::MatrixXd> windows,
                                       std::span<const TripletIndex> triplets, double margin) {
  LossAndGradient out;
  out.gradient = Eigen::VectorXd::Zero(embedder.param_count());
  if (triplets.empty()) return out;
  EmbeddedWindows e = embed_used(embedder, windows, triplets);

  const double inv_n = 1.0 / static_cast<double>(triplets.size());
  std::vector<Eigen::VectorXd> g_emb(e.used.size(),
                                     Eigen::VectorXd::Zero(embedder.config().projection_dim));
  std::size_t active = 0;
  for (const auto& t : triplets) {
    const std::size_t a = e.slot[t.anchor], p = e.slot[t.positive], n = e.slot[t.negative];
    const Eigen::VectorXd& za = e.caches[a].embedding;
    const Eigen::VectorXd& zp = e.caches[p].embedding;
    const Eigen::VectorXd& zn = e.caches[n].embedding;
    const double loss = triplet_loss(za, zp, zn, margin);
    out.loss += loss * inv_n;
    if (loss <= 0.0) continue;
    ++active;
    g_emb[a] += 2.0 * inv_n * (zn - zp);
    g_emb[p] += -2.0 * inv_n * (za - zp);
    g_emb[n] += 2.0 * inv_n * (za - zn);
  }
  out.active_fraction = static_cast<double>(active) * inv_n;
  if (active == 0) return out;
  for (std::size_t k = 0; k < e.used.size(); ++k) {
    if (g_emb[k].isZero(0.0)) continue;
    embedder.backward(e.caches[k], g_emb[k], out.gradient);
  }
  if (!out.gradient.allFinite()) throw Error("non-finite gradient");
  return out;
}

double triplet_batch_loss(const Embedder& embedder, std::span<const Eigen::MatrixXd> windows,
                          std::span<const TripletIndex> triplets, double margin) {
  if (triplets.empty()) return 0.0;
  EmbeddedWindows e = embed_used(embedder, windows, triplets);
  double total = 0.0;
  for (const auto& t : triplets) {
    total += triplet_loss(e.caches[e.slot[t.anchor]].embedding,
                          e.caches[e.slot[t.positive]].embedding,
                          e.caches[e.slot[t.negative]].embedding, margin);
  }
  return total / static_cast<double>(triplets.size());
}

}  // namespace avfp
