#include "avfp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "avfp/rng.hpp"
#include "avfp/scoring.hpp"

namespace avfp {

std::string_view to_string(Mining m) {
  return m == Mining::SemiHard ? "semi_hard" : "random";
}

Mining parse_mining(std::string_view s) {
  if (s == "semi_hard") return Mining::SemiHard;
  if (s == "random") return Mining::Random;
  throw Error("unknown mining strategy '" + std::string(s) + "'");
}

void TrainHyper::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw Error("learning rate must be positive");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (identities_per_batch < 2) throw Error("a batch needs at least 2 identities");
  if (windows_per_identity < 2) throw Error("a batch needs at least 2 windows per identity");
  if (!(margin >= 0.0)) throw Error("margin must be non-negative");
  if (probe_triplets < 1) throw Error("probe batch must hold at least one triplet");
}

nlohmann::json hyper_to_json(const TrainHyper& h) {
  return {{"learning_rate", h.learning_rate},
          {"epochs", h.epochs},
          {"identities_per_batch", h.identities_per_batch},
          {"windows_per_identity", h.windows_per_identity},
          {"margin", h.margin},
          {"mining", std::string(to_string(h.mining))},
          {"probe_triplets", h.probe_triplets},
          {"seed", h.seed}};
}

TrainHyper hyper_from_json(const nlohmann::json& j) {
  TrainHyper h;
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.epochs = j.value("epochs", h.epochs);
  h.identities_per_batch = j.value("identities_per_batch", h.identities_per_batch);
  h.windows_per_identity = j.value("windows_per_identity", h.windows_per_identity);
  h.margin = j.value("margin", h.margin);
  if (j.contains("mining")) h.mining = parse_mining(j.at("mining").get<std::string>());
  h.probe_triplets = j.value("probe_triplets", h.probe_triplets);
  h.seed = j.value("seed", h.seed);
  return h;
}

std::vector<TrainSample> samples_from_catalog(const Catalog& catalog, const std::vector<std::string>& video_ids) {
  std::vector<TrainSample> out;
  out.reserve(video_ids.size());
  for (const auto& id : video_ids) out.push_back({id, catalog.video(id).driver});
  return out;
}

namespace {

struct Pool {
  std::vector<Eigen::MatrixXd> windows;
  std::vector<std::size_t> label;            // index into labels
  std::vector<std::vector<std::size_t>> by_label;
  std::vector<std::string> labels;
};

class Adam {
 public:
  explicit Adam(Eigen::Index n, double lr) : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)), lr_(lr) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
    v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + kEps);
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  Eigen::VectorXd m_, v_;
  double lr_;
  int t_ = 0;
};

double squared_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm(); }

// Windows of one batch: P labels, up to K windows each.
std::vector<std::size_t> sample_batch(const Pool& pool, const std::vector<std::size_t>& eligible,
                                      const TrainHyper& h, Rng& rng) {
  std::vector<std::size_t> labels = eligible;
  rng.shuffle(labels);
  labels.resize(std::min<std::size_t>(labels.size(), static_cast<std::size_t>(h.identities_per_batch)));
  std::sort(labels.begin(), labels.end());
  std::vector<std::size_t> batch;
  for (std::size_t l : labels) {
    std::vector<std::size_t> w = pool.by_label[l];
    rng.shuffle(w);
    w.resize(std::min<std::size_t>(w.size(), static_cast<std::size_t>(h.windows_per_identity)));
    batch.insert(batch.end(), w.begin(), w.end());
  }
  return batch;
}

// Triplets over batch positions. Semi-hard picks, per anchor/positive pair,
// the closest negative that is still farther than the positive, falling
// back to the closest negative overall.
std::vector<TripletIndex> mine(const Pool& pool, const std::vector<std::size_t>& batch,
                               const std::vector<Eigen::VectorXd>& emb, Mining mining, Rng& rng) {
  std::vector<TripletIndex> out;
  const std::size_t n = batch.size();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || pool.label[batch[p]] != pool.label[batch[a]]) continue;
      std::vector<std::size_t> negatives;
      for (std::size_t k = 0; k < n; ++k) {
        if (pool.label[batch[k]] != pool.label[batch[a]]) negatives.push_back(k);
      }
      if (negatives.empty()) continue;
      std::size_t chosen = negatives.front();
      if (mining == Mining::Random) {
        chosen = negatives[rng.below(negatives.size())];
      } else {
        const double d_ap = squared_distance(emb[a], emb[p]);
        double best_semi = std::numeric_limits<double>::infinity();
        double best_any = std::numeric_limits<double>::infinity();
        std::optional<std::size_t> semi;
        std::size_t hardest = negatives.front();
        for (std::size_t k : negatives) {
          const double d_an = squared_distance(emb[a], emb[k]);
          if (d_an < best_any) {
            best_any = d_an;
            hardest = k;
          }
          if (d_an > d_ap && d_an < best_semi) {
            best_semi = d_an;
            semi = k;
          }
        }
        chosen = semi.value_or(hardest);
      }
      out.push_back({a, p, chosen});
    }
  }
  return out;
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

TrainResult train_model(const std::string& model_id, const EmbedderConfig& config,
                        const std::optional<AdjacencyGraph>& graph, const TrainHyper& hyper,
                        const FeatureStore& store, const std::vector<TrainSample>& samples) {
  hyper.validate();
  if (samples.empty()) throw Error("no training videos");
  config.validate(graph ? &*graph : nullptr);

  std::vector<std::string> ids;
  for (const auto& s : samples) ids.push_back(s.video_id);
  Model model{model_id, Embedder(config, graph), normalize(store, ids), nlohmann::json::object()};

  // Window pool.
  Pool pool;
  std::map<std::string, std::size_t> label_index;
  for (const auto& s : samples) label_index.emplace(s.label, 0);
  for (auto& [name, idx] : label_index) {
    idx = pool.labels.size();
    pool.labels.push_back(name);
  }
  pool.by_label.resize(pool.labels.size());
  const int F = config.window_len;
  for (const auto& s : samples) {
    const FeatureSequence& seq = store.get(s.video_id);
    const WindowSet w = make_windows(seq.length(), F, default_stride(F));
    for (Eigen::Index start : w.starts) {
      const std::size_t l = label_index.at(s.label);
      pool.by_label[l].push_back(pool.windows.size());
      pool.label.push_back(l);
      pool.windows.push_back(model.window(seq, start));
    }
  }
  std::vector<std::size_t> eligible;
  for (std::size_t l = 0; l < pool.by_label.size(); ++l) {
    if (pool.by_label[l].size() >= 2) eligible.push_back(l);
  }
  bool has_negative = false;
  for (std::size_t l : eligible) {
    has_negative = has_negative || pool.windows.size() > pool.by_label[l].size();
  }
  if (eligible.empty() || !has_negative || pool.labels.size() < 2) {
    throw Error("no valid triplet: need two identities with windows, one of them with at least two");
  }

  Rng rng(Rng::mix(hyper.seed, hash_string(model_id)));

  // Fixed probe triplets drawn once, uniformly.
  std::vector<TripletIndex> probe;
  {
    Rng probe_rng(Rng::mix(hyper.seed, 0x70726f6265ULL));
    for (int i = 0; i < hyper.probe_triplets; ++i) {
      const std::size_t l = eligible[probe_rng.below(eligible.size())];
      const auto& own = pool.by_label[l];
      const std::size_t a = own[probe_rng.below(own.size())];
      std::size_t p = a;
      while (p == a) p = own[probe_rng.below(own.size())];
      std::size_t n = a;
      while (pool.label[n] == l) n = probe_rng.below(pool.windows.size());
      probe.push_back({a, p, n});
    }
  }

  TrainResult result{std::move(model), {}, {}, {}, pool.windows.size()};
  Embedder& emb = result.model.embedder;
  result.probe_loss.push_back(triplet_batch_loss(emb, pool.windows, probe, hyper.margin));

  const std::size_t batch_windows =
      static_cast<std::size_t>(hyper.identities_per_batch) * static_cast<std::size_t>(hyper.windows_per_identity);
  const std::size_t steps = std::max<std::size_t>(1, (pool.windows.size() + batch_windows - 1) / batch_windows);
  Adam adam(emb.param_count(), hyper.learning_rate);

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const Eigen::VectorXd epoch_start = emb.params();
    double loss_sum = 0.0, active_sum = 0.0;
    std::size_t loss_n = 0;
    try {
      for (std::size_t step = 0; step < steps; ++step) {
        const std::vector<std::size_t> batch = sample_batch(pool, eligible, hyper, rng);
        std::vector<Eigen::MatrixXd> windows;
        std::vector<Eigen::VectorXd> embeddings;
        windows.reserve(batch.size());
        for (std::size_t idx : batch) {
          windows.push_back(pool.windows[idx]);
          embeddings.push_back(emb.forward(windows.back()));
        }
        const std::vector<TripletIndex> triplets = mine(pool, batch, embeddings, hyper.mining, rng);
        if (triplets.empty()) continue;
        const LossAndGradient lg = triplet_batch_gradient(emb, windows, triplets, hyper.margin);
        if (!std::isfinite(lg.loss) || !all_finite(lg.gradient)) throw TrainingDiverged(epoch, epoch_start);
        adam.step(emb.mutable_params(), lg.gradient);
        if (!all_finite(emb.params())) throw TrainingDiverged(epoch, epoch_start);
        loss_sum += lg.loss;
        active_sum += lg.active_fraction;
        ++loss_n;
      }
      result.epoch_loss.push_back(loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0);
      result.active_fraction.push_back(loss_n ? active_sum / static_cast<double>(loss_n) : 0.0);
      const double probe_loss = triplet_batch_loss(emb, pool.windows, probe, hyper.margin);
      if (!std::isfinite(probe_loss)) throw TrainingDiverged(epoch, epoch_start);
      result.probe_loss.push_back(probe_loss);
    } catch (const NonFiniteError&) {
      throw TrainingDiverged(epoch, epoch_start);
    }
  }

  result.model.training = hyper_to_json(hyper);
  result.model.training["videos"] = samples.size();
  result.model.training["windows"] = pool.windows.size();
  result.model.training["labels"] = pool.labels.size();
  return result;
}

}  // namespace avfp
