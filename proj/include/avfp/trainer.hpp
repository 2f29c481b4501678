#pragma once

#include <optional>
#include <string>
#include <vector>

#include "avfp/catalog.hpp"
#include "avfp/embedder.hpp"
#include "avfp/feature_store.hpp"
#include "avfp/model.hpp"

namespace avfp {

enum class Mining { SemiHard, Random };
std::string_view to_string(Mining m);
Mining parse_mining(std::string_view s);

struct TrainHyper {
  double learning_rate = 1e-3;
  int epochs = 30;
  int identities_per_batch = 8;   // P
  int windows_per_identity = 4;   // K
  double margin = 0.2;
  Mining mining = Mining::SemiHard;
  int probe_triplets = 64;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json hyper_to_json(const TrainHyper& h);
TrainHyper hyper_from_json(const nlohmann::json& j);

// A training video and the identity whose motion it carries (its driver).
struct TrainSample {
  std::string video_id;
  std::string label;
};

std::vector<TrainSample> samples_from_catalog(const Catalog& catalog, const std::vector<std::string>& video_ids);

struct TrainResult {
  Model model;
  // Loss on a fixed probe batch before training and after every epoch.
  std::vector<double> probe_loss;
  // Mean mined-batch loss per epoch.
  std::vector<double> epoch_loss;
  // Mean share of mined triplets with positive loss per epoch.
  std::vector<double> active_fraction;
  std::size_t pool_windows = 0;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(int epoch, Eigen::VectorXd last_good)
      : Error("training diverged in epoch " + std::to_string(epoch)), epoch_(epoch),
        last_good_(std::move(last_good)) {}
  int epoch() const { return epoch_; }
  const Eigen::VectorXd& last_good_params() const { return last_good_; }

 private:
  int epoch_;
  Eigen::VectorXd last_good_;
};

// Triplet training with Adam over windows (stride F/2) of the sample videos.
// Normalization is fitted on the same videos. Batches take P labels and up
// to K windows each; every ordered anchor/positive pair in the batch gets
// one mined negative. Results depend only on the inputs and the seed.
TrainResult train_model(const std::string& model_id, const EmbedderConfig& config,
                        const std::optional<AdjacencyGraph>& graph, const TrainHyper& hyper,
                        const FeatureStore& store, const std::vector<TrainSample>& samples);

}  // namespace avfp
