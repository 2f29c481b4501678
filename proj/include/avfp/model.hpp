#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "avfp/embedder.hpp"
#include "avfp/feature_store.hpp"

namespace avfp {

// A trained embedder together with the input standardization fitted on the
// development split. `model_id` keys score tables and embedding caches.
struct Model {
  std::string model_id;
  Embedder embedder;
  NormalizationParams normalization;
  nlohmann::json training;  // hyperparameters recorded at train time

  // Standardized frames [start, start + F) of `seq`.
  Eigen::MatrixXd window(const FeatureSequence& seq, Eigen::Index start) const;
  Eigen::VectorXd embed(const FeatureSequence& seq, Eigen::Index start) const;
};

nlohmann::json config_to_json(const EmbedderConfig& config);
EmbedderConfig config_from_json(const nlohmann::json& j);

// Checkpoint layout:
//   "AVFPCKPT" | u32 version | u64 header_len | header JSON (config, graph,
//   normalization, training) | u64 param_count | param_count x f64
// Parameters and normalization statistics reload bit-exactly.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace avfp
