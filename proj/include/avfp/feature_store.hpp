#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "avfp/types.hpp"

namespace avfp {

inline constexpr int kLandmarkPoints = 109;
inline constexpr double kDefaultFps = 30.0;

enum class FeatureKind : std::uint32_t { Landmarks = 0, Embedding = 1 };
std::string_view to_string(FeatureKind k);
FeatureKind parse_feature_kind(std::string_view s);

// Storage precision is 32-bit; computation converts to 64-bit.
using FrameMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureSequence {
  std::string video_id;
  FeatureKind kind = FeatureKind::Embedding;
  FrameMatrix frames;  // T x D
  double fps = kDefaultFps;

  Eigen::Index length() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

class MissingFeatureError : public Error {
 public:
  explicit MissingFeatureError(const std::string& id)
      : Error("no features stored for video '" + id + "'"), id_(id) {}
  const std::string& video_id() const { return id_; }

 private:
  std::string id_;
};

// In-memory feature store with a binary on-disk form:
//   header : "AVFS" | u32 version | u32 kind | u32 dim | u64 count | f64 fps
//   record : u32 id_len | id bytes | u32 T | T*dim f32 (row-major)
// and a sidecar "<file>.idx" listing "video_id offset T" per record.
// All integers and floats are little-endian.
class FeatureStore {
 public:
  FeatureStore(FeatureKind kind, int dim, double fps = kDefaultFps);

  // Rejects dimension or kind mismatch, duplicate ids, empty or non-finite
  // sequences, and any put after seal().
  void put(FeatureSequence seq);
  const FeatureSequence& get(const std::string& video_id) const;
  bool contains(const std::string& video_id) const { return seqs_.count(video_id) != 0; }

  // Disallows further writes; the store is then safe for concurrent reads.
  void seal() { sealed_ = true; }
  bool sealed() const { return sealed_; }

  std::size_t size() const { return seqs_.size(); }
  std::vector<std::string> ids() const;
  FeatureKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double fps() const { return fps_; }
  const std::map<std::string, FeatureSequence>& sequences() const { return seqs_; }

  void save(const std::filesystem::path& path) const;
  static FeatureStore load(const std::filesystem::path& path);

 private:
  FeatureKind kind_;
  int dim_;
  double fps_;
  bool sealed_ = false;
  std::map<std::string, FeatureSequence> seqs_;
};

// Random access to a saved store through its sidecar index without loading
// every sequence. get() uses positional reads and is safe to call from
// several threads.
class StoreReader {
 public:
  explicit StoreReader(const std::filesystem::path& path);
  ~StoreReader();
  StoreReader(const StoreReader&) = delete;
  StoreReader& operator=(const StoreReader&) = delete;

  FeatureSequence get(const std::string& video_id) const;
  bool contains(const std::string& video_id) const { return index_.count(video_id) != 0; }
  std::size_t size() const { return index_.size(); }
  FeatureKind kind() const { return kind_; }
  int dim() const { return dim_; }

 private:
  struct Entry {
    std::uint64_t offset;
    std::uint32_t length;
  };
  int fd_ = -1;
  FeatureKind kind_ = FeatureKind::Embedding;
  int dim_ = 0;
  double fps_ = kDefaultFps;
  std::map<std::string, Entry> index_;
};

// Per-dimension standardization fitted on development videos only.
struct NormalizationParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  std::vector<int> flagged;  // dimensions whose variance was floored

  static constexpr double kVarianceFloor = 1e-8;

  bool empty() const { return mean.size() == 0; }
  Eigen::MatrixXd apply(const FrameMatrix& frames) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& frames) const;
};

NormalizationParams normalize(const FeatureStore& store, const std::vector<std::string>& stats_source);

// Reads one video from a CSV with one row per frame and `dim` numeric
// columns. A non-numeric first row is treated as a header.
FeatureSequence import_frame_csv(const std::filesystem::path& path, const std::string& video_id,
                                 FeatureKind kind, double fps = kDefaultFps);

}  // namespace avfp
