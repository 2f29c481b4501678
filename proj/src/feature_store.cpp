#include "avfp/feature_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "csv.hpp"

namespace avfp {

static_assert(std::endian::native == std::endian::little,
              "feature store I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'A', 'V', 'F', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 4 + 8 + 8;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& file) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw IoError(file + ": truncated feature store");
  }
  return value;
}

void check_finite(const FrameMatrix& m, const std::string& id) {
  if (!m.allFinite()) throw Error("non-finite feature value in video '" + id + "'");
}

std::filesystem::path index_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".idx");
}

}  // namespace

std::string_view to_string(FeatureKind k) {
  return k == FeatureKind::Landmarks ? "landmarks" : "embedding";
}

FeatureKind parse_feature_kind(std::string_view s) {
  if (s == "landmarks") return FeatureKind::Landmarks;
  if (s == "embedding") return FeatureKind::Embedding;
  throw Error("unknown feature kind '" + std::string(s) + "'");
}

FeatureStore::FeatureStore(FeatureKind kind, int dim, double fps)
    : kind_(kind), dim_(dim), fps_(fps) {
  if (dim <= 0) throw Error("feature dimension must be positive");
  if (kind == FeatureKind::Landmarks && dim != 2 * kLandmarkPoints) {
    throw Error("landmark stores hold " + std::to_string(2 * kLandmarkPoints) +
                " values per frame, got " + std::to_string(dim));
  }
  if (!(fps > 0.0)) throw Error("fps must be positive");
}

void FeatureStore::put(FeatureSequence seq) {
  if (sealed_) throw Error("feature store is sealed");
  if (seq.kind != kind_) {
    throw Error("video '" + seq.video_id + "': kind " + std::string(to_string(seq.kind)) +
                " does not match store kind " + std::string(to_string(kind_)));
  }
  if (seq.dim() != dim_) {
    throw Error("video '" + seq.video_id + "': dimension " + std::to_string(seq.dim()) +
                " does not match store dimension " + std::to_string(dim_));
  }
  if (seq.length() < 1) throw Error("video '" + seq.video_id + "' has no frames");
  if (seq.fps != fps_) throw Error("video '" + seq.video_id + "': fps differs from store fps");
  check_finite(seq.frames, seq.video_id);
  if (seqs_.count(seq.video_id)) throw Error("duplicate video id '" + seq.video_id + "'");
  std::string id = seq.video_id;
  seqs_.emplace(std::move(id), std::move(seq));
}

const FeatureSequence& FeatureStore::get(const std::string& video_id) const {
  auto it = seqs_.find(video_id);
  if (it == seqs_.end()) throw MissingFeatureError(video_id);
  return it->second;
}

std::vector<std::string> FeatureStore::ids() const {
  std::vector<std::string> out;
  out.reserve(seqs_.size());
  for (const auto& [id, _] : seqs_) out.push_back(id);
  return out;
}

void FeatureStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(kind_));
  write_pod(out, static_cast<std::uint32_t>(dim_));
  write_pod(out, static_cast<std::uint64_t>(seqs_.size()));
  write_pod(out, fps_);

  std::ostringstream index;
  index << "AVFSIDX " << kVersion << ' ' << seqs_.size() << '\n';
  std::uint64_t offset = kHeaderBytes;
  for (const auto& [id, seq] : seqs_) {
    const auto rows = static_cast<std::uint32_t>(seq.length());
    index << id << ' ' << offset << ' ' << rows << '\n';
    write_pod(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    write_pod(out, rows);
    const std::size_t bytes = sizeof(float) * static_cast<std::size_t>(seq.frames.size());
    out.write(reinterpret_cast<const char*>(seq.frames.data()),
              static_cast<std::streamsize>(bytes));
    offset += 4 + id.size() + 4 + bytes;
  }
  if (!out) throw IoError("write failed: " + path.string());

  std::ofstream idx(index_path(path), std::ios::binary);
  if (!idx) throw IoError("cannot write " + index_path(path).string());
  idx << index.str();
  if (!idx) throw IoError("write failed: " + index_path(path).string());
}

FeatureStore FeatureStore::load(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + file);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(file + ": not a feature store (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(in, file);
  if (version != kVersion) throw IoError(file + ": unsupported version " + std::to_string(version));
  const auto kind = read_pod<std::uint32_t>(in, file);
  if (kind > 1) throw IoError(file + ": bad feature kind");
  const auto dim = read_pod<std::uint32_t>(in, file);
  const auto count = read_pod<std::uint64_t>(in, file);
  const auto fps = read_pod<double>(in, file);

  FeatureStore store(static_cast<FeatureKind>(kind), static_cast<int>(dim), fps);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id_len = read_pod<std::uint32_t>(in, file);
    std::string id(id_len, '\0');
    if (!in.read(id.data(), id_len)) throw IoError(file + ": truncated feature store");
    const auto rows = read_pod<std::uint32_t>(in, file);
    FeatureSequence seq{id, store.kind_, FrameMatrix(rows, dim), fps};
    const std::size_t bytes = sizeof(float) * static_cast<std::size_t>(rows) * dim;
    if (!in.read(reinterpret_cast<char*>(seq.frames.data()), static_cast<std::streamsize>(bytes))) {
      throw IoError(file + ": truncated feature store");
    }
    store.put(std::move(seq));
  }
  return store;
}

// ---------------------------------------------------------------------------

StoreReader::StoreReader(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream header(path, std::ios::binary);
  if (!header) throw IoError("cannot open " + file);
  char magic[4];
  if (!header.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(file + ": not a feature store (bad magic)");
  }
  if (read_pod<std::uint32_t>(header, file) != kVersion) throw IoError(file + ": bad version");
  kind_ = static_cast<FeatureKind>(read_pod<std::uint32_t>(header, file));
  dim_ = static_cast<int>(read_pod<std::uint32_t>(header, file));
  const auto count = read_pod<std::uint64_t>(header, file);
  fps_ = read_pod<double>(header, file);

  std::ifstream idx(index_path(path));
  if (!idx) throw IoError("cannot open " + index_path(path).string());
  std::string tag;
  std::uint32_t version = 0;
  std::uint64_t listed = 0;
  if (!(idx >> tag >> version >> listed) || tag != "AVFSIDX" || listed != count) {
    throw IoError(index_path(path).string() + ": index does not match store");
  }
  std::string id;
  Entry e{};
  std::uint64_t prev_end = kHeaderBytes;
  while (idx >> id >> e.offset >> e.length) {
    if (e.offset < prev_end) throw IoError(index_path(path).string() + ": overlapping records");
    prev_end = e.offset + 8 + id.size() + sizeof(float) * std::uint64_t{e.length} * dim_;
    index_.emplace(id, e);
  }
  if (index_.size() != count) throw IoError(index_path(path).string() + ": incomplete index");

  fd_ = ::open(file.c_str(), O_RDONLY);
  if (fd_ < 0) throw IoError("cannot open " + file);
}

StoreReader::~StoreReader() {
  if (fd_ >= 0) ::close(fd_);
}

FeatureSequence StoreReader::get(const std::string& video_id) const {
  auto it = index_.find(video_id);
  if (it == index_.end()) throw MissingFeatureError(video_id);
  const Entry& e = it->second;
  const std::uint64_t data_offset = e.offset + 4 + video_id.size() + 4;
  FeatureSequence seq{video_id, kind_, FrameMatrix(e.length, dim_), fps_};
  const std::size_t bytes = sizeof(float) * static_cast<std::size_t>(seq.frames.size());
  char* dst = reinterpret_cast<char*>(seq.frames.data());
  std::size_t done = 0;
  while (done < bytes) {
    const ssize_t n = ::pread(fd_, dst + done, bytes - done,
                              static_cast<off_t>(data_offset + done));
    if (n <= 0) throw IoError("short read for video '" + video_id + "'");
    done += static_cast<std::size_t>(n);
  }
  return seq;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd NormalizationParams::apply(const FrameMatrix& frames) const {
  return apply(Eigen::MatrixXd(frames.cast<double>()));
}

Eigen::MatrixXd NormalizationParams::apply(const Eigen::MatrixXd& frames) const {
  if (empty()) return frames;
  if (frames.cols() != mean.size()) throw Error("normalization dimension mismatch");
  Eigen::MatrixXd out = frames.rowwise() - mean.transpose();
  out.array().rowwise() /= stddev.transpose().array();
  return out;
}

NormalizationParams normalize(const FeatureStore& store,
                              const std::vector<std::string>& stats_source) {
  if (stats_source.empty()) throw Error("normalization needs at least one video");
  const int dim = store.dim();
  // Two passes in 64-bit for numerical stability.
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  double frames = 0.0;
  for (const auto& id : stats_source) {
    const FrameMatrix& m = store.get(id).frames;
    sum += m.cast<double>().colwise().sum().transpose();
    frames += static_cast<double>(m.rows());
  }
  NormalizationParams p;
  p.mean = sum / frames;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  for (const auto& id : stats_source) {
    const Eigen::MatrixXd centered =
        store.get(id).frames.cast<double>().rowwise() - p.mean.transpose();
    sq += centered.array().square().colwise().sum().matrix().transpose();
  }
  Eigen::VectorXd var = sq / frames;
  for (int j = 0; j < dim; ++j) {
    if (var[j] < NormalizationParams::kVarianceFloor) {
      var[j] = NormalizationParams::kVarianceFloor;
      p.flagged.push_back(j);
    }
  }
  p.stddev = var.cwiseSqrt();
  return p;
}

FeatureSequence import_frame_csv(const std::filesystem::path& path, const std::string& video_id,
                                 FeatureKind kind, double fps) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (rows.empty() && line_no == 1) {
      char* end = nullptr;
      std::strtod(fields[0].c_str(), &end);
      if (end == fields[0].c_str()) continue;  // header
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(csv::parse_double(f, path.string(), line_no));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path.string(), line_no, "inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string(), line_no, "no frames");
  FeatureSequence seq{video_id, kind,
                      FrameMatrix(static_cast<Eigen::Index>(rows.size()),
                                  static_cast<Eigen::Index>(rows.front().size())),
                      fps};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      seq.frames(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          static_cast<float>(rows[r][c]);
    }
  }
  return seq;
}

}  // namespace avfp
