#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "avfp/catalog.hpp"

namespace test {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("avfp_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline avfp::IdentityRecord identity(const std::string& id, avfp::Dataset d = avfp::Dataset::CremaD,
                                     avfp::Gender g = avfp::Gender::Female) {
  return {id, d, g, avfp::Ethnicity::Caucasian, avfp::AgeRange::Age20To30};
}

inline avfp::AvatarVideo video(const std::string& target, const std::string& driver, int clip,
                               avfp::Generator g = avfp::Generator::Gaga,
                               avfp::Dataset d = avfp::Dataset::CremaD) {
  return {avfp::make_video_id(g, target, driver, clip), target, driver, g, clip, d};
}

// `n` identities with `clips` self videos each, one generator, no cross.
inline avfp::Catalog self_only(int n, int clips, avfp::Generator g = avfp::Generator::Gaga) {
  std::vector<avfp::IdentityRecord> ids;
  std::vector<avfp::AvatarVideo> videos;
  for (int i = 0; i < n; ++i) {
    const std::string id = "p" + std::to_string(i);
    ids.push_back(identity(id, avfp::Dataset::CremaD, i % 2 ? avfp::Gender::Male : avfp::Gender::Female));
    for (int c = 0; c < clips; ++c) videos.push_back(video(id, id, c, g));
  }
  return avfp::Catalog(ids, videos);
}

}  // namespace test
