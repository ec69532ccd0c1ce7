#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace echoprint {

inline const std::string kUnlabelled = "UNLABELLED";

// One row of manifest.csv: path,label,room_id,position_id,codec_mode,loss_rate,seed
struct ManifestEntry {
  std::string path;
  std::string label;  // kUnlabelled for unlabelled traces
  std::string room_id;
  int position_id = 0;
  std::string codec_mode;
  double loss_rate = 0.0;
  std::uint64_t seed = 0;

  bool labelled() const { return label != kUnlabelled; }
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  // Relative paths are resolved against the manifest's directory. Throws
  // DataError on malformed rows or missing files (when check_paths is set).
  static DatasetManifest load(const std::filesystem::path& csv, bool check_paths = true);
  void save(const std::filesystem::path& csv) const;
};

}  // namespace echoprint
