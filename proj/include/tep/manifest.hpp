#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tep/geometry.hpp"

namespace tep {

struct ObjectEntry {
  std::string object_id;
  int first_frame_index = 0;
  Mask first_mask;
};

struct VideoEntry {
  std::string video_id;
  int frame_count = 0;
  int width = 0;
  int height = 0;
  std::vector<ObjectEntry> objects;
  /// Relative to the dataset root; holds <object_id>/<frame>.rle files.
  std::optional<std::string> gt_path;

  FrameDims dims() const { return {width, height}; }
};

struct Manifest {
  /// As written in the file; resolve with resolve_dataset_root.
  std::string dataset_root = ".";
  std::vector<VideoEntry> videos;
};

/// Throws ManifestError describing the first violated rule.
void validate(const Manifest& manifest);

Manifest load_manifest(const std::filesystem::path& file);
void save_manifest(const std::filesystem::path& file, const Manifest& manifest);

/// dataset_root interpreted relative to the directory holding the manifest.
std::filesystem::path resolve_dataset_root(const std::filesystem::path& manifest_file,
                                           const Manifest& manifest);

/// Zero-padded frame file stem, e.g. 7 -> "00007".
std::string frame_stem(int frame_index);

}  // namespace tep
