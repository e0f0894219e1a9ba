#pragma once

// On-disk layout shared by simulate, run and eval:
//
//   <root>/manifest.json
//   <root>/<video>/scenario.json
//   <root>/<video>/frames/<frame>.lbl
//   <root>/<video>/gt/<object>/<frame>.rle
//
// Run outputs reuse the mask layout: <out>/<video>/<object>/<frame>.rle.

#include <filesystem>
#include <span>
#include <string>

#include "tep/manifest.hpp"
#include "tep/metrics.hpp"
#include "tep/simulator.hpp"

namespace tep {

/// Throws IoError.
std::string read_text_file(const std::filesystem::path& file);
/// Creates parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& file, std::string_view content);

/// Writes <dir>/<object>/<frame>.rle for every object and frame.
void write_mask_sequences(const std::filesystem::path& dir, const ObjectSequences& masks);
/// Reads `frame_count` masks per listed object. Throws IoError when a file is
/// missing and DimensionMismatch when a mask does not match `dims`.
ObjectSequences read_mask_sequences(const std::filesystem::path& dir,
                                    std::span<const std::string> object_ids, int frame_count,
                                    FrameDims dims);

/// Writes every video plus manifest.json under `root`; returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& root,
                                    std::span<const SyntheticVideo> videos);

/// Ground truth of one manifest video. Throws IoError without gt_path.
ObjectSequences load_ground_truth(const std::filesystem::path& dataset_root,
                                  const VideoEntry& entry);

std::vector<std::string> object_ids(const VideoEntry& entry);

}  // namespace tep
