#include "tep/dataset.hpp"

#include <fstream>
#include <sstream>

#include "tep/errors.hpp"
#include "tep/json_io.hpp"

namespace fs = std::filesystem;

namespace tep {

std::string read_text_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& file, std::string_view content) {
  std::error_code ec;
  if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + file.parent_path().string() + ": " + ec.message());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + file.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + file.string());
}

void write_mask_sequences(const fs::path& dir, const ObjectSequences& masks) {
  for (const auto& [object_id, seq] : masks) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      write_text_file(dir / object_id / (frame_stem(static_cast<int>(t)) + ".rle"),
                      seq[t].to_string() + "\n");
    }
  }
}

ObjectSequences read_mask_sequences(const fs::path& dir, std::span<const std::string> object_ids,
                                    int frame_count, FrameDims dims) {
  ObjectSequences out;
  for (const std::string& id : object_ids) {
    MaskSequence seq;
    seq.reserve(static_cast<std::size_t>(frame_count));
    for (int t = 0; t < frame_count; ++t) {
      const fs::path file = dir / id / (frame_stem(t) + ".rle");
      Mask m = Mask::parse(read_text_file(file));
      if (m.dims() != dims) {
        throw Error(ErrorKind::DimensionMismatch, file.string() + " does not match the video size");
      }
      seq.push_back(std::move(m));
    }
    out.emplace(id, std::move(seq));
  }
  return out;
}

fs::path write_dataset(const fs::path& root, std::span<const SyntheticVideo> videos) {
  Manifest manifest;
  for (const SyntheticVideo& v : videos) {
    const fs::path dir = root / v.spec.video_id;
    write_text_file(dir / "scenario.json", dump_document(to_json(v.spec)));
    for (std::size_t t = 0; t < v.frames.size(); ++t) {
      write_text_file(dir / "frames" / (frame_stem(static_cast<int>(t)) + ".lbl"),
                      v.frames[t].to_string() + "\n");
    }
    write_mask_sequences(dir / "gt", v.gt);
    manifest.videos.push_back(v.entry);
  }
  const fs::path file = root / "manifest.json";
  save_manifest(file, manifest);
  return file;
}

std::vector<std::string> object_ids(const VideoEntry& entry) {
  std::vector<std::string> ids;
  for (const ObjectEntry& o : entry.objects) ids.push_back(o.object_id);
  return ids;
}

ObjectSequences load_ground_truth(const fs::path& dataset_root, const VideoEntry& entry) {
  if (!entry.gt_path) throw Error(ErrorKind::IoError, "video '" + entry.video_id + "' has no gt_path");
  const auto ids = object_ids(entry);
  return read_mask_sequences(dataset_root / *entry.gt_path, ids, entry.frame_count, entry.dims());
}

}  // namespace tep
