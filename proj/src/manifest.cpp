#include "tep/manifest.hpp"

#include <cstdio>
#include <set>

#include "tep/dataset.hpp"
#include "tep/errors.hpp"
#include "tep/json_io.hpp"

namespace fs = std::filesystem;

namespace tep {
namespace {

// Ids become directory names in the run layout.
bool path_safe(const std::string& id) {
  return !id.empty() && id != "." && id != ".." && id.find('/') == std::string::npos &&
         id.find('\0') == std::string::npos;
}

}  // namespace

void validate(const Manifest& manifest) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::ManifestError, msg); };
  if (manifest.videos.empty()) fail("manifest lists no videos");
  std::set<std::string> videos;
  for (const VideoEntry& v : manifest.videos) {
    if (!path_safe(v.video_id)) fail("invalid video id '" + v.video_id + "'");
    if (!videos.insert(v.video_id).second) fail("duplicate video id '" + v.video_id + "'");
    const std::string where = "video '" + v.video_id + "': ";
    if (v.frame_count <= 0) fail(where + "frame_count must be positive");
    if (v.width <= 0 || v.height <= 0) fail(where + "width and height must be positive");
    if (v.objects.empty()) fail(where + "no objects");
    std::set<std::string> objects;
    for (const ObjectEntry& o : v.objects) {
      if (!path_safe(o.object_id)) fail(where + "invalid object id '" + o.object_id + "'");
      if (!objects.insert(o.object_id).second) fail(where + "duplicate object id '" + o.object_id + "'");
      if (o.first_frame_index < 0 || o.first_frame_index >= v.frame_count) {
        fail(where + "object '" + o.object_id + "' first_frame_index out of range");
      }
      if (o.first_mask.dims() != v.dims()) {
        fail(where + "object '" + o.object_id + "' first_mask size differs from the video");
      }
      if (o.first_mask.is_empty()) fail(where + "object '" + o.object_id + "' first_mask is empty");
    }
  }
}

Manifest load_manifest(const fs::path& file) {
  const std::string text = read_text_file(file);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ManifestError, file.string() + ": " + e.what());
  }
  Manifest m = manifest_from_json(j);
  validate(m);
  return m;
}

void save_manifest(const fs::path& file, const Manifest& manifest) {
  validate(manifest);
  write_text_file(file, dump_document(to_json(manifest)));
}

fs::path resolve_dataset_root(const fs::path& manifest_file, const Manifest& manifest) {
  const fs::path root(manifest.dataset_root);
  if (root.is_absolute()) return root;
  return (manifest_file.parent_path() / root).lexically_normal();
}

std::string frame_stem(int frame_index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", frame_index);
  return buf;
}

}  // namespace tep
