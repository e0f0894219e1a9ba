#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tep/json_io.hpp"
#include "tep/pipeline.hpp"

namespace tep::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kPartial = 2, kTotalFailure = 3 };

struct RunConfig {
  FusionConfig fusion;
  PipelineOptions pipeline;
};

/// {"fusion": {...}, "pipeline": {"apply_same_frame": ...}} with every default.
Json default_config_document();
/// Strict parse; missing keys raise ConfigError naming the key and default.
RunConfig config_from_json(const Json& doc);
RunConfig load_config(const std::filesystem::path& file);

/// Generates a suite and writes it as a dataset; returns the manifest path.
std::filesystem::path simulate(const std::string& suite, std::uint64_t seed,
                               const std::filesystem::path& out);

/// Evaluates <pred>/<video>/<object>/<frame>.rle against the manifest's
/// ground truth. Videos whose predictions cannot be scored carry an error.
DatasetResult evaluate_predictions(const std::filesystem::path& pred_dir,
                                   const std::filesystem::path& manifest_file,
                                   int f_dot_tolerance = 1);

/// Side-by-side table of run reports plus delta rows against the first run.
/// Videos missing from any run are excluded with a warning on `err`.
std::string compare_reports(const std::vector<std::filesystem::path>& run_dirs, std::ostream& err);

/// Exit code for a batch: 0 all ok, 2 some failed, 3 all failed.
int batch_exit_code(const DatasetResult& result);

int main(int argc, char** argv);

}  // namespace tep::cli
