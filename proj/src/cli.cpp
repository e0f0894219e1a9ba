#include "tep/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <set>

#include "tep/dataset.hpp"
#include "tep/errors.hpp"
#include "tep/simulator.hpp"

namespace fs = std::filesystem;

namespace tep::cli {
namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string signed_percent(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f", *v * 100.0);
  return buf;
}

bool is_usage_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::ManifestError:
    case ErrorKind::UnknownSuite:
    case ErrorKind::SpecError:
    case ErrorKind::InvalidArgument:
      return true;
    default:
      return false;
  }
}

struct RunArgs {
  std::string manifest;
  std::string config;
  std::string out;
  std::string backend = "mock:oracle";
  std::string segmenter, tracker, detector, judge;
  bool baseline_only = false;
  bool print_config = false;
  int jobs = 1;
};

int cmd_run(const RunArgs& a) {
  RunConfig cfg = a.config.empty() ? config_from_json(default_config_document()) : load_config(a.config);
  if (a.print_config) {
    Json doc = default_config_document();
    doc["fusion"] = to_json(cfg.fusion);
    doc["pipeline"]["apply_same_frame"] = cfg.pipeline.apply_same_frame;
    std::cout << dump_document(doc);
    return kOk;
  }
  if (a.manifest.empty() || a.out.empty()) {
    std::cerr << "run: --manifest and --out are required\n";
    return kUsage;
  }
  cfg.pipeline.baseline_only = a.baseline_only;

  const BackendSpec all = BackendSpec::parse(a.backend);
  auto role = [&](const std::string& s) { return s.empty() ? all : BackendSpec::parse(s); };
  BackendSpecs specs{role(a.segmenter), role(a.tracker), role(a.detector), role(a.judge)};

  const Manifest manifest = load_manifest(a.manifest);
  const fs::path root = resolve_dataset_root(a.manifest, manifest);
  std::shared_ptr<const SceneSource> scenes;
  if (specs.any_mock()) scenes = std::make_shared<DatasetScenes>(root);
  ConfiguredProvider provider(specs, scenes);

  const DatasetResult result =
      run_dataset(manifest, root, provider, cfg.fusion, cfg.pipeline, std::max(a.jobs, 1));
  write_run_artifacts(a.out, result, RunInfo{cfg.fusion, cfg.pipeline, specs});

  for (const VideoOutcome& v : result.videos) {
    if (v.error) std::cerr << "video " << v.result.video_id << " failed: " << *v.error << "\n";
  }
  std::cout << format_report(result);
  return batch_exit_code(result);
}

int cmd_eval(const std::string& pred, const std::string& manifest, const std::string& out_arg,
             int f_dot_tolerance) {
  const DatasetResult result = evaluate_predictions(pred, manifest, f_dot_tolerance);
  const fs::path out = out_arg.empty() ? fs::path(pred) : fs::path(out_arg);
  write_text_file(out / "report.txt", format_report(result));
  write_text_file(out / "report.json", dump_document(report_document(result)));
  for (const VideoOutcome& v : result.videos) {
    if (v.error) std::cerr << "video " << v.result.video_id << ": " << *v.error << "\n";
  }
  std::cout << format_report(result);
  return batch_exit_code(result);
}

}  // namespace

Json default_config_document() {
  return {{"fusion", to_json(FusionConfig{})}, {"pipeline", {{"apply_same_frame", PipelineOptions{}.apply_same_frame}}}};
}

RunConfig config_from_json(const Json& doc) {
  const Json defaults = default_config_document();
  if (!doc.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
  for (const auto& [section, _] : doc.items()) {
    if (!defaults.contains(section)) throw Error(ErrorKind::ConfigError, "unknown config section '" + section + "'");
  }
  for (const auto& [section, value] : defaults.items()) {
    if (!doc.contains(section)) {
      throw Error(ErrorKind::ConfigError,
                  "missing config section '" + section + "' (default " + value.dump() + ")");
    }
  }
  RunConfig cfg;
  cfg.fusion = fusion_config_from_json(doc["fusion"]);
  const Json& p = doc["pipeline"];
  if (!p.is_object()) throw Error(ErrorKind::ConfigError, "pipeline section must be an object");
  for (const auto& [key, _] : p.items()) {
    if (!defaults["pipeline"].contains(key)) {
      throw Error(ErrorKind::ConfigError, "unknown config key 'pipeline." + key + "'");
    }
  }
  if (!p.contains("apply_same_frame")) {
    throw Error(ErrorKind::ConfigError, "missing config key 'pipeline.apply_same_frame' (default true)");
  }
  if (!p["apply_same_frame"].is_boolean()) {
    throw Error(ErrorKind::ConfigError, "pipeline.apply_same_frame must be true or false");
  }
  cfg.pipeline.apply_same_frame = p["apply_same_frame"].get<bool>();
  return cfg;
}

RunConfig load_config(const fs::path& file) {
  Json doc;
  try {
    doc = Json::parse(read_text_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, file.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

fs::path simulate(const std::string& suite, std::uint64_t seed, const fs::path& out) {
  std::vector<SyntheticVideo> videos;
  for (const ScenarioSpec& spec : scenario_suite(suite, seed)) videos.push_back(generate(spec));
  return write_dataset(out, videos);
}

DatasetResult evaluate_predictions(const fs::path& pred_dir, const fs::path& manifest_file,
                                   int f_dot_tolerance) {
  const Manifest manifest = load_manifest(manifest_file);
  const fs::path root = resolve_dataset_root(manifest_file, manifest);
  DatasetResult result;
  for (const VideoEntry& entry : manifest.videos) {
    if (!entry.gt_path) continue;
    VideoOutcome outcome;
    outcome.result.video_id = entry.video_id;
    try {
      const fs::path dir = pred_dir / entry.video_id;
      if (!fs::is_directory(dir)) throw Error(ErrorKind::IoError, "no predictions at " + dir.string());
      std::set<std::string> found;
      for (const auto& d : fs::directory_iterator(dir)) {
        if (d.is_directory()) found.insert(d.path().filename().string());
      }
      const std::vector<std::string> ids = object_ids(entry);
      const std::set<std::string> expected(ids.begin(), ids.end());
      if (found != expected) {
        std::vector<std::string> missing, extra;
        std::set_difference(expected.begin(), expected.end(), found.begin(), found.end(),
                            std::back_inserter(missing));
        std::set_difference(found.begin(), found.end(), expected.begin(), expected.end(),
                            std::back_inserter(extra));
        throw Error(ErrorKind::ObjectSetMismatch, "missing [" + join(missing, ", ") + "] extra [" +
                                                      join(extra, ", ") + "]");
      }
      const ObjectSequences pred = read_mask_sequences(dir, ids, entry.frame_count, entry.dims());
      outcome.report = evaluate(pred, load_ground_truth(root, entry), EvalConfig{f_dot_tolerance, {}});
    } catch (const Error& e) {
      outcome.error = e.what();
    }
    result.videos.push_back(std::move(outcome));
  }
  result.aggregate = aggregate_reports(result.videos);
  return result;
}

std::string compare_reports(const std::vector<fs::path>& run_dirs, std::ostream& err) {
  struct Run {
    std::string name;
    std::map<std::string, Scores> videos;
  };
  std::vector<Run> runs;
  for (const fs::path& dir : run_dirs) {
    const fs::path file = dir / "report.json";
    Run run;
    run.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    try {
      const Json doc = Json::parse(read_text_file(file));
      if (!doc.contains("videos") || !doc["videos"].is_array()) {
        throw Error(ErrorKind::IoError, "no videos list");
      }
      for (const Json& v : doc["videos"]) {
        run.videos[v.at("video_id").get<std::string>()] = report_from_json(v.at("report")).overall;
      }
    } catch (const std::exception& e) {
      err << "warning: skipping " << file.string() << ": " << e.what() << "\n";
      continue;
    }
    runs.push_back(std::move(run));
  }
  if (runs.empty()) throw Error(ErrorKind::IoError, "no readable run reports");

  std::set<std::string> all, common;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::set<std::string> ids;
    for (const auto& [id, _] : runs[i].videos) ids.insert(id);
    all.insert(ids.begin(), ids.end());
    if (i == 0) {
      common = ids;
    } else {
      std::set<std::string> keep;
      std::set_intersection(common.begin(), common.end(), ids.begin(), ids.end(),
                            std::inserter(keep, keep.begin()));
      common = std::move(keep);
    }
  }
  if (common.size() != all.size()) {
    std::vector<std::string> excluded;
    std::set_difference(all.begin(), all.end(), common.begin(), common.end(), std::back_inserter(excluded));
    err << "warning: comparing " << common.size() << " shared videos; excluded: " << join(excluded, ", ")
        << "\n";
  }

  std::string out = "Method";
  for (std::string_view c : kReportColumns) {
    out += " | ";
    out += c;
  }
  out += "\n";
  std::vector<Scores> means;
  for (const Run& run : runs) {
    std::vector<Scores> picked;
    for (const std::string& id : common) picked.push_back(run.videos.at(id));
    means.push_back(picked.empty() ? Scores{} : mean_scores(picked));
    out += run.name + " | " + format_scores_row(means.back()) + "\n";
  }
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto base = in_column_order(means[0]);
    const auto cur = in_column_order(means[i]);
    out += "delta " + runs[i].name + " vs " + runs[0].name;
    for (std::size_t c = 0; c < base.size(); ++c) {
      std::optional<double> d;
      if (base[c] && cur[c]) d = *cur[c] - *base[c];
      out += " | " + signed_percent(d);
    }
    out += "\n";
  }
  return out;
}

int batch_exit_code(const DatasetResult& result) {
  const std::size_t failed = result.failed_count();
  if (failed == 0) return kOk;
  return failed == result.videos.size() ? kTotalFailure : kPartial;
}

int main(int argc, char** argv) {
  CLI::App app{"Video object segmentation with auxiliary box prompts"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic scenario suite");
  std::string suite, sim_out;
  std::uint64_t seed = 0;
  sim->add_option("--suite", suite, "drift-tiny, distractor-semantic, reappear or crowded")->required();
  sim->add_option("--seed", seed, "Suite seed");
  sim->add_option("--out", sim_out, "Output dataset directory")->required();

  auto* run = app.add_subcommand("run", "Run the pipeline over a manifest");
  RunArgs ra;
  run->add_option("--manifest", ra.manifest, "Dataset manifest");
  run->add_option("--config", ra.config, "JSON config file");
  run->add_option("--out", ra.out, "Run output directory");
  run->add_option("--backend", ra.backend, "Backend spec for every role")->capture_default_str();
  run->add_option("--segmenter", ra.segmenter, "Segmenter backend spec");
  run->add_option("--tracker", ra.tracker, "Tracker backend spec");
  run->add_option("--detector", ra.detector, "Detector backend spec");
  run->add_option("--judge", ra.judge, "Judge backend spec");
  run->add_flag("--baseline-only", ra.baseline_only, "Plain propagation without enhancement");
  run->add_option("--jobs", ra.jobs, "Videos processed concurrently")->check(CLI::PositiveNumber);
  run->add_flag("--print-config", ra.print_config, "Print the effective config and exit");

  auto* ev = app.add_subcommand("eval", "Score predictions against ground truth");
  std::string pred, eval_manifest, eval_out;
  int f_dot_tolerance = FusionConfig{}.f_dot_tolerance;
  ev->add_option("--pred", pred, "Prediction directory")->required();
  ev->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
  ev->add_option("--out", eval_out, "Report directory (default: --pred)");
  ev->add_option("--f-dot-tolerance", f_dot_tolerance, "Fixed boundary tolerance in pixels");

  auto* rep = app.add_subcommand("report", "Compare run reports");
  std::vector<std::string> run_dirs;
  rep->add_option("runs", run_dirs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) {
      std::cout << simulate(suite, seed, sim_out).string() << "\n";
      return kOk;
    }
    if (*run) return cmd_run(ra);
    if (*ev) return cmd_eval(pred, eval_manifest, eval_out, f_dot_tolerance);
    if (*rep) {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      std::cout << compare_reports(dirs, std::cerr);
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_usage_error(e.kind()) ? kUsage : kTotalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTotalFailure;
  }
  return kUsage;
}

}  // namespace tep::cli
