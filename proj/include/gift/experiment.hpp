#pragma once

#include "gift/config.hpp"
#include "gift/fr.hpp"
#include "gift/gals.hpp"
#include "gift/metrics.hpp"
#include "gift/perceptual.hpp"
#include "gift/segmentation.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gift {

struct ManifestEntry {
  std::string path;      // relative to the dataset directory
  std::string identity;
  std::string group;
  std::string target;    // identity id the entry impersonates
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;  // ordered by path
  std::vector<std::string> warnings;

  std::filesystem::path imagePath(const ManifestEntry& e) const { return root / e.path; }
  // First entry (in manifest order) carrying the identity.
  const ManifestEntry& entryForIdentity(const std::string& identity) const;
};

// Reads and validates <dir>/manifest.csv (columns: path, identity, group,
// target). Every image must exist and decode; every target must resolve.
DatasetManifest ingest(const std::filesystem::path& datasetDir);

// Toy backend bundle assembled from an experiment config.
struct BackendSet {
  std::shared_ptr<ToyGenerator> generator;
  std::shared_ptr<PerceptualModel> perceptual;
  std::shared_ptr<SegmentationModel> segmentation;
  Ensemble surrogates;
  std::vector<std::shared_ptr<const FrModel>> heldOut;
};

struct ExperimentConfig {
  std::filesystem::path datasetDir;
  std::filesystem::path outputDir;
  OptimConfig optim;
  DiversifyParams diversify;
  nlohmann::json generator;     // backend blocks, e.g. {"type":"toy","seed":7}
  nlohmann::json perceptual;
  nlohmann::json segmentation;
  std::vector<nlohmann::json> surrogates;
  std::vector<nlohmann::json> heldOut;
  std::filesystem::path frCacheDir = "fixture-cache";
  std::filesystem::path thresholdsFile;  // empty -> builtin registry
  double far = 0.01;
  std::map<std::string, double> tauOverrides;  // toy models are not in the registry
  bool evalVerification = true;
  bool evalIdentification = false;
  std::vector<int> rankNs = {1, 5};
  bool evalQuality = true;
  bool evalFid = true;
  int workers = 4;
  bool force = false;

  static ExperimentConfig fromJson(const nlohmann::json& j,
                                   const std::filesystem::path& baseDir);
  static ExperimentConfig fromFile(const std::filesystem::path& path);

  void validate() const;
};

BackendSet buildBackends(const ExperimentConfig& config);

double tauForModel(const ExperimentConfig& config, const FrModel& model);

struct RunResult {
  std::filesystem::path reportPath;
  nlohmann::json report;
  int failureCount = 0;
  long heldOutQueriesDuringProtect = 0;
};

// Full pipeline over the manifest: invert + protect per entry with the
// surrogate ensemble, then evaluation on the held-out models. Per-image
// artifacts land in <out>/<image_id>/{protected.png, latent/, trace.csv,
// metrics.json}; existing protected images are reused unless force.
RunResult runExperiment(const ExperimentConfig& config);

// Re-aggregates report.json from existing per-image artifacts (no
// optimization). Fails if artifacts are missing.
RunResult aggregateReport(const ExperimentConfig& config);

std::string imageIdFor(std::size_t index, const ManifestEntry& entry);

void writeTraceCsv(const std::filesystem::path& path,
                   const std::vector<SearchTracePoint>& trace);

}  // namespace gift
