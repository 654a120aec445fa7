#include "gift/experiment.hpp"

#include "gift/png_io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace gift {

namespace fs = std::filesystem;
using nlohmann::json;

const ManifestEntry& DatasetManifest::entryForIdentity(const std::string& identity) const {
  for (const auto& e : entries)
    if (e.identity == identity) return e;
  throw ValidationError("no manifest entry for identity: " + identity);
}

namespace {

std::vector<std::string> splitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    while (!s.empty() && s.back() == ' ') s.pop_back();
  }
  return out;
}

}  // namespace

DatasetManifest ingest(const fs::path& datasetDir) {
  fs::path csv = datasetDir / "manifest.csv";
  std::ifstream in(csv);
  if (!in) throw ValidationError("missing manifest.csv in " + datasetDir.string());

  std::string header;
  if (!std::getline(in, header)) throw ValidationError("empty manifest.csv");
  std::vector<std::string> cols = splitCsvLine(header);
  auto colIndex = [&cols](const std::string& name) {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return static_cast<int>(i);
    throw ValidationError("manifest.csv is missing column: " + name);
  };
  int pathCol = colIndex("path"), idCol = colIndex("identity");
  int groupCol = colIndex("group"), targetCol = colIndex("target");

  DatasetManifest manifest;
  manifest.root = datasetDir;
  std::vector<std::string> errors;
  std::string line;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> f = splitCsvLine(line);
    int need = std::max({pathCol, idCol, groupCol, targetCol});
    if (static_cast<int>(f.size()) <= need) {
      errors.push_back("row " + std::to_string(row) + ": too few columns");
      continue;
    }
    ManifestEntry e{f[static_cast<std::size_t>(pathCol)], f[static_cast<std::size_t>(idCol)],
                    f[static_cast<std::size_t>(groupCol)], f[static_cast<std::size_t>(targetCol)]};
    if (!fs::exists(manifest.root / e.path)) {
      errors.push_back("row " + std::to_string(row) + ": missing file " + e.path);
      continue;
    }
    try {
      loadPng(manifest.root / e.path);
    } catch (const std::exception& ex) {
      errors.push_back("row " + std::to_string(row) + ": unreadable image " + e.path + ": " +
                       ex.what());
      continue;
    }
    manifest.entries.push_back(std::move(e));
  }

  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });

  std::map<std::string, int> identityCount;
  for (const auto& e : manifest.entries) ++identityCount[e.identity];
  for (const auto& [id, count] : identityCount)
    if (count > 1)
      manifest.warnings.push_back("identity '" + id + "' appears " + std::to_string(count) +
                                  " times");
  for (const auto& e : manifest.entries)
    if (identityCount.find(e.target) == identityCount.end())
      errors.push_back("entry " + e.path + ": dangling target identity '" + e.target + "'");

  if (!errors.empty()) {
    std::string msg = "manifest validation failed:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  return manifest;
}

// ---- config ----

ExperimentConfig ExperimentConfig::fromJson(const json& j, const fs::path& baseDir) {
  ExperimentConfig c;
  auto resolve = [&baseDir](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : baseDir / q;
  };
  c.datasetDir = resolve(j.at("dataset_dir").get<std::string>());
  c.outputDir = resolve(j.at("output_dir").get<std::string>());
  if (j.contains("optim")) {
    const json& o = j["optim"];
    c.optim.t1Steps = o.value("t1_steps", c.optim.t1Steps);
    c.optim.t1Lr = o.value("t1_lr", c.optim.t1Lr);
    c.optim.t2Steps = o.value("t2_steps", c.optim.t2Steps);
    c.optim.t2Lr = o.value("t2_lr", c.optim.t2Lr);
    c.optim.alpha = o.value("alpha", c.optim.alpha);
    c.optim.lambdaAdv = o.value("lambda_adv", c.optim.lambdaAdv);
    c.optim.lambdaSem = o.value("lambda_sem", c.optim.lambdaSem);
    c.optim.diversifyProb = o.value("diversify_prob", c.optim.diversifyProb);
    if (o.contains("search_mode"))
      c.optim.searchMode = searchModeFromString(o["search_mode"].get<std::string>());
    if (o.contains("space")) c.optim.space = latentSpaceFromString(o["space"].get<std::string>());
    c.optim.seed = o.value("seed", c.optim.seed);
  }
  c.optim.seed = j.value("seed", c.optim.seed);
  if (j.contains("diversify")) {
    const json& d = j["diversify"];
    c.diversify.resizeLo = d.value("resize_lo", c.diversify.resizeLo);
    c.diversify.resizeHi = d.value("resize_hi", c.diversify.resizeHi);
    c.diversify.noiseSigma = d.value("noise_sigma", c.diversify.noiseSigma);
  }
  c.generator = j.value("generator", json{{"type", "toy"}});
  c.perceptual = j.value("perceptual", json{{"type", "toy"}});
  c.segmentation = j.value("segmentation", json{{"type", "toy"}});
  for (const auto& s : j.value("surrogates", json::array())) c.surrogates.push_back(s);
  for (const auto& s : j.value("held_out", json::array())) c.heldOut.push_back(s);
  if (j.contains("fr_cache_dir")) c.frCacheDir = resolve(j["fr_cache_dir"].get<std::string>());
  if (j.contains("thresholds_file"))
    c.thresholdsFile = resolve(j["thresholds_file"].get<std::string>());
  c.far = j.value("far", c.far);
  const json overrides = j.value("tau_overrides", json::object());
  for (const auto& [k, v] : overrides.items()) c.tauOverrides[k] = v.get<double>();
  if (j.contains("metrics")) {
    const json& m = j["metrics"];
    c.evalVerification = m.value("verification", c.evalVerification);
    c.evalIdentification = m.value("identification", c.evalIdentification);
    if (m.contains("rank_ns")) c.rankNs = m["rank_ns"].get<std::vector<int>>();
    c.evalQuality = m.value("quality", c.evalQuality);
    c.evalFid = m.value("fid", c.evalFid);
  }
  c.workers = j.value("workers", c.workers);
  c.force = j.value("force", c.force);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::fromFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid config JSON: ") + e.what());
  }
  return fromJson(j, path.parent_path());
}

void ExperimentConfig::validate() const {
  optim.validate();
  diversify.validate();
  if (surrogates.empty()) throw ValidationError("config needs at least one surrogate model");
  if (workers < 1) throw ValidationError("workers must be >= 1");
  auto idOf = [](const json& b) { return b.dump(); };
  for (const auto& h : heldOut)
    for (const auto& s : surrogates)
      if (idOf(h) == idOf(s))
        throw ValidationError("held-out and surrogate lists overlap: " + h.dump());
}

// ---- backends ----

namespace {

std::shared_ptr<const FrModel> buildFrModel(const json& block, const ExperimentConfig& cfg,
                                            const ToyGenerator& gen,
                                            std::optional<ToyIdentityDataset>& dataset) {
  std::string type = block.value("type", "toy");
  if (type != "toy")
    throw ValidationError("FR backend type '" + type +
                          "' is a checkpoint-adapter contract; this build ships 'toy'");
  std::uint64_t seed = block.value("seed", 1);
  int width = block.value("width", 0);
  std::ostringstream key;
  key << "toyfr_" << gen.fingerprint() << "_s" << seed << "_w" << (width == 0 ? 16 : 24);
  if (fs::exists(cfg.frCacheDir / key.str() / "meta.json"))
    return ToyFrModel::load(cfg.frCacheDir / key.str());
  if (!dataset.has_value()) dataset = buildToyIdentityDataset(gen);
  return fitToyFrCached(gen, *dataset, seed, width, cfg.frCacheDir);
}

}  // namespace

BackendSet buildBackends(const ExperimentConfig& config) {
  BackendSet set;
  if (config.generator.value("type", "toy") != "toy")
    throw ValidationError("generator checkpoint adapters are interface contracts; this build ships 'toy'");
  set.generator = std::make_shared<ToyGenerator>(config.generator.value("seed", 7),
                                                 config.generator.value("split_layer", 4));
  if (config.perceptual.value("type", "toy") != "toy")
    throw ValidationError("perceptual checkpoint adapters are interface contracts; this build ships 'toy'");
  set.perceptual = std::make_shared<ToyPerceptualModel>(config.perceptual.value("seed", 23));
  if (config.segmentation.value("type", "toy") != "toy")
    throw ValidationError("segmentation checkpoint adapters are interface contracts; this build ships 'toy'");
  set.segmentation = std::make_shared<ToySegmentationModel>(
      config.segmentation.value("seed", 11), config.segmentation.value("classes", 6));

  std::optional<ToyIdentityDataset> dataset;
  for (const auto& block : config.surrogates)
    set.surrogates.models.push_back(buildFrModel(block, config, *set.generator, dataset));
  for (const auto& block : config.heldOut)
    set.heldOut.push_back(buildFrModel(block, config, *set.generator, dataset));
  set.surrogates.validate();

  for (const auto& h : set.heldOut)
    for (const auto& s : set.surrogates.models)
      if (h->id() == s->id())
        throw ValidationError("model '" + h->id() + "' is both surrogate and held-out");
  return set;
}

double tauForModel(const ExperimentConfig& config, const FrModel& model) {
  auto it = config.tauOverrides.find(model.id());
  if (it != config.tauOverrides.end()) return it->second;
  ThresholdRegistry reg = config.thresholdsFile.empty()
                              ? ThresholdRegistry::builtinDefaults()
                              : ThresholdRegistry::fromJsonFile(config.thresholdsFile);
  return reg.tau(model.id(), config.far);
}

// ---- run ----

std::string imageIdFor(std::size_t index, const ManifestEntry& entry) {
  std::string stem = fs::path(entry.path).stem().string();
  for (char& c : stem)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", index);
  return std::string(buf) + "_" + stem;
}

void writeTraceCsv(const fs::path& path, const std::vector<SearchTracePoint>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write trace: " + path.string());
  out << "step,L_adv,L_sem,L_total\n";
  char buf[160];
  for (const auto& p : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", p.step, p.adv, p.sem, p.total);
    out << buf;
  }
}

namespace {

json psnrToJson(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

struct EntryOutcome {
  std::string imageId;
  bool ok = false;
  std::string error;
};

json computeEntryMetrics(const ExperimentConfig& config, const BackendSet& backends,
                         const DatasetManifest& manifest, const ManifestEntry& entry,
                         const fs::path& dir) {
  FaceImage source = loadPng(manifest.imagePath(entry));
  FaceImage target = loadPng(manifest.imagePath(manifest.entryForIdentity(entry.target)));
  FaceImage protectedImg = loadPng(dir / "protected.png");

  json m;
  m["image_id"] = dir.filename().string();
  m["identity"] = entry.identity;
  m["target"] = entry.target;

  json models = json::object();
  auto evalModel = [&](const FrModel& model) {
    Embedding eTarget = model.embed(target);
    Embedding eSource = model.embed(source);
    Embedding eProt = model.embed(protectedImg);
    json jm;
    jm["cos_clean"] = cosineSimilarity(eSource, eTarget);
    jm["cos_protected"] = cosineSimilarity(eProt, eTarget);
    return jm;
  };
  for (const auto& model : backends.heldOut) models[model->id()] = evalModel(*model);
  m["held_out"] = models;
  json surro = json::object();
  for (const auto& model : backends.surrogates.models) surro[model->id()] = evalModel(*model);
  m["surrogates"] = surro;

  if (config.evalQuality) {
    m["psnr_db"] = psnrToJson(psnr(protectedImg, source));
    m["ssim"] = ssim(protectedImg, source);
  }
  return m;
}

void produceArtifacts(const ExperimentConfig& config, const BackendSet& backends,
                      const DatasetManifest& manifest, std::size_t index,
                      const ManifestEntry& entry) {
  fs::path dir = config.outputDir / imageIdFor(index, entry);
  fs::create_directories(dir);
  if (!config.force && fs::exists(dir / "protected.png")) return;

  FaceImage source = loadPng(manifest.imagePath(entry));
  FaceImage target = loadPng(manifest.imagePath(manifest.entryForIdentity(entry.target)));

  OptimConfig optim = config.optim;
  // Per-image seed offset keeps diversify streams distinct but reproducible.
  optim.seed = config.optim.seed * 1000003 + index;

  ProtectResult result = protect(*backends.generator, *backends.perceptual,
                                 backends.surrogates, *backends.segmentation, source, target,
                                 optim, config.diversify);
  savePng(result.protectedImage, dir / "protected.png");
  serializeLatent(result.code, dir / "latent");
  writeTraceCsv(dir / "trace.csv", result.trace);
}

json aggregate(const ExperimentConfig& config, const BackendSet& backends,
               const DatasetManifest& manifest, const std::vector<EntryOutcome>& outcomes,
               long heldOutQueriesDuringProtect) {
  json report;
  report["schema"] = "gift-report-v1";
  report["seed"] = config.optim.seed;
  report["search_mode"] = toString(config.optim.searchMode);
  report["space"] = toString(config.optim.space);
  report["entries"] = manifest.entries.size();
  report["held_out_queries_during_protect"] = heldOutQueriesDuringProtect;

  json failures = json::array();
  for (const auto& o : outcomes)
    if (!o.ok) failures.push_back({{"image_id", o.imageId}, {"error", o.error}});
  report["failures"] = failures;

  // Collect per-image metrics in manifest order.
  std::vector<json> metrics;
  std::vector<std::size_t> okIndices;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (!outcomes[i].ok) continue;
    fs::path p = config.outputDir / outcomes[i].imageId / "metrics.json";
    std::ifstream in(p);
    if (!in) continue;
    json m;
    in >> m;
    metrics.push_back(std::move(m));
    okIndices.push_back(i);
  }
  report["evaluated"] = metrics.size();
  if (metrics.empty()) return report;

  if (config.evalVerification) {
    json ver = json::object();
    for (const auto& model : backends.heldOut) {
      double tau = tauForModel(config, *model);
      std::vector<VerificationRecord> clean, prot;
      for (const auto& m : metrics) {
        const json& jm = m.at("held_out").at(model->id());
        clean.push_back(VerificationRecord::make(m.at("image_id"), jm.at("cos_clean"), tau));
        prot.push_back(VerificationRecord::make(m.at("image_id"), jm.at("cos_protected"), tau));
      }
      json entry;
      entry["tau"] = tau;
      entry["psr_clean"] = psrVerification(clean);
      entry["psr_protected"] = psrVerification(prot);
      double meanClean = 0, meanProt = 0;
      for (const auto& r : clean) meanClean += r.cosToTarget;
      for (const auto& r : prot) meanProt += r.cosToTarget;
      entry["mean_cos_clean"] = meanClean / clean.size();
      entry["mean_cos_protected"] = meanProt / prot.size();
      ver[model->id()] = entry;
    }
    report["verification"] = ver;
  }

  if (config.evalIdentification && !backends.heldOut.empty()) {
    json ident = json::object();
    for (const auto& model : backends.heldOut) {
      // Gallery: one clean image per identity (manifest order).
      std::vector<GalleryEntry> gallery;
      std::map<std::string, bool> seen;
      for (const auto& e : manifest.entries) {
        if (seen[e.identity]) continue;
        seen[e.identity] = true;
        gallery.push_back({e.identity, model->embed(loadPng(manifest.imagePath(e)))});
      }
      json perRank = json::object();
      for (int n : config.rankNs) {
        int hits = 0;
        for (std::size_t k = 0; k < metrics.size(); ++k) {
          const ManifestEntry& e = manifest.entries[okIndices[k]];
          FaceImage prot = loadPng(config.outputDir / outcomes[okIndices[k]].imageId / "protected.png");
          if (rankNHit(model->embed(prot), gallery, e.target, n)) ++hits;
        }
        perRank["rank_" + std::to_string(n)] =
            100.0 * hits / static_cast<double>(metrics.size());
      }
      ident[model->id()] = perRank;
    }
    report["identification"] = ident;
  }

  if (config.evalQuality) {
    json quality;
    double ssimSum = 0;
    bool anyInf = false;
    double psnrSum = 0;
    for (const auto& m : metrics) {
      ssimSum += m.at("ssim").get<double>();
      if (m.at("psnr_db").is_string())
        anyInf = true;
      else
        psnrSum += m.at("psnr_db").get<double>();
    }
    quality["ssim_mean"] = ssimSum / metrics.size();
    quality["psnr_db_mean"] = anyInf ? json("inf") : json(psnrSum / metrics.size());
    if (config.evalFid && metrics.size() >= 2) {
      int dim = backends.perceptual->featureDim(backends.generator->outputHeight(),
                                                backends.generator->outputWidth());
      Eigen::MatrixXd fa(metrics.size(), dim), fb(metrics.size(), dim);
      for (std::size_t k = 0; k < metrics.size(); ++k) {
        const ManifestEntry& e = manifest.entries[okIndices[k]];
        Tensord fs_ = backends.perceptual->features(loadPng(manifest.imagePath(e)));
        Tensord fp = backends.perceptual->features(
            loadPng(config.outputDir / outcomes[okIndices[k]].imageId / "protected.png"));
        fa.row(static_cast<Eigen::Index>(k)) = fs_.asVector().transpose();
        fb.row(static_cast<Eigen::Index>(k)) = fp.asVector().transpose();
      }
      quality["fid"] = fid(fb, fa);
      quality["fid_feature_extractor"] = "toy-perceptual";
    }
    report["quality"] = quality;
  }

  json surro = json::object();
  for (const auto& model : backends.surrogates.models) {
    double meanProt = 0;
    for (const auto& m : metrics)
      meanProt += m.at("surrogates").at(model->id()).at("cos_protected").get<double>();
    surro[model->id()] = meanProt / metrics.size();
  }
  report["surrogate_mean_cos_protected"] = surro;
  return report;
}

RunResult finishRun(const ExperimentConfig& config, const BackendSet& backends,
                    const DatasetManifest& manifest, std::vector<EntryOutcome>& outcomes,
                    long auditQueries) {
  // Evaluation phase: per-image metrics from the persisted artifacts.
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (!outcomes[i].ok) continue;
    fs::path dir = config.outputDir / outcomes[i].imageId;
    fs::path metricsPath = dir / "metrics.json";
    if (!config.force && fs::exists(metricsPath)) continue;
    try {
      json m = computeEntryMetrics(config, backends, manifest, manifest.entries[i], dir);
      std::ofstream out(metricsPath, std::ios::trunc);
      out << m.dump(2) << "\n";
    } catch (const std::exception& e) {
      outcomes[i].ok = false;
      outcomes[i].error = e.what();
    }
  }

  RunResult run;
  run.heldOutQueriesDuringProtect = auditQueries;
  run.report = aggregate(config, backends, manifest, outcomes, auditQueries);
  for (const auto& o : outcomes)
    if (!o.ok) ++run.failureCount;

  fs::create_directories(config.outputDir);
  run.reportPath = config.outputDir / "report.json";
  {
    std::ofstream out(run.reportPath, std::ios::trunc);
    out << run.report.dump(2) << "\n";
  }
  {
    auto now = std::chrono::system_clock::now();
    std::ofstream log(config.outputDir / "run.log", std::ios::app);
    log << "finished at epoch-ms "
        << std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count()
        << " failures=" << run.failureCount << "\n";
  }
  return run;
}

}  // namespace

RunResult runExperiment(const ExperimentConfig& config) {
  config.validate();
  BackendSet backends = buildBackends(config);
  DatasetManifest manifest = ingest(config.datasetDir);
  fs::create_directories(config.outputDir);

  for (const auto& m : backends.heldOut) m->resetQueries();

  std::vector<EntryOutcome> outcomes(manifest.entries.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    outcomes[i].imageId = imageIdFor(i, manifest.entries[i]);

  int workers = std::max(1, std::min<int>(config.workers,
                                          static_cast<int>(manifest.entries.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= manifest.entries.size()) return;
        try {
          produceArtifacts(config, backends, manifest, i, manifest.entries[i]);
          outcomes[i].ok = true;
        } catch (const std::exception& e) {
          outcomes[i].ok = false;
          outcomes[i].error = e.what();
        }
      }
    });
  }
  for (auto& t : pool) t.join();

  // Black-box discipline check point: held-out models must be untouched here.
  long auditQueries = 0;
  for (const auto& m : backends.heldOut) auditQueries += m->queries();

  return finishRun(config, backends, manifest, outcomes, auditQueries);
}

RunResult aggregateReport(const ExperimentConfig& config) {
  config.validate();
  BackendSet backends = buildBackends(config);
  DatasetManifest manifest = ingest(config.datasetDir);

  std::vector<EntryOutcome> outcomes(manifest.entries.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    outcomes[i].imageId = imageIdFor(i, manifest.entries[i]);
    fs::path dir = config.outputDir / outcomes[i].imageId;
    if (fs::exists(dir / "protected.png")) {
      outcomes[i].ok = true;
    } else {
      outcomes[i].ok = false;
      outcomes[i].error = "missing artifact: protected.png";
    }
  }
  return finishRun(config, backends, manifest, outcomes, 0);
}

}  // namespace gift
