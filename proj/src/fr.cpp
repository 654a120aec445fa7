#include "gift/fr.hpp"

#include "gift/adam.hpp"
#include "gift/rng.hpp"
#include "gift/weights.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace gift {

namespace fs = std::filesystem;
using nlohmann::json;

void assertUnitNorm(const Embedding& e, double tol) {
  double n = e.values.asVector().norm();
  if (std::abs(n - 1.0) > tol)
    throw ValidationError("embedding norm " + std::to_string(n) + " is not unit");
}

double cosineSimilarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim())
    throw ValidationError("embedding dimension mismatch: " + std::to_string(a.dim()) +
                          " vs " + std::to_string(b.dim()));
  return a.values.asVector().dot(b.values.asVector());
}

double cosineDistance(const Embedding& a, const Embedding& b) {
  return 1.0 - cosineSimilarity(a, b);
}

bool verify(const Embedding& a, const Embedding& b, double tau) {
  return cosineSimilarity(a, b) >= tau;
}

void ThresholdRegistry::add(const std::string& modelId, double far, double tau) {
  if (!std::isfinite(tau) || tau <= -1.0 || tau >= 1.0)
    throw ValidationError("threshold out of (-1, 1): " + std::to_string(tau));
  entries_[{modelId, far}] = tau;
}

double ThresholdRegistry::tau(const std::string& modelId, double far) const {
  auto it = entries_.find({modelId, far});
  if (it == entries_.end())
    throw ValidationError("no threshold registered for (" + modelId + ", far=" +
                          std::to_string(far) + ")");
  return it->second;
}

bool ThresholdRegistry::has(const std::string& modelId, double far) const {
  return entries_.count({modelId, far}) > 0;
}

ThresholdRegistry ThresholdRegistry::fromJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open thresholds file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid thresholds file: ") + e.what());
  }
  ThresholdRegistry reg;
  for (auto& [model, fars] : j.items())
    for (auto& [far, tau] : fars.items())
      reg.add(model, std::stod(far), tau.get<double>());
  return reg;
}

ThresholdRegistry ThresholdRegistry::builtinDefaults() {
  ThresholdRegistry reg;
  reg.add("irse50", 0.01, 0.241);
  reg.add("ir152", 0.01, 0.167);
  reg.add("facenet", 0.01, 0.409);
  reg.add("mobileface", 0.01, 0.302);
  return reg;
}

ad::Var<double> FrModel::embedOnTape(ad::Tape<double>& tape, ad::Var<double> image) const {
  ++queryCount_;
  const Tensord& v = tape.value(image);
  if (v.rank() != 3 || v.dim(2) != 3)
    throw ValidationError("embed expects an (H, W, 3) image");
  return embedImpl(tape, image);
}

Embedding FrModel::embed(const FaceImage& image) const {
  validateImage(image);
  ad::Tape<double> tape;
  ad::Var<double> img = tape.constant(image.pixels);
  ad::Var<double> e = embedOnTape(tape, img);
  return Embedding{tape.value(e)};
}

void Ensemble::validate() const {
  if (models.empty()) throw ValidationError("ensemble must contain at least one model");
  for (const auto& m : models) {
    if (!m) throw ValidationError("ensemble contains a null model");
    if (!m->differentiable())
      throw ValidationError("ensemble member '" + m->id() + "' is not differentiable");
  }
}

// ---- ToyFrModel ----

namespace {
const Tensord& named(const std::vector<std::pair<std::string, Tensord>>& ws,
                     const std::string& name) {
  for (const auto& [n, t] : ws)
    if (n == name) return t;
  throw std::out_of_range("missing weight: " + name);
}
}  // namespace

ad::Var<double> ToyFrModel::embedImpl(ad::Tape<double>& tape, ad::Var<double> image) const {
  ad::Var<double> x = ad::bilinearResize(image, kInput, kInput);
  auto c = [&](const std::string& base, ad::Var<double> in) {
    ad::Var<double> w = tape.constant(named(weights_, base + "_w"));
    ad::Var<double> b = tape.constant(named(weights_, base + "_b"));
    return ad::tanhOp(ad::conv2d(in, w, b, 2, 1));
  };
  x = c("conv1", x);
  x = c("conv2", x);
  x = c("conv3", x);
  x = ad::globalAvgPool(x);
  ad::Var<double> fw = tape.constant(named(weights_, "fc_w"));
  ad::Var<double> fb = tape.constant(named(weights_, "fc_b"));
  x = ad::linear(x, fw, fb);
  return ad::l2normalize(x);
}

void ToyFrModel::save(const fs::path& dir) const {
  saveNamedTensors(dir, weights_, "toy-fr", id_);
}

std::shared_ptr<ToyFrModel> ToyFrModel::load(const fs::path& dir) {
  std::ifstream mf(dir / "meta.json");
  if (!mf) throw FormatError("missing meta.json in " + dir.string());
  json meta;
  mf >> meta;
  auto model = std::make_shared<ToyFrModel>();
  model->id_ = meta.value("descriptor", "");
  model->weights_ = loadNamedTensors(dir, "toy-fr");
  model->width_ = named(model->weights_, "conv1_b").dim(0);
  return model;
}

// ---- dataset + training ----

ToyIdentityDataset buildToyIdentityDataset(const Generator& gen, int identities,
                                           int rendersPerIdentity, double jitterSigma,
                                           std::uint64_t datasetSeed) {
  ToyIdentityDataset ds;
  ds.identities = identities;
  ds.rendersPerIdentity = rendersPerIdentity;
  ds.jitterSigma = jitterSigma;
  ds.datasetSeed = datasetSeed;
  ds.generatorFingerprint = gen.fingerprint();
  Rng rng(datasetSeed);
  for (int id = 0; id < identities; ++id) {
    LatentCode anchor = initLatent(gen, LatentSpace::W, datasetSeed * 1000003 + id);
    for (int r = 0; r < rendersPerIdentity; ++r) {
      LatentCode jittered = anchor;
      Tensord& style = jittered.component("style");
      for (std::int64_t i = 0; i < style.numel(); ++i)
        style[i] += jitterSigma * rng.gaussian();
      ds.images.push_back(gen.synthesize(jittered));
      ds.labels.push_back(id);
    }
  }
  return ds;
}

class ToyFrTrainer {
 public:
  static std::shared_ptr<ToyFrModel> fit(const ToyIdentityDataset& ds, std::uint64_t seed,
                                         int widthVariant, const ToyFrTrainConfig& cfg) {
    if (widthVariant != 0 && widthVariant != 1)
      throw ValidationError("toy FR width variant must be 0 or 1");
    int w = widthVariant == 0 ? 16 : 24;
    auto model = std::make_shared<ToyFrModel>();
    model->width_ = w;
    {
      std::ostringstream id;
      id << "toy-fr-s" << seed << "-w" << w;
      model->id_ = id.str();
    }
    Rng rng(seed);
    auto mk = [&rng](std::vector<int> shape, double sigma) {
      Tensord t(shape);
      for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = sigma * rng.gaussian();
      return t;
    };
    auto& ws = model->weights_;
    ws.emplace_back("conv1_w", mk({3, 3, 3, w}, 1.0 / std::sqrt(27.0)));
    ws.emplace_back("conv1_b", Tensord::zeros({w}));
    ws.emplace_back("conv2_w", mk({3, 3, w, 2 * w}, 1.0 / std::sqrt(9.0 * w)));
    ws.emplace_back("conv2_b", Tensord::zeros({2 * w}));
    ws.emplace_back("conv3_w", mk({3, 3, 2 * w, 2 * w}, 1.0 / std::sqrt(18.0 * w)));
    ws.emplace_back("conv3_b", Tensord::zeros({2 * w}));
    ws.emplace_back("fc_w", mk({ToyFrModel::kEmbedDim, 2 * w}, 1.0 / std::sqrt(2.0 * w)));
    ws.emplace_back("fc_b", Tensord::zeros({ToyFrModel::kEmbedDim}));

    // Cosine classifier head; rows kept unit-norm by projection after updates.
    Tensord head = mk({ds.identities, ToyFrModel::kEmbedDim}, 1.0);
    normalizeRows(head);

    std::vector<int> trainIdx, testIdx;
    for (int id = 0; id < ds.identities; ++id)
      for (int r = 0; r < ds.rendersPerIdentity; ++r) {
        int i = id * ds.rendersPerIdentity + r;
        if (r < ds.trainPerIdentity())
          trainIdx.push_back(i);
        else
          testIdx.push_back(i);
      }

    AdamOptimizer adam({.lr = cfg.lr});
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      rng.shuffle(trainIdx);
      for (std::size_t start = 0; start < trainIdx.size(); start += static_cast<std::size_t>(cfg.batchSize)) {
        std::size_t end = std::min(trainIdx.size(), start + static_cast<std::size_t>(cfg.batchSize));
        trainBatch(*model, head, ds, trainIdx, start, end, cfg, adam);
      }
    }

    double acc = accuracy(*model, head, ds, testIdx);
    if (acc < cfg.minHeldOutAccuracy)
      throw std::runtime_error("toy FR training failed: held-out accuracy " +
                               std::to_string(acc) + " below " +
                               std::to_string(cfg.minHeldOutAccuracy));
    return model;
  }

 private:
  static void normalizeRows(Tensord& m) {
    int rows = m.dim(0), cols = m.dim(1);
    auto mm = m.asMatrix(rows, cols);
    for (int r = 0; r < rows; ++r) mm.row(r) /= mm.row(r).norm();
  }

  static void trainBatch(ToyFrModel& model, Tensord& head, const ToyIdentityDataset& ds,
                         const std::vector<int>& idx, std::size_t start, std::size_t end,
                         const ToyFrTrainConfig& cfg, AdamOptimizer& adam) {
    std::vector<Tensord> grads;
    std::vector<Tensord*> params;
    for (auto& [name, t] : model.weights_) {
      params.push_back(&t);
      grads.push_back(Tensord::zeros(t.shape()));
    }
    params.push_back(&head);
    grads.push_back(Tensord::zeros(head.shape()));

    double invB = 1.0 / static_cast<double>(end - start);
    for (std::size_t s = start; s < end; ++s) {
      int i = idx[s];
      ad::Tape<double> tape;
      std::vector<ad::Var<double>> wvars;
      for (auto& [name, t] : model.weights_) wvars.push_back(tape.param(t));
      ad::Var<double> headVar = tape.param(head);
      ad::Var<double> img = tape.constant(ds.images[static_cast<std::size_t>(i)].pixels);

      ad::Var<double> x = ad::bilinearResize(img, ToyFrModel::kInput, ToyFrModel::kInput);
      auto conv = [&](int wi, ad::Var<double> in) {
        return ad::tanhOp(ad::conv2d(in, wvars[static_cast<std::size_t>(wi)],
                                     wvars[static_cast<std::size_t>(wi) + 1], 2, 1));
      };
      x = conv(0, x);
      x = conv(2, x);
      x = conv(4, x);
      x = ad::globalAvgPool(x);
      x = ad::linear(x, wvars[6], wvars[7]);
      x = ad::l2normalize(x);
      ad::Var<double> zeros = tape.constant(Tensord::zeros({ds.identities}));
      ad::Var<double> logits = ad::scale(ad::linear(x, headVar, zeros), cfg.logitScale);
      ad::Var<double> loss =
          ad::softmaxCrossEntropy(logits, std::vector<int>{ds.labels[static_cast<std::size_t>(i)]});
      tape.backward(loss);
      for (std::size_t k = 0; k < wvars.size(); ++k)
        if (!tape.grad(wvars[k]).empty())
          grads[k].asVector() += invB * tape.grad(wvars[k]).asVector();
      if (!tape.grad(headVar).empty())
        grads.back().asVector() += invB * tape.grad(headVar).asVector();
    }
    adam.step(params, grads);
    normalizeRows(head);
  }

  static double accuracy(const ToyFrModel& model, const Tensord& head,
                         const ToyIdentityDataset& ds, const std::vector<int>& idx) {
    int hit = 0;
    auto hm = head.asMatrix(head.dim(0), head.dim(1));
    for (int i : idx) {
      Embedding e = model.embed(ds.images[static_cast<std::size_t>(i)]);
      Eigen::VectorXd scores = hm * e.values.asVector();
      int best = 0;
      scores.maxCoeff(&best);
      if (best == ds.labels[static_cast<std::size_t>(i)]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(idx.size());
  }
};

std::shared_ptr<ToyFrModel> fitToyFr(const ToyIdentityDataset& dataset, std::uint64_t seed,
                                     int widthVariant, const ToyFrTrainConfig& cfg) {
  return ToyFrTrainer::fit(dataset, seed, widthVariant, cfg);
}

std::shared_ptr<ToyFrModel> fitToyFrCached(const Generator& gen,
                                           const ToyIdentityDataset& dataset,
                                           std::uint64_t seed, int widthVariant,
                                           const fs::path& cacheDir,
                                           const ToyFrTrainConfig& cfg) {
  int w = widthVariant == 0 ? 16 : 24;
  std::ostringstream key;
  key << "toyfr_" << gen.fingerprint() << "_s" << seed << "_w" << w;
  fs::path dir = cacheDir / key.str();
  if (fs::exists(dir / "meta.json")) {
    try {
      return ToyFrModel::load(dir);
    } catch (const std::exception&) {
      // stale or corrupt cache entry; retrain below
    }
  }
  auto model = fitToyFr(dataset, seed, widthVariant, cfg);
  model->save(dir);
  return model;
}

}  // namespace gift
