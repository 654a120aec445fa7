#pragma once

#include "gift/autodiff.hpp"
#include "gift/errors.hpp"
#include "gift/generator.hpp"
#include "gift/image.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace gift {

// Unit-norm identity feature. Backends normalize; consumers only assert.
struct Embedding {
  Tensord values;  // (d_f)

  int dim() const { return static_cast<int>(values.numel()); }
};

void assertUnitNorm(const Embedding& e, double tol = 1e-6);

double cosineSimilarity(const Embedding& a, const Embedding& b);
double cosineDistance(const Embedding& a, const Embedding& b);  // 1 - cos, in [0,2]

// Match decision: cos similarity >= tau counts as the same identity.
bool verify(const Embedding& a, const Embedding& b, double tau);

// (model_id, far_level) -> tau. Lookup of an unregistered pair throws.
class ThresholdRegistry {
 public:
  void add(const std::string& modelId, double far, double tau);
  double tau(const std::string& modelId, double far) const;
  bool has(const std::string& modelId, double far) const;

  static ThresholdRegistry fromJsonFile(const std::filesystem::path& path);
  // IRSE50/IR152/FaceNet/MobileFace verification thresholds at FAR 0.01.
  static ThresholdRegistry builtinDefaults();

 private:
  std::map<std::pair<std::string, double>, double> entries_;
};

// A face-recognition embedder f(.). Immutable after construction; embed calls
// are thread-safe. Every embedding query bumps queryCount so experiments can
// audit black-box discipline.
class FrModel {
 public:
  virtual ~FrModel() = default;

  virtual std::string id() const = 0;
  virtual int embedDim() const = 0;
  virtual int inputSize() const = 0;
  virtual bool differentiable() const = 0;

  // Image of any valid size; the backend resizes to inputSize on the tape
  // (bilinear, inside the gradient path).
  ad::Var<double> embedOnTape(ad::Tape<double>& tape, ad::Var<double> image) const;

  Embedding embed(const FaceImage& image) const;

  long queries() const { return queryCount_.load(); }
  void resetQueries() const { queryCount_.store(0); }

 protected:
  virtual ad::Var<double> embedImpl(ad::Tape<double>& tape, ad::Var<double> image) const = 0;

 private:
  mutable std::atomic<long> queryCount_{0};
};

struct Ensemble {
  std::vector<std::shared_ptr<const FrModel>> models;

  void validate() const;
  std::size_t size() const { return models.size(); }
};

// Small convolutional embedder standing in for the pretrained FR checkpoints.
class ToyFrModel : public FrModel {
 public:
  std::string id() const override { return id_; }
  int embedDim() const override { return kEmbedDim; }
  int inputSize() const override { return kInput; }
  bool differentiable() const override { return true; }

  static constexpr int kEmbedDim = 32;
  static constexpr int kInput = 32;

  void save(const std::filesystem::path& dir) const;
  static std::shared_ptr<ToyFrModel> load(const std::filesystem::path& dir);

 protected:
  ad::Var<double> embedImpl(ad::Tape<double>& tape, ad::Var<double> image) const override;

 private:
  friend class ToyFrTrainer;
  std::string id_;
  int width_ = 16;
  // conv1 (3->w, s2), conv2 (w->2w, s2), conv3 (2w->2w, s2), fc (d_f x 2w)
  std::vector<std::pair<std::string, Tensord>> weights_;
};

// Synthetic identity dataset rendered by the toy generator: per identity one
// anchor W latent and jittered renders around it.
struct ToyIdentityDataset {
  int identities = 32;
  int rendersPerIdentity = 64;
  int heldOutPerIdentity = 8;
  double jitterSigma = 0.3;
  std::uint64_t datasetSeed = 9001;
  std::string generatorFingerprint;
  std::vector<FaceImage> images;  // identity-major order
  std::vector<int> labels;

  int trainPerIdentity() const { return rendersPerIdentity - heldOutPerIdentity; }
};

ToyIdentityDataset buildToyIdentityDataset(const Generator& gen, int identities = 32,
                                           int rendersPerIdentity = 64,
                                           double jitterSigma = 0.3,
                                           std::uint64_t datasetSeed = 9001);

struct ToyFrTrainConfig {
  int epochs = 30;
  int batchSize = 32;
  double lr = 3e-3;
  double logitScale = 16.0;
  double minHeldOutAccuracy = 0.9;
};

// Trains a ToyFrModel on the dataset with a normalized-softmax classifier.
// Deterministic given (seed, widthVariant). Throws if held-out classification
// accuracy misses minHeldOutAccuracy.
std::shared_ptr<ToyFrModel> fitToyFr(const ToyIdentityDataset& dataset, std::uint64_t seed,
                                     int widthVariant,
                                     const ToyFrTrainConfig& cfg = {});

// Disk-cached variant keyed by (generator fingerprint, seed, width).
std::shared_ptr<ToyFrModel> fitToyFrCached(const Generator& gen,
                                           const ToyIdentityDataset& dataset,
                                           std::uint64_t seed, int widthVariant,
                                           const std::filesystem::path& cacheDir,
                                           const ToyFrTrainConfig& cfg = {});

}  // namespace gift
