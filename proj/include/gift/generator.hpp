#pragma once

#include "gift/autodiff.hpp"
#include "gift/errors.hpp"
#include "gift/image.hpp"
#include "gift/latent.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace gift {

struct LayoutEntry {
  std::string name;
  std::vector<int> shape;
};

enum class SearchMode { GALS, LALS };

std::string toString(SearchMode m);
SearchMode searchModeFromString(const std::string& s);

// Which latent components the adversarial search may update.
struct ComponentMask {
  std::vector<std::pair<std::string, bool>> optimizable;

  bool isOptimizable(const std::string& name) const {
    for (const auto& [n, b] : optimizable)
      if (n == name) return b;
    throw std::out_of_range("mask has no component: " + name);
  }
  int optimizableCount() const {
    int k = 0;
    for (const auto& [n, b] : optimizable) k += b ? 1 : 0;
    return k;
  }
};

// A frozen differentiable generator G. Deterministic: same latent in, same
// image out; thread-safe for concurrent synthesis (weights are immutable).
class Generator {
 public:
  virtual ~Generator() = default;

  virtual std::string fingerprint() const = 0;
  virtual int layerCount() const = 0;
  virtual int styleDim() const = 0;
  virtual int outputHeight() const = 0;
  virtual int outputWidth() const = 0;
  virtual int splitLayer() const = 0;

  virtual std::vector<LayoutEntry> layout(LatentSpace space) const = 0;

  // Differentiable path: components must already live on the tape in layout
  // order. Returns the synthesized image (H, W, 3) in [0,1].
  virtual ad::Var<double> synthesizeOnTape(ad::Tape<double>& tape, LatentSpace space,
                                           const std::vector<ad::Var<double>>& comps) const = 0;

  FaceImage synthesize(const LatentCode& code) const;

  void validateCode(const LatentCode& code) const;
};

LatentCode initLatent(const Generator& gen, LatentSpace space, std::uint64_t seed);

// GALS optimizes everything; LALS only style components for layers past
// ceil(L/2). W has no layer-wise decomposition, so LALS+W is rejected.
ComponentMask componentMask(const Generator& gen, const LatentCode& code, SearchMode mode);

// Fixed random style-modulated decoder: 8 stages from a learned 4x4 constant,
// stages 1-4 upsample to the 64x64 output resolution, per-stage 3x3 conv with
// style-driven channel scale/bias, tanh, final 1x1 projection and sigmoid.
class ToyGenerator : public Generator {
 public:
  explicit ToyGenerator(std::uint64_t seed = 7, int splitLayer = 4);

  std::string fingerprint() const override { return fingerprint_; }
  int layerCount() const override { return kLayers; }
  int styleDim() const override { return kStyleDim; }
  int outputHeight() const override { return kOutput; }
  int outputWidth() const override { return kOutput; }
  int splitLayer() const override { return splitLayer_; }

  std::vector<LayoutEntry> layout(LatentSpace space) const override;

  ad::Var<double> synthesizeOnTape(ad::Tape<double>& tape, LatentSpace space,
                                   const std::vector<ad::Var<double>>& comps) const override;

  // Optimization warm start standing in for a pretrained encoder: a short
  // seeded pixel-MSE fit from initLatent.
  LatentCode encode(const FaceImage& image, LatentSpace space) const;

  static constexpr int kLayers = 8;
  static constexpr int kStyleDim = 64;
  static constexpr int kOutput = 64;

  // Channel count of the activation entering stage i (0-based); index kLayers
  // is the channel count of the final activation.
  int stageChannels(int i) const { return channels_.at(static_cast<std::size_t>(i)); }

 private:
  struct Stage {
    Tensord convW, convB;        // (3,3,cin,cout), (cout)
    Tensord styleScale, styleBias;  // (cout, d_s) each
    bool upsample = false;
  };

  // Runs stages [first, kLayers) from activation x with per-layer style vars.
  ad::Var<double> runStages(ad::Tape<double>& tape, ad::Var<double> x, int first,
                            const std::vector<ad::Var<double>>& styles) const;

  ad::Var<double> stageStyleParams(ad::Tape<double>& tape, int stage,
                                   ad::Var<double> style, bool scalePart) const;

  int splitLayer_;
  std::string fingerprint_;
  std::vector<int> channels_;
  Tensord constant_;  // (4, 4, channels_[0])
  std::vector<Stage> stages_;
  Tensord finalW_, finalB_;  // (1,1,cLast,3), (3)
};

}  // namespace gift
