#pragma once

#include "gift/config.hpp"
#include "gift/fr.hpp"
#include "gift/generator.hpp"
#include "gift/inversion.hpp"
#include "gift/rng.hpp"
#include "gift/segmentation.hpp"

#include <optional>
#include <vector>

namespace gift {

// Random resize + Gaussian noise applied with probability `prob` before the
// surrogate embedders (input diversity).
struct DiversifyParams {
  double prob = 0.5;
  double resizeLo = 0.8;
  double resizeHi = 1.0;
  double noiseSigma = 0.05;

  void validate() const {
    if (prob < 0 || prob > 1) throw ValidationError("diversify probability must lie in [0,1]");
    if (!(resizeLo > 0 && resizeLo <= resizeHi && resizeHi <= 1.0))
      throw ValidationError("resize range must satisfy 0 < lo <= hi <= 1");
    if (noiseSigma < 0) throw ValidationError("noise sigma must be >= 0");
  }
};

struct SearchTracePoint {
  int step = 0;
  double adv = 0;
  double sem = 0;
  double total = 0;
};

struct ProtectResult {
  FaceImage protectedImage;
  LatentCode code;
  std::vector<SearchTracePoint> trace;  // one entry per search step
  std::vector<double> perSurrogateCos;  // final cos(protected, target) per member
};

// One Bernoulli draw per call; the transformed path is differentiable.
ad::Var<double> diversifyOnTape(ad::Tape<double>& tape, ad::Var<double> image,
                                const DiversifyParams& params, Rng& rng);
FaceImage diversify(const FaceImage& image, const DiversifyParams& params, Rng& rng);

// Mean cosine distance to the (stop-gradient) target embeddings over the
// surrogate ensemble, with one shared diversify draw.
double adversarialLoss(const Generator& gen, const LatentCode& code, const FaceImage& target,
                       const Ensemble& ensemble, const DiversifyParams& params, Rng& rng);

// Cross-entropy between the synthesized image's segmentation logits and the
// fixed source label map.
double klrLoss(const Generator& gen, const LatentCode& code, const SemanticMap& sourceLabels,
               const SegmentationModel& seg);

struct LossBreakdown {
  double adv = 0;
  double sem = 0;
  double total = 0;
};

LossBreakdown totalLoss(const Generator& gen, const LatentCode& code, const FaceImage& target,
                        const SemanticMap& sourceLabels, const Ensemble& ensemble,
                        const SegmentationModel& seg, const OptimConfig& config,
                        const DiversifyParams& params, Rng& rng);

// The full search: invert (unless a warm latent is given), then Adam on the
// mask-selected components of the code for t2Steps.
ProtectResult protect(const Generator& gen, const PerceptualModel& perceptual,
                      const Ensemble& ensemble, const SegmentationModel& seg,
                      const FaceImage& source, const FaceImage& target,
                      const OptimConfig& config, const DiversifyParams& params = {},
                      const std::optional<LatentCode>& inversionWarm = std::nullopt);

}  // namespace gift
