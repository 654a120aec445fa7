#pragma once

#include "gift/config.hpp"
#include "gift/generator.hpp"
#include "gift/image.hpp"
#include "gift/perceptual.hpp"

#include <optional>
#include <vector>

namespace gift {

struct InversionTracePoint {
  int step = 0;
  double mse = 0;
  double perceptual = 0;
  double total = 0;
};

struct InversionResult {
  LatentCode code;
  std::vector<InversionTracePoint> trace;  // one entry per step performed
  FaceImage recon;                         // synthesize(code)
};

// L_rec = mean|x_s - G(w)|^2 + alpha * mean|F(x_s) - F(G(w))|^2
// (per-element means, so alpha is resolution-independent).
double reconstructionLoss(const Generator& gen, const PerceptualModel& perceptual,
                          const LatentCode& code, const FaceImage& source, double alpha);

// Adam over all components of the code for t1Steps. Deterministic; throws
// DivergenceError if the loss turns non-finite.
InversionResult invert(const Generator& gen, const PerceptualModel& perceptual,
                       const FaceImage& source, const OptimConfig& config,
                       const std::optional<LatentCode>& warmStart = std::nullopt);

}  // namespace gift
