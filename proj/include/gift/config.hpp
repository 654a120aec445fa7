#pragma once

#include "gift/errors.hpp"
#include "gift/generator.hpp"
#include "gift/latent.hpp"

#include <cstdint>

namespace gift {

// All scalars of the two-phase optimization: inversion (T1) then the
// adversarial latent search (T2).
struct OptimConfig {
  int t1Steps = 1200;
  double t1Lr = 0.01;
  int t2Steps = 50;
  double t2Lr = 0.002;
  double alpha = 10.0;        // perceptual weight in the reconstruction loss
  double lambdaAdv = 1.0;
  double lambdaSem = 0.01;
  double diversifyProb = 0.5;
  SearchMode searchMode = SearchMode::GALS;
  LatentSpace space = LatentSpace::F;
  std::uint64_t seed = 0;

  void validate() const {
    if (t1Steps < 0 || t2Steps < 0) throw ValidationError("step counts must be >= 0");
    if (t1Lr <= 0 || t2Lr <= 0) throw ValidationError("learning rates must be > 0");
    if (alpha < 0) throw ValidationError("alpha must be >= 0");
    if (lambdaAdv < 0 || lambdaSem < 0) throw ValidationError("loss weights must be >= 0");
    if (diversifyProb < 0 || diversifyProb > 1)
      throw ValidationError("transform probability must lie in [0,1]");
  }
};

}  // namespace gift
