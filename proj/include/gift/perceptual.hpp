#pragma once

#include "gift/autodiff.hpp"
#include "gift/image.hpp"

#include <cstdint>
#include <memory>

namespace gift {

// Feature extractor F(.) for perceptual distance; also reused as the toy FID
// feature source.
class PerceptualModel {
 public:
  virtual ~PerceptualModel() = default;
  virtual int featureDim(int height, int width) const = 0;
  virtual ad::Var<double> featuresOnTape(ad::Tape<double>& tape, ad::Var<double> image) const = 0;

  Tensord features(const FaceImage& image) const;
};

// Fixed seeded 3-layer strided conv stack, flattened output.
class ToyPerceptualModel : public PerceptualModel {
 public:
  explicit ToyPerceptualModel(std::uint64_t seed = 23);

  int featureDim(int height, int width) const override;
  ad::Var<double> featuresOnTape(ad::Tape<double>& tape, ad::Var<double> image) const override;

 private:
  Tensord w1_, b1_, w2_, b2_, w3_, b3_;
};

}  // namespace gift
