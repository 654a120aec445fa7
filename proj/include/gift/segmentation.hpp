#pragma once

#include "gift/autodiff.hpp"
#include "gift/errors.hpp"
#include "gift/image.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace gift {

// Per-pixel class logits, spatial dims equal to the input image's.
struct SemanticLogits {
  Tensord values;  // (H, W, C)

  int classCount() const { return values.dim(2); }
};

struct SemanticMap {
  std::vector<int> labels;  // row-major (H*W), each in [0, C)
  int height = 0, width = 0, classCount = 0;
};

// Face-parsing backend M(.). Deterministic; differentiable variants expose
// gradients of the logits w.r.t. pixels.
class SegmentationModel {
 public:
  virtual ~SegmentationModel() = default;
  virtual int classCount() const = 0;
  virtual bool differentiable() const = 0;
  virtual ad::Var<double> logitsOnTape(ad::Tape<double>& tape, ad::Var<double> image) const = 0;
};

SemanticLogits segmentLogits(const SegmentationModel& seg, const FaceImage& image);

// argmax over classes; exact ties resolve to the lowest class index.
SemanticMap labelsFromLogits(const SemanticLogits& logits);
SemanticMap segmentLabels(const SegmentationModel& seg, const FaceImage& image);

// Fraction of pixels on which two maps agree.
double labelAgreement(const SemanticMap& a, const SemanticMap& b);

// Fixed seeded two-layer conv net, 3 -> 16 -> C channels. Class semantics are
// arbitrary; it exists to exercise the regularization mechanics.
class ToySegmentationModel : public SegmentationModel {
 public:
  explicit ToySegmentationModel(std::uint64_t seed = 11, int classes = 6);

  int classCount() const override { return classes_; }
  bool differentiable() const override { return true; }
  ad::Var<double> logitsOnTape(ad::Tape<double>& tape, ad::Var<double> image) const override;

 private:
  int classes_;
  Tensord w1_, b1_, w2_, b2_;
};

}  // namespace gift
