#include "gift/segmentation.hpp"

#include "gift/rng.hpp"

namespace gift {

SemanticLogits segmentLogits(const SegmentationModel& seg, const FaceImage& image) {
  validateImage(image);
  ad::Tape<double> tape;
  ad::Var<double> img = tape.constant(image.pixels);
  ad::Var<double> out = seg.logitsOnTape(tape, img);
  SemanticLogits logits{tape.value(out)};
  if (!logits.values.allFinite()) throw ValidationError("segmentation produced non-finite logits");
  return logits;
}

SemanticMap labelsFromLogits(const SemanticLogits& logits) {
  const Tensord& v = logits.values;
  SemanticMap map;
  map.height = v.dim(0);
  map.width = v.dim(1);
  map.classCount = v.dim(2);
  map.labels.resize(static_cast<std::size_t>(map.height) * map.width);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      int best = 0;
      double bestV = v.at(y, x, 0);
      for (int c = 1; c < map.classCount; ++c)
        if (v.at(y, x, c) > bestV) {  // strict: ties keep the lowest index
          bestV = v.at(y, x, c);
          best = c;
        }
      map.labels[static_cast<std::size_t>(y) * map.width + x] = best;
    }
  return map;
}

SemanticMap segmentLabels(const SegmentationModel& seg, const FaceImage& image) {
  return labelsFromLogits(segmentLogits(seg, image));
}

double labelAgreement(const SemanticMap& a, const SemanticMap& b) {
  if (a.height != b.height || a.width != b.width)
    throw ValidationError("semantic map shape mismatch");
  std::size_t n = a.labels.size(), hit = 0;
  for (std::size_t i = 0; i < n; ++i) hit += a.labels[i] == b.labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(n);
}

ToySegmentationModel::ToySegmentationModel(std::uint64_t seed, int classes)
    : classes_(classes) {
  Rng rng(seed);
  auto mk = [&rng](std::vector<int> shape, double sigma) {
    Tensord t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = sigma * rng.gaussian();
    return t;
  };
  w1_ = mk({3, 3, 3, 16}, 1.0 / std::sqrt(27.0));
  b1_ = mk({16}, 0.05);
  w2_ = mk({3, 3, 16, classes_}, 1.0 / std::sqrt(9.0 * 16.0));
  b2_ = mk({classes_}, 0.05);
}

ad::Var<double> ToySegmentationModel::logitsOnTape(ad::Tape<double>& tape,
                                                   ad::Var<double> image) const {
  const Tensord& v = tape.value(image);
  if (v.rank() != 3 || v.dim(2) != 3)
    throw ValidationError("segmentation expects an (H, W, 3) image");
  ad::Var<double> x = ad::conv2d(image, tape.constant(w1_), tape.constant(b1_), 1, 1);
  x = ad::tanhOp(x);
  return ad::conv2d(x, tape.constant(w2_), tape.constant(b2_), 1, 1);
}

}  // namespace gift
