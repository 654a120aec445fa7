#include "gift/perceptual.hpp"

#include "gift/errors.hpp"
#include "gift/rng.hpp"

namespace gift {

Tensord PerceptualModel::features(const FaceImage& image) const {
  validateImage(image);
  ad::Tape<double> tape;
  ad::Var<double> img = tape.constant(image.pixels);
  ad::Var<double> out = featuresOnTape(tape, img);
  return tape.value(out);
}

ToyPerceptualModel::ToyPerceptualModel(std::uint64_t seed) {
  Rng rng(seed);
  auto mk = [&rng](std::vector<int> shape, double sigma) {
    Tensord t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = sigma * rng.gaussian();
    return t;
  };
  w1_ = mk({3, 3, 3, 8}, 1.0 / std::sqrt(27.0));
  b1_ = mk({8}, 0.05);
  w2_ = mk({3, 3, 8, 16}, 1.0 / std::sqrt(72.0));
  b2_ = mk({16}, 0.05);
  w3_ = mk({3, 3, 16, 16}, 1.0 / std::sqrt(144.0));
  b3_ = mk({16}, 0.05);
}

int ToyPerceptualModel::featureDim(int height, int width) const {
  auto half = [](int n) { return (n + 1) / 2; };
  int h = half(half(half(height))), w = half(half(half(width)));
  return h * w * 16;
}

ad::Var<double> ToyPerceptualModel::featuresOnTape(ad::Tape<double>& tape,
                                                   ad::Var<double> image) const {
  const Tensord& v = tape.value(image);
  if (v.rank() != 3 || v.dim(2) != 3)
    throw ValidationError("perceptual model expects an (H, W, 3) image");
  ad::Var<double> x = ad::tanhOp(ad::conv2d(image, tape.constant(w1_), tape.constant(b1_), 2, 1));
  x = ad::tanhOp(ad::conv2d(x, tape.constant(w2_), tape.constant(b2_), 2, 1));
  x = ad::tanhOp(ad::conv2d(x, tape.constant(w3_), tape.constant(b3_), 2, 1));
  const Tensord& xv = tape.value(x);
  return ad::reshape(x, {static_cast<int>(xv.numel())});
}

}  // namespace gift
