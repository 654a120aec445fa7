#pragma once

#include "gift/errors.hpp"
#include "gift/tensor.hpp"

#include <string>

namespace gift {

// RGB image, channel-last, values in [0,1]. The single numeric currency of
// the pipeline; PNG 8-bit only at the file boundary.
struct FaceImage {
  Tensord pixels;  // (H, W, 3)

  int height() const { return pixels.dim(0); }
  int width() const { return pixels.dim(1); }
};

inline void validateImageShape(const Tensord& t) {
  if (t.rank() != 3 || t.dim(2) != 3)
    throw ValidationError("image must have shape (H, W, 3), got " + t.shapeString());
  if (t.dim(0) < 16 || t.dim(1) < 16)
    throw ValidationError("image smaller than 16x16: " + t.shapeString());
}

// Clamps a raw (H, W, 3) tensor into a valid FaceImage. Rejects non-finite input.
inline FaceImage clamp(const Tensord& raw) {
  validateImageShape(raw);
  if (!raw.allFinite()) throw ValidationError("image contains non-finite values");
  FaceImage img{raw};
  img.pixels.asVector() = img.pixels.asVector().array().max(0.0).min(1.0);
  return img;
}

inline void validateImage(const FaceImage& img) {
  validateImageShape(img.pixels);
  if (!img.pixels.allFinite()) throw ValidationError("image contains non-finite values");
  for (std::int64_t i = 0; i < img.pixels.numel(); ++i)
    if (img.pixels[i] < 0.0 || img.pixels[i] > 1.0)
      throw ValidationError("image value out of [0,1]");
}

inline double meanSquaredError(const FaceImage& a, const FaceImage& b) {
  if (!a.pixels.sameShape(b.pixels))
    throw ValidationError("image shape mismatch: " + a.pixels.shapeString() + " vs " +
                          b.pixels.shapeString());
  return (a.pixels.asVector() - b.pixels.asVector()).squaredNorm() /
         static_cast<double>(a.pixels.numel());
}

}  // namespace gift
