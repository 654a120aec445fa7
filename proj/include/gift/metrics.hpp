#pragma once

#include "gift/errors.hpp"
#include "gift/fr.hpp"
#include "gift/image.hpp"

#include <string>
#include <vector>

namespace gift {

struct VerificationRecord {
  std::string imageId;
  double cosToTarget = 0;
  double tau = 0;
  bool success = false;

  static VerificationRecord make(std::string imageId, double cosToTarget, double tau) {
    return {std::move(imageId), cosToTarget, tau, cosToTarget >= tau};
  }
};

// 100 * (#success / #records)
double psrVerification(const std::vector<VerificationRecord>& records);

struct GalleryEntry {
  std::string identityId;
  Embedding embedding;
};

// Sort the gallery by ascending cosine distance to the probe (ties by gallery
// index) and report whether the target identity lands in the top n.
bool rankNHit(const Embedding& probe, const std::vector<GalleryEntry>& gallery,
              const std::string& targetId, int n);

// Frechet distance between Gaussian fits of two feature populations
// (rows = samples). Sample covariance with denominator n-1; the matrix square
// root goes through a symmetrized eigendecomposition with negative eigenvalues
// clamped and a small ridge near singularity. Clamped to >= 0.
double fid(const Eigen::MatrixXd& featuresA, const Eigen::MatrixXd& featuresB);

// 10*log10(1/MSE), dynamic range 1. Identical images give +infinity.
double psnr(const FaceImage& a, const FaceImage& b);

// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03,
// dynamic range 1, grayscale by channel mean. Value in [-1, 1].
double ssim(const FaceImage& a, const FaceImage& b);

// Absolute PSR difference against a baseline method.
double psrGain(double methodPsr, double baselinePsr);

}  // namespace gift
