#include "gift/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gift {

double psrVerification(const std::vector<VerificationRecord>& records) {
  if (records.empty()) throw ValidationError("PSR over an empty record list");
  std::size_t hit = 0;
  for (const auto& r : records) hit += r.success ? 1 : 0;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(records.size());
}

bool rankNHit(const Embedding& probe, const std::vector<GalleryEntry>& gallery,
              const std::string& targetId, int n) {
  if (n < 1) throw ValidationError("rank must be >= 1");
  if (gallery.empty()) throw ValidationError("empty gallery");
  bool present = false;
  for (const auto& e : gallery)
    if (e.identityId == targetId) present = true;
  if (!present) throw ValidationError("target identity absent from gallery: " + targetId);

  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dist(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i)
    dist[i] = cosineDistance(probe, gallery[i].embedding);
  std::stable_sort(order.begin(), order.end(),
                   [&dist](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(n), gallery.size());
  for (std::size_t i = 0; i < top; ++i)
    if (gallery[order[i]].identityId == targetId) return true;
  return false;
}

namespace {

// Symmetric PSD square root via eigendecomposition, negative eigenvalues
// clamped to zero.
Eigen::MatrixXd psdSqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd sampleCovariance(const Eigen::MatrixXd& x) {
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

}  // namespace

double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw ValidationError("FID feature dimension mismatch");
  if (a.rows() < 2 || b.rows() < 2)
    throw ValidationError("FID needs at least 2 samples per set");

  Eigen::VectorXd muA = a.colwise().mean();
  Eigen::VectorXd muB = b.colwise().mean();
  Eigen::MatrixXd covA = sampleCovariance(a);
  Eigen::MatrixXd covB = sampleCovariance(b);

  // tr sqrt(covA covB) via the symmetric form sqrt(covA)^T covB sqrt(covA).
  Eigen::MatrixXd rootA = psdSqrt(covA);
  Eigen::MatrixXd inner = rootA * covB * rootA;
  double traceInner = psdSqrt(inner).trace();
  // Ridge retry when the product is numerically degenerate.
  if (!std::isfinite(traceInner)) {
    double ridge = 1e-6;
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(a.cols(), a.cols());
    rootA = psdSqrt(covA + ridge * eye);
    inner = rootA * (covB + ridge * eye) * rootA;
    traceInner = psdSqrt(inner).trace();
  }

  double d = (muA - muB).squaredNorm() + covA.trace() + covB.trace() - 2.0 * traceInner;
  if (d < -1e-6) throw ValidationError("FID evaluated below -1e-6: numerical failure");
  return std::max(0.0, d);
}

double psnr(const FaceImage& a, const FaceImage& b) {
  double mse = meanSquaredError(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::vector<double> gaussianKernel11() {
  const double sigma = 1.5;
  std::vector<double> k(11);
  double sum = 0;
  for (int i = 0; i < 11; ++i) {
    double d = i - 5.0;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i)];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-mode Gaussian filter of a (h, w) grayscale buffer.
Eigen::MatrixXd gaussianFilterValid(const Eigen::MatrixXd& img) {
  static const std::vector<double> k = gaussianKernel11();
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  Eigen::MatrixXd tmp(h, w - 10);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x + 10 < w; ++x) {
      double s = 0;
      for (int i = 0; i < 11; ++i) s += k[static_cast<std::size_t>(i)] * img(y, x + i);
      tmp(y, x) = s;
    }
  Eigen::MatrixXd out(h - 10, w - 10);
  for (int y = 0; y + 10 < h; ++y)
    for (int x = 0; x < w - 10; ++x) {
      double s = 0;
      for (int i = 0; i < 11; ++i) s += k[static_cast<std::size_t>(i)] * tmp(y + i, x);
      out(y, x) = s;
    }
  return out;
}

Eigen::MatrixXd toGray(const FaceImage& img) {
  Eigen::MatrixXd g(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      g(y, x) = (img.pixels.at(y, x, 0) + img.pixels.at(y, x, 1) + img.pixels.at(y, x, 2)) / 3.0;
  return g;
}

}  // namespace

double ssim(const FaceImage& a, const FaceImage& b) {
  if (!a.pixels.sameShape(b.pixels)) throw ValidationError("SSIM shape mismatch");
  if (a.height() < 11 || a.width() < 11)
    throw ValidationError("SSIM needs images of at least 11x11");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // (K*L)^2 with L = 1

  Eigen::MatrixXd x = toGray(a), y = toGray(b);
  Eigen::MatrixXd mx = gaussianFilterValid(x);
  Eigen::MatrixXd my = gaussianFilterValid(y);
  Eigen::MatrixXd mxx = gaussianFilterValid(x.cwiseProduct(x));
  Eigen::MatrixXd myy = gaussianFilterValid(y.cwiseProduct(y));
  Eigen::MatrixXd mxy = gaussianFilterValid(x.cwiseProduct(y));

  Eigen::ArrayXXd vx = mxx.array() - mx.array().square();
  Eigen::ArrayXXd vy = myy.array() - my.array().square();
  Eigen::ArrayXXd cov = mxy.array() - (mx.array() * my.array());

  Eigen::ArrayXXd num = (2.0 * mx.array() * my.array() + c1) * (2.0 * cov + c2);
  Eigen::ArrayXXd den = (mx.array().square() + my.array().square() + c1) * (vx + vy + c2);
  return (num / den).mean();
}

double psrGain(double methodPsr, double baselinePsr) {
  if (methodPsr < 0 || methodPsr > 100 || baselinePsr < 0 || baselinePsr > 100)
    throw ValidationError("PSR values must lie in [0, 100]");
  return methodPsr - baselinePsr;
}

}  // namespace gift
