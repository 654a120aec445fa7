#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace gift {

// Dense row-major tensor with a small dynamic shape. Images are stored
// height x width x channels, weights as (kh, kw, cin, cout).
template <typename S>
class Tensor {
 public:
  using Scalar = S;
  using MatrixMap =
      Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap = Eigen::Map<
      const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using VectorMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>;
  using ConstVectorMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, S fill = S(0))
      : shape_(std::move(shape)), data_(checkedNumel(shape_), fill) {}

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, S v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(S v) { return Tensor({1}, v); }

  static Tensor fromData(std::vector<int> shape, std::vector<S> data) {
    Tensor t;
    t.shape_ = std::move(shape);
    if (checkedNumel(t.shape_) != static_cast<std::int64_t>(data.size()))
      throw std::invalid_argument("Tensor::fromData: shape/data size mismatch");
    t.data_ = std::move(data);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& raw() { return data_; }
  const std::vector<S>& raw() const { return data_; }

  S& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  S operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // 3-d access (h, w, c)
  S& at(int h, int w, int c) {
    return data_[static_cast<std::size_t>((static_cast<std::int64_t>(h) * shape_[1] + w) *
                                              shape_[2] +
                                          c)];
  }
  S at(int h, int w, int c) const {
    return data_[static_cast<std::size_t>((static_cast<std::int64_t>(h) * shape_[1] + w) *
                                              shape_[2] +
                                          c)];
  }

  Tensor reshaped(std::vector<int> shape) const {
    if (checkedNumel(shape) != numel())
      throw std::invalid_argument("Tensor::reshaped: element count mismatch");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  MatrixMap asMatrix(int rows, int cols) {
    if (static_cast<std::int64_t>(rows) * cols != numel())
      throw std::invalid_argument("Tensor::asMatrix: size mismatch");
    return MatrixMap(data(), rows, cols);
  }
  ConstMatrixMap asMatrix(int rows, int cols) const {
    if (static_cast<std::int64_t>(rows) * cols != numel())
      throw std::invalid_argument("Tensor::asMatrix: size mismatch");
    return ConstMatrixMap(data(), rows, cols);
  }
  VectorMap asVector() { return VectorMap(data(), numel()); }
  ConstVectorMap asVector() const { return ConstVectorMap(data(), numel()); }

  bool sameShape(const Tensor& o) const { return shape_ == o.shape_; }

  bool allFinite() const {
    for (S v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shapeString() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ')';
    return os.str();
  }

 private:
  static std::int64_t checkedNumel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<S> data_;
};

using Tensord = Tensor<double>;

}  // namespace gift
