// Dense row-major double tensor, the storage type behind the autodiff graph.
#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "deepssc/common.hpp"

namespace deepssc {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != shape_numel(shape_)) {
      throw ContractError("tensor data size does not match shape " + shape_str(shape_));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const Shape& shape() const { return shape_; }
  int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& at(int64_t i) { return data_[static_cast<size_t>(i)]; }
  double at(int64_t i) const { return data_[static_cast<size_t>(i)]; }

  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  // Scalar convenience (tensors of one element).
  double item() const {
    if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape_));
    return data_[0];
  }

  Tensor reshaped(Shape s) const {
    if (shape_numel(s) != numel()) {
      throw ContractError("reshape " + shape_str(shape_) + " -> " + shape_str(s));
    }
    return Tensor(std::move(s), data_);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace deepssc
