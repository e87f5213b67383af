#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <vector>

namespace genesnn {

// Dense row-major rank-4 tensor of doubles. Everything in this project is at
// most rank 4 (batches, conv weights, gene encodings); lower-rank data uses
// trailing axes of size 1 so conv and dense code paths stay uniform.
class Tensor {
 public:
  Tensor() = default;

  Tensor(int d0, int d1, int d2, int d3, double fill = 0.0)
      : shape_{d0, d1, d2, d3},
        data_(static_cast<std::size_t>(d0) * d1 * d2 * d3, fill) {
    assert(d0 >= 0 && d1 >= 0 && d2 >= 0 && d3 >= 0);
  }

  static Tensor zeros_like(const Tensor& t) {
    return Tensor(t.shape_[0], t.shape_[1], t.shape_[2], t.shape_[3]);
  }

  const std::array<int, 4>& shape() const { return shape_; }
  int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(int a, int b, int c, int d) { return data_[index(a, b, c, d)]; }
  double operator()(int a, int b, int c, int d) const { return data_[index(a, b, c, d)]; }

  std::size_t index(int a, int b, int c, int d) const {
    assert(a >= 0 && a < shape_[0] && b >= 0 && b < shape_[1]);
    assert(c >= 0 && c < shape_[2] && d >= 0 && d < shape_[3]);
    return ((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
  }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool all_finite() const;

  /// Sum of all entries.
  double sum() const;

  /// Squared Frobenius norm.
  double squared_norm() const;

  Tensor& operator+=(const Tensor& o);
  Tensor& operator-=(const Tensor& o);
  Tensor& operator*=(double s);

 private:
  std::array<int, 4> shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

/// Max |a-b| over all entries; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Relative Frobenius distance ||a-b||_F / max(||b||_F, eps).
double relative_frobenius(const Tensor& a, const Tensor& b, double eps = 1e-300);

}  // namespace genesnn
