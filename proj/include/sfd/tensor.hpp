#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sfd {

/// Dense row-major tensor of doubles, up to 4 dims. Image convention is
/// [B,C,H,W]; sequences are [B,C,L] or [B,L,D] depending on the call site.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Unchecked multi-index access; index arity must match rank.
  double& at(std::size_t i0) { return data_[i0]; }
  double& at(std::size_t i0, std::size_t i1) { return data_[i0 * shape_[1] + i1]; }
  double& at(std::size_t i0, std::size_t i1, std::size_t i2) {
    return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
  }
  double& at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) {
    return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
  }
  double at(std::size_t i0) const { return data_[i0]; }
  double at(std::size_t i0, std::size_t i1) const { return data_[i0 * shape_[1] + i1]; }
  double at(std::size_t i0, std::size_t i1, std::size_t i2) const {
    return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
  }
  double at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) const {
    return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

  Tensor reshaped(std::vector<std::size_t> new_shape) const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

// Elementwise helpers used across modules.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

// Fills with uniform(lo, hi) draws from the given engine.
void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi);
Tensor random_uniform(std::vector<std::size_t> shape, std::mt19937_64& rng,
                      double lo = -0.5, double hi = 0.5);

}  // namespace sfd
