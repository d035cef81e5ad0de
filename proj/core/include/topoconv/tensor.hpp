#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace topoconv {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles with rank 1..4.
///
/// Rank-4 tensors follow the [N, C, H, W] layout; lower ranks drop leading
/// axes ([C, H, W], [H, W], [W]). The element count always equals the
/// product of the shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }
  static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t dim(std::size_t axis) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // 4-D accessors; valid only for rank-4 tensors.
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  Tensor reshaped(Shape shape) const;
  void fill(double v);

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  double max_abs_diff(const Tensor& other) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  Shape shape_;
  std::vector<double> data_;
};

// TNSR container: "TNSR", u32 rank, u32 dims..., little-endian f64 payload.
void write_tnsr(std::ostream& out, const Tensor& t);
Tensor read_tnsr(std::istream& in);
void save_tnsr(const std::string& path, const Tensor& t);
Tensor load_tnsr(const std::string& path);

}  // namespace topoconv
