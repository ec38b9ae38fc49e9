#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace illumseg {

/// Grid dimensions. Row index i runs over height, column index j over width.
struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;

  [[nodiscard]] std::size_t size() const { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Real-valued field on an H x W grid.
///
/// Storage is column-major: pixel (i, j) lives at linear index j * height + i,
/// which matches the column-wise concatenation used throughout the model.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(Shape shape, double fill = 0.0);
  ScalarField(std::size_t height, std::size_t width, double fill = 0.0)
      : ScalarField(Shape{height, width}, fill) {}
  ScalarField(Shape shape, std::vector<double> values);

  [[nodiscard]] Shape shape() const { return shape_; }
  [[nodiscard]] std::size_t height() const { return shape_.height; }
  [[nodiscard]] std::size_t width() const { return shape_.width; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] bool empty() const { return values_.empty(); }

  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const { return j * shape_.height + i; }

  double& operator()(std::size_t i, std::size_t j) { return values_[index(i, j)]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[index(i, j)]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  [[nodiscard]] std::span<double> values() & { return values_; }
  [[nodiscard]] std::span<const double> values() const& { return values_; }
  std::span<const double> values() const&& = delete;
  [[nodiscard]] const std::vector<double>& vector() const { return values_; }

  [[nodiscard]] bool all_finite() const;
  [[nodiscard]] double min() const;
  [[nodiscard]] double max() const;

  ScalarField& operator+=(const ScalarField& other);
  ScalarField& operator-=(const ScalarField& other);
  ScalarField& operator*=(double scale);

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  Shape shape_{};
  std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double scale, ScalarField a);

/// Euclidean inner product over all pixels.
double dot(const ScalarField& a, const ScalarField& b);
/// Euclidean norm over all pixels.
double norm2(const ScalarField& a);
/// Largest absolute entry.
double norm_inf(const ScalarField& a);

}  // namespace illumseg
