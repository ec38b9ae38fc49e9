#include "illumseg/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "illumseg/errors.hpp"

namespace illumseg {

ScalarField::ScalarField(Shape shape, double fill) : shape_(shape), values_(shape.size(), fill) {}

ScalarField::ScalarField(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw InvalidArgument("ScalarField: value count does not match shape");
  }
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ScalarField::min() const {
  if (values_.empty()) throw InvalidArgument("ScalarField::min on empty field");
  return *std::min_element(values_.begin(), values_.end());
}

double ScalarField::max() const {
  if (values_.empty()) throw InvalidArgument("ScalarField::max on empty field");
  return *std::max_element(values_.begin(), values_.end());
}

ScalarField& ScalarField::operator+=(const ScalarField& other) {
  if (other.shape_ != shape_) throw InvalidArgument("ScalarField: shape mismatch");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& other) {
  if (other.shape_ != shape_) throw InvalidArgument("ScalarField: shape mismatch");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
  return *this;
}

ScalarField& ScalarField::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double scale, ScalarField a) { return a *= scale; }

double dot(const ScalarField& a, const ScalarField& b) {
  if (a.shape() != b.shape()) throw InvalidArgument("dot: shape mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

double norm2(const ScalarField& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const ScalarField& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace illumseg
