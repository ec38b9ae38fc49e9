#pragma once

#include <vector>

#include "illumseg/field.hpp"
#include "illumseg/image.hpp"

namespace illumseg::seg {

/// 0 = rho_0 < rho_1 < ... < rho_K = 1 for a K-phase split (K >= 2).
class Thresholds {
 public:
  /// Full vector including both endpoints. Throws InvalidArgument if malformed.
  explicit Thresholds(std::vector<double> rho);
  /// Interior values rho_1..rho_{K-1}, each in (0, 1), strictly increasing.
  static Thresholds from_interior(const std::vector<double>& interior);
  /// K - 1 equally spaced interior values.
  static Thresholds uniform(int phases);

  [[nodiscard]] int phases() const { return static_cast<int>(rho_.size()) - 1; }
  [[nodiscard]] const std::vector<double>& rho() const { return rho_; }
  [[nodiscard]] std::vector<double> interior() const { return {rho_.begin() + 1, rho_.end() - 1}; }

  friend bool operator==(const Thresholds&, const Thresholds&) = default;

 private:
  std::vector<double> rho_;
};

/// Per-pixel phase index in 1..K (column-major).
struct LabelMap {
  Shape shape;
  std::vector<int> labels;
  Thresholds thresholds;

  [[nodiscard]] int phases() const { return thresholds.phases(); }
  [[nodiscard]] int operator()(std::size_t i, std::size_t j) const { return labels[j * shape.height + i]; }
};

/// Label i iff rho_{i-1} <= R(x) < rho_i; R(x) = 1 goes to phase K.
/// Throws InvalidArgument if R leaves [0, 1].
LabelMap threshold_phases(const ScalarField& R, const Thresholds& thresholds);

/// Binary image, 1 where the label equals `phase` (1-based).
RasterImage phase_mask(const LabelMap& map, int phase);

/// Overlay colours, phase 1 first. Phase k uses entry (k-1) modulo the palette size.
const std::vector<Rgb>& overlay_palette();

/// True where a 4-neighbour carries a different label.
std::vector<bool> boundary_pixels(const LabelMap& map);

/// Grayscale `base` as RGB with boundary pixels painted in their phase's palette colour.
RgbImage render_overlay(const LabelMap& map, const RasterImage& base);

/// Label map as 8-bit gray: label k -> round(255 (k - 1) / (K - 1)).
ScalarField label_gray_levels(const LabelMap& map);

}  // namespace illumseg::seg
