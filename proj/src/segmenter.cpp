#include "illumseg/segmenter.hpp"

#include <cmath>
#include <string>

#include "illumseg/errors.hpp"

namespace illumseg::seg {

Thresholds::Thresholds(std::vector<double> rho) : rho_(std::move(rho)) {
  if (rho_.size() < 3) throw InvalidArgument("thresholds: need at least two phases");
  if (rho_.front() != 0.0 || rho_.back() != 1.0) throw InvalidArgument("thresholds: endpoints must be 0 and 1");
  for (std::size_t k = 1; k < rho_.size(); ++k) {
    if (!(rho_[k] > rho_[k - 1])) throw InvalidArgument("thresholds: values must be strictly increasing");
  }
}

Thresholds Thresholds::from_interior(const std::vector<double>& interior) {
  if (interior.empty()) throw InvalidArgument("thresholds: at least one interior value required");
  std::vector<double> rho;
  rho.reserve(interior.size() + 2);
  rho.push_back(0.0);
  for (double v : interior) {
    if (!(v > 0.0 && v < 1.0)) throw InvalidArgument("thresholds: interior values must lie in (0, 1)");
    rho.push_back(v);
  }
  rho.push_back(1.0);
  return Thresholds(std::move(rho));
}

Thresholds Thresholds::uniform(int phases) {
  if (phases < 2) throw InvalidArgument("thresholds: need at least two phases");
  std::vector<double> interior;
  for (int k = 1; k < phases; ++k) interior.push_back(static_cast<double>(k) / phases);
  return from_interior(interior);
}

LabelMap threshold_phases(const ScalarField& R, const Thresholds& thresholds) {
  const auto& rho = thresholds.rho();
  const int K = thresholds.phases();
  LabelMap map{R.shape(), std::vector<int>(R.size()), thresholds};
  for (std::size_t j = 0; j < R.size(); ++j) {
    const double v = R[j];
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("threshold_phases: R outside [0, 1]");
    int label = K;
    for (int i = 1; i <= K; ++i) {
      if (v < rho[static_cast<std::size_t>(i)]) {
        label = i;
        break;
      }
    }
    map.labels[j] = label;
  }
  return map;
}

RasterImage phase_mask(const LabelMap& map, int phase) {
  if (phase < 1 || phase > map.phases()) {
    throw InvalidArgument("phase_mask: phase " + std::to_string(phase) + " out of range");
  }
  std::vector<double> mask(map.labels.size());
  for (std::size_t j = 0; j < mask.size(); ++j) mask[j] = map.labels[j] == phase ? 1.0 : 0.0;
  return RasterImage(map.shape, std::move(mask));
}

const std::vector<Rgb>& overlay_palette() {
  static const std::vector<Rgb> palette = {
      {255, 0, 0}, {0, 200, 0}, {0, 90, 255}, {255, 200, 0}, {200, 0, 255}, {0, 220, 220}, {255, 120, 0}, {255, 0, 140},
  };
  return palette;
}

std::vector<bool> boundary_pixels(const LabelMap& map) {
  const std::size_t h = map.shape.height, w = map.shape.width;
  std::vector<bool> edge(map.labels.size(), false);
  for (std::size_t j = 0; j < w; ++j) {
    for (std::size_t i = 0; i < h; ++i) {
      const int here = map(i, j);
      const bool differs = (i > 0 && map(i - 1, j) != here) || (i + 1 < h && map(i + 1, j) != here) ||
                           (j > 0 && map(i, j - 1) != here) || (j + 1 < w && map(i, j + 1) != here);
      edge[j * h + i] = differs;
    }
  }
  return edge;
}

RgbImage render_overlay(const LabelMap& map, const RasterImage& base) {
  if (map.shape != base.shape()) throw InvalidArgument("render_overlay: dimension mismatch");
  const auto& palette = overlay_palette();
  const auto edge = boundary_pixels(map);
  RgbImage out{base.shape(), std::vector<Rgb>(map.labels.size())};
  for (std::size_t k = 0; k < out.pixels.size(); ++k) {
    if (edge[k]) {
      out.pixels[k] = palette[static_cast<std::size_t>(map.labels[k] - 1) % palette.size()];
    } else {
      const std::uint8_t g = quantize_unit(base.intensities()[k]);
      out.pixels[k] = {g, g, g};
    }
  }
  return out;
}

ScalarField label_gray_levels(const LabelMap& map) {
  const double span = static_cast<double>(map.phases() - 1);
  ScalarField out(map.shape);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<double>(map.labels[k] - 1) / span;
  return out;
}

}  // namespace illumseg::seg
