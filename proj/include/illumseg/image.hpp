#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "illumseg/field.hpp"

namespace illumseg {

/// Grayscale image with intensities normalized to [0, 1], column-major like ScalarField.
class RasterImage {
 public:
  RasterImage() = default;
  /// Throws InvalidArgument on a zero dimension or an intensity outside [0, 1].
  RasterImage(Shape shape, std::vector<double> intensities);

  [[nodiscard]] Shape shape() const { return shape_; }
  [[nodiscard]] std::size_t height() const { return shape_.height; }
  [[nodiscard]] std::size_t width() const { return shape_.width; }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
    return intensities_[j * shape_.height + i];
  }
  [[nodiscard]] const std::vector<double>& intensities() const { return intensities_; }

  [[nodiscard]] ScalarField to_field() const { return ScalarField(shape_, intensities_); }

 private:
  Shape shape_{};
  std::vector<double> intensities_;
};

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster, column-major.
struct RgbImage {
  Shape shape;
  std::vector<Rgb> pixels;

  Rgb& operator()(std::size_t i, std::size_t j) { return pixels[j * shape.height + i]; }
  const Rgb& operator()(std::size_t i, std::size_t j) const { return pixels[j * shape.height + i]; }
};

/// Reads a binary PGM (P5, 8 or 16 bit) or a PNG (gray, gray+alpha, RGB, RGBA, palette;
/// 8 or 16 bit). Colour is reduced to luminance with BT.601 weights.
/// Throws IoError ("unreadable file", "unsupported format", "zero-dimension image").
RasterImage load_image(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG, or PGM when the extension is ".pgm".
/// Values are clamped to [0, 1] when `clamp` is set (otherwise out-of-range values
/// are an error) and quantized as round(255 * v) with halves rounded away from
/// zero, so 0.5 maps to 128.
void save_image(const ScalarField& field, const std::filesystem::path& path, bool clamp = true);
void save_image(const RasterImage& image, const std::filesystem::path& path);
void save_rgb_png(const RgbImage& image, const std::filesystem::path& path);

/// Quantization used by save_image.
std::uint8_t quantize_unit(double v);

inline constexpr double kDefaultLogFloor = 1.0 / 255.0;

/// s = log(max(S, floor)).
ScalarField to_log_domain(const RasterImage& image, double floor = kDefaultLogFloor);

/// R = exp(-r); throws InvalidArgument if r has a negative entry.
ScalarField reflection_from_r(const ScalarField& r);

/// Affine min-max map onto [0, 1]. A constant field maps to 0.5 everywhere.
ScalarField rescale_unit(const ScalarField& field);

/// Raw float export: little-endian f32, column-major, plus a JSON sidecar
/// {width, height, dtype: "f32le", order: "col"} at `path` with extension ".json".
void save_raw_field(const ScalarField& field, const std::filesystem::path& path);
ScalarField load_raw_field(const std::filesystem::path& path);
std::filesystem::path raw_sidecar_path(const std::filesystem::path& path);

}  // namespace illumseg
