#pragma once

#include <filesystem>
#include <string>

#include "illumseg/field.hpp"
#include "illumseg/linear_ops.hpp"
#include "illumseg/random.hpp"

namespace illumseg::testing {

inline ScalarField random_field(Shape shape, Rng& rng, double scale = 1.0) {
  ScalarField f(shape);
  for (double& v : f.values()) v = scale * rng.normal();
  return f;
}

inline VectorField2 random_vector_field(Shape shape, Rng& rng) {
  VectorField2 vf(shape);
  vf.x = random_field(shape, rng);
  vf.y = random_field(shape, rng);
  return vf;
}

inline FrameletCoeffs random_coeffs(Shape shape, Rng& rng, double scale = 1.0) {
  FrameletCoeffs p(shape);
  for (auto& sb : p.subbands) sb = random_field(shape, rng, scale);
  return p;
}

/// Fresh empty directory under the system temp dir, unique per name.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("illumseg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace illumseg::testing
