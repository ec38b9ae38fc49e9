#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "illumseg/field.hpp"

namespace illumseg {

/// Forward differences (x along rows i, y along columns j).
/// Invariant: x is zero on the last row, y is zero on the last column.
struct VectorField2 {
  ScalarField x;
  ScalarField y;

  VectorField2() = default;
  explicit VectorField2(Shape shape) : x(shape), y(shape) {}
  [[nodiscard]] Shape shape() const { return x.shape(); }
};

inline constexpr std::size_t kSubbandCount = 9;

/// One-level undecimated framelet coefficients. Subband a*3+b holds the
/// response to h_a (along rows) tensor h_b (along columns); subband 0 is the low-pass.
struct FrameletCoeffs {
  std::array<ScalarField, kSubbandCount> subbands;

  FrameletCoeffs() = default;
  explicit FrameletCoeffs(Shape shape) { subbands.fill(ScalarField(shape)); }
  [[nodiscard]] Shape shape() const { return subbands[0].shape(); }
  ScalarField& operator[](std::size_t k) { return subbands[k]; }
  const ScalarField& operator[](std::size_t k) const { return subbands[k]; }
};

/// The three 1-D piecewise linear B-spline framelet masks, taps at offsets -1, 0, +1.
struct FilterBank {
  std::array<std::array<double, 3>, 3> taps;

  static FilterBank piecewise_linear();
  /// Same bank with the leading tap of h2 negated. Breaks the unitary extension
  /// identity while keeping analysis and synthesis adjoint; used to exercise `validate`.
  static FilterBank with_flipped_tap();
};

VectorField2 grad(const ScalarField& u);
/// Exact adjoint of grad (negative divergence). Entries on the last row of x and
/// last column of y do not contribute.
ScalarField grad_adjoint(const VectorField2& vf);

/// W u: each subband is a periodic 2-D convolution with a tensor-product filter.
FrameletCoeffs framelet_analyze(const ScalarField& u, const FilterBank& bank = FilterBank::piecewise_linear());
/// W^T p: sum of periodic correlations with the same filters.
ScalarField framelet_synthesize(const FrameletCoeffs& coeffs,
                                const FilterBank& bank = FilterBank::piecewise_linear());

double dot(const VectorField2& a, const VectorField2& b);
double dot(const FrameletCoeffs& a, const FrameletCoeffs& b);

/// Normalized 1-D Gaussian taps for the given variance, radius ceil(4 * sqrt(variance)).
std::vector<double> gaussian_kernel(double variance);

/// Separable Gaussian smoothing with half-sample symmetric (mirror) boundaries.
ScalarField gaussian_smooth(const ScalarField& u, double variance);

/// Edge indicator v(j) = 1 / (1 + eps * sum_{k=1..8} |(H_k s~)(j)|^2) with
/// s~ the variance-1 Gaussian smoothing of s and eps = 50 / (H*W).
ScalarField edge_weights(const ScalarField& s);

/// Per-pixel l2 norm of diag G's column (0, v, ..., v): sqrt(8) * v.
ScalarField dual_radius(const ScalarField& weights);

/// Linear map between flat vectors, used by the operator-norm estimate.
struct LinearMap {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::function<std::vector<double>(std::span<const double>)> apply;
  std::function<std::vector<double>(std::span<const double>)> apply_adjoint;
};

/// Relative discrepancy |<Kx, y> - <x, K^T y>| / (|Kx| |y|) on one seeded random pair.
double adjoint_mismatch(const LinearMap& op, std::uint64_t seed);

/// sqrt of the Rayleigh quotient of K^T K after `iterations` power steps from a
/// seeded random start. Throws InvalidArgument if apply/apply_adjoint fail the
/// adjoint check (relative mismatch above 1e-10).
double operator_norm_estimate(const LinearMap& op, int iterations, std::uint64_t seed);

/// Stacked operators as flat maps: grad on a grid, and K(r, l) = (W r, grad r, grad l).
LinearMap gradient_map(Shape shape);
LinearMap tight_frame_stack_map(Shape shape);
/// TV counterpart of the stack: K(r, l) = (grad r, grad r, grad l).
LinearMap tv_stack_map(Shape shape);

}  // namespace illumseg
