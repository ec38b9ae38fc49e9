#pragma once

#include <cstdint>

#include "illumseg/field.hpp"
#include "illumseg/image.hpp"
#include "illumseg/pd_solver.hpp"
#include "illumseg/segmenter.hpp"

/// Independent reference computations used to check the solver and the pipeline.
namespace illumseg::oracle {

/// Per-pixel objective of the constrained primal update, written out directly.
double pixel_objective(double r, double l, double a, double b, double c, double s, double r_n, double l_n,
                       double gamma, double mu, double sigma);

struct GridSpec {
  double r_max = 10.0;
  double l_max = 10.0;
  double step = 1e-3;
};

struct PixelOptimum {
  double r = 0.0;
  double l = 0.0;
  double value = 0.0;
};

/// Grid search over [0, r_max] x [-l_max, l_max] down to resolution `step`,
/// then one Newton refinement on the active set (r = 0 line if the
/// unconstrained stationary point is infeasible). The search is coarse-to-fine:
/// each level scans a full window of the previous level's cells around its
/// argmin (ties go to the lowest index). Throws NumericError if the refinement
/// moves farther than one grid step in the objective's curvature norm, i.e. the
/// grid did not bracket the optimum.
PixelOptimum pixel_qp_oracle(double a, double b, double c, double s, double r_n, double l_n, double gamma,
                             double mu, double sigma, const GridSpec& grid = {});

struct DescentResult {
  ScalarField r;
  ScalarField l;
  double energy = 0.0;       // energy of the returned iterate
  std::vector<double> trace;  // energy every `trace_every` steps
};

/// Projected subgradient descent on the primal energy from (r, l) = (0, s) with
/// diminishing steps, r clamped at 0 after each step. Returns the iterate with
/// the lowest energy seen. Intended for grids up to 64 x 64.
DescentResult primal_descent_oracle(const ScalarField& s, const pd::SolverConfig& config, int iterations,
                                    int trace_every = 1000);

/// Synthetic image S = L * R with known phases.
struct SyntheticScene {
  RasterImage image;
  seg::LabelMap true_labels;
  ScalarField true_reflectance;
  ScalarField true_illumination;
  std::uint64_t seed = 0;
};

/// Piecewise-constant reflectance with `phase_count` levels (boundaries are level
/// sets of a smooth random field) under illumination 1 - bias_amplitude * g, g a
/// smooth bump normalized to [0, 1]. Gaussian noise of `noise_sigma` is added
/// before clamping to [0, 1]. Deterministic in `seed`.
SyntheticScene synth_biased_scene(std::size_t height, std::size_t width, int phase_count, double bias_amplitude,
                                  double noise_sigma, std::uint64_t seed);

/// Fraction of agreeing pixels under the best relabeling of `predicted` (exhaustive
/// over permutations; K <= 8).
double segmentation_accuracy(const seg::LabelMap& predicted, const seg::LabelMap& truth);

/// Two-class Otsu threshold on [0, 1] intensities using a 256-bin histogram.
double otsu_threshold(const ScalarField& intensities);

}  // namespace illumseg::oracle
