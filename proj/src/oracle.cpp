#include "illumseg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "illumseg/errors.hpp"
#include "illumseg/linear_ops.hpp"
#include "illumseg/random.hpp"

namespace illumseg::oracle {

namespace {

struct Point {
  double r;
  double l;
};

// Finite-difference gradient and Hessian; exact up to rounding for quadratics.
struct Quadratic {
  double gr, gl, hrr, hrl, hll;
};

constexpr double kFdStep = 1e-2;

template <class F>
Quadratic local_quadratic(const F& f, Point x) {
  const double d = kFdStep;
  const double f0 = f(x.r, x.l);
  const double frp = f(x.r + d, x.l), frm = f(x.r - d, x.l);
  const double flp = f(x.r, x.l + d), flm = f(x.r, x.l - d);
  const double fpp = f(x.r + d, x.l + d), fpm = f(x.r + d, x.l - d);
  const double fmp = f(x.r - d, x.l + d), fmm = f(x.r - d, x.l - d);
  return {(frp - frm) / (2 * d),       (flp - flm) / (2 * d),
          (frp - 2 * f0 + frm) / (d * d), (fpp - fpm - fmp + fmm) / (4 * d * d),
          (flp - 2 * f0 + flm) / (d * d)};
}

struct Axis {
  double origin;
  double step;
  long lo;  // index range, inclusive
  long hi;
};

Axis window(double origin, double step, double box_lo, double box_hi, double center, double half_width) {
  const double lo = std::max(box_lo, center - half_width);
  const double hi = std::min(box_hi, center + half_width);
  return {origin, step, static_cast<long>(std::ceil((lo - origin) / step - 1e-9)),
          static_cast<long>(std::floor((hi - origin) / step + 1e-9))};
}

void flat_energy_gradient(const ScalarField& r, const ScalarField& l, const ScalarField& s,
                            const pd::SolverConfig& cfg, const ScalarField& weights, ScalarField& gr, ScalarField& gl) {
  // smooth part
  const ScalarField lap_r = grad_adjoint(grad(r));
  const ScalarField lap_l = grad_adjoint(grad(l));
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double e = l[k] - s[k] - r[k];
    gr[k] = cfg.alpha * lap_r[k] - cfg.gamma * e;
    gl[k] = cfg.beta * lap_l[k] + cfg.gamma * e + cfg.mu * l[k];
  }
  // subgradient of the l1-type term
  if (cfg.regularizer == pd::Regularizer::TightFrame) {
    FrameletCoeffs wr = framelet_analyze(r);
    for (std::size_t j = 0; j < s.size(); ++j) {
      double sq = 0.0;
      for (std::size_t b = 1; b < kSubbandCount; ++b) sq += wr[b][j] * wr[b][j];
      const double n = std::sqrt(sq);
      wr[0][j] = 0.0;
      for (std::size_t b = 1; b < kSubbandCount; ++b) wr[b][j] = n > 0.0 ? weights[j] * wr[b][j] / n : 0.0;
    }
    gr += framelet_synthesize(wr);
  } else {
    VectorField2 g = grad(r);
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double n = std::hypot(g.x[j], g.y[j]);
      g.x[j] = n > 0.0 ? g.x[j] / n : 0.0;
      g.y[j] = n > 0.0 ? g.y[j] / n : 0.0;
    }
    gr += grad_adjoint(g);
  }
}

}  // namespace

double pixel_objective(double r, double l, double a, double b, double c, double s, double r_n, double l_n,
                       double gamma, double mu, double sigma) {
  const double fit = l - s - r;
  return 0.5 * gamma * fit * fit + 0.5 * mu * l * l + a * r + b * r + c * l + (r - r_n) * (r - r_n) / (2 * sigma) +
         (l - l_n) * (l - l_n) / (2 * sigma);
}

PixelOptimum pixel_qp_oracle(double a, double b, double c, double s, double r_n, double l_n, double gamma,
                             double mu, double sigma, const GridSpec& grid) {
  for (double v : {a, b, c, s, r_n, l_n, gamma, mu, sigma}) {
    if (!std::isfinite(v)) throw InvalidArgument("pixel_qp_oracle: non-finite coefficient");
  }
  if (!(grid.step > 0.0 && grid.r_max > 0.0 && grid.l_max > 0.0)) throw InvalidArgument("pixel_qp_oracle: bad grid");
  auto f = [&](double r, double l) { return pixel_objective(r, l, a, b, c, s, r_n, l_n, gamma, mu, sigma); };

  // Coarsest level: about 100 cells along r.
  int levels = 0;
  while (grid.r_max / (grid.step * std::pow(10.0, levels)) > 100.0) ++levels;

  Point best{0.0, -grid.l_max};
  double best_value = std::numeric_limits<double>::infinity();
  double prev_step = 0.0;
  for (int level = levels; level >= 0; --level) {
    const double h = grid.step * std::pow(10.0, level);
    Axis ar, al;
    if (level == levels) {
      ar = window(0.0, h, 0.0, grid.r_max, 0.5 * grid.r_max, grid.r_max);
      al = window(-grid.l_max, h, -grid.l_max, grid.l_max, 0.0, grid.l_max);
    } else {
      ar = window(0.0, h, 0.0, grid.r_max, best.r, 2.0 * prev_step);
      al = window(-grid.l_max, h, -grid.l_max, grid.l_max, best.l, 2.0 * prev_step);
    }
    best_value = std::numeric_limits<double>::infinity();
    for (long jl = al.lo; jl <= al.hi; ++jl) {
      const double l = al.origin + static_cast<double>(jl) * h;
      for (long ir = ar.lo; ir <= ar.hi; ++ir) {
        const double r = static_cast<double>(ir) * h;
        const double v = f(r, l);
        if (v < best_value) {
          best_value = v;
          best = {r, l};
        }
      }
    }
    prev_step = h;
  }

  // Newton refinement from the grid argmin.
  const Quadratic q = local_quadratic(f, best);
  const double det = q.hrr * q.hll - q.hrl * q.hrl;
  if (!(det > 0.0 && q.hrr > 0.0)) throw NumericError("pixel_qp_oracle: objective is not strictly convex");
  Point refined{best.r - (q.hll * q.gr - q.hrl * q.gl) / det, best.l - (q.hrr * q.gl - q.hrl * q.gr) / det};
  if (refined.r < 0.0) {
    // constraint active: minimize along r = 0
    const Quadratic q0 = local_quadratic(f, Point{0.0, best.l});
    refined = {0.0, best.l - q0.gl / q0.hll};
  }

  const double dr = refined.r - best.r, dl = refined.l - best.l;
  const double move_h = std::sqrt(std::max(0.0, q.hrr * dr * dr + 2 * q.hrl * dr * dl + q.hll * dl * dl));
  const double tr = q.hrr + q.hll;
  const double lambda_max = 0.5 * (tr + std::sqrt(std::max(0.0, tr * tr - 4 * det)));
  if (move_h > grid.step * std::sqrt(lambda_max) * (1.0 + 1e-6)) {
    throw NumericError("pixel_qp_oracle: grid too coarse to bracket the minimizer");
  }
  const double refined_value = f(refined.r, refined.l);
  if (refined_value <= best_value) return {refined.r, refined.l, refined_value};
  return {best.r, best.l, best_value};
}

DescentResult primal_descent_oracle(const ScalarField& s, const pd::SolverConfig& config, int iterations,
                                    int trace_every) {
  config.validate();
  if (iterations < 1) throw InvalidArgument("primal_descent_oracle: iterations must be positive");
  const ScalarField weights =
      config.regularizer == pd::Regularizer::TightFrame ? edge_weights(s) : ScalarField(s.shape(), 1.0);
  // Lipschitz bound of the smooth part: ||grad||^2 <= 8 on each block, 2 gamma from the coupling.
  const double lipschitz = 8.0 * std::max(config.alpha, config.beta) + 2.0 * config.gamma + config.mu;
  const double t0 = 1.0 / lipschitz;

  ScalarField r(s.shape());
  ScalarField l = s;
  ScalarField gr(s.shape()), gl(s.shape());
  DescentResult out{r, l, pd::energy(r, l, s, config, weights), {}};
  for (int k = 0; k < iterations; ++k) {
    flat_energy_gradient(r, l, s, config, weights, gr, gl);
    const double t = t0 / std::sqrt(1.0 + static_cast<double>(k) / 100.0);
    for (std::size_t j = 0; j < s.size(); ++j) {
      r[j] = std::max(0.0, r[j] - t * gr[j]);
      l[j] -= t * gl[j];
    }
    if ((k + 1) % trace_every == 0 || k + 1 == iterations) {
      const double e = pd::energy(r, l, s, config, weights);
      out.trace.push_back(e);
      if (e < out.energy) {
        out.energy = e;
        out.r = r;
        out.l = l;
      }
    }
  }
  return out;
}

SyntheticScene synth_biased_scene(std::size_t height, std::size_t width, int phase_count, double bias_amplitude,
                                  double noise_sigma, std::uint64_t seed) {
  if (height < 16 || width < 16) throw InvalidArgument("synth_biased_scene: dimensions must be at least 16");
  if (phase_count < 2) throw InvalidArgument("synth_biased_scene: need at least two phases");
  if (!(bias_amplitude >= 0.0 && bias_amplitude < 1.0)) throw InvalidArgument("synth_biased_scene: bias in [0,1)");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("synth_biased_scene: noise_sigma must be non-negative");

  Rng rng(seed);
  const Shape shape{height, width};
  const double pi = std::numbers::pi;

  // Smooth random field from a handful of low-frequency cosines; its quantiles cut the phases.
  struct Wave {
    double amp, ky, kx, phase;
  };
  std::vector<Wave> waves;
  for (int m = 0; m < 6; ++m) {
    Wave w{rng.normal(), 0.0, 0.0, rng.uniform(0.0, 2 * pi)};
    do {
      w.ky = std::floor(rng.uniform(-2.0, 3.0));
      w.kx = std::floor(rng.uniform(-2.0, 3.0));
    } while (w.ky == 0.0 && w.kx == 0.0);
    waves.push_back(w);
  }
  ScalarField field(shape);
  for (std::size_t j = 0; j < width; ++j) {
    for (std::size_t i = 0; i < height; ++i) {
      const double y = static_cast<double>(i) / static_cast<double>(height);
      const double x = static_cast<double>(j) / static_cast<double>(width);
      double v = 0.0;
      for (const auto& w : waves) v += w.amp * std::cos(2 * pi * (w.ky * y + w.kx * x) + w.phase);
      field(i, j) = v;
    }
  }
  std::vector<double> sorted(field.values().begin(), field.values().end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  for (int k = 1; k < phase_count; ++k) {
    cuts.push_back(sorted[sorted.size() * static_cast<std::size_t>(k) / static_cast<std::size_t>(phase_count)]);
  }

  constexpr double kLowReflectance = 0.5;
  constexpr double kHighReflectance = 0.9;
  std::vector<int> labels(shape.size());
  ScalarField reflectance(shape);
  for (std::size_t k = 0; k < shape.size(); ++k) {
    int label = 1;
    for (double c : cuts) label += field[k] >= c ? 1 : 0;
    labels[k] = label;
    reflectance[k] = kLowReflectance + (kHighReflectance - kLowReflectance) * (label - 1) / (phase_count - 1);
  }

  // Illumination: Gaussian bump plus a gentle cosine tilt, normalized to [0, 1].
  const double cy = rng.uniform(0.0, 1.0), cx = rng.uniform(0.0, 1.0);
  const double spread = rng.uniform(0.35, 0.6);
  const double tilt_angle = rng.uniform(0.0, 2 * pi);
  const double tilt_weight = rng.uniform(0.2, 0.5);
  ScalarField bump(shape);
  for (std::size_t j = 0; j < width; ++j) {
    for (std::size_t i = 0; i < height; ++i) {
      const double y = static_cast<double>(i) / static_cast<double>(height);
      const double x = static_cast<double>(j) / static_cast<double>(width);
      const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
      const double tilt = std::cos(pi * (std::cos(tilt_angle) * y + std::sin(tilt_angle) * x));
      bump(i, j) = std::exp(-d2 / (2 * spread * spread)) + tilt_weight * tilt;
    }
  }
  const double lo = bump.min(), hi = bump.max();
  ScalarField illumination(shape);
  for (std::size_t k = 0; k < shape.size(); ++k) {
    const double g = hi > lo ? (bump[k] - lo) / (hi - lo) : 0.0;
    illumination[k] = 1.0 - bias_amplitude * g;
  }

  std::vector<double> pixels(shape.size());
  for (std::size_t k = 0; k < shape.size(); ++k) {
    double v = illumination[k] * reflectance[k];
    if (noise_sigma > 0.0) v += noise_sigma * rng.normal();
    pixels[k] = std::clamp(v, 0.0, 1.0);
  }

  std::vector<double> rho{0.0};
  for (int k = 1; k < phase_count; ++k) rho.push_back(static_cast<double>(k) / phase_count);
  rho.push_back(1.0);
  return SyntheticScene{RasterImage(shape, std::move(pixels)),
                        seg::LabelMap{shape, std::move(labels), seg::Thresholds(rho)},
                        std::move(reflectance), std::move(illumination), seed};
}

double segmentation_accuracy(const seg::LabelMap& predicted, const seg::LabelMap& truth) {
  if (predicted.shape != truth.shape || predicted.labels.size() != truth.labels.size()) {
    throw InvalidArgument("segmentation_accuracy: dimension mismatch");
  }
  const int K = truth.phases();
  if (predicted.phases() != K) throw InvalidArgument("segmentation_accuracy: phase count mismatch");
  if (K > 8) throw InvalidArgument("segmentation_accuracy: at most 8 phases supported");
  const auto k = static_cast<std::size_t>(K);
  std::vector<std::size_t> confusion(k * k, 0);
  for (std::size_t j = 0; j < truth.labels.size(); ++j) {
    const int p = predicted.labels[j], t = truth.labels[j];
    if (p < 1 || p > K || t < 1 || t > K) throw InvalidArgument("segmentation_accuracy: label out of range");
    ++confusion[static_cast<std::size_t>(p - 1) * k + static_cast<std::size_t>(t - 1)];
  }
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t agree = 0;
    for (std::size_t p = 0; p < k; ++p) agree += confusion[p * k + perm[p]];
    best = std::max(best, agree);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.labels.size());
}

double otsu_threshold(const ScalarField& intensities) {
  constexpr std::size_t kBins = 256;
  std::vector<double> hist(kBins, 0.0);
  for (double v : intensities.values()) {
    const auto bin = static_cast<std::size_t>(std::clamp(v, 0.0, 1.0) * (kBins - 1) + 0.5);
    hist[bin] += 1.0;
  }
  const double total = static_cast<double>(intensities.size());
  double sum_all = 0.0;
  for (std::size_t b = 0; b < kBins; ++b) sum_all += static_cast<double>(b) * hist[b];
  double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
  std::size_t best_bin = 0;
  for (std::size_t b = 0; b + 1 < kBins; ++b) {
    w0 += hist[b];
    sum0 += static_cast<double>(b) * hist[b];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best_var) {
      best_var = between;
      best_bin = b;
    }
  }
  // pixels in bins <= best_bin form the dark class
  return (static_cast<double>(best_bin) + 0.5) / (kBins - 1);
}

}  // namespace illumseg::oracle
