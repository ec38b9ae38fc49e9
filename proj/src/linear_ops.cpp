#include "illumseg/linear_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "illumseg/errors.hpp"
#include "illumseg/random.hpp"

namespace illumseg {

namespace {

using Taps = std::array<double, 3>;

// Periodic neighbours of i on a cycle of length n.
inline std::size_t prev_of(std::size_t i, std::size_t n) { return i == 0 ? n - 1 : i - 1; }
inline std::size_t next_of(std::size_t i, std::size_t n) { return i + 1 == n ? 0 : i + 1; }

// Three-tap periodic filter along rows. Convolution reads in(i - d) for tap d,
// correlation reads in(i + d); taps are indexed by d = -1, 0, 1.
template <bool Correlate, bool Accumulate>
void filter_rows(const ScalarField& in, const Taps& taps, ScalarField& out) {
  const std::size_t h = in.height(), w = in.width();
  for (std::size_t j = 0; j < w; ++j) {
    const double* x = in.values().data() + j * h;
    double* y = out.values().data() + j * h;
    for (std::size_t i = 0; i < h; ++i) {
      const std::size_t lo = Correlate ? prev_of(i, h) : next_of(i, h);
      const std::size_t hi = Correlate ? next_of(i, h) : prev_of(i, h);
      const double acc = 0.0 + taps[0] * x[lo] + taps[1] * x[i] + taps[2] * x[hi];
      y[i] = Accumulate ? y[i] + acc : acc;
    }
  }
}

template <bool Correlate, bool Accumulate>
void filter_cols(const ScalarField& in, const Taps& taps, ScalarField& out) {
  const std::size_t h = in.height(), w = in.width();
  const double* base = in.values().data();
  for (std::size_t j = 0; j < w; ++j) {
    const double* lo = base + (Correlate ? prev_of(j, w) : next_of(j, w)) * h;
    const double* mid = base + j * h;
    const double* hi = base + (Correlate ? next_of(j, w) : prev_of(j, w)) * h;
    double* y = out.values().data() + j * h;
    for (std::size_t i = 0; i < h; ++i) {
      const double acc = 0.0 + taps[0] * lo[i] + taps[1] * mid[i] + taps[2] * hi[i];
      y[i] = Accumulate ? y[i] + acc : acc;
    }
  }
}

void convolve_rows(const ScalarField& in, const Taps& taps, ScalarField& out) { filter_rows<false, false>(in, taps, out); }
void convolve_cols(const ScalarField& in, const Taps& taps, ScalarField& out) { filter_cols<false, false>(in, taps, out); }
void correlate_rows_add(const ScalarField& in, const Taps& taps, ScalarField& out) {
  filter_rows<true, true>(in, taps, out);
}
void correlate_cols_add(const ScalarField& in, const Taps& taps, ScalarField& out) {
  filter_cols<true, true>(in, taps, out);
}

// Half-sample symmetric reflection into [0, n).
inline std::size_t mirror(long k, std::size_t n) {
  const long period = 2 * static_cast<long>(n);
  long m = k % period;
  if (m < 0) m += period;
  if (m >= static_cast<long>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

double flat_dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

ScalarField field_from(std::span<const double> flat, Shape shape) {
  return ScalarField(shape, std::vector<double>(flat.begin(), flat.end()));
}

void append(std::vector<double>& out, const ScalarField& f) {
  out.insert(out.end(), f.values().begin(), f.values().end());
}

}  // namespace

FilterBank FilterBank::piecewise_linear() {
  const double c = std::numbers::sqrt2 / 4.0;
  return FilterBank{{{{0.25, 0.5, 0.25}, {c, 0.0, -c}, {-0.25, 0.5, -0.25}}}};
}

FilterBank FilterBank::with_flipped_tap() {
  FilterBank bank = piecewise_linear();
  bank.taps[2][0] = -bank.taps[2][0];
  return bank;
}

VectorField2 grad(const ScalarField& u) {
  const std::size_t h = u.height(), w = u.width();
  VectorField2 g(u.shape());
  for (std::size_t j = 0; j < w; ++j) {
    for (std::size_t i = 0; i < h; ++i) {
      g.x(i, j) = i + 1 < h ? u(i + 1, j) - u(i, j) : 0.0;
      g.y(i, j) = j + 1 < w ? u(i, j + 1) - u(i, j) : 0.0;
    }
  }
  return g;
}

ScalarField grad_adjoint(const VectorField2& vf) {
  const std::size_t h = vf.x.height(), w = vf.x.width();
  if (vf.y.shape() != vf.x.shape()) throw InvalidArgument("grad_adjoint: component shape mismatch");
  ScalarField out(vf.shape());
  for (std::size_t j = 0; j < w; ++j) {
    for (std::size_t i = 0; i < h; ++i) {
      double v = 0.0;
      if (i + 1 < h) v -= vf.x(i, j);
      if (i > 0) v += vf.x(i - 1, j);
      if (j + 1 < w) v -= vf.y(i, j);
      if (j > 0) v += vf.y(i, j - 1);
      out(i, j) = v;
    }
  }
  return out;
}

FrameletCoeffs framelet_analyze(const ScalarField& u, const FilterBank& bank) {
  FrameletCoeffs c(u.shape());
  ScalarField rows(u.shape());
  for (std::size_t a = 0; a < 3; ++a) {
    convolve_rows(u, bank.taps[a], rows);
    for (std::size_t b = 0; b < 3; ++b) convolve_cols(rows, bank.taps[b], c[a * 3 + b]);
  }
  return c;
}

ScalarField framelet_synthesize(const FrameletCoeffs& coeffs, const FilterBank& bank) {
  const Shape shape = coeffs.shape();
  for (const auto& sb : coeffs.subbands) {
    if (sb.shape() != shape) throw InvalidArgument("framelet_synthesize: subband shape mismatch");
  }
  ScalarField out(shape);
  ScalarField cols(shape);
  for (std::size_t a = 0; a < 3; ++a) {
    std::fill(cols.values().begin(), cols.values().end(), 0.0);
    for (std::size_t b = 0; b < 3; ++b) correlate_cols_add(coeffs[a * 3 + b], bank.taps[b], cols);
    correlate_rows_add(cols, bank.taps[a], out);
  }
  return out;
}

double dot(const VectorField2& a, const VectorField2& b) { return dot(a.x, b.x) + dot(a.y, b.y); }

double dot(const FrameletCoeffs& a, const FrameletCoeffs& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < kSubbandCount; ++k) acc += dot(a[k], b[k]);
  return acc;
}

std::vector<double> gaussian_kernel(double variance) {
  if (!(variance > 0.0)) throw InvalidArgument("gaussian_kernel: variance must be positive");
  const long radius = static_cast<long>(std::ceil(4.0 * std::sqrt(variance)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (long d = -radius; d <= radius; ++d) {
    const double v = std::exp(-static_cast<double>(d * d) / (2.0 * variance));
    k[static_cast<std::size_t>(d + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

ScalarField gaussian_smooth(const ScalarField& u, double variance) {
  const auto kernel = gaussian_kernel(variance);
  const long radius = static_cast<long>(kernel.size() / 2);
  const std::size_t h = u.height(), w = u.width();
  ScalarField tmp(u.shape());
  ScalarField out(u.shape());
  for (std::size_t j = 0; j < w; ++j) {
    for (std::size_t i = 0; i < h; ++i) {
      double acc = 0.0;
      for (long d = -radius; d <= radius; ++d) {
        acc += kernel[static_cast<std::size_t>(d + radius)] * u(mirror(static_cast<long>(i) + d, h), j);
      }
      tmp(i, j) = acc;
    }
  }
  for (std::size_t j = 0; j < w; ++j) {
    for (std::size_t i = 0; i < h; ++i) {
      double acc = 0.0;
      for (long d = -radius; d <= radius; ++d) {
        acc += kernel[static_cast<std::size_t>(d + radius)] * tmp(i, mirror(static_cast<long>(j) + d, w));
      }
      out(i, j) = acc;
    }
  }
  return out;
}

ScalarField edge_weights(const ScalarField& s) {
  const ScalarField smoothed = gaussian_smooth(s, 1.0);
  const FrameletCoeffs c = framelet_analyze(smoothed);
  const double eps = 50.0 / static_cast<double>(s.size());
  ScalarField v(s.shape());
  for (std::size_t k = 0; k < v.size(); ++k) {
    double energy = 0.0;
    for (std::size_t b = 1; b < kSubbandCount; ++b) energy += c[b][k] * c[b][k];
    v[k] = 1.0 / (1.0 + eps * energy);
  }
  return v;
}

ScalarField dual_radius(const ScalarField& weights) {
  const double root8 = std::sqrt(8.0);
  ScalarField radius(weights.shape());
  for (std::size_t k = 0; k < radius.size(); ++k) radius[k] = root8 * weights[k];
  return radius;
}

double adjoint_mismatch(const LinearMap& op, std::uint64_t seed) {
  Rng rng(seed);
  const auto x = random_vector(op.input_dim, rng);
  const auto y = random_vector(op.output_dim, rng);
  const auto kx = op.apply(x);
  const auto kty = op.apply_adjoint(y);
  if (kx.size() != op.output_dim || kty.size() != op.input_dim) {
    throw InvalidArgument("adjoint_mismatch: operator produced wrong dimension");
  }
  const double lhs = flat_dot(kx, y);
  const double rhs = flat_dot(x, kty);
  const double scale = std::sqrt(flat_dot(kx, kx) * flat_dot(y, y));
  return scale > 0.0 ? std::abs(lhs - rhs) / scale : std::abs(lhs - rhs);
}

double operator_norm_estimate(const LinearMap& op, int iterations, std::uint64_t seed) {
  constexpr double kAdjointTolerance = 1e-10;
  if (adjoint_mismatch(op, seed ^ 0x9E3779B97F4A7C15ULL) > kAdjointTolerance) {
    throw InvalidArgument("operator_norm_estimate: apply/apply_adjoint are not an adjoint pair");
  }
  Rng rng(seed);
  auto x = random_vector(op.input_dim, rng);
  auto normalize = [](std::vector<double>& v) {
    const double n = std::sqrt(flat_dot(v, v));
    if (n > 0.0) {
      for (double& e : v) e /= n;
    }
    return n;
  };
  normalize(x);
  for (int it = 0; it < iterations; ++it) {
    auto z = op.apply_adjoint(op.apply(x));
    if (normalize(z) == 0.0) return 0.0;
    x = std::move(z);
  }
  const auto kx = op.apply(x);
  return std::sqrt(flat_dot(kx, kx) / flat_dot(x, x));
}

LinearMap gradient_map(Shape shape) {
  const std::size_t n = shape.size();
  LinearMap m;
  m.input_dim = n;
  m.output_dim = 2 * n;
  m.apply = [shape](std::span<const double> in) {
    const VectorField2 g = grad(field_from(in, shape));
    std::vector<double> out;
    out.reserve(2 * shape.size());
    append(out, g.x);
    append(out, g.y);
    return out;
  };
  m.apply_adjoint = [shape](std::span<const double> in) {
    const std::size_t n = shape.size();
    VectorField2 vf;
    vf.x = field_from(in.subspan(0, n), shape);
    vf.y = field_from(in.subspan(n, n), shape);
    return grad_adjoint(vf).vector();
  };
  return m;
}

LinearMap tight_frame_stack_map(Shape shape) {
  const std::size_t n = shape.size();
  LinearMap m;
  m.input_dim = 2 * n;
  m.output_dim = (kSubbandCount + 4) * n;
  m.apply = [shape](std::span<const double> in) {
    const std::size_t n = shape.size();
    const ScalarField r = field_from(in.subspan(0, n), shape);
    const ScalarField l = field_from(in.subspan(n, n), shape);
    std::vector<double> out;
    out.reserve((kSubbandCount + 4) * n);
    for (const auto& sb : framelet_analyze(r).subbands) append(out, sb);
    const VectorField2 gr = grad(r);
    const VectorField2 gl = grad(l);
    append(out, gr.x);
    append(out, gr.y);
    append(out, gl.x);
    append(out, gl.y);
    return out;
  };
  m.apply_adjoint = [shape](std::span<const double> in) {
    const std::size_t n = shape.size();
    FrameletCoeffs p;
    for (std::size_t k = 0; k < kSubbandCount; ++k) p[k] = field_from(in.subspan(k * n, n), shape);
    std::size_t off = kSubbandCount * n;
    VectorField2 q, u;
    q.x = field_from(in.subspan(off, n), shape);
    q.y = field_from(in.subspan(off + n, n), shape);
    u.x = field_from(in.subspan(off + 2 * n, n), shape);
    u.y = field_from(in.subspan(off + 3 * n, n), shape);
    ScalarField r = framelet_synthesize(p) + grad_adjoint(q);
    ScalarField l = grad_adjoint(u);
    std::vector<double> out;
    out.reserve(2 * n);
    append(out, r);
    append(out, l);
    return out;
  };
  return m;
}

LinearMap tv_stack_map(Shape shape) {
  const std::size_t n = shape.size();
  LinearMap m;
  m.input_dim = 2 * n;
  m.output_dim = 6 * n;
  m.apply = [shape](std::span<const double> in) {
    const std::size_t n = shape.size();
    const VectorField2 gr = grad(field_from(in.subspan(0, n), shape));
    const VectorField2 gl = grad(field_from(in.subspan(n, n), shape));
    std::vector<double> out;
    out.reserve(6 * n);
    append(out, gr.x);
    append(out, gr.y);
    append(out, gr.x);
    append(out, gr.y);
    append(out, gl.x);
    append(out, gl.y);
    return out;
  };
  m.apply_adjoint = [shape](std::span<const double> in) {
    const std::size_t n = shape.size();
    VectorField2 p, q, u;
    p.x = field_from(in.subspan(0, n), shape);
    p.y = field_from(in.subspan(n, n), shape);
    q.x = field_from(in.subspan(2 * n, n), shape);
    q.y = field_from(in.subspan(3 * n, n), shape);
    u.x = field_from(in.subspan(4 * n, n), shape);
    u.y = field_from(in.subspan(5 * n, n), shape);
    ScalarField r = grad_adjoint(p) + grad_adjoint(q);
    ScalarField l = grad_adjoint(u);
    std::vector<double> out;
    out.reserve(2 * n);
    append(out, r);
    append(out, l);
    return out;
  };
  return m;
}

}  // namespace illumseg
