#include "illumseg/pd_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "illumseg/errors.hpp"

namespace illumseg::pd {

namespace {

std::atomic<std::uint64_t> g_iterations{0};

constexpr int kTvNormIterations = 100;
constexpr std::uint64_t kTvNormSeed = 20180528;

template <class Channels>
void project_in_place(Channels& channels, const ScalarField& radius) {
  const std::size_t n = radius.size();
  for (std::size_t j = 0; j < n; ++j) {
    double sq = 0.0;
    for (auto* ch : channels) sq += (*ch)[j] * (*ch)[j];
    const double norm = std::sqrt(sq);
    if (norm > radius[j]) {
      // Shrink the scale by ulps until the rounded result is inside, so a
      // second projection leaves it untouched bit for bit.
      double scale = radius[j] / norm;
      for (;;) {
        double check = 0.0;
        for (auto* ch : channels) check += ((*ch)[j] * scale) * ((*ch)[j] * scale);
        if (!(std::sqrt(check) > radius[j])) break;
        scale = std::nextafter(scale, 0.0);
      }
      for (auto* ch : channels) (*ch)[j] *= scale;
    }
  }
}

std::array<ScalarField*, kSubbandCount> channels_of(FrameletCoeffs& p) {
  std::array<ScalarField*, kSubbandCount> ch{};
  for (std::size_t k = 0; k < kSubbandCount; ++k) ch[k] = &p[k];
  return ch;
}

std::array<ScalarField*, 2> channels_of(VectorField2& p) { return {&p.x, &p.y}; }

VectorField2 proximal_ascent(const VectorField2& prev, const ScalarField& bar, double weight, double tau) {
  const VectorField2 g = grad(bar);
  VectorField2 out(prev.shape());
  const double denom = tau + weight;
  for (std::size_t k = 0; k < out.x.size(); ++k) {
    out.x[k] = (weight * tau * g.x[k] + weight * prev.x[k]) / denom;
    out.y[k] = (weight * tau * g.y[k] + weight * prev.y[k]) / denom;
  }
  return out;
}

double quadratic_terms(const ScalarField& r, const ScalarField& l, const ScalarField& s, const SolverConfig& c) {
  const VectorField2 gr = grad(r);
  const VectorField2 gl = grad(l);
  double fit = 0.0;
  double mass = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double e = l[k] - s[k] - r[k];
    fit += e * e;
    mass += l[k] * l[k];
  }
  return 0.5 * c.alpha * dot(gr, gr) + 0.5 * c.beta * dot(gl, gl) + 0.5 * c.gamma * fit + 0.5 * c.mu * mass;
}

void require_finite(const ScalarField& f, const char* name, int iteration) {
  if (!f.all_finite()) {
    std::ostringstream msg;
    msg << "non-finite " << name << " at iteration " << iteration << " (diverged configuration)";
    throw NumericError(msg.str());
  }
}

}  // namespace

void SolverConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string("solver config: ") + name + " must be positive");
  };
  positive(alpha, "alpha");
  positive(beta, "beta");
  positive(gamma, "gamma");
  positive(mu, "mu");
  positive(tau, "tau");
  positive(sigma, "sigma");
  positive(tol, "tol");
  positive(log_floor, "log_floor");
  if (max_iter < 1) throw InvalidArgument("solver config: max_iter must be positive");
  if (energy_every < 1) throw InvalidArgument("solver config: energy_every must be positive");
}

SolverConfig SolverConfig::tv(double alpha, double beta, double gamma) {
  SolverConfig c;
  c.alpha = alpha;
  c.beta = beta;
  c.gamma = gamma;
  c.sigma = 0.15;
  c.regularizer = Regularizer::TV;
  return c;
}

SolverConfig SolverConfig::tight_frame(double alpha, double beta, double gamma) {
  SolverConfig c;
  c.alpha = alpha;
  c.beta = beta;
  c.gamma = gamma;
  return c;
}

std::string to_string(Regularizer reg) { return reg == Regularizer::TightFrame ? "tf" : "tv"; }

Regularizer regularizer_from_string(const std::string& name) {
  if (name == "tf" || name == "tight-frame" || name == "TightFrame") return Regularizer::TightFrame;
  if (name == "tv" || name == "TV") return Regularizer::TV;
  throw InvalidArgument("unknown regularizer '" + name + "' (expected tf or tv)");
}

std::string StepAudit::describe() const {
  std::ostringstream out;
  out << "tau*sigma*||K||^2 = " << std::setprecision(6) << product << (passes ? " < 1 (pass)" : " >= 1 (warn)")
      << ", ||K|| " << (estimated ? "estimate " : "bound ") << norm_bound;
  return out.str();
}

StepAudit audit_step_sizes(const SolverConfig& config, Shape shape) {
  StepAudit audit;
  if (config.regularizer == Regularizer::TightFrame) {
    audit.norm_bound = 3.0;
    audit.estimated = false;
  } else {
    audit.norm_bound = operator_norm_estimate(tv_stack_map(shape), kTvNormIterations, kTvNormSeed);
    audit.estimated = true;
  }
  audit.product = config.tau * config.sigma * audit.norm_bound * audit.norm_bound;
  audit.passes = audit.product < 1.0;
  return audit;
}

ScalarField dual_norm(const FrameletCoeffs& p) {
  ScalarField n(p.shape());
  for (std::size_t j = 0; j < n.size(); ++j) {
    double sq = 0.0;
    for (std::size_t k = 0; k < kSubbandCount; ++k) sq += p[k][j] * p[k][j];
    n[j] = std::sqrt(sq);
  }
  return n;
}

ScalarField dual_norm(const VectorField2& p) {
  ScalarField n(p.shape());
  for (std::size_t j = 0; j < n.size(); ++j) n[j] = std::sqrt(p.x[j] * p.x[j] + p.y[j] * p.y[j]);
  return n;
}

FrameletCoeffs project_dual_ball(const FrameletCoeffs& p, const ScalarField& radius) {
  if (radius.shape() != p.shape()) throw InvalidArgument("project_dual_ball: radius shape mismatch");
  FrameletCoeffs out = p;
  auto ch = channels_of(out);
  project_in_place(ch, radius);
  return out;
}

VectorField2 project_dual_ball(const VectorField2& p, const ScalarField& radius) {
  if (radius.shape() != p.shape()) throw InvalidArgument("project_dual_ball: radius shape mismatch");
  VectorField2 out = p;
  auto ch = channels_of(out);
  project_in_place(ch, radius);
  return out;
}

FrameletCoeffs update_p(const FrameletCoeffs& p_n, const ScalarField& r_bar, const ScalarField& radius, double tau,
                        bool pin_lowpass) {
  FrameletCoeffs step = framelet_analyze(r_bar);
  for (std::size_t k = 0; k < kSubbandCount; ++k) {
    for (std::size_t j = 0; j < step[k].size(); ++j) step[k][j] = p_n[k][j] + tau * step[k][j];
  }
  if (pin_lowpass) std::fill(step[0].values().begin(), step[0].values().end(), 0.0);
  auto ch = channels_of(step);
  project_in_place(ch, radius);
  return step;
}

VectorField2 update_p(const VectorField2& p_n, const ScalarField& r_bar, const ScalarField& radius, double tau) {
  VectorField2 step = grad(r_bar);
  for (std::size_t j = 0; j < step.x.size(); ++j) {
    step.x[j] = p_n.x[j] + tau * step.x[j];
    step.y[j] = p_n.y[j] + tau * step.y[j];
  }
  auto ch = channels_of(step);
  project_in_place(ch, radius);
  return step;
}

VectorField2 update_q(const VectorField2& q_n, const ScalarField& r_bar, double alpha, double tau) {
  return proximal_ascent(q_n, r_bar, alpha, tau);
}

VectorField2 update_u(const VectorField2& u_n, const ScalarField& l_bar, double beta, double tau) {
  return proximal_ascent(u_n, l_bar, beta, tau);
}

PixelSolution solve_pixel_primal(double a, double b, double c, double s, double r_n, double l_n, double gamma,
                                 double mu, double sigma) {
  const double inv_sigma = 1.0 / sigma;
  const double a11 = gamma + inv_sigma;
  const double a22 = gamma + mu + inv_sigma;
  const double d1 = inv_sigma * r_n - a - b - gamma * s;
  const double d2 = gamma * s - c + inv_sigma * l_n;
  const double det = a11 * a22 - gamma * gamma;
  const double r = (a22 * d1 + gamma * d2) / det;
  if (r >= 0.0) return {r, (a11 * d2 + gamma * d1) / det};
  return {0.0, d2 / a22};
}

double energy(const ScalarField& r, const ScalarField& l, const ScalarField& s, const SolverConfig& config,
              const ScalarField& weights) {
  if (r.shape() != s.shape() || l.shape() != s.shape()) throw InvalidArgument("energy: shape mismatch");
  for (double v : r.values()) {
    if (v < 0.0) throw InvalidArgument("energy: r has negative entries");
  }
  double reg = 0.0;
  if (config.regularizer == Regularizer::TightFrame) {
    if (weights.shape() != s.shape()) throw InvalidArgument("energy: weight shape mismatch");
    const FrameletCoeffs wr = framelet_analyze(r);
    for (std::size_t j = 0; j < r.size(); ++j) {
      double sq = 0.0;
      for (std::size_t k = 1; k < kSubbandCount; ++k) sq += wr[k][j] * wr[k][j];
      reg += weights[j] * std::sqrt(sq);
    }
  } else {
    const ScalarField mag = dual_norm(grad(r));
    for (double m : mag.values()) reg += m;
  }
  return reg + quadratic_terms(r, l, s, config);
}

double energy(const ScalarField& r, const ScalarField& l, const ScalarField& s, const SolverConfig& config) {
  return energy(r, l, s, config, config.regularizer == Regularizer::TightFrame ? edge_weights(s) : ScalarField());
}

Solver::Solver(ScalarField s, SolverConfig config) : s_(std::move(s)), config_(config) {
  config_.validate();
  if (s_.empty()) throw InvalidArgument("solver: empty input");
  if (!s_.all_finite()) throw InvalidArgument("solver: non-finite log image");
  const Shape shape = s_.shape();
  if (config_.regularizer == Regularizer::TightFrame) {
    weights_ = edge_weights(s_);
    radius_ = config_.dual_ball == DualBall::Exact ? weights_ : dual_radius(weights_);
    dual_.p = FrameletCoeffs(shape);
  } else {
    weights_ = ScalarField(shape, 1.0);
    radius_ = ScalarField(shape, 1.0);
    dual_.p = VectorField2(shape);
  }
  dual_.q = VectorField2(shape);
  dual_.u = VectorField2(shape);
  primal_.r = ScalarField(shape);
  primal_.l = s_;
  primal_.r_bar = primal_.r;
  primal_.l_bar = primal_.l;
}

void Solver::step() {
  const double tau = config_.tau;
  ScalarField a;
  if (auto* p = std::get_if<FrameletCoeffs>(&dual_.p)) {
    *p = update_p(*p, primal_.r_bar, radius_, tau, config_.dual_ball == DualBall::Exact);
    a = framelet_synthesize(*p);
  } else {
    auto& ptv = std::get<VectorField2>(dual_.p);
    ptv = update_p(ptv, primal_.r_bar, radius_, tau);
    a = grad_adjoint(ptv);
  }
  dual_.q = update_q(dual_.q, primal_.r_bar, config_.alpha, tau);
  dual_.u = update_u(dual_.u, primal_.l_bar, config_.beta, tau);
  const ScalarField b = grad_adjoint(dual_.q);
  const ScalarField c = grad_adjoint(dual_.u);

  ScalarField r_next(s_.shape());
  ScalarField l_next(s_.shape());
  for (std::size_t j = 0; j < s_.size(); ++j) {
    const PixelSolution px = solve_pixel_primal(a[j], b[j], c[j], s_[j], primal_.r[j], primal_.l[j], config_.gamma,
                                                config_.mu, config_.sigma);
    r_next[j] = px.r;
    l_next[j] = px.l;
  }
  ++iteration_;
  g_iterations.fetch_add(1, std::memory_order_relaxed);
  require_finite(r_next, "r", iteration_);
  require_finite(l_next, "l", iteration_);

  double diff_sq = 0.0;
  double prev_sq = 0.0;
  for (std::size_t j = 0; j < s_.size(); ++j) {
    const double d = r_next[j] - primal_.r[j];
    diff_sq += d * d;
    prev_sq += primal_.r[j] * primal_.r[j];
    primal_.r_bar[j] = 2.0 * r_next[j] - primal_.r[j];
    primal_.l_bar[j] = 2.0 * l_next[j] - primal_.l[j];
  }
  // Relative change; absolute when the previous iterate is exactly zero.
  last_residual_ = prev_sq > 0.0 ? std::sqrt(diff_sq / prev_sq) : std::sqrt(diff_sq);
  primal_.r = std::move(r_next);
  primal_.l = std::move(l_next);
}

SolverResult Solver::run() {
  SolverResult result;
  result.audit = audit_step_sizes(config_, s_.shape());
  result.residual_history.reserve(static_cast<std::size_t>(config_.max_iter));
  while (iteration_ < config_.max_iter) {
    step();
    result.residual_history.push_back(last_residual_);
    const bool stop = config_.regularizer == Regularizer::TV && last_residual_ <= config_.tol;
    if (iteration_ % config_.energy_every == 0 || stop || iteration_ == config_.max_iter) {
      result.energy_history.push_back({iteration_, energy(primal_.r, primal_.l, s_, config_, weights_)});
    }
    if (stop) {
      result.converged = true;
      break;
    }
  }
  result.iterations_run = iteration_;
  result.r = primal_.r;
  result.l = primal_.l;
  result.R = reflection_from_r(result.r);
  result.L = ScalarField(result.l.shape());
  for (std::size_t j = 0; j < result.l.size(); ++j) result.L[j] = std::exp(result.l[j]);
  return result;
}

SolverResult run(const ScalarField& s, const SolverConfig& config) { return Solver(s, config).run(); }

std::uint64_t total_iterations() { return g_iterations.load(std::memory_order_relaxed); }

}  // namespace illumseg::pd
