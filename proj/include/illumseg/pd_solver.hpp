#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "illumseg/field.hpp"
#include "illumseg/image.hpp"
#include "illumseg/linear_ops.hpp"

namespace illumseg::pd {

enum class Regularizer { TightFrame, TV };

/// How the tight-frame dual variable p is constrained.
///
/// Exact: p_0 (low-pass) is held at 0 and |p_1..8|_2(j) <= v(j). This is the
/// exact dual of sum_j |G W r|_2(j) with G = diag{0, v, ..., v}, so the saddle
/// point's primal part minimizes energy().
///
/// Literal: all nine channels bounded by |diag G|_2(j) = sqrt(8) v(j), as the
/// printed box constraint reads. The primal of that saddle problem carries an
/// extra low-pass penalty, so it does not minimize energy().
///
/// TV mode always uses radius 1 on the two gradient channels.
enum class DualBall { Exact, Literal };

struct SolverConfig {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double mu = 1e-5;
  double tau = 1.0;    // dual step
  double sigma = 0.1;  // primal step
  Regularizer regularizer = Regularizer::TightFrame;
  int max_iter = 1000;
  double tol = 1e-5;  // relative change in r; only stops TV runs
  double log_floor = kDefaultLogFloor;
  DualBall dual_ball = DualBall::Exact;
  int energy_every = 10;

  /// Throws InvalidArgument if a weight, step, count or tolerance is not positive.
  void validate() const;

  /// Fixed parameters used for TV runs (tau 1, sigma 0.15, mu 1e-5, tol 1e-5).
  static SolverConfig tv(double alpha, double beta, double gamma);
  static SolverConfig tight_frame(double alpha, double beta, double gamma);
};

std::string to_string(Regularizer reg);
Regularizer regularizer_from_string(const std::string& name);

/// Verdict of the tau * sigma * ||K||^2 < 1 convergence condition.
struct StepAudit {
  double norm_bound = 0.0;  // ||K|| bound used
  bool estimated = false;   // true when norm_bound came from power iteration
  double product = 0.0;     // tau * sigma * norm_bound^2
  bool passes = false;      // product < 1

  [[nodiscard]] std::string describe() const;
};

/// TightFrame uses the analytic bound ||K|| <= 3. TV uses a power-iteration
/// estimate of the stacked operator (grad; grad; grad) on `shape`.
StepAudit audit_step_sizes(const SolverConfig& config, Shape shape);

struct PrimalState {
  ScalarField r;
  ScalarField l;
  ScalarField r_bar;
  ScalarField l_bar;
};

struct DualState {
  std::variant<FrameletCoeffs, VectorField2> p;
  VectorField2 q;
  VectorField2 u;
};

struct EnergySample {
  int iteration = 0;
  double energy = 0.0;
};

struct SolverResult {
  ScalarField r;
  ScalarField l;
  ScalarField R;  // exp(-r)
  ScalarField L;  // exp(l)
  int iterations_run = 0;
  bool converged = false;  // TV tolerance reached
  std::vector<double> residual_history;
  std::vector<EnergySample> energy_history;
  StepAudit audit;
};

/// Per-pixel l2 norm over the channels of p.
ScalarField dual_norm(const FrameletCoeffs& p);
ScalarField dual_norm(const VectorField2& p);

/// Scales every channel at pixel j by radius(j)/|p|_2(j) where |p|_2(j) > radius(j).
FrameletCoeffs project_dual_ball(const FrameletCoeffs& p, const ScalarField& radius);
VectorField2 project_dual_ball(const VectorField2& p, const ScalarField& radius);

/// p = Proj(p_n + tau W r_bar). With `pin_lowpass`, subband 0 is zeroed before projecting.
FrameletCoeffs update_p(const FrameletCoeffs& p_n, const ScalarField& r_bar, const ScalarField& radius,
                        double tau, bool pin_lowpass = false);
/// TV form: p = Proj(p_n + tau grad r_bar).
VectorField2 update_p(const VectorField2& p_n, const ScalarField& r_bar, const ScalarField& radius, double tau);

/// argmax_q <grad r_bar, q> - |q|^2/(2 alpha) - |q - q_n|^2/(2 tau)
///   = (alpha tau grad r_bar + alpha q_n) / (tau + alpha).
VectorField2 update_q(const VectorField2& q_n, const ScalarField& r_bar, double alpha, double tau);
/// Same closed form with (beta, l_bar).
VectorField2 update_u(const VectorField2& u_n, const ScalarField& l_bar, double beta, double tau);

struct PixelSolution {
  double r = 0.0;
  double l = 0.0;
};

/// Minimizes, over r >= 0 and l,
///   gamma/2 (l - s - r)^2 + mu/2 l^2 + (a + b) r + c l
///   + 1/(2 sigma) (r - r_n)^2 + 1/(2 sigma) (l - l_n)^2
/// by solving the 2x2 stationarity system and, if its r is negative,
/// returning (0, d2 / a22).
PixelSolution solve_pixel_primal(double a, double b, double c, double s, double r_n, double l_n, double gamma,
                                 double mu, double sigma);

/// Primal objective. TightFrame: sum_j v(j) |(H_1..8 r)(j)|_2 + alpha/2 |grad r|^2
/// + beta/2 |grad l|^2 + gamma/2 |l - s - r|^2 + mu/2 |l|^2. TV replaces the first
/// term by sum_j |grad r|_2(j). Throws InvalidArgument if r has a negative entry.
double energy(const ScalarField& r, const ScalarField& l, const ScalarField& s, const SolverConfig& config,
              const ScalarField& weights);
/// Same, computing the weights from s.
double energy(const ScalarField& r, const ScalarField& l, const ScalarField& s, const SolverConfig& config);

/// Chambolle-Pock iteration for the decomposition model, one step at a time.
class Solver {
 public:
  Solver(ScalarField s, SolverConfig config);

  /// One pass of: dual updates (p, q, u), per-pixel primal update, extrapolation.
  /// Throws NumericError if an iterate becomes non-finite.
  void step();
  /// Steps until max_iter (TightFrame) or the TV tolerance, recording histories.
  SolverResult run();

  [[nodiscard]] int iteration() const { return iteration_; }
  [[nodiscard]] const PrimalState& primal() const { return primal_; }
  [[nodiscard]] const DualState& dual() const { return dual_; }
  [[nodiscard]] const ScalarField& weights() const { return weights_; }
  /// Radius the p-projection uses: v (Exact), sqrt(8) v (Literal) or 1 (TV).
  [[nodiscard]] const ScalarField& radius() const { return radius_; }
  [[nodiscard]] double last_residual() const { return last_residual_; }
  [[nodiscard]] const ScalarField& log_image() const { return s_; }
  [[nodiscard]] const SolverConfig& config() const { return config_; }

 private:
  ScalarField s_;
  SolverConfig config_;
  ScalarField weights_;
  ScalarField radius_;
  PrimalState primal_;
  DualState dual_;
  int iteration_ = 0;
  double last_residual_ = 0.0;
};

SolverResult run(const ScalarField& s, const SolverConfig& config);

/// Total solver iterations executed in this process; lets callers verify that a
/// code path does no solver work.
std::uint64_t total_iterations();

}  // namespace illumseg::pd
