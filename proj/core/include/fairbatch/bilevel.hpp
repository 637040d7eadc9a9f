#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fairbatch {

/// A scalar function with its first two derivatives.
struct ScalarFn {
  std::function<double(double)> value;
  std::function<double(double)> deriv;
  std::function<double(double)> second;
};

/// Closed-form 1-D instance of the bilevel problem
///   min over lambda in [0, c1] of |f1(w_l) - g1(w_l)|,
///   w_l = argmin over w of lambda*f1(w) + (c1-lambda)*g1(w) + h(w).
/// The combined second derivative must stay positive on [bracket_lo,
/// bracket_hi] so the inner minimizer is the unique stationary point there.
struct InnerProblem1D {
  std::string name;
  ScalarFn f1, g1, h;
  double c1 = 1.0;
  double bracket_lo = -50.0;
  double bracket_hi = 50.0;
  bool zero_h = false;  // h identically zero (the stronger monotonicity case)

  double inner_deriv(double lambda, double w) const;
  double inner_second(double lambda, double w) const;
};

/// F(lambda) evaluated on a uniform grid over [0, c1], with the inner
/// minimizers and the two objective values that produced each point.
struct OuterSurface {
  std::vector<double> lambda;
  std::vector<double> w;
  std::vector<double> f_outer;  // F(lambda)
  std::vector<double> f1_val, g1_val;
  double c1 = 0.0;
  double inner_tol = 0.0;

  std::size_t size() const { return lambda.size(); }
  std::size_t argmin() const;
  double cell_width() const;
};

struct QuasiconvexVerdict {
  bool quasiconvex = true;
  double violated_at = 0.0;  // lambda of the first down-move after an up-move
};

struct NonconvexVerdict {
  bool nonconvex = false;
  double lambda_a = 0.0, lambda_b = 0.0, lambda_c = 0.0;
  double margin = 0.0;  // F(lambda_b) - chord value
};

enum class SignCheck { agree, disagree, skipped };

struct EnvelopeVerdict {
  bool holds = true;
  std::size_t first_violation = 0;
  double terminal_error = 0.0;
};

/// Solves the inner problem at a fixed lambda to |stationarity residual| <=
/// tol via safeguarded Newton with a bisection fallback on the problem's
/// bracket. Throws on non-convergence, reporting the residual reached.
double inner_solve(const InnerProblem1D& p, double lambda, double tol = 1e-10,
                   std::size_t max_iter = 200);

OuterSurface sweep_surface(const InnerProblem1D& p, std::size_t grid_size,
                           double inner_tol = 1e-10);

/// Accepts surfaces whose successive differences show at most one sign
/// change, down then up; moves with |delta F| <= tol count as flat.
QuasiconvexVerdict check_quasiconvex(const OuterSurface& s, double tol = 1e-8);

/// Looks for grid points lying at least `margin` above the lower convex
/// envelope of the surface; any such point certifies non-convexity, and the
/// enclosing envelope segment provides the witness triple.
NonconvexVerdict check_nonconvex(const OuterSurface& s, double margin = 1e-6);

/// Central finite difference of F at lambda against sign(g1(w_l) - f1(w_l)).
/// Derivatives below noise_floor are inconclusive and reported as skipped.
SignCheck check_sign_identity(const InnerProblem1D& p, double lambda, double h_fd,
                              double noise_floor = 1e-6);

/// Verifies |lambda_t - lambda*| <= max(|lambda_0 - lambda*| - t*alpha, alpha)
/// + slack for every step of a signed-gradient trajectory.
EnvelopeVerdict check_convergence_bound(std::span<const double> trajectory,
                                        double lambda_star, double alpha,
                                        double slack = 0.0);

/// The strongly convex pair whose outer objective is quasi-convex but not
/// convex: f1 = (e^w + e^-w)/5, g1 = (w-1)^2, h = 0, c1 = 1.
InnerProblem1D counterexample_problem();

/// Library of fixtures satisfying the positivity condition on the sweep
/// region: quadratic, cosh and log-sum-exp mixes, with and without h.
std::vector<InnerProblem1D> fixture_library();

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct TheoryReport {
  std::vector<CheckResult> checks;
  bool all_pass() const;
};

struct VerifyOptions {
  std::size_t grid_size = 2001;
  std::uint64_t seed = 1;
  bool negative_control = false;  // inject a W-shaped surface that must fail
};

/// Runs the whole verification suite: counterexample endpoints and shape,
/// sign-identity sampling, the convergence envelope from random starts, and
/// the fixture library's quasiconvexity and monotonicity checks.
TheoryReport run_verify(const VerifyOptions& opt = {});

std::string report_to_json(const TheoryReport& r);

}  // namespace fairbatch
