#include "fairbatch/bilevel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fairbatch/rng.hpp"
#include "fairbatch/sampler.hpp"

namespace fairbatch {

double InnerProblem1D::inner_deriv(double lambda, double w) const {
  return lambda * f1.deriv(w) + (c1 - lambda) * g1.deriv(w) + h.deriv(w);
}

double InnerProblem1D::inner_second(double lambda, double w) const {
  return lambda * f1.second(w) + (c1 - lambda) * g1.second(w) + h.second(w);
}

std::size_t OuterSurface::argmin() const {
  return static_cast<std::size_t>(
      std::min_element(f_outer.begin(), f_outer.end()) - f_outer.begin());
}

double OuterSurface::cell_width() const {
  return size() > 1 ? lambda[1] - lambda[0] : 0.0;
}

double inner_solve(const InnerProblem1D& p, double lambda, double tol,
                   std::size_t max_iter) {
  if (lambda < 0.0 || lambda > p.c1)
    throw std::invalid_argument("inner_solve: lambda outside [0, c1]");

  double lo = p.bracket_lo, hi = p.bracket_hi;
  double rlo = p.inner_deriv(lambda, lo);
  double rhi = p.inner_deriv(lambda, hi);
  if (rlo > 0.0 || rhi < 0.0)
    throw std::runtime_error("inner_solve: stationary point not bracketed by [" +
                             std::to_string(lo) + ", " + std::to_string(hi) + "]");

  double w = 0.5 * (lo + hi);
  double r = p.inner_deriv(lambda, w);
  for (std::size_t it = 0; it < max_iter; ++it) {
    if (std::abs(r) <= tol) return w;
    if (r > 0.0)
      hi = w;
    else
      lo = w;

    const double curv = p.inner_second(lambda, w);
    double next = curv > 0.0 ? w - r / curv : lo;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    w = next;
    r = p.inner_deriv(lambda, w);
  }
  throw std::runtime_error("inner_solve: no convergence, residual " +
                           std::to_string(r));
}

OuterSurface sweep_surface(const InnerProblem1D& p, std::size_t grid_size,
                           double inner_tol) {
  if (grid_size < 3)
    throw std::invalid_argument("sweep_surface: grid_size must be >= 3");
  OuterSurface s;
  s.c1 = p.c1;
  s.inner_tol = inner_tol;
  s.lambda.resize(grid_size);
  s.w.resize(grid_size);
  s.f_outer.resize(grid_size);
  s.f1_val.resize(grid_size);
  s.g1_val.resize(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double l =
        p.c1 * static_cast<double>(i) / static_cast<double>(grid_size - 1);
    const double w = inner_solve(p, l, inner_tol);
    s.lambda[i] = l;
    s.w[i] = w;
    s.f1_val[i] = p.f1.value(w);
    s.g1_val[i] = p.g1.value(w);
    s.f_outer[i] = std::abs(s.f1_val[i] - s.g1_val[i]);
  }
  return s;
}

QuasiconvexVerdict check_quasiconvex(const OuterSurface& s, double tol) {
  bool seen_up = false;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double d = s.f_outer[i + 1] - s.f_outer[i];
    if (d > tol) seen_up = true;
    if (d < -tol && seen_up) return {false, s.lambda[i + 1]};
  }
  return {true, 0.0};
}

NonconvexVerdict check_nonconvex(const OuterSurface& s, double margin) {
  // lower convex envelope (Andrew's monotone chain over the sorted lambdas)
  const std::size_t n = s.size();
  std::vector<std::size_t> hull;
  for (std::size_t i = 0; i < n; ++i) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2], b = hull.back();
      const double cross =
          (s.lambda[b] - s.lambda[a]) * (s.f_outer[i] - s.f_outer[a]) -
          (s.f_outer[b] - s.f_outer[a]) * (s.lambda[i] - s.lambda[a]);
      if (cross <= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(i);
  }

  NonconvexVerdict v;
  for (std::size_t seg = 0; seg + 1 < hull.size(); ++seg) {
    const std::size_t a = hull[seg], c = hull[seg + 1];
    for (std::size_t b = a + 1; b < c; ++b) {
      const double t = (s.lambda[b] - s.lambda[a]) / (s.lambda[c] - s.lambda[a]);
      const double chord = s.f_outer[a] + t * (s.f_outer[c] - s.f_outer[a]);
      const double gap = s.f_outer[b] - chord;
      if (gap >= margin && gap > v.margin) {
        v.nonconvex = true;
        v.lambda_a = s.lambda[a];
        v.lambda_b = s.lambda[b];
        v.lambda_c = s.lambda[c];
        v.margin = gap;
      }
    }
  }
  return v;
}

SignCheck check_sign_identity(const InnerProblem1D& p, double lambda, double h_fd,
                              double noise_floor) {
  if (lambda - h_fd < 0.0 || lambda + h_fd > p.c1)
    throw std::invalid_argument("check_sign_identity: lambda +- h outside [0, c1]");
  const auto F = [&](double l) {
    const double w = inner_solve(p, l);
    return std::abs(p.f1.value(w) - p.g1.value(w));
  };
  const double fd = (F(lambda + h_fd) - F(lambda - h_fd)) / (2.0 * h_fd);
  if (std::abs(fd) <= noise_floor) return SignCheck::skipped;
  const double w = inner_solve(p, lambda);
  const double rhs = p.g1.value(w) - p.f1.value(w);
  // at the kink both sides of the identity lose their sign
  if (std::abs(rhs) <= noise_floor) return SignCheck::skipped;
  return (fd > 0.0) == (rhs > 0.0) ? SignCheck::agree : SignCheck::disagree;
}

EnvelopeVerdict check_convergence_bound(std::span<const double> trajectory,
                                        double lambda_star, double alpha,
                                        double slack) {
  EnvelopeVerdict v;
  if (trajectory.empty()) return v;
  const double e0 = std::abs(trajectory[0] - lambda_star);
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const double bound =
        std::max(e0 - static_cast<double>(t) * alpha, alpha) + slack;
    const double err = std::abs(trajectory[t] - lambda_star);
    if (err > bound) {
      v.holds = false;
      v.first_violation = t;
      break;
    }
  }
  v.terminal_error = std::abs(trajectory.back() - lambda_star);
  return v;
}

namespace {

ScalarFn quadratic(double a, double center) {
  return {[a, center](double w) { return a * (w - center) * (w - center); },
          [a, center](double w) { return 2.0 * a * (w - center); },
          [a](double) { return 2.0 * a; }};
}

ScalarFn scaled_cosh(double scale, double center) {
  return {[scale, center](double w) { return scale * std::cosh(w - center); },
          [scale, center](double w) { return scale * std::sinh(w - center); },
          [scale, center](double w) { return scale * std::cosh(w - center); }};
}

// log(1 + e^{a(w - center)}), convex for any a
ScalarFn log_sum_exp(double a, double center) {
  const auto sig = [](double t) {
    return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  };
  return {[a, center](double w) {
            const double t = a * (w - center);
            return t > 30.0 ? t : std::log1p(std::exp(t));
          },
          [a, center, sig](double w) { return a * sig(a * (w - center)); },
          [a, center, sig](double w) {
            const double s = sig(a * (w - center));
            return a * a * s * (1.0 - s);
          }};
}

ScalarFn zero_fn() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; },
          [](double) { return 0.0; }};
}

}  // namespace

InnerProblem1D counterexample_problem() {
  InnerProblem1D p;
  p.name = "cosh-vs-quadratic";
  p.f1 = {[](double w) { return (std::exp(w) + std::exp(-w)) / 5.0; },
          [](double w) { return (std::exp(w) - std::exp(-w)) / 5.0; },
          [](double w) { return (std::exp(w) + std::exp(-w)) / 5.0; }};
  p.g1 = quadratic(1.0, 1.0);
  p.h = zero_fn();
  p.c1 = 1.0;
  p.zero_h = true;
  return p;
}

std::vector<InnerProblem1D> fixture_library() {
  std::vector<InnerProblem1D> fx;
  const auto add = [&](std::string name, ScalarFn f1, ScalarFn g1, ScalarFn h,
                       double c1, bool zero_h) {
    InnerProblem1D p;
    p.name = std::move(name);
    p.f1 = std::move(f1);
    p.g1 = std::move(g1);
    p.h = std::move(h);
    p.c1 = c1;
    p.zero_h = zero_h;
    fx.push_back(std::move(p));
  };

  fx.push_back(counterexample_problem());
  add("quadratics-symmetric", quadratic(1.0, 2.0), quadratic(1.0, -3.0), zero_fn(),
      1.0, true);
  add("quadratics-asymmetric", quadratic(3.0, 2.0), quadratic(0.5, -1.0), zero_fn(),
      1.0, true);
  add("quadratics-with-h", quadratic(1.0, 1.0), quadratic(1.0, -1.0),
      quadratic(0.25, 0.0), 1.0, false);
  add("cosh-pair", scaled_cosh(1.0, 1.0), scaled_cosh(1.0, -1.0), zero_fn(), 1.0,
      true);
  add("cosh-pair-with-h", scaled_cosh(0.5, 2.0), scaled_cosh(1.5, -2.0),
      quadratic(0.1, 0.5), 1.0, false);
  add("lse-vs-quadratic", log_sum_exp(2.0, 1.0), quadratic(1.0, -2.0),
      quadratic(0.05, 0.0), 1.0, false);
  add("lse-pair-with-h", log_sum_exp(1.0, 1.0), log_sum_exp(-1.0, -1.0),
      quadratic(0.05, 0.0), 1.0, false);
  add("cosh-vs-lse", scaled_cosh(0.4, -1.0), log_sum_exp(-2.0, 2.0),
      quadratic(0.05, 0.0), 1.0, false);
  add("quadratics-wide-box", quadratic(2.0, 1.5), quadratic(1.0, -0.5), zero_fn(),
      2.0, true);
  add("quadratics-narrow-box", quadratic(1.0, 0.5), quadratic(2.0, -1.5),
      quadratic(0.5, 0.25), 0.5, false);
  add("counterexample-mirrored", quadratic(1.0, -1.0), scaled_cosh(0.4, 0.0),
      zero_fn(), 1.0, true);
  return fx;
}

bool TheoryReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.pass; });
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

TheoryReport run_verify(const VerifyOptions& opt) {
  TheoryReport report;
  const auto add = [&](std::string name, bool pass, std::string detail) {
    report.checks.push_back({std::move(name), pass, std::move(detail)});
  };

  const InnerProblem1D cx = counterexample_problem();
  const OuterSurface surface = sweep_surface(cx, opt.grid_size);

  // endpoint closed forms: F(0) = (e + 1/e)/5, F(1) = |2/5 - 1|
  const double f0_expected = (std::exp(1.0) + std::exp(-1.0)) / 5.0;
  const double f0 = surface.f_outer.front();
  const double f1 = surface.f_outer.back();
  add("counterexample-endpoint-F0",
      std::abs(f0 - f0_expected) <= 1e-9,
      "F(0) = " + fmt(f0) + ", expected " + fmt(f0_expected));
  add("counterexample-endpoint-F1", std::abs(f1 - 0.6) <= 1e-9,
      "F(1) = " + fmt(f1) + ", expected 0.6");

  const QuasiconvexVerdict qc = check_quasiconvex(surface);
  add("counterexample-quasiconvex", qc.quasiconvex,
      qc.quasiconvex ? "single descent-then-ascent pattern"
                     : "violated at lambda = " + fmt(qc.violated_at));

  const NonconvexVerdict nc = check_nonconvex(surface);
  add("counterexample-nonconvex", nc.nonconvex,
      nc.nonconvex ? "chord gap " + fmt(nc.margin) + " at lambda = " +
                         fmt(nc.lambda_b)
                   : "no chord violation found");

  // sign identity sampled across the grid, away from the argmin kink
  {
    const std::size_t kink = surface.argmin();
    const double cell = surface.cell_width();
    const double h_fd = cell;
    std::size_t agree = 0, disagree = 0, skipped = 0;
    const std::size_t samples = 120;
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t i =
          1 + s * (surface.size() - 2) / samples;
      if (i + 2 >= surface.size() || i < 2) continue;
      if (i + 2 >= kink && i <= kink + 2) continue;  // kink band
      const double l = surface.lambda[i];
      if (l - h_fd < 0.0 || l + h_fd > cx.c1) continue;
      switch (check_sign_identity(cx, l, h_fd)) {
        case SignCheck::agree: ++agree; break;
        case SignCheck::disagree: ++disagree; break;
        case SignCheck::skipped: ++skipped; break;
      }
    }
    add("counterexample-sign-identity", disagree == 0 && agree >= 50,
        std::to_string(agree) + " agree, " + std::to_string(disagree) +
            " disagree, " + std::to_string(skipped) + " inconclusive");
  }

  // convergence envelope from random starts
  {
    Rng rng(opt.seed, 7);
    const double alpha = 0.01;
    const double lam_star = surface.lambda[surface.argmin()];
    const double slack = surface.cell_width();
    bool all_hold = true;
    double worst_terminal = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const double l0 = rng.next_double() * cx.c1;
      const auto traj = signed_gd_1d(
          [&](double l) {
            const double w = inner_solve(cx, l);
            return std::pair{cx.f1.value(w), cx.g1.value(w)};
          },
          l0, alpha, 200, cx.c1);
      const EnvelopeVerdict ev =
          check_convergence_bound(traj, lam_star, alpha, slack);
      all_hold = all_hold && ev.holds && ev.terminal_error <= alpha + slack;
      worst_terminal = std::max(worst_terminal, ev.terminal_error);
    }
    add("counterexample-convergence-envelope", all_hold,
        "worst terminal |lambda - lambda*| = " + fmt(worst_terminal) +
            " (allowed " + fmt(alpha + slack) + ")");
  }

  // fixture library: quasiconvexity, inner-value monotonicity, curvature.
  // f1 - g1 is nonincreasing for every fixture; the per-function
  // monotonicity holds in the h = 0 case only.
  for (const InnerProblem1D& p : fixture_library()) {
    const OuterSurface s = sweep_surface(p, 401);
    const QuasiconvexVerdict v = check_quasiconvex(s);
    bool monotone = true;
    bool curvature = true;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const double diff_now = s.f1_val[i] - s.g1_val[i];
      const double diff_next = s.f1_val[i + 1] - s.g1_val[i + 1];
      if (diff_next > diff_now + 1e-8) monotone = false;
      if (p.zero_h) {
        if (s.f1_val[i + 1] > s.f1_val[i] + 1e-8) monotone = false;
        if (s.g1_val[i + 1] < s.g1_val[i] - 1e-8) monotone = false;
      }
    }
    for (std::size_t i = 0; i < s.size(); ++i)
      if (!(p.inner_second(s.lambda[i], s.w[i]) > 0.0)) curvature = false;
    add("fixture-" + p.name, v.quasiconvex && monotone && curvature,
        std::string(v.quasiconvex ? "quasiconvex" : "NOT quasiconvex") +
            (monotone ? ", monotone" : ", monotonicity violated") +
            (curvature ? ", curvature positive" : ", curvature check failed"));
  }

  if (opt.negative_control) {
    // W-shaped surface: must be reported as a quasiconvexity violation
    OuterSurface w_surface;
    w_surface.c1 = 1.0;
    const std::size_t n = 101;
    for (std::size_t i = 0; i < n; ++i) {
      const double l = static_cast<double>(i) / (n - 1);
      w_surface.lambda.push_back(l);
      const double v = std::min((l - 0.25) * (l - 0.25),
                                (l - 0.75) * (l - 0.75));
      w_surface.f_outer.push_back(v);
      w_surface.w.push_back(0.0);
      w_surface.f1_val.push_back(0.0);
      w_surface.g1_val.push_back(0.0);
    }
    const QuasiconvexVerdict v = check_quasiconvex(w_surface);
    add("negative-control-w-shape", v.quasiconvex,
        v.quasiconvex ? "quasiconvex (unexpected for the control surface)"
                      : "violated at lambda = " + fmt(v.violated_at));
  }

  return report;
}

std::string report_to_json(const TheoryReport& r) {
  nlohmann::json j;
  j["all_pass"] = r.all_pass();
  nlohmann::json checks = nlohmann::json::array();
  for (const CheckResult& c : r.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["checks"] = checks;
  return j.dump(2);
}

}  // namespace fairbatch
