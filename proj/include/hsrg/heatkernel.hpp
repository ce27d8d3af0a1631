// One-dimensional bulk, Neumann and Robin heat kernels on the half-line,
// their coordinate derivatives, and the kernel inequalities as predicates.
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "hsrg/numerics.hpp"

namespace hsrg {

/// Robin constant c >= 0, or the Dirichlet sentinel (c = infinity).
class RobinConstant {
 public:
  constexpr RobinConstant() = default;
  explicit RobinConstant(double c) : c_(c) {
    if (!(c >= 0.0)) throw DomainError("Robin constant must be >= 0");
    if (std::isinf(c)) dirichlet_ = true;
  }
  static RobinConstant dirichlet() {
    RobinConstant r;
    r.dirichlet_ = true;
    r.c_ = std::numeric_limits<double>::infinity();
    return r;
  }
  [[nodiscard]] bool is_dirichlet() const { return dirichlet_; }
  [[nodiscard]] bool is_neumann() const { return !dirichlet_ && c_ == 0.0; }
  [[nodiscard]] double value() const { return c_; }

 private:
  double c_ = 0.0;
  bool dirichlet_ = false;
};

struct HeatKernelQuery {
  double lambda = 1.0;
  double z1 = 0.0;
  double z2 = 0.0;
  RobinConstant c{};
};

struct DeltaTolerance {
  double delta = 0.1;
  double delta_prime = 0.1;

  DeltaTolerance() = default;
  DeltaTolerance(double d, double dp) : delta(d), delta_prime(dp) {
    if (!(d > 0.0 && d < 0.5)) throw DomainError("delta must lie in (0, 1/2)");
    if (!(dp > 0.0 && dp < 1.0)) throw DomainError("delta_prime must lie in (0, 1)");
  }
  [[nodiscard]] double b_const() const { return 2.0 * (1.0 + 2.0 * delta) / (1.0 - 2.0 * delta); }
  [[nodiscard]] double tau_delta(double tau) const { return (1.0 + delta) * tau; }
};

namespace detail {
inline void check_lambda(double lambda) {
  if (!(lambda > 0.0)) throw DomainError("heat kernel time parameter must be > 0");
}
inline void check_halfline(double z1, double z2) {
  if (!(z1 >= 0.0) || !(z2 >= 0.0)) throw DomainError("half-line coordinates must be >= 0");
}
/// (2 pi lambda)^{-1/2} exp(-a^2 / 2 lambda) and its a-derivatives.
inline double gauss(double lambda, double a) {
  return flush(kInvSqrt2Pi / std::sqrt(lambda) * std::exp(-a * a / (2.0 * lambda)));
}
inline double gauss_d(int k, double lambda, double a) {
  const double g = gauss(lambda, a);
  const double u = a / lambda;
  switch (k) {
    case 0: return g;
    case 1: return -u * g;
    case 2: return (u * u - 1.0 / lambda) * g;
    case 3: return (-u * u * u + 3.0 * u / lambda) * g;
    default: throw DomainError("derivative order above 3 is unsupported");
  }
}
/// Robin subtraction term S(lambda; a) with a = z1 + z2.
inline double robin_sub(double lambda, double a, const RobinConstant& c) {
  if (c.is_dirichlet()) return gauss(lambda, a);
  const double cv = c.value();
  if (cv == 0.0) return 0.0;
  const double x = (a + cv * lambda) / std::sqrt(2.0 * lambda);
  return flush(0.5 * cv * erfcx(x) * std::exp(-a * a / (2.0 * lambda)));
}
/// a-derivatives of S, from d/da S = c (S - g(a)).
inline double robin_sub_d(int k, double lambda, double a, const RobinConstant& c) {
  if (c.is_dirichlet()) return gauss_d(k, lambda, a);
  const double cv = c.value();
  if (cv == 0.0) return 0.0;
  double s = robin_sub(lambda, a, c);
  for (int j = 1; j <= k; ++j) s = cv * (s - gauss_d(j - 1, lambda, a));
  return s;
}

/// 1/(sqrt(pi) x) - erfcx(x) for x > 0, by the asymptotic series when x is
/// large and by direct subtraction otherwise.
inline double erfcx_defect(double x) {
  if (x < 8.0) return 1.0 / (kSqrtPi * x) - erfcx(x);
  const double y = 1.0 / (2.0 * x * x);
  double term = y, sum = 0.0;
  for (int n = 1; n < 40; ++n) {
    sum += term;
    term *= -(2.0 * n + 1.0) * y;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum / (kSqrtPi * x);
}

/// p_R for c > 0 (or Dirichlet) as a sum of non-negative terms:
/// g(d)(1 - e^{-2 z1 z2/lambda})/2 + g(a) a/(a + c lambda) + (c/2) D(x) e^{-a^2/2lambda}.
inline double robin_stable(double lambda, double z1, double z2, const RobinConstant& c) {
  const double a = z1 + z2;
  const double t1 = 0.5 * gauss(lambda, z1 - z2) * (-std::expm1(-2.0 * z1 * z2 / lambda));
  if (c.is_dirichlet()) return flush(t1);
  const double cv = c.value();
  const double x = (a + cv * lambda) / std::sqrt(2.0 * lambda);
  const double t2 = a > 0.0 ? gauss(lambda, a) * a / (a + cv * lambda) : 0.0;
  const double t3 = 0.5 * cv * erfcx_defect(x) * std::exp(-a * a / (2.0 * lambda));
  return flush(t1 + t2 + t3);
}
}  // namespace detail

inline double eval_pB(double lambda, double z1, double z2) {
  detail::check_lambda(lambda);
  return detail::gauss(lambda, z1 - z2);
}
inline double eval_pB(const HeatKernelQuery& q) { return eval_pB(q.lambda, q.z1, q.z2); }

/// Neumann kernel with the overall factor 1/2.
inline double eval_pN(double lambda, double z1, double z2) {
  detail::check_lambda(lambda);
  detail::check_halfline(z1, z2);
  return flush(0.5 * (detail::gauss(lambda, z1 - z2) + detail::gauss(lambda, z1 + z2)));
}
inline double eval_pN(const HeatKernelQuery& q) { return eval_pN(q.lambda, q.z1, q.z2); }

/// Robin kernel p_N - S, with S in closed form through erfcx.
inline double eval_pR(double lambda, double z1, double z2, const RobinConstant& c) {
  detail::check_lambda(lambda);
  detail::check_halfline(z1, z2);
  if (c.is_neumann()) return eval_pN(lambda, z1, z2);
  return detail::robin_stable(lambda, z1, z2, c);
}
inline double eval_pR(const HeatKernelQuery& q) { return eval_pR(q.lambda, q.z1, q.z2, q.c); }

/// Unchecked variant for inner loops whose arguments are known valid.
inline double pR_fast(double lambda, double z1, double z2, const RobinConstant& c) {
  if (c.is_neumann())
    return flush(0.5 * (detail::gauss(lambda, z1 - z2) + detail::gauss(lambda, z1 + z2)));
  return detail::robin_stable(lambda, z1, z2, c);
}

/// The same kernel with the w-integral done by adaptive quadrature.
inline double eval_pR_quadrature(double lambda, double z1, double z2, const RobinConstant& c) {
  detail::check_lambda(lambda);
  detail::check_halfline(z1, z2);
  const double pn = eval_pN(lambda, z1, z2);
  if (c.is_neumann()) return pn;
  const double a = z1 + z2;
  if (c.is_dirichlet())
    return flush(0.5 * detail::gauss(lambda, z1 - z2) * (-std::expm1(-2.0 * z1 * z2 / lambda)));
  const double cv = c.value();
  // p_R = (g(d) - g(a))/2 + int_0^inf dw e^{-w} (g(a) - g(a + w/c)); the
  // integrand is written without cancellation.
  const double ea = std::exp(-a * a / (2.0 * lambda)) * kInvSqrt2Pi / std::sqrt(lambda);
  auto f = [&](double w) {
    const double u = w / cv;
    return std::exp(-w) * ea * (-std::expm1(-u * (2.0 * a + u) / (2.0 * lambda)));
  };
  QuadOptions opt;
  opt.abs_tol = 1e-300;
  opt.rel_tol = 1e-13;
  // The Gaussian width in w is c sqrt(lambda); split the range accordingly.
  const double wscale = std::min(1.0, cv * std::sqrt(lambda));
  std::vector<double> br{0.0};
  for (double w = wscale / 64; w < 60.0; w *= 2) br.push_back(w);
  br.push_back(60.0);
  br.push_back(800.0);
  const double rest = integrate_panels(f, br, opt).value;
  const double half_diff = 0.5 * detail::gauss(lambda, z1 - z2) * (-std::expm1(-2.0 * z1 * z2 / lambda));
  return flush(half_diff + rest);
}

/// k-th derivative (k <= 3) of p_R(lambda; z, z2) with respect to z.
inline double pR_dz(int k, double lambda, double z, double z2, const RobinConstant& c) {
  detail::check_lambda(lambda);
  detail::check_halfline(z, z2);
  if (k < 0 || k > 3) throw DomainError("derivative order above 3 is unsupported");
  const double pn = 0.5 * (detail::gauss_d(k, lambda, z - z2) + detail::gauss_d(k, lambda, z + z2));
  if (c.is_neumann()) return pn;
  return pn - detail::robin_sub_d(k, lambda, z + z2, c);
}

/// Building block of the difference test functions.
inline double eval_pR_diff(double tau, double z, double z_ref, double y, const RobinConstant& c) {
  if (z == z_ref) {
    detail::check_lambda(tau);
    detail::check_halfline(z, y);
    return 0.0;
  }
  return eval_pR(tau, z, y, c) - eval_pR(tau, z_ref, y, c);
}

/// Coefficients (ascending powers) of the polynomial P_k defined by
/// P_0 = 1 and P_{k+1} = P_k' - x P_k.
inline std::array<double, 4> hermite_like(int k) {
  if (k < 0 || k > 3) throw DomainError("derivative order above 3 is unsupported");
  std::array<double, 4> p{1.0, 0.0, 0.0, 0.0};
  for (int j = 0; j < k; ++j) {
    std::array<double, 4> q{};
    for (int i = 1; i < 4; ++i) q[i - 1] += i * p[i];
    for (int i = 0; i < 3; ++i) q[i + 1] -= p[i];
    p = q;
  }
  return p;
}

inline double poly_eval(const std::array<double, 4>& p, double x) {
  return ((p[3] * x + p[2]) * x + p[1]) * x + p[0];
}

/// d^k/dt^k p_B(tau; t u + (1-t) v, y) in closed form.
inline double dt_pB_derivative(int k, double tau, double t, double u, double v, double y) {
  if (k < 0 || k > 3) throw DomainError("derivative order above 3 is unsupported");
  detail::check_lambda(tau);
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolation parameter must lie in [0, 1]");
  const double xi = t * u + (1.0 - t) * v;
  const double pb = detail::gauss(tau, xi - y);
  if (k == 0) return pb;
  const double x = (xi - y) / std::sqrt(tau);
  return std::pow(u - v, k) * std::pow(tau, -0.5 * k) * poly_eval(hermite_like(k), x) * pb;
}

/// d^k/dt^k p_R(tau; t u + (1-t) v, y).
inline double dt_pR_derivative(int k, double tau, double t, double u, double v, double y,
                               const RobinConstant& c) {
  const double xi = t * u + (1.0 - t) * v;
  return std::pow(u - v, k) * pR_dz(k, tau, xi, y, c);
}

// ---------------------------------------------------------------------------
// Inequality predicates. Each returns both sides so callers can report ratios.

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  [[nodiscard]] bool holds(double rel_slack = 1e-12) const {
    return lhs <= rhs * (1.0 + rel_slack) + 1e-300;
  }
  [[nodiscard]] double ratio() const { return rhs > 0 ? lhs / rhs : (lhs > 0 ? INFINITY : 0.0); }
};

/// sup_x x^r exp(-x^2/2) = (r/e)^{r/2}.
inline double moment_sup(int r) { return r == 0 ? 1.0 : std::pow(r / std::exp(1.0), 0.5 * r); }

inline double moment_constant(int r) { return std::pow(2.0, 0.5 * (r + 1)) * moment_sup(r); }

/// |z1-z2|^r p_B(tau) <= C tau^{r/2} p_B(2 tau).
inline BoundCheck check_moment_bound(int r, double tau, double z1, double z2) {
  return {std::pow(std::abs(z1 - z2), r) * eval_pB(tau, z1, z2),
          moment_constant(r) * std::pow(tau, 0.5 * r) * eval_pB(2.0 * tau, z1, z2)};
}

/// p_B(tau) <= sqrt(1+delta) p_B((1+delta) tau).
inline BoundCheck check_inflation(double delta, double tau, double z1, double z2) {
  return {eval_pB(tau, z1, z2), std::sqrt(1.0 + delta) * eval_pB((1.0 + delta) * tau, z1, z2)};
}

/// p_R <= 2 p_B on the half-line.
inline BoundCheck check_robin_domination(double tau, double z1, double z2, const RobinConstant& c) {
  return {eval_pR(tau, z1, z2, c), 2.0 * eval_pB(tau, z1, z2)};
}

/// Half-line overlap of two bulk kernels in closed form:
/// int_0^inf p_B(t1; z1, u) p_B(t2; u, z2) du.
inline double halfline_overlap(double t1, double t2, double z1, double z2) {
  const double s = t1 + t2;
  const double mu = (t2 * z1 + t1 * z2) / s;
  const double sig = std::sqrt(t1 * t2 / s);
  return eval_pB(s, z1, z2) * 0.5 * std::erfc(-mu / (std::sqrt(2.0) * sig));
}

/// Full-line overlap <= 2 x half-line overlap for z1, z2 >= 0.
inline BoundCheck check_halfline_comparison(double t1, double t2, double z1, double z2) {
  return {eval_pB(t1 + t2, z1, z2), 2.0 * halfline_overlap(t1, t2, z1, z2)};
}

/// Constant C_{k,delta} in |d_t^k p_B(tau)| <= C |u-v|^k tau^{-k/2} p_B(tau_delta),
/// obtained by maximizing sqrt(1+delta) |P_k(x)| exp(-x^2 delta / (2 (1+delta))).
inline double dt_constant(int k, double delta) {
  const auto p = hermite_like(k);
  const double a = delta / (2.0 * (1.0 + delta));
  double best = 0.0;
  const double xmax = 4.0 * std::sqrt((k + 1.0) / a) + 5.0;
  const int n = 20000;
  for (int i = 0; i <= n; ++i) {
    const double x = xmax * i / n;
    best = std::max(best, std::abs(poly_eval(p, x)) * std::exp(-a * x * x));
  }
  auto g = [&](double x) { return std::abs(poly_eval(p, x)) * std::exp(-a * x * x); };
  const double h = xmax / n;
  double xb = 0.0;
  for (int i = 0; i <= n; ++i)
    if (g(xmax * i / n) >= best) xb = xmax * i / n;
  best = golden_max(g, std::max(0.0, xb - h), xb + h, 1e-12).second;
  return std::sqrt(1.0 + delta) * best;
}

/// The same supremum with the exponent written in the lemma's proof,
/// x^2 delta / ((1+delta)(1+2 delta)) and no sqrt(1+delta) prefactor.
inline double dt_constant_as_written(int k, double delta) {
  const auto p = hermite_like(k);
  const double a = delta / ((1.0 + delta) * (1.0 + 2.0 * delta));
  auto g = [&](double x) { return std::abs(poly_eval(p, x)) * std::exp(-a * x * x); };
  double best = 0.0, xb = 0.0;
  const double xmax = 4.0 * std::sqrt((k + 1.0) / a) + 5.0;
  const int n = 20000;
  for (int i = 0; i <= n; ++i) {
    const double v = g(xmax * i / n);
    if (v >= best) {
      best = v;
      xb = xmax * i / n;
    }
  }
  return golden_max(g, std::max(0.0, xb - xmax / n), xb + xmax / n, 1e-12).second;
}

/// Envelope constant for t-derivatives of p_R; p_R is half the standard
/// Robin kernel so 2 C_{k,delta} suffices.
inline double dt_constant_robin(int k, double delta) { return 2.0 * dt_constant(k, delta); }

/// C_delta of the few-line estimate: sqrt((1+2d)/(1+d)) sup x exp(-x^2 d / (2(1+d)(1+2d))).
inline double c_delta(double delta) {
  const double a = delta / (2.0 * (1.0 + delta) * (1.0 + 2.0 * delta));
  return std::sqrt((1.0 + 2.0 * delta) / (1.0 + delta)) / std::sqrt(2.0 * a * std::exp(1.0));
}

/// Constant for the lemma with the normalization prefactors of the heat
/// kernels kept: C_delta sqrt(2 / (1+2 delta)) (1+delta').
inline double c_delta_lemma(double delta, double delta_prime) {
  return c_delta(delta) * std::sqrt(2.0 / (1.0 + 2.0 * delta)) * (1.0 + delta_prime);
}

struct LemmaA3Input {
  double delta = 0.1, delta_prime = 0.5;
  double Lambda = 1.0, Lambda_I = 1.0, tau = 1.0;
  double z1 = 0.0, z2 = 0.0, y1 = 0.0;
};

/// Whether the input satisfies delta' Lambda^2 >= b / tau and Lambda_I >= Lambda.
inline bool lemma_a3_admissible(const LemmaA3Input& in) {
  const DeltaTolerance d(in.delta, in.delta_prime);
  return in.Lambda_I >= in.Lambda && in.delta_prime * in.Lambda * in.Lambda >= d.b_const() / in.tau;
}

/// Left side of the lemma (t-integral by adaptive quadrature) and the right
/// side with the given constant (defaults to c_delta_lemma).
inline BoundCheck check_lemma_a3(const LemmaA3Input& in, double constant = -1.0) {
  const double C = constant > 0 ? constant : c_delta_lemma(in.delta, in.delta_prime);
  const double taud = (1.0 + in.delta_prime) * in.tau;
  auto f = [&](double t) { return detail::gauss(taud, t * in.z2 + (1.0 - t) * in.z1 - in.y1); };
  QuadOptions opt;
  opt.abs_tol = 0.0;
  opt.rel_tol = 1e-12;
  opt.throw_on_failure = false;
  const double I = integrate_adaptive(f, 0.0, 1.0, opt).value;
  const double LI2 = in.Lambda_I * in.Lambda_I;
  const double lhs = std::abs(in.z1 - in.z2) * eval_pB((1.0 + in.delta) / LI2, in.z1, in.z2) * I;
  const double dp3 = std::pow(1.0 + in.delta_prime, 3);
  const double rhs = C / in.Lambda * eval_pB(2.0 / LI2, in.z1, in.z2) * eval_pB(dp3 * in.tau, in.z1, in.y1);
  return {lhs, rhs};
}

}  // namespace hsrg
