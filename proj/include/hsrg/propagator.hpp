// Closed-form pz-representation propagators, the regularized flowing
// propagator C^{Lambda,Lambda0}, its scale derivative, and boundary residuals.
#pragma once

#include <cmath>
#include <string>

#include "hsrg/heatkernel.hpp"
#include "hsrg/numerics.hpp"

namespace hsrg {

enum class BcKind { Dirichlet, Neumann, Robin };

inline std::string to_string(BcKind k) {
  switch (k) {
    case BcKind::Dirichlet: return "dirichlet";
    case BcKind::Neumann: return "neumann";
    default: return "robin";
  }
}

struct BoundaryCondition {
  BcKind kind = BcKind::Neumann;
  double c = 0.0;

  static BoundaryCondition make(BcKind kind, double c = 0.0) {
    BoundaryCondition bc;
    bc.kind = kind;
    if (kind == BcKind::Robin) {
      if (!(c >= 0.0) || std::isinf(c)) throw DomainError("Robin constant must be finite and >= 0");
      if (c == 0.0) bc.kind = BcKind::Neumann;
      bc.c = c;
    }
    return bc;
  }
  static BoundaryCondition dirichlet() { return make(BcKind::Dirichlet); }
  static BoundaryCondition neumann() { return make(BcKind::Neumann); }
  static BoundaryCondition robin(double c) { return make(BcKind::Robin, c); }

  [[nodiscard]] RobinConstant robin_constant() const {
    switch (kind) {
      case BcKind::Dirichlet: return RobinConstant::dirichlet();
      case BcKind::Neumann: return RobinConstant(0.0);
      default: return RobinConstant(c);
    }
  }
};

struct PropagatorSpec {
  double m = 1.0;
  BoundaryCondition bc{};
  double Lambda = 0.0;
  double Lambda0 = 10.0;

  void validate() const {
    if (!(m > 0.0)) throw DomainError("mass must be > 0");
    if (!(Lambda >= 0.0)) throw DomainError("infrared cutoff must be >= 0");
    if (!(Lambda0 > 0.0) || std::isinf(Lambda0)) throw DomainError("ultraviolet cutoff must be finite and > 0");
    if (Lambda > Lambda0) throw DomainError("infrared cutoff exceeds ultraviolet cutoff");
  }
  /// Upper end of the lambda integration; Lambda = 0 uses 50/m^2.
  [[nodiscard]] double lambda_hi() const { return Lambda > 0.0 ? 1.0 / (Lambda * Lambda) : 50.0 / (m * m); }
  [[nodiscard]] double lambda_lo() const { return 1.0 / (Lambda0 * Lambda0); }
};

// ---------------------------------------------------------------------------
// pz-representation closed forms

inline double image_weight(const BoundaryCondition& bc, double M) {
  switch (bc.kind) {
    case BcKind::Dirichlet: return -1.0;
    case BcKind::Neumann: return 1.0;
    default: return (M - bc.c) / (M + bc.c);
  }
}

inline double C_pz(const BoundaryCondition& bc, double m, double p, double z, double zp) {
  if (!(m > 0.0)) throw DomainError("mass must be > 0");
  detail::check_halfline(z, zp);
  const double M = std::sqrt(p * p + m * m);
  if (bc.kind == BcKind::Dirichlet && (z == 0.0 || zp == 0.0)) return 0.0;
  return (std::exp(-M * std::abs(z - zp)) + image_weight(bc, M) * std::exp(-M * (z + zp))) / (2.0 * M);
}

/// Analytic z-derivative of C_pz; at z = z' the right derivative is returned.
inline double C_pz_dz(const BoundaryCondition& bc, double m, double p, double z, double zp) {
  const double M = std::sqrt(p * p + m * m);
  const double sgn = z < zp ? -1.0 : 1.0;
  return (-sgn * M * std::exp(-M * std::abs(z - zp)) - image_weight(bc, M) * M * std::exp(-M * (z + zp))) /
         (2.0 * M);
}

/// Boundary residual of the closed form at z = 0.
inline double bc_residual(const BoundaryCondition& bc, double m, double p, double zp) {
  if (!(zp > 0.0)) throw DomainError("bc_residual needs z' > 0");
  switch (bc.kind) {
    case BcKind::Dirichlet: return C_pz(bc, m, p, 0.0, zp);
    case BcKind::Neumann: return C_pz_dz(bc, m, p, 0.0, zp);
    default: {
      // d/dz at 0 of the closed form: (1 - w) e^{-M z'} / 2; c C(0, z') = c (1 + w) e^{-M z'} / (2M).
      const double M = std::sqrt(p * p + m * m);
      const double w = image_weight(bc, M);
      const double e = std::exp(-M * zp);
      const double dz = 0.5 * (1.0 - w) * e;
      const double cc = bc.c * (1.0 + w) * e / (2.0 * M);
      return dz - cc;
    }
  }
}

// ---------------------------------------------------------------------------
// Regularized propagator

namespace detail {

/// int_{lo}^{hi} dlambda exp(-lambda M^2) (2 pi lambda)^{-1/2} exp(-d^2 / (2 lambda)),
/// written with erfcx so that no intermediate overflows.
inline double gaussian_lambda_integral(double M, double d, double lo, double hi) {
  if (hi <= lo) return 0.0;
  const double alpha = M * M;
  const double beta = 0.5 * d * d;
  const double sa = std::sqrt(alpha), sb = std::sqrt(beta);
  const double q = sa * sb;
  auto E = [&](double l) { return std::exp(-alpha * l - beta / l); };
  const double slo = std::sqrt(lo), shi = std::sqrt(hi);
  const double ulo_p = sa * slo + sb / slo, uhi_p = sa * shi + sb / shi;
  const double ulo_m = sa * slo - sb / slo, uhi_m = sa * shi - sb / shi;
  const double Elo = E(lo), Ehi = E(hi);
  // e^{2q} [erf(uhi+) - erf(ulo+)]
  const double plus = erfcx(ulo_p) * Elo - erfcx(uhi_p) * Ehi;
  // e^{-2q} [erf(uhi-) - erf(ulo-)]
  double minus;
  if (ulo_m >= 0.0)
    minus = erfcx(ulo_m) * Elo - erfcx(uhi_m) * Ehi;
  else if (uhi_m <= 0.0)
    minus = erfcx(-uhi_m) * Ehi - erfcx(-ulo_m) * Elo;
  else
    minus = std::exp(-2.0 * q) * (std::erf(uhi_m) - std::erf(ulo_m));
  // (2 pi)^{-1/2} sqrt(pi) / (2 sqrt(alpha)) = 1 / (2 sqrt(2) M)
  return (plus + minus) / (2.0 * std::sqrt(2.0) * M);
}

inline QuadOptions lambda_quad_options() {
  QuadOptions o;
  o.abs_tol = 1e-16;
  o.rel_tol = 1e-12;
  o.max_intervals = 2000;
  return o;
}

/// Breakpoints in s = log(lambda) on [log lo, log hi], one panel per unit.
inline std::vector<double> log_breaks(double lo, double hi, double width = 1.0) {
  const double a = std::log(lo), b = std::log(hi);
  const int n = std::max(1, static_cast<int>(std::ceil((b - a) / width)));
  std::vector<double> br(n + 1);
  for (int i = 0; i <= n; ++i) br[i] = a + (b - a) * i / n;
  return br;
}

}  // namespace detail

/// Robin subtraction piece int dlambda e^{-lambda M^2} S(lambda; z + z').
inline double C_reg_robin_piece(const PropagatorSpec& spec, double p, double z, double zp) {
  const RobinConstant rc = spec.bc.robin_constant();
  if (rc.is_neumann()) return 0.0;
  const double M = std::sqrt(p * p + spec.m * spec.m);
  const double lo = spec.lambda_lo(), hi = spec.lambda_hi();
  if (hi <= lo) return 0.0;
  if (rc.is_dirichlet()) return detail::gaussian_lambda_integral(M, z + zp, lo, hi);
  auto f = [&](double s) {
    const double l = std::exp(s);
    return l * std::exp(-l * M * M) * detail::robin_sub(l, z + zp, rc);
  };
  const auto br = detail::log_breaks(lo, hi);
  return integrate_panels(f, br, detail::lambda_quad_options()).value;
}

inline double C_reg(const PropagatorSpec& spec, double p, double z, double zp) {
  spec.validate();
  detail::check_halfline(z, zp);
  if (spec.Lambda == spec.Lambda0) return 0.0;
  const double M = std::sqrt(p * p + spec.m * spec.m);
  const double lo = spec.lambda_lo(), hi = spec.lambda_hi();
  const double g1 = detail::gaussian_lambda_integral(M, z - zp, lo, hi);
  const double g2 = detail::gaussian_lambda_integral(M, z + zp, lo, hi);
  return 0.5 * (g1 + g2) - C_reg_robin_piece(spec, p, z, zp);
}

/// Oracle: the whole p_R integrated by adaptive quadrature in log(lambda).
inline double C_reg_quadrature(const PropagatorSpec& spec, double p, double z, double zp) {
  spec.validate();
  if (spec.Lambda == spec.Lambda0) return 0.0;
  const RobinConstant rc = spec.bc.robin_constant();
  const double M2 = p * p + spec.m * spec.m;
  auto f = [&](double s) {
    const double l = std::exp(s);
    return l * std::exp(-l * M2) * eval_pR(l, z, zp, rc);
  };
  const auto br = detail::log_breaks(spec.lambda_lo(), spec.lambda_hi(), 0.5);
  return integrate_panels(f, br, detail::lambda_quad_options()).value;
}

/// z-derivative of C_reg, differentiating under the lambda integral.
inline double C_reg_dz(const PropagatorSpec& spec, double p, double z, double zp) {
  spec.validate();
  if (spec.Lambda == spec.Lambda0) return 0.0;
  const RobinConstant rc = spec.bc.robin_constant();
  const double M2 = p * p + spec.m * spec.m;
  auto f = [&](double s) {
    const double l = std::exp(s);
    return l * std::exp(-l * M2) * pR_dz(1, l, z, zp, rc);
  };
  const auto br = detail::log_breaks(spec.lambda_lo(), spec.lambda_hi(), 0.5);
  return integrate_panels(f, br, detail::lambda_quad_options()).value;
}

/// Robin residual of C_reg at z = 0 (d_z C - c C; Neumann d_z C; Dirichlet C).
inline double C_reg_bc_residual(const PropagatorSpec& spec, double p, double zp) {
  const RobinConstant rc = spec.bc.robin_constant();
  if (rc.is_dirichlet()) return C_reg(spec, p, 0.0, zp);
  const double M2 = p * p + spec.m * spec.m;
  auto f = [&](double s) {
    const double l = std::exp(s);
    const double d = pR_dz(1, l, 0.0, zp, rc) - rc.value() * pR_fast(l, 0.0, zp, rc);
    return l * std::exp(-l * M2) * d;
  };
  const auto br = detail::log_breaks(spec.lambda_lo(), spec.lambda_hi(), 0.5);
  QuadOptions o = detail::lambda_quad_options();
  o.abs_tol = 1e-20;
  o.throw_on_failure = false;
  return integrate_panels(f, br, o).value;
}

/// Momentum prefactor of the scale derivative, -(2/Lambda^3) exp(-(p^2+m^2)/Lambda^2),
/// and its first two derivatives with respect to |p|.
inline double cdot_prefactor(double Lambda, double m, double p, int dp_order = 0) {
  if (!(Lambda > 0.0)) throw DomainError("scale derivative needs Lambda > 0");
  const double L2 = Lambda * Lambda;
  const double f = -2.0 / (L2 * Lambda) * std::exp(-(p * p + m * m) / L2);
  switch (dp_order) {
    case 0: return f;
    case 1: return f * (-2.0 * p / L2);
    case 2: return f * (4.0 * p * p / (L2 * L2) - 2.0 / L2);
    default: throw DomainError("momentum derivative order above 2 is unsupported");
  }
}

inline double Cdot(const PropagatorSpec& spec, double p, double z, double zp) {
  spec.validate();
  if (!(spec.Lambda > 0.0)) throw DomainError("scale derivative needs Lambda > 0");
  return cdot_prefactor(spec.Lambda, spec.m, p) *
         eval_pR(1.0 / (spec.Lambda * spec.Lambda), z, zp, spec.bc.robin_constant());
}

}  // namespace hsrg
