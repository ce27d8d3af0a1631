#include <gtest/gtest.h>

#include "hsrg/propagator.hpp"

using namespace hsrg;

namespace {

PropagatorSpec spec_for(BoundaryCondition bc, double Lambda, double Lambda0, double m = 1.0) {
  PropagatorSpec s;
  s.m = m;
  s.bc = bc;
  s.Lambda = Lambda;
  s.Lambda0 = Lambda0;
  return s;
}

const BoundaryCondition kAll[] = {BoundaryCondition::dirichlet(), BoundaryCondition::neumann(),
                                  BoundaryCondition::robin(0.8), BoundaryCondition::robin(5.0)};

}  // namespace

TEST(ClosedForm, BoundaryResidualsVanish) {
  for (const auto& bc : kAll)
    for (double p : {0.0, 0.7, 3.0})
      for (double zp : {0.05, 0.5, 2.0}) EXPECT_LT(std::abs(bc_residual(bc, 1.0, p, zp)), 1e-12);
  EXPECT_THROW(bc_residual(BoundaryCondition::neumann(), 1.0, 0.0, 0.0), DomainError);
}

TEST(ClosedForm, SolvesTheOdeAwayFromTheDiagonal) {
  // -C'' + M^2 C = 0 for z != z'
  const double m = 1.3, p = 0.4, zp = 1.0, h = 1e-3;
  const double M2 = p * p + m * m;
  for (const auto& bc : kAll)
    for (double z : {0.3, 2.0}) {
      const double d2 = (C_pz(bc, m, p, z + h, zp) - 2 * C_pz(bc, m, p, z, zp) + C_pz(bc, m, p, z - h, zp)) / (h * h);
      EXPECT_NEAR(-d2 + M2 * C_pz(bc, m, p, z, zp), 0.0, 1e-5);
    }
}

TEST(ClosedForm, JumpOfDerivativeIsMinusOne) {
  for (const auto& bc : kAll) {
    const double zp = 0.9, e = 1e-9;
    const double jump = C_pz_dz(bc, 1.0, 0.5, zp + e, zp) - C_pz_dz(bc, 1.0, 0.5, zp - e, zp);
    EXPECT_NEAR(jump, -1.0, 1e-7);
  }
}

TEST(ClosedForm, RobinInterpolatesBetweenNeumannAndDirichlet) {
  const double m = 1.0, p = 0.3, z = 0.4, zp = 1.2;
  EXPECT_DOUBLE_EQ(C_pz(BoundaryCondition::robin(0.0), m, p, z, zp), C_pz(BoundaryCondition::neumann(), m, p, z, zp));
  EXPECT_NEAR(C_pz(BoundaryCondition::robin(1e10), m, p, z, zp), C_pz(BoundaryCondition::dirichlet(), m, p, z, zp),
              1e-9);
  EXPECT_THROW(BoundaryCondition::robin(-1.0), DomainError);
}

TEST(Regularized, LimitIsTheClosedFormAtScaledMass) {
  // Laplace transform of the heat kernel: int dlambda e^{-lambda M^2} p_B = e^{-sqrt2 M |d|} / (sqrt2 M)
  for (const auto& bc : kAll) {
    const auto s = spec_for(bc, 0.0, 1e4);
    const double r2 = std::sqrt(2.0);
    for (double p : {0.0, 0.5, 2.0})
      for (double z : {0.0, 0.3})
        for (double zp : {0.2, 1.5}) {
          const double ref = C_pz(bc, r2, r2 * p, z, zp);
          EXPECT_NEAR(C_reg(s, p, z, zp), ref, 1e-9 * (1 + std::abs(ref)));
        }
  }
}

TEST(Regularized, AgreesWithQuadrature) {
  for (const auto& bc : kAll)
    for (double Lambda : {0.0, 0.5, 3.0}) {
      const auto s = spec_for(bc, Lambda, 40.0, 0.7);
      for (double z : {0.0, 0.01, 0.8})
        for (double zp : {0.0, 0.3, 2.0}) {
          const double q = C_reg_quadrature(s, 0.6, z, zp);
          EXPECT_NEAR(C_reg(s, 0.6, z, zp), q, 1e-10 * (1 + std::abs(q)));
        }
    }
}

TEST(Regularized, BoundaryResidualSmall) {
  for (const auto& bc : kAll) {
    const auto s = spec_for(bc, 0.5, 30.0);
    for (double zp : {0.05, 0.5}) EXPECT_LT(std::abs(C_reg_bc_residual(s, 0.4, zp)), 1e-8);
  }
}

TEST(Regularized, DerivativeMatchesFiniteDifference) {
  const auto s = spec_for(BoundaryCondition::robin(0.8), 0.5, 30.0);
  const double h = 1e-5, zp = 0.7;
  for (double z : {0.2, 1.5}) {
    const double fd = (C_reg(s, 0.3, z + h, zp) - C_reg(s, 0.3, z - h, zp)) / (2 * h);
    EXPECT_NEAR(C_reg_dz(s, 0.3, z, zp), fd, 1e-6);
  }
}

TEST(Regularized, DirichletValueGrowsLinearlyNearTheWall) {
  // C(z, z') ~ z d_z C(0, z') for Dirichlet; the same slope is 1/c times the Robin value at small c^{-1}
  const auto s = spec_for(BoundaryCondition::dirichlet(), 0.5, 30.0);
  const double zp = 0.6;
  const double slope = C_reg_dz(s, 0.2, 0.0, zp);
  for (double z : {1e-4, 1e-3}) EXPECT_NEAR(C_reg(s, 0.2, z, zp) / z, slope, 1e-2 * std::abs(slope));
  for (double c : {200.0, 2000.0}) {
    const auto r = spec_for(BoundaryCondition::robin(c), 0.5, 30.0);
    EXPECT_NEAR(c * C_reg(r, 0.2, 0.0, zp), slope, 5.0 / c * std::abs(slope) + 1e-6);
  }
}

TEST(Regularized, RobinAtZeroIsNeumann) {
  const auto a = spec_for(BoundaryCondition::robin(0.0), 0.5, 20.0);
  const auto b = spec_for(BoundaryCondition::neumann(), 0.5, 20.0);
  EXPECT_EQ(C_reg(a, 0.3, 0.2, 0.9), C_reg(b, 0.3, 0.2, 0.9));
}

TEST(Regularized, VanishesAtEqualCutoffs) {
  const auto s = spec_for(BoundaryCondition::neumann(), 5.0, 5.0);
  EXPECT_EQ(C_reg(s, 0.3, 0.2, 0.9), 0.0);
  EXPECT_THROW(C_reg(spec_for(BoundaryCondition::neumann(), 6.0, 5.0), 0.0, 0.0, 0.0), DomainError);
  EXPECT_THROW(C_reg(spec_for(BoundaryCondition::neumann(), 1.0, 5.0, -1.0), 0.0, 0.0, 0.0), DomainError);
}

TEST(ScaleDerivative, MatchesFiniteDifferenceInLambda) {
  for (const auto& bc : kAll) {
    const double L = 2.0, h = 1e-4;
    const auto s = spec_for(bc, L, 25.0);
    const double fd =
        (C_reg(spec_for(bc, L + h, 25.0), 0.4, 0.3, 0.5) - C_reg(spec_for(bc, L - h, 25.0), 0.4, 0.3, 0.5)) / (2 * h);
    EXPECT_NEAR(Cdot(s, 0.4, 0.3, 0.5), fd, 1e-7 * (1 + std::abs(fd)));
  }
  EXPECT_THROW(Cdot(spec_for(BoundaryCondition::neumann(), 0.0, 25.0), 0.4, 0.3, 0.5), DomainError);
}

TEST(ScaleDerivative, MomentumDerivativesOfPrefactor) {
  const double L = 1.5, m = 0.8, p = 0.6, h = 1e-5;
  for (int k = 1; k <= 2; ++k) {
    const double fd = (cdot_prefactor(L, m, p + h, k - 1) - cdot_prefactor(L, m, p - h, k - 1)) / (2 * h);
    EXPECT_NEAR(cdot_prefactor(L, m, p, k), fd, 1e-7);
  }
  EXPECT_THROW(cdot_prefactor(L, m, p, 3), DomainError);
}
