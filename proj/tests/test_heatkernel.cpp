#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <vector>

#include "hsrg/heatkernel.hpp"

using namespace hsrg;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double integrate_half_line(const std::function<double(double)>& f, double scale) {
  std::vector<double> br{0.0};
  for (double w = scale / 64; w < 40.0 * scale; w *= 2) br.push_back(w);
  br.push_back(40.0 * scale);
  QuadOptions opt;
  opt.abs_tol = 1e-16;
  opt.rel_tol = 1e-12;
  return integrate_panels(f, br, opt).value;
}

}  // namespace

TEST(Erfcx, MatchesHighPrecisionValues) {
  const std::vector<std::pair<double, double>> ref = {
      {0.5, 0.61569034419292587487},   {1.0, 0.42758357615580700441},   {4.9, 0.11287909055975893179},
      {5.1, 0.10861102631393297927},   {10.0, 0.056140992743822585858}, {30.0, 0.018795888861416751497},
      {100.0, 0.0056416137829894329036}};
  for (auto [x, v] : ref) EXPECT_LT(rel(erfcx(x), v), 1e-13) << x;
}

TEST(RobinConstant, Validation) {
  EXPECT_THROW(RobinConstant(-0.1), DomainError);
  EXPECT_TRUE(RobinConstant(0.0).is_neumann());
  EXPECT_TRUE(RobinConstant::dirichlet().is_dirichlet());
  EXPECT_TRUE(RobinConstant(INFINITY).is_dirichlet());
  EXPECT_THROW(eval_pR(0.0, 1.0, 1.0, RobinConstant(1.0)), DomainError);
  EXPECT_THROW(eval_pR(1.0, -1.0, 1.0, RobinConstant(1.0)), DomainError);
}

TEST(HeatKernel, ClosedFormAgreesWithQuadrature) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lz(-3.0, 1.0), zz(0.0, 3.0), lc(-2.0, 2.0);
  for (int i = 0; i < 300; ++i) {
    const double lambda = std::pow(10.0, lz(rng));
    const double z1 = zz(rng), z2 = zz(rng);
    const RobinConstant c(std::pow(10.0, lc(rng)));
    const double q = eval_pR_quadrature(lambda, z1, z2, c);
    const double v = eval_pR(lambda, z1, z2, c);
    if (q > 1e-250) {
      EXPECT_LT(rel(v, q), 1e-10) << lambda << " " << z1 << " " << z2 << " " << c.value();
    }
  }
}

TEST(HeatKernel, LimitsInTheRobinConstant) {
  const double lambda = 0.7, z1 = 0.3, z2 = 1.1;
  EXPECT_DOUBLE_EQ(eval_pR(lambda, z1, z2, RobinConstant(0.0)), eval_pN(lambda, z1, z2));
  EXPECT_LT(rel(eval_pR(lambda, z1, z2, RobinConstant(1e-9)), eval_pN(lambda, z1, z2)), 1e-8);
  EXPECT_LT(rel(eval_pR(lambda, z1, z2, RobinConstant(1e9)), eval_pR(lambda, z1, z2, RobinConstant::dirichlet())),
            1e-8);
  EXPECT_EQ(eval_pR(lambda, 0.0, z2, RobinConstant::dirichlet()), 0.0);
  // monotone decreasing in c
  double prev = eval_pN(lambda, z1, z2);
  for (double c : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    const double v = eval_pR(lambda, z1, z2, RobinConstant(c));
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(HeatKernel, SymmetricAndNonNegative) {
  for (double c : {0.0, 0.4, 3.0}) {
    const RobinConstant rc(c);
    for (double z1 : {0.0, 0.2, 1.5})
      for (double z2 : {0.0, 0.7, 4.0}) {
        EXPECT_NEAR(eval_pR(0.3, z1, z2, rc), eval_pR(0.3, z2, z1, rc), 1e-15);
        EXPECT_GE(eval_pR(0.3, z1, z2, rc), 0.0);
      }
  }
  // deep tail stays positive where p_N - S would cancel
  EXPECT_GT(eval_pR(1e-3, 3.0, 3.0, RobinConstant(5.0)), 0.0);
}

TEST(HeatKernel, NeumannNormalizationIsOneHalf) {
  for (double z1 : {0.0, 0.5, 2.0}) {
    const double lambda = 0.4;
    const double I = integrate_half_line([&](double u) { return eval_pN(lambda, z1, u); }, 1.0 + z1);
    EXPECT_NEAR(I, 0.5, 1e-11);
    const double Ir = integrate_half_line([&](double u) { return eval_pR(lambda, z1, u, RobinConstant(1.0)); },
                                          1.0 + z1);
    EXPECT_LT(Ir, 0.5);
  }
}

TEST(HeatKernel, SemigroupCarriesTheFactorOneHalf) {
  for (double c : {0.0, 0.6, 2.5}) {
    const RobinConstant rc(c);
    const double t1 = 0.3, t2 = 0.5, z1 = 0.4, z2 = 0.9;
    const double I = integrate_half_line([&](double u) { return eval_pR(t1, z1, u, rc) * eval_pR(t2, u, z2, rc); },
                                         2.0);
    EXPECT_LT(rel(I, 0.5 * eval_pR(t1 + t2, z1, z2, rc)), 1e-9) << c;
  }
}

TEST(HeatKernel, RobinBoundaryCondition) {
  for (double c : {0.0, 0.5, 2.0}) {
    const RobinConstant rc(c);
    for (double z2 : {0.1, 0.8}) {
      const double d = pR_dz(1, 0.6, 0.0, z2, rc);
      EXPECT_NEAR(d, c * eval_pR(0.6, 0.0, z2, rc), 1e-13);
    }
  }
}

TEST(HeatKernel, DerivativesMatchFiniteDifferences) {
  const RobinConstant rc(0.9);
  const double lambda = 0.5, z2 = 0.6, h = 1e-4;
  for (double z : {0.3, 1.0, 2.0}) {
    for (int k = 1; k <= 3; ++k) {
      auto f = [&](double x) { return pR_dz(k - 1, lambda, x, z2, rc); };
      const double fd = (f(z + h) - f(z - h)) / (2 * h);
      EXPECT_NEAR(pR_dz(k, lambda, z, z2, rc), fd, 1e-6 * (1 + std::abs(fd))) << k << " " << z;
    }
  }
  EXPECT_NEAR(pR_dz(0, lambda, 0.4, z2, rc), eval_pR(lambda, 0.4, z2, rc), 1e-14);
}

TEST(HeatKernel, TimeDerivativeAlongSegment) {
  const double tau = 0.4, u = 1.3, v = 0.2, y = 0.7, h = 1e-4;
  for (int k = 1; k <= 3; ++k) {
    for (double t : {0.2, 0.5, 0.8}) {
      const double fd = (dt_pB_derivative(k - 1, tau, t + h, u, v, y) - dt_pB_derivative(k - 1, tau, t - h, u, v, y)) /
                        (2 * h);
      EXPECT_NEAR(dt_pB_derivative(k, tau, t, u, v, y), fd, 1e-6 * (1 + std::abs(fd)));
    }
  }
  EXPECT_EQ(eval_pR_diff(0.5, 0.3, 0.3, 1.0, RobinConstant(1.0)), 0.0);
}

TEST(HermiteLike, FirstPolynomials) {
  const auto p2 = hermite_like(2);  // x^2 - 1
  EXPECT_EQ(p2[0], -1.0);
  EXPECT_EQ(p2[2], 1.0);
  const auto p3 = hermite_like(3);  // -x^3 + 3x
  EXPECT_EQ(p3[1], 3.0);
  EXPECT_EQ(p3[3], -1.0);
}

TEST(Inequalities, RandomAdmissibleInputs) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> lt(-3.0, 1.0), zz(0.0, 4.0), uc(-2.0, 2.0), ud(0.01, 0.49), u01(0.0, 1.0);
  const std::vector<double> deltas = {0.02, 0.1, 0.25, 0.4, 0.48};
  std::vector<std::array<double, 4>> cb(deltas.size()), cr(deltas.size());
  for (std::size_t j = 0; j < deltas.size(); ++j)
    for (int k = 0; k <= 3; ++k) {
      cb[j][k] = dt_constant(k, deltas[j]);
      cr[j][k] = dt_constant_robin(k, deltas[j]);
    }
  std::uniform_int_distribution<std::size_t> pick(0, deltas.size() - 1);
  int lemma_cases = 0;
  for (int i = 0; i < 10000; ++i) {
    const double tau = std::pow(10.0, lt(rng));
    const double z1 = zz(rng), z2 = zz(rng), y = zz(rng);
    const std::size_t di = pick(rng);
    const double delta = deltas[di];
    const RobinConstant rc(std::pow(10.0, uc(rng)));
    for (int r = 0; r <= 3; ++r) ASSERT_TRUE(check_moment_bound(r, tau, z1, z2).holds()) << r;
    ASSERT_TRUE(check_inflation(delta, tau, z1, z2).holds());
    ASSERT_TRUE(check_robin_domination(tau, z1, z2, rc).holds());
    ASSERT_TRUE(check_halfline_comparison(tau, std::pow(10.0, lt(rng)), z1, z2).holds());
    const double t = u01(rng);
    const double xi = t * z1 + (1 - t) * z2;
    for (int k = 0; k <= 3; ++k) {
      const double env = std::pow(std::abs(z1 - z2), k) * std::pow(tau, -0.5 * k) * eval_pB((1 + delta) * tau, xi, y);
      ASSERT_LE(std::abs(dt_pB_derivative(k, tau, t, z1, z2, y)), cb[di][k] * env * (1 + 1e-9) + 1e-300);
      ASSERT_LE(std::abs(dt_pR_derivative(k, tau, t, z1, z2, y, rc)),
                cr[di][k] * env * (1 + 1e-9) + 1e-300)
          << k << " " << tau << " " << rc.value();
    }
    LemmaA3Input in;
    in.delta = std::min(ud(rng), 0.45);
    in.delta_prime = 0.05 + 0.9 * u01(rng);
    in.tau = tau;
    in.Lambda = std::pow(10.0, 2.0 * u01(rng)) / std::sqrt(tau);
    in.Lambda_I = in.Lambda * (1.0 + 3.0 * u01(rng));
    in.z1 = z1 * 0.3;
    in.z2 = z2 * 0.3;
    in.y1 = y * 0.3;
    if (lemma_a3_admissible(in)) {
      ++lemma_cases;
      ASSERT_TRUE(check_lemma_a3(in).holds(1e-9)) << in.delta << " " << in.Lambda << " " << in.tau;
    }
  }
  EXPECT_GT(lemma_cases, 1000);
}

TEST(Inequalities, MomentConstantIsSharp) {
  // equality at |z1 - z2| = sqrt(2 r tau) for the ratio of the two sides up to the p_B(2 tau) shape
  const double tau = 0.5;
  double best = 0.0;
  for (int i = 0; i < 4000; ++i) best = std::max(best, check_moment_bound(2, tau, 0.0, i * 1e-3).ratio());
  EXPECT_GT(best, 0.5);
  EXPECT_LE(best, 1.0 + 1e-12);
}

TEST(Inequalities, ConstantsAreFinitePositive) {
  for (double d : {0.05, 0.1, 0.3}) {
    for (int k = 0; k <= 3; ++k) {
      EXPECT_GT(dt_constant(k, d), 0.0);
      EXPECT_GT(dt_constant_as_written(k, d), 0.0);
    }
    EXPECT_GT(c_delta_lemma(d, 0.5), c_delta(d) * 0.0);
  }
  EXPECT_NEAR(dt_constant(0, 0.1), std::sqrt(1.1), 1e-12);
  EXPECT_THROW(DeltaTolerance(0.6, 0.1), DomainError);
}
