#include <gtest/gtest.h>

#include <memory>
#include <random>
#include <vector>

#include "hsrg/flow.hpp"

using namespace hsrg;

namespace {

FlowParams params(BoundaryCondition bc = BoundaryCondition::robin(0.8), double L0 = 50.0) {
  FlowParams p;
  p.m = 1.0;
  p.g = 0.7;
  p.Lambda0 = L0;
  p.bc = bc;
  return p;
}

std::shared_ptr<const OneLoopModel> model(BoundaryCondition bc = BoundaryCondition::robin(0.8), double L0 = 50.0) {
  return std::make_shared<const OneLoopModel>(params(bc, L0));
}

QuadOptions tight() {
  QuadOptions q;
  q.abs_tol = 1e-300;
  q.rel_tol = 1e-12;
  q.throw_on_failure = false;
  return q;
}

TestFunctionSpec four_point_spec() {
  return TestFunctionSpec::plain(4, {0.3, 0.5}, {0.4, 1.0}, RobinConstant(0.8));
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Model, MomentumTraceClosedForm) {
  const auto M = model();
  for (double L : {0.3, 1.0, 7.0, 40.0}) {
    const auto q = integrate_adaptive([&](double k) { return k * k * cdot_prefactor(L, 1.0, k); }, 0.0, 12.0 * L, tight());
    EXPECT_LT(rel(M->trace(L), q.value / (2 * kPi * kPi)), 1e-11);
    EXPECT_LT(rel(M->trace_radial(L), M->trace(L)), 1e-11);
  }
}

TEST(Model, GaussianMomentumIntegral) {
  // int d^3k/(2 pi)^3 e^{-s k^2} = (4 pi s)^{-3/2}
  for (double s : {0.01, 0.7, 3.0}) {
    const auto q = integrate_adaptive([&](double k) { return k * k * std::exp(-s * k * k); }, 0.0, 40.0 / std::sqrt(s),
                                      tight());
    EXPECT_LT(rel(q.value / (2 * kPi * kPi), std::pow(4 * kPi * s, -1.5)), 1e-11);
  }
}

TEST(Model, TadpoleIsTheIntegratedRate) {
  for (auto bc : {BoundaryCondition::robin(0.8), BoundaryCondition::dirichlet(), BoundaryCondition::neumann()}) {
    const auto M = model(bc);
    for (double z : {0.0, 0.3, 2.0})
      for (double L : {0.5, 3.0, 50.0}) {
        std::vector<double> br = {0.02};
        for (double x = 0.04; x < L; x *= 1.5) br.push_back(x);
        br.push_back(L);
        const double q = integrate_panels([&](double x) { return M->tadpole_rate(x, z); }, br, tight()).value;
        EXPECT_NEAR(M->A(L, z), q, 1e-9 * std::abs(q) + 1e-14) << z << " " << L;
      }
  }
}

TEST(Model, TwoPointIncrementIsTheDeltaCollapse) {
  const auto M = model();
  const auto L04 = tree_level_init(0.7);
  const auto one = TestFunctionSpec::constant(2);
  const auto phi = TestFunctionSpec::plain(2, {0.4}, {0.8}, RobinConstant(0.8));
  for (double L : {0.5, 2.0, 20.0}) {
    const NPointKernel inc = rhs_linear(L04, *M, L);
    ASSERT_EQ(inc.n, 2);
    EXPECT_EQ(inc.l, 1);
    EXPECT_TRUE(inc.has_channel(MomentumSlot::DP2));
    for (double z1 : {0.0, 0.05, 1.3}) {
      const std::vector<double> zs = {z1};
      const double w = dirac_weight(z1);
      // 1/2 g int_k Cdot(k; z1, z1) = 1/2 g trace p_R(1/L^2; z1, z1)
      const double expect = w * 0.5 * 0.7 * M->trace(L) * eval_pR(1.0 / (L * L), z1, z1, RobinConstant(0.8));
      EXPECT_LT(rel(fold(inc, one, 0, 0, zs)[0], expect), 1e-8);
      EXPECT_LT(rel(fold(inc, phi, 0, 0, zs)[0], expect * eval_pR(0.4, z1, 0.8, RobinConstant(0.8))), 1e-8);
      EXPECT_LT(rel(w * M->tadpole_rate(L, z1), expect), 1e-12);
    }
  }
}

TEST(Model, BubbleRateAgainstNestedQuadrature) {
  const auto M = model();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  const double L = 1.7, lo = 1.0 / (50.0 * 50.0), L2i = 1.0 / (L * L);
  const RobinConstant rc(0.8);
  for (int k = 0; k < 20; ++k) {
    const double za = k == 0 ? 0.0 : u(rng), zc = u(rng);
    std::vector<double> br;
    for (double x = lo; x < L2i; x *= 2.0) br.push_back(x);
    br.push_back(L2i);
    auto inner = [&](double lp) {
      return std::exp(-lp) * std::pow(4 * kPi * (lp + L2i), -1.5) * eval_pR(lp, za, zc, rc);
    };
    const double I = integrate_panels(inner, br, tight()).value;
    // d/dL of -g^2/2 int_k C(k)^2 with C(k) = int dlambda e^{-lambda (k^2 + m^2)} p_R(lambda)
    const double expect = 0.49 * 2.0 / (L * L * L) * std::exp(-L2i) * eval_pR(L2i, za, zc, rc) * I;
    EXPECT_LT(rel(M->beta(L, za, zc), expect), 1e-6) << za << " " << zc;
  }
}

TEST(Model, BubbleIsTheIntegralOfItsRate) {
  const auto M = model();
  const double L = 2.0, h = 1e-4;
  for (auto [x, y] : {std::pair{0.0, 0.4}, std::pair{0.7, 0.7}, std::pair{1.5, 0.2}}) {
    const double fd = (M->bubble_with(M->bubble_rule(L + h), x, y) - M->bubble_with(M->bubble_rule(L - h), x, y)) / (2 * h);
    EXPECT_LT(rel(M->beta(L, x, y), fd), 1e-6);
  }
}

TEST(Model, ProjectionsAreIntegralsOverTheSecondCluster) {
  const auto M = model();
  const double L = 1.2;
  const auto br = M->bubble_rule(L);
  for (double x : {0.0, 0.4}) {
    const std::vector<double> pts = {0.0, x, x + 0.5, x + 2.0, x + 6.0, x + 30.0};
    const double bc = integrate_panels([&](double y) { return M->beta(L, x, y); }, pts, tight()).value;
    EXPECT_LT(rel(M->beta_c(L, x), bc), 1e-8);
    const double bb = integrate_panels([&](double y) { return M->bubble_with(br, x, y); }, pts, tight()).value;
    EXPECT_LT(rel(M->bubble_c(L, x), bb), 1e-8);
    const double ms = integrate_panels([&](double y) { return M->pR(0.3, x, y); }, pts, tight()).value;
    EXPECT_LT(rel(M->mass(0.3, x), ms), 1e-10);
  }
}

TEST(Flow, FourPointRateIsTheDerivativeOfTheClosedForm) {
  const auto M = model();
  const auto spec = four_point_spec();
  const auto legs = LegFactors::from_spec(spec);
  for (double L : {0.8, 4.0}) {
    const double h = 1e-4 * L;
    const auto rate = four_point_rate(make_state(M, L), L);
    for (double z1 : {0.0, 0.6}) {
      const double up = fold_at(one_loop_four_point(*M, L + h), legs, z1);
      const double dn = fold_at(one_loop_four_point(*M, L - h), legs, z1);
      const double fd = (up - dn) / (2 * h);
      EXPECT_LT(rel(fold_at(rate, legs, z1), fd), 1e-6) << L << " " << z1;
    }
  }
}

TEST(Flow, ReducibleRateMatchesDerivative) {
  const auto M = model();
  const double L = 1.5, h = 1e-4;
  for (auto [zt, x] : {std::pair{0.0, 0.3}, std::pair{0.8, 1.1}}) {
    const double fd = (M->reducible(L + h, zt, x) - M->reducible(L - h, zt, x)) / (2 * h);
    EXPECT_LT(rel(M->reducible_rate(L, zt, x), fd), 1e-6);
  }
}

TEST(Combinatorics, RsymSplits) {
  auto binom = [](int n, int k) {
    int c = 0;
    for (int mask = 0; mask < (1 << n); ++mask) c += __builtin_popcount(mask) == k;
    return c;
  };
  EXPECT_EQ(static_cast<int>(rsym_splits(4, 2).size()), binom(4, 2));
  EXPECT_EQ(static_cast<int>(rsym_splits(6, 3).size()), binom(6, 3));
  EXPECT_EQ(static_cast<int>(rsym_splits(4, 1).size()), 4);
  EXPECT_THROW(rsym_splits(3, 4), DomainError);
  const auto six = tree_six_point(tree_level_init(0.7));
  ASSERT_EQ(six.channels.size(), 10u);
  for (const auto& ch : six.channels) {
    EXPECT_DOUBLE_EQ(ch.coeff, -0.49);
    EXPECT_EQ(ch.A.size() + ch.B.size(), 6u);
  }
}

TEST(Flow, SixPointLinearTermChannels) {
  const auto M = model();
  const auto inc = rhs_linear(tree_six_point(tree_level_init(0.7)), *M, 2.0);
  int bubbles = 0, tadpoles = 0;
  for (const auto& t : inc.terms) {
    if (t.label.starts_with("bubble")) ++bubbles;
    if (t.label.starts_with("tadpole-tree")) ++tadpoles;
  }
  EXPECT_EQ(bubbles, 3);
  EXPECT_EQ(tadpoles, 4);
}

TEST(Flow, SchedulingErrors) {
  const auto M = model();
  const auto L04 = tree_level_init(0.7);
  const auto L12 = one_loop_two_point(*M, 1.0);
  EXPECT_THROW(rhs_quadratic(L04, L12, *M, 1.0, 2, 4), SchedulingError);
  EXPECT_THROW(rhs_quadratic(L04, L12, *M, 1.0, 1, 6), SchedulingError);
  EXPECT_TRUE(rhs_quadratic(L04, L12, *M, 1.0, 0, 4).terms.empty());
  EXPECT_TRUE(rhs_quadratic(L04, L12, *M, 1.0, 1, 2).terms.empty());
  NPointKernel split;
  split.n = 4;
  split.add({{{1, 3}, {2, 4}}, [](std::span<const double>) { return 1.0; }, MomentumSlot::Zero, 1.0, 1.0, 1.0, "split"});
  EXPECT_THROW(rhs_linear(split, *M, 1.0), SchedulingError);
  EXPECT_THROW(rhs_linear(L12, *M, 1.0), SchedulingError);
  EXPECT_THROW(rhs_linear(L04, *M, 0.0), DomainError);
  EXPECT_THROW(make_state(M, 60.0), DomainError);
}

TEST(Flow, QuadraticTermIsTheTadpoleJoin) {
  const auto M = model();
  const double L = 1.3;
  const auto q = rhs_quadratic(tree_level_init(0.7), one_loop_two_point(*M, L), *M, L, 1, 4);
  ASSERT_EQ(q.terms.size(), 4u);
  const std::vector<double> x = {0.2, 0.9};
  for (const auto& t : q.terms) {
    const std::size_t it = t.clusters[0].size() == 1 ? 0 : 1;
    const double expect = -0.7 * M->A(L, x[it]) * M->prop0_dot(L, x[it], x[1 - it]);
    EXPECT_LT(rel(t.smooth(x), expect), 1e-12);
  }
}

TEST(Counterterms, ChannelErrorWithoutPSquaredChannel) {
  auto st = make_state(model(), 1.0);
  const std::vector<double> z = {0.0, 0.5};
  EXPECT_NO_THROW(extract_counterterms(st, 1, z));
  st.L12.channels.erase(MomentumSlot::DP2);
  EXPECT_THROW(extract_counterterms(st, 1, z), ChannelError);
  EXPECT_THROW(extract_counterterms(st, 2, z), SchedulingError);
}

TEST(Counterterms, FoldsMatchClosedForms) {
  const auto M = model();
  const double L = 0.9;
  const auto st = make_state(M, L);
  const std::vector<double> z = {0.0, 0.4, 1.5};
  const auto cs = extract_counterterms(st, 1, z);
  const auto tb = counterterm_table(*M, L, 1, z);
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_LT(rel(cs.a[i], tb.a[i]), 1e-10);
    EXPECT_LT(rel(cs.c[i], tb.c[i]), 1e-6);
    EXPECT_EQ(cs.s[i], 0.0);
    EXPECT_EQ(cs.d[i], 0.0);
    EXPECT_EQ(cs.b[i], 0.0);
  }
  const auto t0 = counterterm_table(*M, L, 0, z);
  EXPECT_DOUBLE_EQ(t0.c[0], 0.7 / 8.0);
  EXPECT_DOUBLE_EQ(t0.c[1], 0.7);
}

TEST(Counterterms, BoundaryValuesAtLambda0) {
  const auto M = model();
  const auto st = make_state(M, 50.0);
  ASSERT_EQ(st.L14.terms.size(), 1u);
  EXPECT_EQ(st.L14.terms[0].label, "kappa");
  for (double z : {0.0, 0.7}) {
    const double w = dirac_weight(z);
    EXPECT_LT(rel(M->c_closed(50.0, z), w * w * w * M->kappa(z)), 1e-12);
    EXPECT_EQ(M->a_closed(50.0, z), w * M->a_bare(z));
  }
}

TEST(Counterterms, BulkReduction) {
  const auto M = model();
  for (double L : {0.5, 2.0}) {
    const double bulk = M->a_closed(L, 30.0);
    const double surface0 = std::abs(M->a_closed(L, 0.0) - bulk);
    ASSERT_GT(surface0, 0.0);
    EXPECT_LT(std::abs(M->a_closed(L, 10.0) - bulk), 1e-10 * surface0);
  }
}

TEST(Integrator, Rk4OnAKnownRate) {
  // int_1^4 L^{-2} dL = 3/4 with the rate sampled on a cached lattice
  const auto r = integrate_rk4([](double L) { return std::vector<double>{1.0 / (L * L)}; }, 1, 1.0, 4.0, 8.0);
  EXPECT_NEAR(r.value[0], 0.75, 1e-8);
  EXPECT_LT(r.halving_error[0], 1e-7);
  const int n = static_cast<int>(std::ceil(8.0 * std::log(4.0)));
  EXPECT_EQ(r.evaluations, 4 * n + 1);
  const auto down = integrate_rk4([](double L) { return std::vector<double>{1.0 / (L * L)}; }, 1, 4.0, 1.0, 8.0);
  EXPECT_NEAR(down.value[0], -0.75, 1e-8);
  EXPECT_THROW(integrate_rk4([](double) { return std::vector<double>{1.0, 2.0}; }, 1, 1.0, 2.0, 4.0), ShapeError);
}

TEST(Integrator, Schedule) {
  EXPECT_EQ(FlowSchedule::direction(2, 0, 0), FlowDirection::Up);
  EXPECT_EQ(FlowSchedule::direction(2, 1, 1), FlowDirection::Up);
  EXPECT_EQ(FlowSchedule::direction(2, 1, 2), FlowDirection::Down);
  EXPECT_EQ(FlowSchedule::direction(2, 0, 3), FlowDirection::Down);
  EXPECT_EQ(FlowSchedule::direction(4, 0, 0), FlowDirection::Up);
  EXPECT_EQ(FlowSchedule::direction(4, 0, 1), FlowDirection::Down);
  EXPECT_EQ(FlowSchedule::direction(6, 0, 0), FlowDirection::Down);
  const auto s = FlowSchedule::make(params());
  const auto k = s.knots();
  EXPECT_DOUBLE_EQ(k.front(), 0.05);
  EXPECT_NEAR(k.back(), 50.0, 1e-12);
  EXPECT_THROW((FlowSchedule{1.0, 0.5, 4.0}.validate()), SchedulingError);
}

TEST(Flow, TwoWayIntegrationMeetsBphzAndReconstruction) {
  const auto M = model();
  const double L = 1.0;
  const auto st = make_state(M, L);
  const std::vector<double> z = {0.0, 0.5};
  const auto pts = integrate_flow(st, L, z, four_point_spec());
  for (const auto& p : pts) {
    EXPECT_LT(std::abs(p.bphz_a), 1e-8);
    EXPECT_LT(std::abs(p.bphz_c), 1e-8);
    EXPECT_LT(rel(p.a, M->a_closed(L, p.z1)), 1e-8);
    EXPECT_LT(rel(p.c, M->c_closed(L, p.z1)), 1e-8);
    EXPECT_LT(rel(p.kappa, M->kappa(p.z1)), 1e-8);
    EXPECT_LT(p.a_err, 1e-6 * std::abs(p.a));
    ASSERT_TRUE(p.remainder && p.full_fold);
    const double recon = p.c * testfn_at_root(four_point_spec(), p.z1) + *p.remainder;
    EXPECT_LT(std::abs(recon - *p.full_fold), 1e-8 * std::max(1.0, std::abs(*p.full_fold)));
  }
}

TEST(Flow, TaylorRemaindersAgree) {
  const auto st = make_state(model(), 1.0);
  const auto spec2 = TestFunctionSpec::plain(2, {0.4}, {0.8}, RobinConstant(0.8));
  for (double z1 : {0.0, 0.6}) {
    Remainders r;
    ASSERT_NO_THROW(r = taylor_remainders(st, 1, z1, spec2, four_point_spec()));
    EXPECT_NEAR(r.l4, r.l4_diff, 1e-8 * std::max(1.0, std::abs(r.l4_diff)));
    EXPECT_NEAR(r.l2, r.l2_diff, 1e-8);
    EXPECT_EQ(r.l2_p2, 0.0);
  }
}

TEST(Bounds, RatioFiniteAndTreeLevelConstant) {
  const auto spec = four_point_spec();
  for (double L0 : {20.0, 40.0}) {
    const auto st = make_state(model(BoundaryCondition::robin(0.8), L0), 1.0);
    const auto b = theorem1_ratio(st, 1, spec, 0.3, 0.1);
    EXPECT_TRUE(std::isfinite(b.ratio));
    EXPECT_GT(b.ratio, 0.0);
  }
  // at tree level the folded kernel is g times the product of kernels at z1
  const auto st = make_state(model(), 1.0);
  const auto one = TestFunctionSpec::constant(4);
  const auto b = theorem1_ratio(st, 0, one, 0.3, 0.1);
  EXPECT_NEAR(b.folded, 0.7, 1e-14);
  EXPECT_NEAR(b.ratio, 0.7, 1e-14);
}

TEST(Decay, FitRecoversSlope) {
  const std::vector<double> L0 = {10, 20, 40, 80, 160};
  std::vector<double> v;
  for (double x : L0) v.push_back(2.0 - std::log(x + 1.0) / x);
  const auto f = fit_decay(L0, v, 1.0);
  EXPECT_TRUE(f.measurable);
  EXPECT_NEAR(f.slope, -1.0, 0.15);
  const std::vector<double> flat(5, 3.0);
  EXPECT_FALSE(fit_decay(L0, flat, 1.0).measurable);
}
