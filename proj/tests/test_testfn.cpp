#include <gtest/gtest.h>

#include <vector>

#include "hsrg/testfn.hpp"

using namespace hsrg;

namespace {
TestFunctionSpec sample_spec() {
  return TestFunctionSpec::plain(4, {0.3, 0.7}, {0.5, 1.2}, RobinConstant(0.6));
}
}  // namespace

TEST(TestFunction, PlainIsAProductOfKernels) {
  const auto t = sample_spec();
  const std::vector<double> z = {0.2, 0.9, 3.0};
  const double expect = eval_pR(0.3, 0.2, 0.5, RobinConstant(0.6)) * eval_pR(0.7, 0.9, 1.2, RobinConstant(0.6));
  EXPECT_NEAR(eval_testfn(t, z), expect, 1e-15);
}

TEST(TestFunction, ConstantIsOne) {
  const auto t = TestFunctionSpec::constant(6);
  const std::vector<double> z(5, 0.4);
  EXPECT_EQ(eval_testfn(t, z), 1.0);
  EXPECT_EQ(testfn_at_root(t, 0.4), 1.0);
}

TEST(TestFunction, DifferencesTelescope) {
  const auto t = sample_spec();
  const std::vector<double> z = {0.2, 0.9, 3.0};
  for (double z1 : {0.0, 0.4, 2.0}) {
    double sum = 0.0;
    for (int j = 2; j <= t.s; ++j) sum += eval_testfn(t.diff(j), z, z1);
    EXPECT_NEAR(sum, eval_testfn(t, z) - testfn_at_root(t, z1), 1e-15);
  }
}

TEST(TestFunction, DifferenceVanishesAtTheRoot) {
  const auto t = sample_spec();
  const std::vector<double> z = {0.4, 0.4, 0.4};
  for (int j = 2; j <= 3; ++j) EXPECT_EQ(eval_testfn(t.diff(j), z, 0.4), 0.0);
}

TEST(TestFunction, Validation) {
  EXPECT_THROW(TestFunctionSpec::constant(1).validate(), ShapeError);
  EXPECT_THROW(TestFunctionSpec::plain(2, {0.1, 0.2}, {0.0, 0.0}, RobinConstant(0.0)), ShapeError);
  EXPECT_THROW(TestFunctionSpec::plain(4, {0.1}, {0.0, 0.1}, RobinConstant(0.0)), ShapeError);
  EXPECT_THROW(TestFunctionSpec::plain(4, {-0.1}, {0.0}, RobinConstant(0.0)), DomainError);
  EXPECT_THROW(TestFunctionSpec::plain(4, {0.1}, {-1.0}, RobinConstant(0.0)), DomainError);
  EXPECT_THROW(sample_spec().diff(1), DomainError);
  EXPECT_THROW(sample_spec().diff(4), DomainError);
  EXPECT_THROW(TestFunctionSpec::plain(4, {1e-9}, {0.0}, RobinConstant(0.0)).validate(1.0), DomainError);
  const std::vector<double> short_z = {0.1};
  EXPECT_THROW(eval_testfn(sample_spec(), short_z), ShapeError);
  const std::vector<double> neg = {0.1, -0.2, 0.0};
  EXPECT_THROW(eval_testfn(sample_spec(), neg), DomainError);
}

TEST(LegFactors, MomentWeightAndFoci) {
  const auto t = sample_spec();
  const auto lf = LegFactors::from_spec(t, 2, 3);
  EXPECT_NEAR(lf.factor(3, 0.9, 0.1), t.leg(3, 0.9, 0.1) * 0.64, 1e-15);
  EXPECT_EQ(lf.factor(2, 0.9, 0.1), t.leg(2, 0.9, 0.1));
  EXPECT_EQ(lf.factor(4, 0.9, 0.1), 1.0);
  EXPECT_EQ(lf.foci.size(), 4u);
  EXPECT_GT(lf.reach, 1.2);
  EXPECT_THROW(LegFactors::from_spec(t, 4, 2), DomainError);
  EXPECT_THROW(LegFactors::from_spec(t, 1, 1), DomainError);
}
