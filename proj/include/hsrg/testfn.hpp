// Test-function classes: products of Robin heat kernels padded with the
// half-line indicator, and the difference variants used for remainders.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "hsrg/heatkernel.hpp"

namespace hsrg {

enum class TestVariant { Plain, Diff };

struct TestFunctionSpec {
  int n = 2;
  int s = 1;
  std::vector<double> taus;     // tau_2 .. tau_s
  std::vector<double> anchors;  // y_2 .. y_s
  RobinConstant c{};
  TestVariant variant = TestVariant::Plain;
  int j = 0;  // differenced leg for TestVariant::Diff

  static TestFunctionSpec plain(int n, std::vector<double> taus, std::vector<double> anchors, RobinConstant c) {
    TestFunctionSpec t;
    t.n = n;
    t.s = static_cast<int>(taus.size()) + 1;
    t.taus = std::move(taus);
    t.anchors = std::move(anchors);
    t.c = c;
    t.validate();
    return t;
  }
  static TestFunctionSpec constant(int n) {
    TestFunctionSpec t;
    t.n = n;
    t.s = 1;
    return t;
  }
  [[nodiscard]] TestFunctionSpec diff(int jj) const {
    TestFunctionSpec t = *this;
    t.variant = TestVariant::Diff;
    t.j = jj;
    t.validate();
    return t;
  }

  void validate(double m = 0.0) const {
    if (n < 2) throw ShapeError("test function needs n >= 2");
    if (s < 1 || s > n) throw ShapeError("test function needs 1 <= s <= n");
    if (static_cast<int>(taus.size()) != s - 1 || static_cast<int>(anchors.size()) != s - 1)
      throw ShapeError("test function needs s-1 widths and anchors");
    for (double t : taus)
      if (!(t > 0.0)) throw DomainError("test-function widths must be > 0");
    for (double y : anchors)
      if (!(y >= 0.0)) throw DomainError("test-function anchors must be >= 0");
    if (m > 0.0 && s > 1 && tau_min() < 1e-6 / (m * m)) throw DomainError("test-function width below 1e-6 / m^2");
    if (variant == TestVariant::Diff && (j < 2 || j > s)) throw DomainError("difference leg must lie in [2, s]");
  }
  [[nodiscard]] double tau_min() const {
    double t = INFINITY;
    for (double v : taus) t = std::min(t, v);
    return t;
  }

  /// Factor carried by leg i (2..n) at coordinate z, given the root z1.
  [[nodiscard]] double leg(int i, double z, double z1) const {
    if (i > s) return 1.0;
    const double tau = taus[i - 2], y = anchors[i - 2];
    if (variant == TestVariant::Plain || i > j) return pR_fast(tau, z, y, c);
    if (i < j) return pR_fast(tau, z1, y, c);
    return pR_fast(tau, z, y, c) - pR_fast(tau, z1, y, c);
  }
};

/// Full test function at z_2..z_n (z1 is needed only by the difference variant).
inline double eval_testfn(const TestFunctionSpec& spec, std::span<const double> z, double z1 = 0.0) {
  spec.validate();
  if (static_cast<int>(z.size()) != spec.n - 1) throw ShapeError("expected n-1 coordinates");
  for (double v : z)
    if (!(v >= 0.0)) throw DomainError("coordinates must be >= 0");
  double prod = 1.0;
  for (int i = 2; i <= spec.n; ++i) prod *= spec.leg(i, z[i - 2], z1);
  return prod;
}

/// Plain test function with every argument set to z1.
inline double testfn_at_root(const TestFunctionSpec& spec, double z1) {
  double prod = 1.0;
  for (int i = 2; i <= spec.s; ++i) prod *= pR_fast(spec.taus[i - 2], z1, spec.anchors[i - 2], spec.c);
  return prod;
}

/// Per-leg factors handed to the folding operators. `focus` lists points
/// and resolution lengths that the quadrature must refine around.
struct LegFactors {
  int n = 2;
  std::function<double(int leg, double z, double z1)> factor;
  std::vector<std::pair<double, double>> foci;  // (position, resolution)
  double reach = 0.0;                            // beyond max(anchor) + reach the factors are constant

  static LegFactors from_spec(const TestFunctionSpec& spec, int r = 0, int i_moment = 0) {
    spec.validate();
    if (r < 0 || r > 3) throw DomainError("moment power must lie in 0..3");
    if (r > 0 && (i_moment < 2 || i_moment > spec.n)) throw DomainError("moment leg must lie in [2, n]");
    LegFactors lf;
    lf.n = spec.n;
    lf.factor = [spec, r, i_moment](int leg, double z, double z1) {
      double v = spec.leg(leg, z, z1);
      if (r > 0 && leg == i_moment) v *= std::pow(z1 - z, r);
      return v;
    };
    for (int i = 2; i <= spec.s; ++i) {
      const double w = std::sqrt(spec.taus[i - 2]);
      lf.foci.emplace_back(spec.anchors[i - 2], w);
      lf.foci.emplace_back(0.0, w);
      lf.reach = std::max(lf.reach, spec.anchors[i - 2] + 9.0 * w);
    }
    return lf;
  }
};

}  // namespace hsrg
