// One-loop flow of the CAS kernels on the half-line: tree-level data, the
// linear and quadratic right-hand sides, two-way integration in log(Lambda),
// counterterms, Taylor remainders and the bound harnesses.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hsrg/grid.hpp"
#include "hsrg/heatkernel.hpp"
#include "hsrg/kernel.hpp"
#include "hsrg/numerics.hpp"
#include "hsrg/propagator.hpp"
#include "hsrg/testfn.hpp"
#include "hsrg/trees.hpp"

namespace hsrg {

struct FlowParams {
  double m = 1.0;
  double g = 1.0;  // tree-level coupling lambda
  double Lambda0 = 100.0;
  BoundaryCondition bc{};
  double lambda_min_factor = 1.0 / 20.0;  // flows start/stop at m * factor instead of 0
  double u_max = 60.0;                    // lambda integrals are cut at u_max / m^2
  double log_panel = 0.5;                 // composite rules in log(lambda): panel width
  int gl_nodes = 10;

  void validate() const {
    if (!(m > 0.0)) throw DomainError("mass must be > 0");
    if (!std::isfinite(g)) throw DomainError("coupling must be finite");
    if (!(Lambda0 > m * lambda_min_factor) || !std::isfinite(Lambda0)) throw DomainError("Lambda0 must be finite and above the flow floor");
    if (!(lambda_min_factor > 0.0 && lambda_min_factor < 1.0)) throw DomainError("flow floor factor must lie in (0, 1)");
    if (!(u_max >= 30.0)) throw DomainError("u_max must be >= 30");
    if (!(log_panel > 0.0) || gl_nodes < 2) throw DomainError("invalid log-lambda rule");
  }
  [[nodiscard]] RobinConstant robin() const { return bc.robin_constant(); }
  [[nodiscard]] double lambda_min() const { return m * lambda_min_factor; }
};

/// Nodes and weights for int_lo^hi f(lambda) dlambda, composite Gauss-Legendre in log(lambda).
struct LogLambdaRule {
  std::vector<double> lambda;
  std::vector<double> w;

  static LogLambdaRule make(double lo, double hi, double panel, int nodes) {
    LogLambdaRule r;
    if (!(hi > lo) || !(lo > 0.0)) return r;
    const auto br = detail::log_breaks(lo, hi, panel);
    const CompositeRule cr = composite_rule(br, nodes);
    r.lambda.resize(cr.x.size());
    r.w.resize(cr.x.size());
    for (std::size_t i = 0; i < cr.x.size(); ++i) {
      r.lambda[i] = std::exp(cr.x[i]);
      r.w[i] = cr.w[i] * r.lambda[i];
    }
    return r;
  }
  [[nodiscard]] std::size_t size() const { return lambda.size(); }
};

/// Pairwise table for the bubble: W_ij = w_i w_j e^{-(l_i+l_j) m^2} (4 pi (l_i+l_j))^{-3/2}.
struct BubbleRule {
  LogLambdaRule rule;
  std::vector<double> W;  // row-major

  [[nodiscard]] double contract(std::span<const double> p) const {
    const std::size_t n = rule.size();
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] == 0.0) continue;
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += W[i * n + j] * p[j];
      s += p[i] * row;
    }
    return s.value();
  }
};

/// Closed forms of the one-loop kernels (coupling g, hbar = 1).
class OneLoopModel {
 public:
  explicit OneLoopModel(FlowParams p) : p_(p), rc_(p.robin()) { p_.validate(); }

  [[nodiscard]] const FlowParams& params() const { return p_; }
  [[nodiscard]] double lo() const { return 1.0 / (p_.Lambda0 * p_.Lambda0); }
  [[nodiscard]] double hi(double Lambda) const {
    return Lambda > 0.0 ? 1.0 / (Lambda * Lambda) : p_.u_max / (p_.m * p_.m);
  }
  [[nodiscard]] LogLambdaRule rule(double a, double b) const {
    return LogLambdaRule::make(a, b, p_.log_panel, p_.gl_nodes);
  }
  [[nodiscard]] double pR(double lambda, double x, double y) const { return pR_fast(lambda, x, y, rc_); }

  /// int_k of the scale derivative of the propagator's momentum factor, closed form.
  [[nodiscard]] double trace(double Lambda) const {
    return -std::exp(-p_.m * p_.m / (Lambda * Lambda)) / (4.0 * std::pow(kPi, 1.5));
  }
  /// The same momentum integral by 48-node radial Gauss-Legendre on [0, 8 Lambda].
  [[nodiscard]] double trace_radial(double Lambda) const {
    const double kmax = 8.0 * Lambda;
    return gl_integrate([&](double k) { return k * k * cdot_prefactor(Lambda, p_.m, k); }, 0.0, kmax, 48) /
           (2.0 * kPi * kPi);
  }

  /// Tadpole rate: d/dLambda of the local two-point coefficient.
  [[nodiscard]] double tadpole_rate(double Lambda, double z) const {
    return 0.5 * p_.g * trace(Lambda) * pR(1.0 / (Lambda * Lambda), z, z);
  }
  /// int_0^Lambda tadpole_rate, via u = 1/Lambda'^2.
  [[nodiscard]] double A(double Lambda, double z) const {
    if (!(Lambda > 0.0)) return 0.0;
    const double a = 1.0 / (Lambda * Lambda), b = p_.u_max / (p_.m * p_.m);
    if (a >= b) return 0.0;
    const auto r = rule(a, b);
    return A_with(r, z);
  }
  [[nodiscard]] double A_with(const LogLambdaRule& r, double z) const {
    CompensatedSum s;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double u = r.lambda[i];
      s += r.w[i] * std::exp(-p_.m * p_.m * u) * pR(u, z, z) * 0.5 / (u * std::sqrt(u));
    }
    return -0.5 * p_.g / (4.0 * std::pow(kPi, 1.5)) * s.value();
  }
  [[nodiscard]] LogLambdaRule A_rule(double Lambda) const {
    if (!(Lambda > 0.0)) return {};
    return rule(1.0 / (Lambda * Lambda), p_.u_max / (p_.m * p_.m));
  }

  /// C^{Lambda,Lambda0}(0; x, y).
  [[nodiscard]] double prop0(double Lambda, double x, double y) const { return prop0_with(rule(lo(), hi(Lambda)), x, y); }
  [[nodiscard]] double prop0_with(const LogLambdaRule& r, double x, double y) const {
    CompensatedSum s;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * std::exp(-p_.m * p_.m * r.lambda[i]) * pR(r.lambda[i], x, y);
    return s.value();
  }
  [[nodiscard]] double prop0_dot(double Lambda, double x, double y) const {
    return cdot_prefactor(Lambda, p_.m, 0.0) * pR(1.0 / (Lambda * Lambda), x, y);
  }

  /// int_0^inf dy p_R(lambda; x, y).
  [[nodiscard]] double mass(double lambda, double x) const {
    const double s = std::sqrt(2.0 * lambda);
    double v = 0.5 - 0.5 * std::erfc(x / s);
    if (!rc_.is_dirichlet()) v += 0.5 * erfcx((x + rc_.value() * lambda) / s) * std::exp(-x * x / (2.0 * lambda));
    return v;
  }

  /// Bubble rate per channel at zero external momenta.
  [[nodiscard]] double beta(double Lambda, double x, double y) const {
    return beta_with(rule(lo(), hi(Lambda)), Lambda, x, y);
  }
  [[nodiscard]] double beta_with(const LogLambdaRule& r, double Lambda, double x, double y) const {
    const double L2i = 1.0 / (Lambda * Lambda);
    CompensatedSum s;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double l = r.lambda[i];
      s += r.w[i] * std::exp(-l * p_.m * p_.m) * std::pow(4.0 * kPi * (l + L2i), -1.5) * pR(l, x, y);
    }
    return p_.g * p_.g * 2.0 * L2i / Lambda * std::exp(-p_.m * p_.m * L2i) * pR(L2i, x, y) * s.value();
  }
  /// int dy beta(x, y), reduced by the half-line semigroup.
  [[nodiscard]] double beta_c(double Lambda, double x) const {
    const auto r = rule(lo(), hi(Lambda));
    const double L2i = 1.0 / (Lambda * Lambda);
    CompensatedSum s;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double l = r.lambda[i];
      s += r.w[i] * std::exp(-l * p_.m * p_.m) * std::pow(4.0 * kPi * (l + L2i), -1.5) * 0.5 * pR(l + L2i, x, x);
    }
    return p_.g * p_.g * 2.0 * L2i / Lambda * std::exp(-p_.m * p_.m * L2i) * s.value();
  }

  [[nodiscard]] BubbleRule bubble_rule(double Lambda) const {
    BubbleRule br;
    br.rule = rule(lo(), hi(Lambda));
    const std::size_t n = br.rule.size();
    br.W.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double s = br.rule.lambda[i] + br.rule.lambda[j];
        br.W[i * n + j] = br.rule.w[i] * br.rule.w[j] * std::exp(-s * p_.m * p_.m) * std::pow(4.0 * kPi * s, -1.5);
      }
    return br;
  }
  /// Bubble kernel per channel, -g^2/2 int_k C(k; x, y)^2.
  [[nodiscard]] double bubble_with(const BubbleRule& br, double x, double y) const {
    std::vector<double> pv(br.rule.size());
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] = pR(br.rule.lambda[i], x, y);
    return -0.5 * p_.g * p_.g * br.contract(pv);
  }
  /// int dy of the bubble, as a one-dimensional integral over sigma = lambda + lambda'.
  [[nodiscard]] double bubble_c(double Lambda, double x) const {
    const double a = lo(), b = hi(Lambda);
    if (!(b > a)) return 0.0;
    auto len = [&](double s) { return std::max(0.0, std::min(s - 2.0 * a, 2.0 * b - s)); };
    auto f = [&](double u) {
      const double s = std::exp(u);
      return s * std::exp(-s * p_.m * p_.m) * std::pow(4.0 * kPi * s, -1.5) * len(s) * pR(s, x, x);
    };
    QuadOptions qo;
    qo.abs_tol = 1e-300;
    qo.rel_tol = 1e-13;
    qo.throw_on_failure = false;
    std::vector<double> br;
    for (double u : detail::log_breaks(2.0 * a, a + b, 0.5)) br.push_back(u);
    for (double u : detail::log_breaks(a + b, 2.0 * b, 0.5)) br.push_back(u);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    return -0.25 * p_.g * p_.g * integrate_panels(f, br, qo).value;
  }

  /// Reducible channel: tadpole on the leg at zt, tree propagator to the cluster at x.
  [[nodiscard]] double reducible(double Lambda, double zt, double x) const {
    return -p_.g * A(Lambda, zt) * prop0(Lambda, zt, x);
  }
  [[nodiscard]] double reducible_rate(double Lambda, double zt, double x) const {
    return -p_.g * (tadpole_rate(Lambda, zt) * prop0(Lambda, zt, x) + A(Lambda, zt) * prop0_dot(Lambda, zt, x));
  }
  /// c-projection of the four reducible channels at root x.
  [[nodiscard]] double reducible_c(double Lambda, double x) const {
    if (!(Lambda > 0.0)) return 0.0;
    const auto r = rule(lo(), hi(Lambda));
    const auto ar = A_rule(Lambda);
    CompensatedSum m1;
    for (std::size_t i = 0; i < r.size(); ++i) m1 += r.w[i] * std::exp(-p_.m * p_.m * r.lambda[i]) * mass(r.lambda[i], x);
    const double single = -p_.g * A_with(ar, x) * m1.value();
    auto f = [&](double z) { return A_with(ar, z) * prop0_with(r, z, x); };
    const double wx = dirac_weight(x);
    const double triple = -p_.g * 3.0 * wx * wx * integrate_z(f, x, 1.0 / p_.Lambda0, 40.0 / p_.m);
    return single + triple;
  }

  /// Bare local four-point coefficient fixed by BPHZ.
  [[nodiscard]] double kappa(double x) const {
    const double w = dirac_weight(x);
    return -3.0 * bubble_c(0.0, x) / (w * w);
  }
  /// c^{Lambda,Lambda0}(x) in closed form.
  [[nodiscard]] double c_closed(double Lambda, double x) const {
    const double w = dirac_weight(x);
    return w * w * w * kappa(x) + 3.0 * w * bubble_c(Lambda, x) + reducible_c(Lambda, x);
  }
  [[nodiscard]] double a_closed(double Lambda, double x) const { return dirac_weight(x) * A(Lambda, x); }
  /// Bare mass counterterm a^{Lambda0}(x) under BPHZ.
  [[nodiscard]] double a_bare(double x) const { return A(p_.Lambda0, x); }

  /// int_0^zmax dz f(z), panels graded toward x and 0.
  template <class F>
  double integrate_z(F&& f, double x, double fine, double reach) const {
    const std::pair<double, double> foci[] = {{x, fine}, {0.0, fine}};
    const auto br = graded_breaks(0.0, x + reach, foci, 0.25 / p_.m);
    QuadOptions qo;
    qo.abs_tol = 1e-300;
    qo.rel_tol = 1e-12;
    qo.throw_on_failure = false;
    return integrate_panels(f, br, qo).value;
  }

 private:
  FlowParams p_;
  RobinConstant rc_;
};

// ---------------------------------------------------------------- combinatorics

/// Ordered pairs (image of the first n1 legs, image of the rest) obtained from
/// permutations of 1..n, without repetition.
inline std::vector<std::pair<std::vector<int>, std::vector<int>>> rsym_splits(int n, int n1) {
  if (n1 < 0 || n1 > n) throw DomainError("rsym split sizes out of range");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 1);
  std::set<std::pair<std::vector<int>, std::vector<int>>> seen;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
  do {
    std::vector<int> a(perm.begin(), perm.begin() + n1), b(perm.begin() + n1, perm.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (seen.insert({a, b}).second) out.emplace_back(a, b);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

inline Partition canonical_partition(Partition p) {
  for (auto& c : p) std::sort(c.begin(), c.end());
  p.erase(std::remove_if(p.begin(), p.end(), [](const auto& c) { return c.empty(); }), p.end());
  std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return p;
}

/// Tree-level six-point kernel: unordered splits A|B of the six legs joined by
/// C^{Lambda,Lambda0}(p_A; z_A, z_B), each with coefficient -g^2.
struct SixPointChannel {
  std::vector<int> A, B;
  double coeff = 0.0;
};
struct SixPointTree {
  std::vector<SixPointChannel> channels;
};

// ---------------------------------------------------------------- kernels

inline NPointKernel tree_level_init(double g) {
  NPointKernel k;
  k.l = 0;
  k.n = 4;
  k.add(KernelTerm{{{1, 2, 3, 4}}, [g](std::span<const double>) { return g; }, MomentumSlot::Zero, 1.0, 1.0, 0.0,
                   "lambda"});
  return k;
}

/// The two-point kernel of loop order 0 vanishes.
inline NPointKernel tree_level_two_point() {
  NPointKernel k;
  k.l = 0;
  k.n = 2;
  k.channels.insert(MomentumSlot::DP2);
  return k;
}

/// Integrates the quadratic term of the six-point equation from Lambda0 down:
/// -1/2 sum over ordered rsym splits of L04 Cdot L04 gives -g^2 C per unordered split.
inline SixPointTree tree_six_point(const NPointKernel& L04) {
  if (L04.n != 4 || L04.l != 0) throw SchedulingError("the six-point tree needs the tree-level four-point kernel");
  if (L04.terms.size() != 1 || L04.terms[0].clusters.size() != 1) throw SchedulingError("tree-level kernel must be a single delta cluster");
  const double g = L04.terms[0].smooth(std::vector<double>{0.0});
  std::map<std::pair<std::vector<int>, std::vector<int>>, double> acc;
  for (const auto& [a, b] : rsym_splits(6, 3)) {
    const auto key = a < b ? std::pair{a, b} : std::pair{b, a};
    acc[key] += -0.5 * g * g;
  }
  SixPointTree t;
  for (const auto& [k, c] : acc) t.channels.push_back({k.first, k.second, c});
  return t;
}

namespace detail {
inline KernelTerm make_term(Partition p, SmoothFn f, double kink, double smooth, double reach, std::string label) {
  return KernelTerm{canonical_partition(std::move(p)), std::move(f), MomentumSlot::Zero, kink, smooth, reach, std::move(label)};
}
inline std::vector<int> without(std::vector<int> v, int leg) {
  v.erase(std::remove(v.begin(), v.end(), leg), v.end());
  return v;
}
}  // namespace detail

/// First term of the hierarchy for kernels whose smooth parts carry no loop
/// momentum: both loop legs must share a delta cluster, which collapses against
/// p_R(1/Lambda^2; x, x) and the radial momentum integral.
inline NPointKernel rhs_linear(const NPointKernel& upper, const OneLoopModel& model, double Lambda) {
  if (!(Lambda > 0.0)) throw DomainError("flow rates need Lambda > 0");
  const int n = upper.n - 2;
  if (n < 2) throw SchedulingError("linear term needs a kernel with at least four legs");
  NPointKernel out;
  out.l = upper.l + 1;
  out.n = n;
  const double tr = model.trace_radial(Lambda);
  for (const auto& t : upper.terms) {
    if (t.slot != MomentumSlot::Zero) continue;
    int ca = -1, cb = -1;
    for (std::size_t c = 0; c < t.clusters.size(); ++c) {
      for (int leg : t.clusters[c]) {
        if (leg == n + 1) ca = static_cast<int>(c);
        if (leg == n + 2) cb = static_cast<int>(c);
      }
    }
    if (ca != cb) throw SchedulingError("loop legs in different clusters need momentum-resolved kernels");
    Partition p = t.clusters;
    p[ca] = detail::without(detail::without(p[ca], n + 1), n + 2);
    if (p[ca].empty()) throw SchedulingError("loop closing on a cluster without external legs");
    SmoothFn f = t.smooth;
    const std::size_t idx = static_cast<std::size_t>(ca);
    const double L2i = 1.0 / (Lambda * Lambda);
    const OneLoopModel* mdl = &model;
    out.add(detail::make_term(
        p,
        [f, idx, tr, L2i, mdl](std::span<const double> x) { return 0.5 * tr * mdl->pR(L2i, x[idx], x[idx]) * f(x); },
        t.kink_scale, t.smooth_scale, t.reach, "tadpole(" + t.label + ")"));
  }
  if (upper.has_channel(MomentumSlot::DP2) || n == 2) out.channels.insert(MomentumSlot::DP2);
  return out;
}

/// First term applied to the tree-level six-point kernel: bubbles where the loop
/// legs sit on opposite sides, reducible tadpoles where they sit together.
inline NPointKernel rhs_linear(const SixPointTree& six, const OneLoopModel& model, double Lambda) {
  if (!(Lambda > 0.0)) throw DomainError("flow rates need Lambda > 0");
  NPointKernel out;
  out.l = 1;
  out.n = 4;
  const double tr = model.trace_radial(Lambda);
  const double L2i = 1.0 / (Lambda * Lambda);
  const FlowParams& fp = model.params();
  auto rule = std::make_shared<LogLambdaRule>(model.rule(model.lo(), model.hi(Lambda)));
  const OneLoopModel* mdl = &model;
  const double g2 = fp.g * fp.g;
  for (const auto& ch : six.channels) {
    const bool a5 = std::count(ch.A.begin(), ch.A.end(), 5) > 0, a6 = std::count(ch.A.begin(), ch.A.end(), 6) > 0;
    if (a5 != a6) {
      // The loop momentum runs through the tree propagator: int_k C(k) Cdot(k) in closed form.
      const auto A = detail::without(detail::without(ch.A, 5), 6), B = detail::without(detail::without(ch.B, 5), 6);
      const double coeff = 0.5 * ch.coeff / (-g2);  // per unit of -g^2
      auto f = [rule, mdl, Lambda, coeff](std::span<const double> x) {
        return coeff * mdl->beta_with(*rule, Lambda, x[0], x[1]);
      };
      out.add(detail::make_term({A, B}, f, 1.0 / fp.Lambda0, std::min(1.0 / Lambda, 1.0 / fp.m), 14.0 * std::max(1.0 / Lambda, 1.0 / fp.Lambda0), "bubble"));
    } else {
      const auto& loop_side = a5 ? ch.A : ch.B;
      const auto& other = a5 ? ch.B : ch.A;
      const auto single = detail::without(detail::without(loop_side, 5), 6);
      if (single.size() != 1) throw ConsistencyError("six-point channel with an unexpected loop side");
      const int leg = single[0];
      const double coeff = 0.5 * ch.coeff * tr;
      // Coordinates are cluster representatives in canonical order; locate the tadpole leg.
      Partition p = canonical_partition({single, other});
      const std::size_t it = p[0].front() == leg ? 0 : 1, io = 1 - it;
      auto f = [rule, mdl, coeff, L2i, it, io](std::span<const double> x) {
        return coeff * mdl->pR(L2i, x[it], x[it]) * mdl->prop0_with(*rule, x[it], x[io]);
      };
      out.add(detail::make_term(p, f, 1.0 / fp.Lambda0, 1.0 / fp.m, 40.0 / fp.m, "tadpole-tree"));
    }
  }
  return out;
}

/// Second term of the hierarchy at one loop: L04 joined with L12 through Cdot(0).
/// Requires a local L12 = A(x) delta(z1 - z2); both orderings of the split are summed.
inline NPointKernel rhs_quadratic(const NPointKernel& L04, const NPointKernel& L12, const OneLoopModel& model,
                                  double Lambda, int l, int n) {
  if (!(Lambda > 0.0)) throw DomainError("flow rates need Lambda > 0");
  NPointKernel out;
  out.l = l;
  out.n = n;
  if (l == 0 || n == 2) {
    // Odd kernels vanish; at tree level only n = 4 exists and it is Lambda-independent.
    if (n == 2) out.channels.insert(MomentumSlot::DP2);
    return out;
  }
  if (l != 1 || n != 4) throw SchedulingError("quadratic term implemented for l <= 1 and n <= 4");
  if (L04.n != 4 || L12.n != 2) throw SchedulingError("quadratic term needs L04 and L12");
  for (const auto& t : L12.terms)
    if (t.clusters.size() != 1) throw SchedulingError("quadratic term expects a local two-point kernel");
  const double g = L04.terms.at(0).smooth(std::vector<double>{0.0});
  const OneLoopModel* mdl = &model;
  // ordered splits: (3 legs on L04, 1 leg on L12) and (1 leg on L12, 3 legs on L04)
  std::map<int, double> weight;  // leg on the two-point side -> accumulated factor
  for (const auto& [a, b] : rsym_splits(4, 3)) weight[b[0]] += -0.5;
  for (const auto& [a, b] : rsym_splits(4, 1)) weight[a[0]] += -0.5;
  for (const auto& [leg, wgt] : weight) {
    std::vector<int> rest;
    for (int i = 1; i <= 4; ++i)
      if (i != leg) rest.push_back(i);
    Partition p = canonical_partition({{leg}, rest});
    const std::size_t it = p[0].front() == leg ? 0 : 1, io = 1 - it;
    const double c = wgt * g;
    std::vector<SmoothFn> two;
    for (const auto& t : L12.terms) two.push_back(t.smooth);
    auto f = [two, mdl, Lambda, c, it, io](std::span<const double> x) {
      double a = 0.0;
      const double xs[1] = {x[it]};
      for (const auto& s : two) a += s(xs);
      return c * a * mdl->prop0_dot(Lambda, x[it], x[io]);
    };
    out.add(detail::make_term(p, f, 1.0 / Lambda, 1.0 / Lambda, 14.0 / Lambda, "tadpole-join"));
  }
  return out;
}

// ---------------------------------------------------------------- state

/// Kernels at one value of Lambda, assembled from the closed forms.
struct FlowState {
  std::shared_ptr<const OneLoopModel> model;
  double Lambda = 0.0;
  NPointKernel L02, L04, L12, L14;
  SixPointTree L06;
};

inline NPointKernel one_loop_two_point(const OneLoopModel& model, double Lambda) {
  NPointKernel k;
  k.l = 1;
  k.n = 2;
  const OneLoopModel* mdl = &model;
  k.add(KernelTerm{{{1, 2}}, [mdl, Lambda](std::span<const double> x) { return mdl->A(Lambda, x[0]); },
                   MomentumSlot::Zero, 1.0, 1.0, 0.0, "tadpole"});
  k.channels.insert(MomentumSlot::DP2);  // present and identically zero at one loop
  return k;
}

inline NPointKernel one_loop_four_point(const OneLoopModel& model, double Lambda) {
  NPointKernel k;
  k.l = 1;
  k.n = 4;
  const OneLoopModel* mdl = &model;
  const FlowParams& fp = model.params();
  k.add(KernelTerm{{{1, 2, 3, 4}}, [mdl](std::span<const double> x) { return mdl->kappa(x[0]); }, MomentumSlot::Zero,
                   1.0, 1.0, 0.0, "kappa"});
  if (Lambda < fp.Lambda0) {
    auto br = std::make_shared<BubbleRule>(model.bubble_rule(Lambda));
    const double reach = 30.0 / fp.m;
    for (int b = 2; b <= 4; ++b) {
      std::vector<int> cd;
      for (int i = 2; i <= 4; ++i)
        if (i != b) cd.push_back(i);
      k.add(detail::make_term({{1, b}, cd}, [mdl, br](std::span<const double> x) { return mdl->bubble_with(*br, x[0], x[1]); },
                              1.0 / fp.Lambda0, 1.0 / std::max(Lambda, fp.m), reach, "bubble"));
    }
    if (Lambda > 0.0) {
      auto r = std::make_shared<LogLambdaRule>(model.rule(model.lo(), model.hi(Lambda)));
      auto ar = std::make_shared<LogLambdaRule>(model.A_rule(Lambda));
      const double g = fp.g;
      for (int leg = 1; leg <= 4; ++leg) {
        std::vector<int> rest;
        for (int i = 1; i <= 4; ++i)
          if (i != leg) rest.push_back(i);
        Partition p = canonical_partition({{leg}, rest});
        const std::size_t it = p[0].front() == leg ? 0 : 1, io = 1 - it;
        k.add(detail::make_term(
            p,
            [mdl, r, ar, g, it, io](std::span<const double> x) {
              return -g * mdl->A_with(*ar, x[it]) * mdl->prop0_with(*r, x[it], x[io]);
            },
            1.0 / fp.Lambda0, 1.0 / std::max(Lambda, fp.m), 40.0 / fp.m, "reducible"));
      }
    }
  }
  return k;
}

inline FlowState make_state(std::shared_ptr<const OneLoopModel> model, double Lambda) {
  const FlowParams& fp = model->params();
  if (!(Lambda >= 0.0) || Lambda > fp.Lambda0) throw DomainError("state needs 0 <= Lambda <= Lambda0");
  FlowState s;
  s.model = model;
  s.Lambda = Lambda;
  s.L02 = tree_level_two_point();
  s.L04 = tree_level_init(fp.g);
  s.L06 = tree_six_point(s.L04);
  s.L12 = one_loop_two_point(*model, Lambda);
  s.L14 = one_loop_four_point(*model, Lambda);
  return s;
}

/// d/dLambda of L14 from the hierarchy: linear term on L06 plus quadratic term.
inline NPointKernel four_point_rate(const FlowState& s, double Lambda) {
  NPointKernel r = rhs_linear(s.L06, *s.model, Lambda);
  const NPointKernel L12 = one_loop_two_point(*s.model, Lambda);
  const NPointKernel q = rhs_quadratic(s.L04, L12, *s.model, Lambda, 1, 4);
  for (const auto& t : q.terms) r.add(t);
  return r;
}

// ---------------------------------------------------------------- schedule & integrator

enum class FlowDirection { Up, Down };

struct FlowSchedule {
  double Lambda_min = 0.05;
  double Lambda0 = 100.0;
  double steps_per_unit = 16.0;  // RK4 steps per unit of log(Lambda)

  static FlowSchedule make(const FlowParams& p, double steps_per_unit = 16.0) {
    FlowSchedule s{p.lambda_min(), p.Lambda0, steps_per_unit};
    s.validate();
    return s;
  }
  void validate() const {
    if (!(Lambda_min > 0.0) || !(Lambda0 > Lambda_min)) throw SchedulingError("schedule needs 0 < Lambda_min < Lambda0");
    if (!(steps_per_unit > 0.0)) throw SchedulingError("schedule needs a positive step density");
  }
  /// Irrelevant classes flow down from Lambda0, relevant ones up from the renormalization point.
  static FlowDirection direction(int n, int w, int r) { return n + w + r >= 5 ? FlowDirection::Down : FlowDirection::Up; }
  [[nodiscard]] std::vector<double> knots() const {
    const int n = std::max(1, static_cast<int>(std::ceil(steps_per_unit * std::log(Lambda0 / Lambda_min))));
    return logspace(Lambda_min, Lambda0, n + 1);
  }
  [[nodiscard]] double clamp(double Lambda) const { return std::clamp(Lambda, Lambda_min, Lambda0); }
};

struct IntegrationResult {
  std::vector<double> value;
  std::vector<double> halving_error;  // |fine - coarse|
  int evaluations = 0;
};

/// Classical RK4 in u = log(Lambda) for y' = Lambda * rate(Lambda) from Lambda_a to Lambda_b,
/// with a second run at half the step for the error estimate. Rates are cached by knot.
template <class Rate>
IntegrationResult integrate_rk4(Rate&& rate, std::size_t dim, double Lambda_a, double Lambda_b, double steps_per_unit) {
  IntegrationResult res;
  res.value.assign(dim, 0.0);
  res.halving_error.assign(dim, 0.0);
  if (Lambda_a == Lambda_b) return res;
  const double ua = std::log(Lambda_a), ub = std::log(Lambda_b);
  const int n = std::max(2, static_cast<int>(std::ceil(steps_per_unit * std::abs(ub - ua))));
  std::map<int, std::vector<double>> cache;  // key: index on the 4n-point fine lattice
  auto f = [&](int k) -> const std::vector<double>& {
    auto it = cache.find(k);
    if (it != cache.end()) return it->second;
    const double L = std::exp(ua + (ub - ua) * k / (4.0 * n));
    std::vector<double> v = rate(L);
    if (v.size() != dim) throw ShapeError("rate returned the wrong dimension");
    for (double& x : v) x *= L;
    ++res.evaluations;
    return cache.emplace(k, std::move(v)).first->second;
  };
  auto run = [&](int steps) {
    const int stride = 4 * n / steps;  // lattice points per step
    const double h = (ub - ua) / steps;
    std::vector<CompensatedSum> acc(dim);
    for (int i = 0; i < steps; ++i) {
      const int k0 = i * stride;
      const auto& k1 = f(k0);
      const auto& k2 = f(k0 + stride / 2);
      const auto& k4 = f(k0 + stride);
      // y does not enter the rates, so k3 = k2.
      for (std::size_t d = 0; d < dim; ++d) acc[d] += h * (k1[d] + 4.0 * k2[d] + k4[d]) / 6.0;
    }
    std::vector<double> out(dim);
    for (std::size_t d = 0; d < dim; ++d) out[d] = acc[d].value();
    return out;
  };
  const auto coarse = run(n);
  const auto fine = run(2 * n);
  res.value = fine;
  for (std::size_t d = 0; d < dim; ++d) res.halving_error[d] = std::abs(fine[d] - coarse[d]);
  return res;
}

// ---------------------------------------------------------------- counterterms

struct CountertermSet {
  std::vector<double> z, a, s, d, b, c;
};

/// Relevant projections by folding with the s = 1 test function and moments.
inline CountertermSet extract_counterterms(const FlowState& st, int l, std::span<const double> z1s,
                                           const FoldOptions& opt = {}) {
  if (l < 0 || l > 1) throw SchedulingError("counterterms available for l <= 1");
  const NPointKernel& K2 = l == 0 ? st.L02 : st.L12;
  const NPointKernel& K4 = l == 0 ? st.L04 : st.L14;
  if (!K2.has_channel(MomentumSlot::DP2)) throw ChannelError("two-point kernel lacks the p^2-derivative channel");
  const TestFunctionSpec one2 = TestFunctionSpec::constant(2), one4 = TestFunctionSpec::constant(4);
  CountertermSet cs;
  cs.z.assign(z1s.begin(), z1s.end());
  auto fold2 = [&](int r, MomentumSlot slot) {
    if (K2.terms.empty()) return std::vector<double>(z1s.size(), 0.0);
    return fold(K2, one2, r, r > 0 ? 2 : 0, z1s, slot, opt);
  };
  cs.a = fold2(0, MomentumSlot::Zero);
  cs.s = fold2(1, MomentumSlot::Zero);
  cs.d = fold2(2, MomentumSlot::Zero);
  cs.b = fold2(0, MomentumSlot::DP2);
  cs.c = fold(K4, one4, 0, 0, z1s, MomentumSlot::Zero, opt);
  return cs;
}

/// Result of the two-way integration at one root coordinate.
struct FlowPoint {
  double z1 = 0.0;
  double a = 0.0, c = 0.0;            // relevant parts at Lambda, integrated up from the floor
  double a_err = 0.0, c_err = 0.0;    // step-halving estimates
  double a_bare = 0.0, kappa = 0.0;   // bare coefficients from the upward flow to Lambda0
  double bphz_a = 0.0, bphz_c = 0.0;  // Lambda = 0 projections from the closed-form nonlocal parts
  std::optional<double> remainder;    // l_{1,4}(z1; Phi), integrated down from Lambda0
  double remainder_err = 0.0;
  std::optional<double> full_fold;    // the folded closed-form kernel at Lambda
};

struct FlowOptions {
  double steps_per_unit = 32.0;           // irrelevant (downward) routes
  double relevant_steps_per_unit = 64.0;  // upward routes of a and c
  double tolerance = 1e-6;  // step-halving tolerance (relative to max(|y|, scale))
  bool strict = true;
  FoldOptions fold{};
};

namespace detail {
inline void check_halving(const char* what, double value, double err, double scale, double tol, double La, double Lb,
                          bool strict) {
  if (strict && err > tol * std::max(std::abs(value), scale))
    throw AccuracyError(std::string(what) + ": step-halving disagreement " + std::to_string(err) + " on [" +
                            std::to_string(La) + ", " + std::to_string(Lb) + "]",
                        La, Lb);
}
}  // namespace detail

/// Two-way integration at the roots z1s: a and the bubble part of c flow up from
/// the floor (BPHZ), the remainder of the folded four-point kernel flows down from
/// Lambda0. Reducible channels are total derivatives of A C and enter in closed form.
inline std::vector<FlowPoint> integrate_flow(const FlowState& st, double Lambda, std::span<const double> z1s,
                                             const std::optional<TestFunctionSpec>& spec = std::nullopt,
                                             const FlowOptions& fo = {}) {
  const OneLoopModel& M = *st.model;
  const FlowParams& fp = M.params();
  FlowSchedule sched = FlowSchedule::make(fp, fo.steps_per_unit);
  const double Lt = sched.clamp(Lambda);
  if (spec && spec->n != 4) throw ShapeError("remainder flow is implemented for the four-point kernel");
  std::vector<FlowPoint> out;
  for (double z1 : z1s) {
    FlowPoint pt;
    pt.z1 = z1;
    const double w = dirac_weight(z1);
    auto up_rate = [&](double L) {
      const NPointKernel tad = rhs_linear(st.L04, M, L);
      const auto legs = LegFactors::from_spec(TestFunctionSpec::constant(2));
      const double a_dot = fold_at(tad, legs, z1, MomentumSlot::Zero, fo.fold);
      return std::vector<double>{a_dot, 3.0 * w * M.beta_c(L, z1)};
    };
    const auto up = integrate_rk4(up_rate, 2, sched.Lambda_min, Lt, fo.relevant_steps_per_unit);
    const auto full = integrate_rk4(up_rate, 2, sched.Lambda_min, fp.Lambda0, fo.relevant_steps_per_unit);
    pt.a = up.value[0];
    pt.c = up.value[1] + M.reducible_c(Lambda, z1);
    pt.a_err = up.halving_error[0];
    pt.c_err = up.halving_error[1];
    // values below 1e-12 of the full-range integral count as zero
    detail::check_halving("a", pt.a, pt.a_err, 1e-12 * std::abs(full.value[0]), fo.tolerance, sched.Lambda_min, Lt, fo.strict);
    detail::check_halving("c", pt.c, pt.c_err, 1e-12 * std::abs(full.value[1]), fo.tolerance, sched.Lambda_min, Lt, fo.strict);

    pt.a_bare = full.value[0] / w;
    pt.kappa = full.value[1] / (w * w * w);
    pt.bphz_a = w * (pt.a_bare - M.A(fp.Lambda0, z1));
    pt.bphz_c = w * w * w * pt.kappa + 3.0 * w * M.bubble_c(0.0, z1);

    if (spec) {
      const TestFunctionSpec sp = *spec;
      const double phi1 = testfn_at_root(sp, z1);
      const auto legs = LegFactors::from_spec(sp);
      auto down_rate = [&](double L) {
        const NPointKernel rk = rhs_linear(st.L06, M, L);
        NPointKernel bub;
        bub.l = 1;
        bub.n = 4;
        for (const auto& t : rk.terms)
          if (t.label.starts_with("bubble")) bub.add(t);
        const double f = fold_at(bub, legs, z1, MomentumSlot::Zero, fo.fold);
        return std::vector<double>{f - 3.0 * w * M.beta_c(L, z1) * phi1};
      };
      const auto dn = integrate_rk4(down_rate, 1, fp.Lambda0, std::max(Lt, sched.Lambda_min), fo.steps_per_unit);
      NPointKernel red;
      red.l = 1;
      red.n = 4;
      for (const auto& t : st.L14.terms)
        if (t.label.starts_with("reducible")) red.add(t);
      const double red_fold = red.terms.empty() ? 0.0 : fold_at(red, legs, z1, MomentumSlot::Zero, fo.fold);
      pt.remainder = dn.value[0] + red_fold - M.reducible_c(Lambda, z1) * phi1;
      pt.remainder_err = dn.halving_error[0];
      detail::check_halving("remainder", *pt.remainder, pt.remainder_err, std::abs(pt.c * phi1), fo.tolerance, Lt,
                            fp.Lambda0, fo.strict);
      pt.full_fold = fold_at(st.L14, legs, z1, MomentumSlot::Zero, fo.fold);
    }
    out.push_back(pt);
  }
  return out;
}

/// Counterterm table at Lambda on a grid (closed forms; s = d = b = 0 at one loop).
inline CountertermSet counterterm_table(const OneLoopModel& M, double Lambda, int l, std::span<const double> z) {
  CountertermSet cs;
  cs.z.assign(z.begin(), z.end());
  const std::size_t n = z.size();
  cs.a.assign(n, 0.0);
  cs.s.assign(n, 0.0);
  cs.d.assign(n, 0.0);
  cs.b.assign(n, 0.0);
  cs.c.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = dirac_weight(z[i]);
    if (l == 0) {
      cs.c[i] = M.params().g * w * w * w;
    } else {
      cs.a[i] = M.a_closed(Lambda, z[i]);
      cs.c[i] = M.c_closed(Lambda, z[i]);
    }
  }
  return cs;
}

// ---------------------------------------------------------------- Taylor remainders

struct Remainders {
  double l2 = 0.0;     // l_{l,2}(z1; phi_2)
  double l2_p2 = 0.0;  // p^2-derivative remainder
  double l4 = 0.0;     // l_{l,4}(z1; Phi_4)
  double l2_diff = 0.0, l4_diff = 0.0;  // the same from (full fold) - (relevant reconstruction)
};

/// Remainders by the integral formulas (t-quadrature of d_t derivatives of the
/// test functions) and by differences; a mismatch above tol raises.
inline Remainders taylor_remainders(const FlowState& st, int l, double z1, const TestFunctionSpec& spec2,
                                    const TestFunctionSpec& spec4, double tol = 1e-8, const FoldOptions& opt = {}) {
  if (spec2.n != 2 || spec4.n != 4) throw ShapeError("remainders need two- and four-point test functions");
  const NPointKernel& K2 = l == 0 ? st.L02 : st.L12;
  const NPointKernel& K4 = l == 0 ? st.L04 : st.L14;
  const RobinConstant rc = spec4.c;
  const QuadRule& gl = gauss_legendre(16);
  auto tint = [&](auto&& f) {
    double s = 0.0;
    for (int k = 0; k < 16; ++k) s += 0.5 * gl.w[k] * f(0.5 * (1.0 + gl.x[k]));
    return s;
  };
  Remainders r;
  // two-point
  if (!K2.terms.empty() && spec2.s == 2) {
    const double tau = spec2.taus[0], y = spec2.anchors[0];
    const RobinConstant c2 = spec2.c;
    LegFactors lf;
    lf.n = 2;
    lf.factor = [=, &tint](int, double z, double zz1) {
      const double d = z - zz1;
      return tint([&](double t) { return 0.5 * (1 - t) * (1 - t) * d * d * d * pR_dz(3, tau, t * z + (1 - t) * zz1, y, c2); });
    };
    lf.foci = {{y, std::sqrt(tau)}, {0.0, std::sqrt(tau)}};
    lf.reach = y + 9.0 * std::sqrt(tau);
    r.l2 = fold_at(K2, lf, z1, MomentumSlot::Zero, opt);
    r.l2_p2 = fold_at(K2, lf, z1, MomentumSlot::DP2, opt);
    const auto legs = LegFactors::from_spec(spec2);
    const double full = fold_at(K2, legs, z1, MomentumSlot::Zero, opt);
    const auto one = LegFactors::from_spec(TestFunctionSpec::constant(2));
    const double a = fold_at(K2, one, z1, MomentumSlot::Zero, opt);
    const double s = fold_at(K2, LegFactors::from_spec(TestFunctionSpec::constant(2), 1, 2), z1, MomentumSlot::Zero, opt);
    const double d = fold_at(K2, LegFactors::from_spec(TestFunctionSpec::constant(2), 2, 2), z1, MomentumSlot::Zero, opt);
    const double p0 = pR_fast(tau, z1, y, c2), p1 = pR_dz(1, tau, z1, y, c2), p2 = pR_dz(2, tau, z1, y, c2);
    r.l2_diff = full - a * p0 + s * p1 - 0.5 * d * p2;
    if (std::abs(r.l2 - r.l2_diff) > tol * std::max(1.0, std::abs(full)))
      throw ConsistencyError("two-point remainder: formula and difference disagree");
  }
  // four-point
  if (spec4.s >= 2) {
    const int s = spec4.s;
    CompensatedSum lsum;
    for (int j = 2; j <= s; ++j) {
      const double tau = spec4.taus[j - 2], y = spec4.anchors[j - 2];
      LegFactors lf = LegFactors::from_spec(spec4.diff(j));
      auto base = lf.factor;
      lf.factor = [=, &tint](int leg, double z, double zz1) {
        if (leg != j) return base(leg, z, zz1);
        const double d = z - zz1;
        return tint([&](double t) { return d * pR_dz(1, tau, t * z + (1 - t) * zz1, y, rc); });
      };
      lsum += fold_at(K4, lf, z1, MomentumSlot::Zero, opt);
    }
    r.l4 = lsum.value();
    const double full = fold_at(K4, LegFactors::from_spec(spec4), z1, MomentumSlot::Zero, opt);
    const double c = fold_at(K4, LegFactors::from_spec(TestFunctionSpec::constant(4)), z1, MomentumSlot::Zero, opt);
    r.l4_diff = full - c * testfn_at_root(spec4, z1);
    if (std::abs(r.l4 - r.l4_diff) > tol * std::max(1.0, std::abs(full)))
      throw ConsistencyError("four-point remainder: formula and difference disagree");
  }
  return r;
}

// ---------------------------------------------------------------- bound harnesses

struct BoundSample {
  int l = 0, n = 0, s = 1, r = 0;
  double Lambda = 0.0, Lambda0 = 0.0, tau = 0.0, y = 0.0, z1 = 0.0;
  double folded = 0.0, envelope = 0.0, ratio = 0.0;
};

/// |folded kernel| / [(Lambda + m)^{4-n-r} F^Lambda_{s,l}(tau)] for a Plain spec.
inline BoundSample theorem1_ratio(const FlowState& st, int l, const TestFunctionSpec& spec, double z1, double delta,
                                  const FoldOptions& opt = {}) {
  const FlowParams& fp = st.model->params();
  const NPointKernel& K = spec.n == 2 ? (l == 0 ? st.L02 : st.L12) : (l == 0 ? st.L04 : st.L14);
  BoundSample b;
  b.l = l;
  b.n = spec.n;
  b.s = spec.s;
  b.Lambda = st.Lambda;
  b.Lambda0 = fp.Lambda0;
  b.z1 = z1;
  b.tau = spec.s > 1 ? spec.tau_min() : 0.0;
  b.y = spec.s > 1 ? spec.anchors[0] : 0.0;
  b.folded = K.terms.empty() ? 0.0 : fold_at(K, LegFactors::from_spec(spec), z1, MomentumSlot::Zero, opt);
  WeightInput in;
  in.Lambda = std::max(st.Lambda, 1e-3 * fp.m);
  in.Lambda0 = fp.Lambda0;
  in.delta = delta;
  in.z1 = z1;
  in.taus = spec.taus;
  in.anchors = spec.anchors;
  const double F = global_weight(spec.s, l, in).value;
  b.envelope = std::pow(st.Lambda + fp.m, 4 - spec.n) * F;
  b.ratio = std::abs(b.folded) / b.envelope;
  return b;
}

struct DecayFit {
  std::vector<double> Lambda0;
  std::vector<double> values;
  std::vector<double> diffs;  // |v_{k+1} - v_k|
  double slope = 0.0;         // log-log slope of diffs vs Lambda0 (with one log factor divided out)
  double r2 = 0.0;
  bool measurable = false;    // false when the differences vanish to round-off
};

/// Fits |v(L0_{k+1}) - v(L0_k)| ~ L0^slope * log(L0/m); differences below
/// floor * max|v| are treated as identically zero.
inline DecayFit fit_decay(std::span<const double> L0s, std::span<const double> vals, double m, double floor = 1e-13) {
  DecayFit f;
  f.Lambda0.assign(L0s.begin(), L0s.end());
  f.values.assign(vals.begin(), vals.end());
  double scale = 0.0;
  for (double v : vals) scale = std::max(scale, std::abs(v));
  std::vector<double> x, y;
  for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
    const double d = std::abs(vals[k + 1] - vals[k]);
    f.diffs.push_back(d);
    if (d > floor * std::max(scale, 1e-300)) {
      x.push_back(std::log(L0s[k]));
      y.push_back(std::log(d / std::log(L0s[k] / m + 1.0)));
    }
  }
  f.measurable = x.size() == f.diffs.size() && x.size() >= 2;
  if (x.size() >= 2) {
    const LineFit lf = fit_line(x, y);
    f.slope = lf.slope;
    f.r2 = lf.r2;
  }
  return f;
}

}  // namespace hsrg
