// CAS kernels as sums of (delta-cluster pattern x smooth function) terms and
// the folding operators that integrate them against test functions.
#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hsrg/numerics.hpp"
#include "hsrg/testfn.hpp"

namespace hsrg {

/// Clusters of leg indices (1-based). Canonical form: each cluster sorted,
/// clusters ordered by their smallest leg, so the first contains leg 1.
using Partition = std::vector<std::vector<int>>;

enum class MomentumSlot { Zero, DP2 };

inline std::string partition_string(const Partition& p) {
  std::string s;
  for (const auto& c : p) {
    s += '{';
    for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + std::to_string(c[i]);
    s += '}';
  }
  return s;
}

inline void validate_partition(const Partition& p, int n) {
  std::vector<int> seen(n + 1, 0);
  int prev_min = 0;
  for (const auto& c : p) {
    if (c.empty()) throw ShapeError("empty cluster in " + partition_string(p));
    if (!std::is_sorted(c.begin(), c.end())) throw ShapeError("cluster not sorted in " + partition_string(p));
    if (c.front() <= prev_min) throw ShapeError("clusters not in canonical order in " + partition_string(p));
    prev_min = c.front();
    for (int leg : c) {
      if (leg < 1 || leg > n) throw ShapeError("leg index out of range in " + partition_string(p));
      if (seen[leg]++) throw ShapeError("leg repeated in " + partition_string(p));
    }
  }
  for (int i = 1; i <= n; ++i)
    if (!seen[i]) throw ShapeError("leg missing from " + partition_string(p));
}

using SmoothFn = std::function<double(std::span<const double>)>;

/// One term: prod of deltas inside each cluster times smooth(cluster coordinates).
struct KernelTerm {
  Partition clusters;
  SmoothFn smooth;
  MomentumSlot slot = MomentumSlot::Zero;
  double kink_scale = 1.0;    // finest length on which smooth varies (near coincidences)
  double smooth_scale = 1.0;  // variation length away from coincidences
  double reach = 10.0;        // distance beyond which smooth is negligible
  std::string label;
};

struct NPointKernel {
  int l = 0;
  int n = 2;
  std::vector<KernelTerm> terms;
  std::set<MomentumSlot> channels{MomentumSlot::Zero};

  /// Adds a term, merging with an existing term of identical pattern and slot.
  void add(KernelTerm t) {
    validate_partition(t.clusters, n);
    channels.insert(t.slot);
    for (auto& e : terms) {
      if (e.clusters == t.clusters && e.slot == t.slot) {
        SmoothFn a = e.smooth, b = t.smooth;
        e.smooth = [a, b](std::span<const double> x) { return a(x) + b(x); };
        e.kink_scale = std::min(e.kink_scale, t.kink_scale);
        e.smooth_scale = std::min(e.smooth_scale, t.smooth_scale);
        e.reach = std::max(e.reach, t.reach);
        e.label += "+" + t.label;
        return;
      }
    }
    terms.push_back(std::move(t));
  }
  [[nodiscard]] bool has_channel(MomentumSlot s) const { return channels.count(s) > 0; }
};

struct FoldOptions {
  bool adaptive = false;  // nested adaptive Gauss-Kronrod instead of composite Gauss-Legendre
  int gl_nodes = 10;
  double rel_tol = 1e-11;
  double abs_tol = 1e-16;
};

/// Strong Dirac weight of a boundary-collapsed delta.
inline double dirac_weight(double z) { return z == 0.0 ? 0.5 : 1.0; }

namespace detail {

struct FoldContext {
  const KernelTerm* term;
  const LegFactors* legs;
  double z1;
  FoldOptions opt;
  std::vector<double> coords;  // z1 followed by the other cluster coordinates
};

inline std::vector<double> cluster_breaks(const FoldContext& ctx, std::size_t depth) {
  const KernelTerm& t = *ctx.term;
  std::vector<std::pair<double, double>> foci;
  double far = ctx.z1;
  for (std::size_t d = 0; d < depth; ++d) {
    foci.emplace_back(ctx.coords[d], t.kink_scale / 4.0);
    far = std::max(far, ctx.coords[d]);
  }
  foci.emplace_back(0.0, t.kink_scale / 4.0);
  double h_max = t.smooth_scale / 2.0;
  for (const auto& [pos, res] : ctx.legs->foci) {
    foci.emplace_back(pos, res / 8.0);
    h_max = std::min(h_max, res);
  }
  const double hi = std::max(far + t.reach, ctx.legs->reach + t.reach);
  return graded_breaks(0.0, hi, foci, h_max);
}

inline double fold_recurse(FoldContext& ctx, std::size_t depth) {
  const KernelTerm& t = *ctx.term;
  if (depth == t.clusters.size()) return t.smooth(ctx.coords);
  const auto& cluster = t.clusters[depth];
  auto integrand = [&](double x) {
    double w = 1.0;
    for (int leg : cluster) w *= ctx.legs->factor(leg, x, ctx.z1);
    if (w == 0.0) return 0.0;
    ctx.coords[depth] = x;
    const double inner = fold_recurse(ctx, depth + 1);
    return w * inner;
  };
  const auto br = cluster_breaks(ctx, depth);
  if (ctx.opt.adaptive) {
    QuadOptions qo;
    qo.abs_tol = ctx.opt.abs_tol;
    qo.rel_tol = ctx.opt.rel_tol;
    qo.throw_on_failure = false;
    return integrate_panels(integrand, br, qo).value;
  }
  const CompositeRule cr = composite_rule(br, ctx.opt.gl_nodes);
  return cr.integrate(integrand);
}

inline double fold_term(const KernelTerm& t, const LegFactors& legs, double z1, const FoldOptions& opt) {
  const auto& root = t.clusters.front();
  double rw = 1.0;
  for (int leg : root) {
    if (leg == 1) continue;
    rw *= dirac_weight(z1) * legs.factor(leg, z1, z1);
  }
  if (rw == 0.0) return 0.0;
  FoldContext ctx{&t, &legs, z1, opt, std::vector<double>(t.clusters.size(), 0.0)};
  ctx.coords[0] = z1;
  return rw * fold_recurse(ctx, 1);
}

}  // namespace detail

/// Fold with arbitrary per-leg factors at a single root coordinate.
inline double fold_at(const NPointKernel& k, const LegFactors& legs, double z1,
                      MomentumSlot slot = MomentumSlot::Zero, const FoldOptions& opt = {}) {
  if (legs.n != k.n) throw ShapeError("kernel and test function leg counts differ");
  if (!k.has_channel(slot)) throw ChannelError("kernel lacks the requested momentum channel");
  CompensatedSum s;
  for (const auto& t : k.terms)
    if (t.slot == slot) s += detail::fold_term(t, legs, z1, opt);
  return s.value();
}

/// z1 -> int dz_2..dz_n (z1 - z_i)^r L(z1, ..., z_n) Phi_s(z_2..z_s).
inline std::vector<double> fold(const NPointKernel& k, const TestFunctionSpec& spec, int r, int i,
                                std::span<const double> z1s, MomentumSlot slot = MomentumSlot::Zero,
                                const FoldOptions& opt = {}) {
  if (spec.n != k.n) throw ShapeError("kernel and test function leg counts differ");
  const LegFactors legs = LegFactors::from_spec(spec, r, i);
  std::vector<double> out(z1s.size());
  for (std::size_t a = 0; a < z1s.size(); ++a) out[a] = fold_at(k, legs, z1s[a], slot, opt);
  return out;
}

/// (z1 - z2)^3 int dz_3..dz_n L Phi_{s-1}(z_3..z_s); leg 2 is pinned at z2.
/// The test-function factor of leg 2, if any, is not applied.
inline double fold_F12(const NPointKernel& k, const TestFunctionSpec& spec, double z1, double z2,
                       MomentumSlot slot = MomentumSlot::Zero, const FoldOptions& opt = {}) {
  if (spec.n != k.n) throw ShapeError("kernel and test function leg counts differ");
  if (k.n < 2) throw ShapeError("F12 folding needs n >= 2");
  if (!k.has_channel(slot)) throw ChannelError("kernel lacks the requested momentum channel");
  const double cube = std::pow(z1 - z2, 3);
  if (cube == 0.0) return 0.0;
  LegFactors legs = LegFactors::from_spec(spec);
  auto base = legs.factor;
  legs.factor = [base](int leg, double z, double zz1) { return leg == 2 ? 1.0 : base(leg, z, zz1); };
  CompensatedSum s;
  for (const auto& t : k.terms) {
    if (t.slot != slot) continue;
    // Locate leg 2; a shared cluster with leg 1 means delta(z1 - z2): zero off the diagonal.
    std::size_t c2 = 0;
    for (std::size_t c = 0; c < t.clusters.size(); ++c)
      if (std::find(t.clusters[c].begin(), t.clusters[c].end(), 2) != t.clusters[c].end()) c2 = c;
    if (c2 == 0) continue;
    // The pinned cluster is removed from the integration; its deltas collapse at z2.
    double rw = 1.0;
    for (int leg : t.clusters[c2])
      if (leg != 2) rw *= dirac_weight(z2) * legs.factor(leg, z2, z1);
    if (rw == 0.0) continue;
    KernelTerm reduced = t;
    Partition rest{t.clusters[0]};
    std::vector<std::size_t> map{0};
    for (std::size_t c = 1; c < t.clusters.size(); ++c)
      if (c != c2) {
        rest.push_back(t.clusters[c]);
        map.push_back(c);
      }
    const std::size_t nc = t.clusters.size();
    SmoothFn f = t.smooth;
    reduced.clusters = rest;
    reduced.smooth = [f, map, c2, z2, nc](std::span<const double> x) {
      std::vector<double> full(nc);
      for (std::size_t a = 0; a < map.size(); ++a) full[map[a]] = x[a];
      full[c2] = z2;
      return f(full);
    };
    s += rw * detail::fold_term(reduced, legs, z1, opt);
  }
  return cube * s.value();
}

}  // namespace hsrg
