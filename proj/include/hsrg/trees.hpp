// Tree classes bounding the folded kernels, their weight factors, and the
// reduction procedure.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hsrg/heatkernel.hpp"
#include "hsrg/numerics.hpp"

namespace hsrg {

enum class TreeKind { SingleRoot, TwiceRooted };

/// Vertex labels: 1 is the root z1, 0 an internal vertex. For single-rooted
/// trees the externals carry 2..s. For twice-rooted trees label 2 is the
/// second root z2 (any incidence) and the externals carry 3..s.
struct Tree {
  TreeKind kind = TreeKind::SingleRoot;
  int s = 1;
  std::vector<int> parent{-1};  // parent[0] = -1 is the root
  std::vector<int> label{1};

  [[nodiscard]] int size() const { return static_cast<int>(parent.size()); }
  [[nodiscard]] bool empty() const { return size() == 1; }
  [[nodiscard]] int first_external_label() const { return kind == TreeKind::SingleRoot ? 2 : 3; }
  [[nodiscard]] bool is_external(int v) const { return label[v] >= first_external_label(); }
  [[nodiscard]] bool is_internal(int v) const { return label[v] == 0; }
  [[nodiscard]] bool is_second_root(int v) const { return kind == TreeKind::TwiceRooted && label[v] == 2; }

  [[nodiscard]] std::vector<std::vector<int>> children() const {
    std::vector<std::vector<int>> ch(size());
    for (int v = 1; v < size(); ++v) ch[parent[v]].push_back(v);
    return ch;
  }
  [[nodiscard]] int incidence(int v) const {
    int c = v == 0 ? 0 : 1;
    for (int u = 1; u < size(); ++u) c += parent[u] == v;
    return c;
  }
  [[nodiscard]] int root_incidence() const { return incidence(0); }
  /// Number of non-root vertices of incidence n.
  [[nodiscard]] int count_incidence(int n) const {
    int k = 0;
    for (int v = 1; v < size(); ++v)
      if (!is_second_root(v) && incidence(v) == n) ++k;
    return k;
  }
  [[nodiscard]] int v2() const { return count_incidence(2); }
  [[nodiscard]] std::vector<int> externals() const {
    std::vector<int> e;
    for (int v = 1; v < size(); ++v)
      if (is_external(v)) e.push_back(v);
    std::sort(e.begin(), e.end(), [&](int a, int b) { return label[a] < label[b]; });
    return e;
  }
  [[nodiscard]] std::vector<int> internals() const {
    std::vector<int> e;
    for (int v = 1; v < size(); ++v)
      if (is_internal(v)) e.push_back(v);
    return e;
  }
  [[nodiscard]] int vertex_with_label(int lab) const {
    for (int v = 0; v < size(); ++v)
      if (label[v] == lab) return v;
    return -1;
  }
  /// Lines are identified by their lower vertex; a line is internal unless it ends in an external vertex.
  [[nodiscard]] std::vector<int> internal_lines() const {
    std::vector<int> e;
    for (int v = 1; v < size(); ++v)
      if (!is_external(v)) e.push_back(v);
    return e;
  }
  [[nodiscard]] std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> e;
    for (int v = 1; v < size(); ++v) e.emplace_back(parent[v], v);
    return e;
  }

  [[nodiscard]] std::string canonical() const {
    const auto ch = children();
    auto rec = [&](auto&& self, int v) -> std::string {
      std::string head;
      if (v == 0) head = "z1";
      else if (is_second_root(v)) head = "z2";
      else if (is_external(v)) head = "y" + std::to_string(label[v]);
      else head = "v";
      if (ch[v].empty()) return head;
      std::vector<std::string> parts;
      for (int c : ch[v]) parts.push_back(self(self, c));
      std::sort(parts.begin(), parts.end());
      head += '[';
      for (std::size_t i = 0; i < parts.size(); ++i) head += (i ? "," : "") + parts[i];
      return head + ']';
    };
    return rec(rec, 0);
  }

  /// Structural invariants of section (ii): connected, acyclic, externals are leaves,
  /// internal vertices have incidence > 1, every label present once.
  void validate() const {
    const int n = size();
    if (static_cast<int>(label.size()) != n) throw ShapeError("tree parent and label arrays differ in length");
    if (parent[0] != -1 || label[0] != 1) throw ShapeError("vertex 0 must be the root z1");
    for (int v = 1; v < n; ++v) {
      // parent[v] < v rules out cycles and guarantees connectivity
      if (parent[v] < 0 || parent[v] >= v) throw ShapeError("tree vertices must follow their parents");
      if (label[v] == 1) throw ShapeError("only vertex 0 may be the root");
    }
    std::vector<int> seen(s + 1, 0);
    for (int v = 1; v < n; ++v) {
      if (label[v] < 0 || label[v] > s) throw ShapeError("tree label out of range");
      if (label[v] > 0 && seen[label[v]]++) throw ShapeError("tree label repeated");
      const int inc = incidence(v);
      if (is_external(v) && inc != 1) throw ShapeError("external vertex with incidence != 1");
      if (is_internal(v) && inc < 2) throw ShapeError("internal vertex with incidence < 2");
    }
    for (int lab = 2; lab <= s; ++lab)
      if (!seen[lab]) throw ShapeError("tree is missing label " + std::to_string(lab));
  }
};

/// Normalizes vertex order (preorder, children in canonical order) so that
/// isomorphic trees compare equal as arrays.
inline Tree normalize(const Tree& t) {
  const auto ch = t.children();
  std::vector<std::string> key(t.size());
  auto canon = [&](auto&& self, int v) -> std::string {
    std::vector<std::string> parts;
    for (int c : ch[v]) parts.push_back(self(self, c));
    std::sort(parts.begin(), parts.end());
    std::string s = std::to_string(t.label[v]) + "(";
    for (const auto& p : parts) s += p + ";";
    return key[v] = s + ")";
  };
  canon(canon, 0);
  Tree out;
  out.kind = t.kind;
  out.s = t.s;
  out.parent.clear();
  out.label.clear();
  auto emit = [&](auto&& self, int v, int par) -> void {
    const int id = out.size();
    out.parent.push_back(par);
    out.label.push_back(t.label[v]);
    std::vector<int> kids = ch[v];
    std::sort(kids.begin(), kids.end(), [&](int a, int b) { return key[a] < key[b]; });
    for (int c : kids) self(self, c, id);
  };
  emit(emit, 0, -1);
  return out;
}

/// Exact right-hand side 3l - 2 + s/2 of the class inequality (twice-rooted: (s-1)/2).
inline double admissibility_bound(int s, int l, TreeKind kind = TreeKind::SingleRoot) {
  const double half = kind == TreeKind::SingleRoot ? 0.5 * s : 0.5 * (s - 1);
  return 3.0 * l - 2.0 + half;
}

/// Largest v2 any tree of the class can carry.
inline int max_v2(int s, int l, TreeKind kind = TreeKind::SingleRoot) {
  if (l == 0) return 0;
  return std::max(0, static_cast<int>(std::floor(admissibility_bound(s, l, kind) + 1e-12)));
}

/// Upper bound on internal vertices: v2 plus at most s-2 branching vertices.
inline int derived_internal_cap(int s, int l, TreeKind kind = TreeKind::SingleRoot) {
  return max_v2(s, l, kind) + std::max(0, s - 2);
}

inline bool admissible(const Tree& t, int l) {
  if (t.empty()) return t.s == 1;
  const int v2 = t.v2();
  const int d = t.root_incidence() == 1 ? 1 : 0;
  const double bound = admissibility_bound(t.s, l, t.kind);
  if (l == 0) {
    if (v2 != 0) return false;
    // The inequality is unsatisfiable by every tree when its right side is negative; it is then waived.
    return bound < 0.0 || v2 + d <= bound + 1e-12;
  }
  return v2 + d <= bound + 1e-12;
}

namespace detail {

struct GenNode {
  int label = 0;
  std::vector<GenNode> kids;
};

struct GenResult {
  GenNode node;
  int v2 = 0;
  int internals = 0;
};

inline void set_partitions_rec(const std::vector<int>& items, std::size_t i, std::vector<std::vector<int>>& cur,
                               std::vector<std::vector<std::vector<int>>>& out) {
  if (i == items.size()) {
    out.push_back(cur);
    return;
  }
  const std::size_t nb = cur.size();
  for (std::size_t b = 0; b < nb; ++b) {
    cur[b].push_back(items[i]);
    set_partitions_rec(items, i + 1, cur, out);
    cur[b].pop_back();
  }
  cur.push_back({items[i]});
  set_partitions_rec(items, i + 1, cur, out);
  cur.pop_back();
}

inline std::vector<std::vector<std::vector<int>>> set_partitions(const std::vector<int>& items) {
  std::vector<std::vector<std::vector<int>>> out;
  std::vector<std::vector<int>> cur;
  if (items.empty()) {
    out.emplace_back();
    return out;
  }
  set_partitions_rec(items, 0, cur, out);
  return out;
}

class TreeGenerator {
 public:
  TreeGenerator(TreeKind kind, int v2_budget, int int_budget) : kind_(kind), v2b_(v2_budget), intb_(int_budget) {}

  /// Children of a vertex: one subtree per block of a partition of the label set.
  std::vector<GenResult> forests(const std::vector<int>& labels, int parent_label, bool allow_single_block) {
    std::vector<GenResult> out;
    for (const auto& part : set_partitions(labels)) {
      if (!allow_single_block && part.size() < 2) continue;
      std::vector<GenResult> acc{GenResult{GenNode{parent_label, {}}, 0, 0}};
      for (const auto& block : part) {
        const auto subs = subtrees(block);
        std::vector<GenResult> next;
        for (const auto& a : acc)
          for (const auto& b : subs) {
            if (a.v2 + b.v2 > v2b_ || a.internals + b.internals > intb_) continue;
            GenResult r = a;
            r.node.kids.push_back(b.node);
            r.v2 += b.v2;
            r.internals += b.internals;
            next.push_back(std::move(r));
          }
        acc = std::move(next);
        if (acc.empty()) break;
      }
      for (auto& a : acc) out.push_back(std::move(a));
    }
    return out;
  }

  /// Every subtree hanging from one line whose labelled vertices are `labels`.
  const std::vector<GenResult>& subtrees(const std::vector<int>& labels) {
    auto it = memo_.find(labels);
    if (it != memo_.end()) return it->second;
    std::vector<GenResult> out;
    const bool has_z2 = kind_ == TreeKind::TwiceRooted && std::find(labels.begin(), labels.end(), 2) != labels.end();
    if (has_z2) {
      std::vector<int> rest;
      for (int x : labels)
        if (x != 2) rest.push_back(x);
      for (auto& f : forests(rest, 2, true)) out.push_back(std::move(f));
    } else if (labels.size() == 1) {
      out.push_back(GenResult{GenNode{labels[0], {}}, 0, 0});
    }
    // Internal vertex with at least two children, then unary chains on top of everything so far.
    if (intb_ > 0 && labels.size() >= 2) {
      for (auto& f : forests(labels, 0, false)) {
        if (f.internals + 1 > intb_) continue;
        f.internals += 1;
        out.push_back(std::move(f));
      }
    }
    for (std::size_t lo = 0, hi = out.size(); lo < hi; lo = hi, hi = out.size()) {
      for (std::size_t a = lo; a < hi; ++a) {
        if (out[a].v2 + 1 > v2b_ || out[a].internals + 1 > intb_) continue;
        GenResult r{GenNode{0, {out[a].node}}, out[a].v2 + 1, out[a].internals + 1};
        out.push_back(std::move(r));
      }
    }
    return memo_.emplace(labels, std::move(out)).first->second;
  }

 private:
  TreeKind kind_;
  int v2b_, intb_;
  std::map<std::vector<int>, std::vector<GenResult>> memo_;
};

inline Tree to_tree(const GenNode& root, TreeKind kind, int s) {
  Tree t;
  t.kind = kind;
  t.s = s;
  t.parent.clear();
  t.label.clear();
  auto rec = [&](auto&& self, const GenNode& g, int par) -> void {
    const int id = t.size();
    t.parent.push_back(par);
    t.label.push_back(par < 0 ? 1 : g.label);
    for (const auto& k : g.kids) self(self, k, id);
  };
  rec(rec, root, -1);
  return normalize(t);
}

}  // namespace detail

inline Tree empty_tree() { return Tree{}; }

/// All admissible trees of the class, isomorphism-free, sorted by canonical string.
inline std::vector<Tree> enumerate_trees(int s, int l, int max_internal = 64, TreeKind kind = TreeKind::SingleRoot) {
  if (s < 1) throw DomainError("tree class needs s >= 1");
  if (l < 0) throw DomainError("tree class needs l >= 0");
  if (kind == TreeKind::TwiceRooted && s < 2) throw DomainError("twice-rooted trees need s >= 2");
  if (s == 1) return {empty_tree()};
  const int cap = derived_internal_cap(s, l, kind);
  if (cap > max_internal)
    throw EnumerationError("class (s=" + std::to_string(s) + ", l=" + std::to_string(l) + ") allows up to " +
                           std::to_string(cap) + " internal vertices (v2 + delta_{c1,1} <= 3l-2+s/2 gives v2 <= " +
                           std::to_string(max_v2(s, l, kind)) + ", plus s-2 branchings) but the cap is " +
                           std::to_string(max_internal));
  std::vector<int> labels;
  for (int x = 2; x <= s; ++x) labels.push_back(x);
  detail::TreeGenerator gen(kind, max_v2(s, l, kind), cap);
  std::map<std::string, Tree> found;
  for (const auto& f : gen.forests(labels, 1, true)) {
    Tree t = detail::to_tree(f.node, kind, s);
    if (!admissible(t, l)) continue;
    std::string key = t.canonical();
    if (!found.emplace(std::move(key), std::move(t)).second)
      throw ConsistencyError("enumeration produced a duplicate tree");
  }
  std::vector<Tree> out;
  out.reserve(found.size());
  for (auto& kv : found) out.push_back(std::move(kv.second));
  return out;
}

// ---------------------------------------------------------------- weights

/// External widths tau_i indexed by external label (first external label first).
struct ScaleAssignment {
  std::vector<double> internal_scales;  // one Lambda_I per internal line, in Tree::internal_lines() order
  std::vector<double> taus;             // undeformed tau_i; the weight uses (1 + delta) tau_i
};

/// Product of p_B over the lines with all vertex positions given.
inline double weight_factor(const Tree& t, const ScaleAssignment& a, std::span<const double> positions,
                            double delta) {
  if (static_cast<int>(positions.size()) != t.size()) throw ShapeError("positions must cover every vertex");
  const auto lines = t.internal_lines();
  if (a.internal_scales.size() != lines.size()) throw ShapeError("scale assignment must cover every internal line");
  const int n_ext = t.s - t.first_external_label() + 1;
  if (static_cast<int>(a.taus.size()) != std::max(0, n_ext)) throw ShapeError("one width per external line required");
  double w = 1.0;
  std::size_t k = 0;
  for (int v = 1; v < t.size(); ++v) {
    const double za = positions[t.parent[v]], zb = positions[v];
    if (t.is_external(v)) {
      w *= eval_pB((1.0 + delta) * a.taus[t.label[v] - t.first_external_label()], za, zb);
    } else {
      const double L = a.internal_scales[k++];
      w *= eval_pB((1.0 + delta) / (L * L), za, zb);
    }
  }
  return w;
}

struct WeightInput {
  double Lambda = 1.0;
  double Lambda0 = 100.0;
  double delta = 0.1;
  double z1 = 0.0;
  double z2 = 0.0;                 // second root, twice-rooted trees only
  std::vector<double> taus;        // per external label
  std::vector<double> anchors;     // per external label

  void validate(const Tree& t) const {
    if (!(Lambda > 0.0) || !(Lambda0 >= Lambda)) throw DomainError("weights need 0 < Lambda <= Lambda0");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("weights need 0 < delta < 1");
    if (!(z1 >= 0.0) || !(z2 >= 0.0)) throw DomainError("roots must lie on the half-line");
    const std::size_t n_ext = static_cast<std::size_t>(std::max(0, t.s - t.first_external_label() + 1));
    if (taus.size() != n_ext || anchors.size() != n_ext) throw ShapeError("one width and anchor per external vertex");
    for (double x : taus)
      if (!(x > 0.0)) throw DomainError("external widths must be > 0");
    for (double y : anchors)
      if (!(y >= 0.0)) throw DomainError("anchors must lie on the half-line");
  }
};

namespace detail {

class WeightEvaluator {
 public:
  WeightEvaluator(const Tree& t, const WeightInput& in, std::span<const double> scales)
      : t_(t), in_(in), ch_(t.children()), line_t_(t.size(), 0.0), width_(t.size(), INFINITY),
        kink_(t.size(), INFINITY), spots_(t.size()) {
    const auto lines = t.internal_lines();
    for (std::size_t k = 0; k < lines.size(); ++k) line_t_[lines[k]] = (1.0 + in.delta) / (scales[k] * scales[k]);
    for (int v = 1; v < t.size(); ++v)
      if (t.is_external(v)) line_t_[v] = (1.0 + in.delta) * in.taus[t.label[v] - t.first_external_label()];
    // Children follow their parents, so a reverse sweep visits subtrees first.
    for (int v = t.size() - 1; v >= 0; --v) {
      for (int c : ch_[v]) {
        double w = std::sqrt(line_t_[c]);
        if (t.is_external(c)) {
          spots_[v].push_back(in.anchors[t.label[c] - t.first_external_label()]);
        } else if (t.is_second_root(c)) {
          spots_[v].push_back(in.z2);
        } else {
          w = std::sqrt(line_t_[c] + (std::isinf(width_[c]) ? 0.0 : width_[c] * width_[c]));
          spots_[v].insert(spots_[v].end(), spots_[c].begin(), spots_[c].end());
        }
        width_[v] = std::min(width_[v], w);
        kink_[v] = std::min(kink_[v], std::sqrt(line_t_[c]));
      }
    }
    double spread = 0.0, far = std::max(in.z1, in.z2);
    for (int v = 1; v < t.size(); ++v) spread += line_t_[v];
    for (double y : in.anchors) far = std::max(far, y);
    reach_ = far + 9.0 * std::sqrt(spread);
    tables_.resize(t.size());
    point_.assign(t.size(), 0.0);
    for (int v = t.size() - 1; v >= 1; --v) {
      if (t.is_external(v)) continue;
      if (t.is_second_root(v)) {
        point_[v] = value(v, in.z2);
      } else {
        tabulate(v);
      }
    }
  }

  double root_value() { return value(0, in_.z1); }

  /// Product over the children of v of the line factor, internal positions integrated.
  double value(int v, double x) const {
    double w = 1.0;
    for (int c : ch_[v]) {
      w *= edge(c, x);
      if (w == 0.0) return 0.0;
    }
    return w;
  }

 private:
  struct Table {
    std::vector<double> x, wf;  // nodes and weight times subtree factor
  };

  // The subtree factor below v is smooth on the scale width_[v] away from the
  // wall and from the anchors it contains; the panels refine toward those.
  void tabulate(int v) {
    const double sig = std::sqrt(line_t_[v]);
    const double fine = std::min(sig, width_[v]);
    std::vector<std::pair<double, double>> foci{{0.0, std::min(fine, kink_[v])}};
    for (double p : spots_[v]) foci.emplace_back(p, fine);
    const auto br = graded_breaks(0.0, reach_, foci, 2.0 * sig);
    const CompositeRule cr = composite_rule(br, 12);
    Table& tb = tables_[v];
    tb.x = cr.x;
    tb.wf.resize(cr.x.size());
    for (std::size_t i = 0; i < cr.x.size(); ++i) tb.wf[i] = cr.w[i] * value(v, cr.x[i]);
  }

  double edge(int c, double x) const {
    const double tl = line_t_[c];
    if (t_.is_external(c)) return detail::gauss(tl, x - in_.anchors[t_.label[c] - t_.first_external_label()]);
    if (t_.is_second_root(c)) return detail::gauss(tl, x - in_.z2) * point_[c];
    const double cut = 9.0 * std::sqrt(tl);
    const Table& tb = tables_[c];
    const auto a = std::lower_bound(tb.x.begin(), tb.x.end(), x - cut) - tb.x.begin();
    const auto b = std::upper_bound(tb.x.begin(), tb.x.end(), x + cut) - tb.x.begin();
    CompensatedSum s;
    for (auto j = a; j < b; ++j) s += tb.wf[j] * detail::gauss(tl, x - tb.x[j]);
    return s.value();
  }

  const Tree& t_;
  const WeightInput& in_;
  std::vector<std::vector<int>> ch_;
  std::vector<double> line_t_;
  std::vector<double> width_;
  std::vector<double> kink_;
  std::vector<std::vector<double>> spots_;
  double reach_ = 0.0;
  std::vector<Table> tables_;
  std::vector<double> point_;
};

}  // namespace detail

/// int over internal positions of the weight factor at fixed internal scales.
inline double integrated_weight_at(const Tree& t, const WeightInput& in, std::span<const double> scales) {
  in.validate(t);
  if (scales.size() != t.internal_lines().size()) throw ShapeError("scale assignment must cover every internal line");
  if (t.empty()) return 1.0;
  detail::WeightEvaluator ev(t, in, scales);
  const double v = ev.root_value();
  if (!std::isfinite(v)) throw NumericalError("internal-vertex integration produced a non-finite value", v);
  return v;
}

struct IntegratedWeight {
  double value = 0.0;
  std::vector<double> scales;  // maximizing assignment
};

/// Scale candidates per line: log-spaced on [Lambda, min(Lambda0, 1e3 Lambda)], plus Lambda0.
inline std::vector<double> scale_candidates(double Lambda, double Lambda0, int n = 8) {
  const double hi = std::min(Lambda0, 1e3 * Lambda);
  std::vector<double> c = hi > Lambda ? logspace(Lambda, hi, n) : std::vector<double>{Lambda};
  if (Lambda0 > hi) c.push_back(Lambda0);
  return c;
}

/// sup over Lambda <= Lambda_I <= Lambda0 of the integrated weight factor.
inline IntegratedWeight integrated_weight(const Tree& t, const WeightInput& in) {
  in.validate(t);
  const std::size_t k = t.internal_lines().size();
  if (k == 0) return {integrated_weight_at(t, in, {}), {}};
  const auto cand = scale_candidates(in.Lambda, in.Lambda0);
  auto eval = [&](const std::vector<double>& sc) { return integrated_weight_at(t, in, sc); };

  std::vector<double> best(k, in.Lambda);
  double best_v = eval(best);
  if (k <= 2) {
    std::vector<std::size_t> idx(k, 0);
    while (true) {
      std::vector<double> sc(k);
      for (std::size_t i = 0; i < k; ++i) sc[i] = cand[idx[i]];
      const double v = eval(sc);
      if (v > best_v) best_v = v, best = sc;
      std::size_t i = 0;
      while (i < k && ++idx[i] == cand.size()) idx[i++] = 0;
      if (i == k) break;
    }
  } else {
    for (double c : cand) {
      const std::vector<double> sc(k, c);
      const double v = eval(sc);
      if (v > best_v) best_v = v, best = sc;
    }
    for (int sweep = 0; sweep < 2; ++sweep)
      for (std::size_t i = 0; i < k; ++i)
        for (double c : cand) {
          auto sc = best;
          sc[i] = c;
          const double v = eval(sc);
          if (v > best_v) best_v = v, best = sc;
        }
  }
  // Golden refinement per line between the neighbouring candidates, in log scale.
  for (std::size_t i = 0; i < k; ++i) {
    const auto pos = std::lower_bound(cand.begin(), cand.end(), best[i] * (1.0 - 1e-12)) - cand.begin();
    const double lo = std::log(cand[pos > 0 ? pos - 1 : 0]);
    const double hi = std::log(cand[std::min<std::size_t>(pos + 1, cand.size() - 1)]);
    if (!(hi > lo)) continue;
    auto f = [&](double u) {
      auto sc = best;
      sc[i] = std::exp(u);
      return eval(sc);
    };
    const auto [u, v] = golden_max(f, lo, hi, 1e-6 * std::max(1.0, hi - lo));
    if (v > best_v) best_v = v, best[i] = std::exp(u);
  }
  return {best_v, best};
}

struct GlobalWeight {
  double value = 0.0;
  std::vector<double> per_tree;
  std::optional<double> chain_bound;  // twice-rooted classes only
};

/// Sum over lengths n of sup over the chain scales of p_B((1+delta)/Lambda_n^2; z1, z2),
/// Lambda_n^{-2} = sum of Lambda_I^{-2}.
inline double chain_bound(int n_max, const WeightInput& in) {
  double s = 0.0;
  const double d = in.z1 - in.z2;
  for (int n = 1; n <= n_max; ++n) {
    // Lambda_n^{-2} ranges over [n/Lambda0^2, n/Lambda^2]; p_B(t) peaks at t = d^2.
    const double tlo = (1.0 + in.delta) * n / (in.Lambda0 * in.Lambda0);
    const double thi = (1.0 + in.delta) * n / (in.Lambda * in.Lambda);
    s += detail::gauss(std::clamp(d * d, tlo, thi), d);
  }
  return s;
}

/// Longest chain a twice-rooted class with s = 2 allows: v2 + 1 <= 3l - 2 + 1/2.
inline int max_chain_lines(int l) { return std::max(0, 3 * l - 2); }

/// Sum of integrated weights over the admissible class.
inline GlobalWeight global_weight(int s, int l, const WeightInput& in, TreeKind kind = TreeKind::SingleRoot,
                                  int max_internal = 64) {
  GlobalWeight g;
  if (s == 1 && kind == TreeKind::SingleRoot) {
    g.value = 1.0;
    g.per_tree = {1.0};
    return g;
  }
  const auto trees = enumerate_trees(s, l, max_internal, kind);
  CompensatedSum sum;
  for (const auto& t : trees) {
    const double v = integrated_weight(t, in).value;
    g.per_tree.push_back(v);
    sum += v;
  }
  g.value = sum.value();
  if (kind == TreeKind::TwiceRooted && s == 2) g.chain_bound = chain_bound(max_chain_lines(l), in);
  return g;
}

// -------------------------------------------------------------- reduction

struct ReductionResult {
  Tree tree;
  bool empty = false;        // nothing but the root is left
  int removed_internal = 0;  // internal vertices removed by the cascade
  int v2_before = 0;
  int v2_after = 0;
  int root_incidence_before = 0;
  int root_incidence_after = 0;
};

/// Removes the externals labelled i and j and cascades away internal vertices
/// left with incidence 1. Remaining externals are relabelled consecutively.
inline ReductionResult reduce_tree(const Tree& t, int label_i, int label_j) {
  if (label_i == label_j) throw DomainError("reduction needs two distinct external vertices");
  const int vi = t.vertex_with_label(label_i), vj = t.vertex_with_label(label_j);
  if (vi < 0 || vj < 0 || !t.is_external(vi) || !t.is_external(vj))
    throw DomainError("reduction arguments must be external vertices");
  ReductionResult res;
  res.v2_before = t.v2();
  res.root_incidence_before = t.root_incidence();
  std::vector<bool> alive(t.size(), true);
  alive[vi] = alive[vj] = false;
  auto kids = [&](int v) {
    int c = 0;
    for (int u = 1; u < t.size(); ++u) c += alive[u] && t.parent[u] == v;
    return c;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (int v = 1; v < t.size(); ++v)
      if (alive[v] && t.is_internal(v) && kids(v) == 0) {
        alive[v] = false;
        ++res.removed_internal;
        changed = true;
      }
  }
  Tree out;
  out.kind = t.kind;
  out.s = t.s - 2;
  out.parent.clear();
  out.label.clear();
  std::vector<int> id(t.size(), -1);
  int next_label = t.first_external_label();
  const auto ext = t.externals();
  std::map<int, int> relabel;
  for (int v : ext)
    if (alive[v]) relabel[v] = next_label++;
  for (int v = 0; v < t.size(); ++v) {
    if (!alive[v]) continue;
    id[v] = out.size();
    out.parent.push_back(v == 0 ? -1 : id[t.parent[v]]);
    out.label.push_back(t.is_external(v) ? relabel[v] : t.label[v]);
  }
  res.tree = normalize(out);
  res.empty = res.tree.empty();
  res.v2_after = res.tree.v2();
  res.root_incidence_after = res.tree.root_incidence();
  return res;
}

}  // namespace hsrg
