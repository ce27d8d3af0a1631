// Brute-force reference for the tree enumeration: every rooted tree by level
// sequences, every labelling, an independent canonical form and admissibility test.
#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace tree_oracle {

/// All unlabeled rooted trees on n vertices as parent arrays, one per
/// isomorphism class, from canonical level sequences.
inline std::vector<std::vector<int>> rooted_trees(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> L(n);
  std::iota(L.begin(), L.end(), 1);
  while (true) {
    std::vector<int> par(n, -1);
    for (int i = 1; i < n; ++i)
      for (int j = i - 1; j >= 0; --j)
        if (L[j] == L[i] - 1) {
          par[i] = j;
          break;
        }
    out.push_back(par);
    int p = -1;
    for (int i = n - 1; i >= 1; --i)
      if (L[i] > 2) {
        p = i;
        break;
      }
    if (p < 0) break;
    int q = p - 1;
    while (L[q] != L[p] - 1) --q;
    for (int i = p; i < n; ++i) L[i] = L[i - (p - q)];
  }
  return out;
}

/// Canonical string of a labelled rooted tree: z1 root, z2 second root, y<k> externals, v internals.
inline std::string canon(const std::vector<int>& par, const std::vector<int>& lab, bool twice) {
  const int n = static_cast<int>(par.size());
  std::vector<std::vector<int>> ch(n);
  for (int v = 1; v < n; ++v) ch[par[v]].push_back(v);
  std::function<std::string(int)> rec = [&](int v) {
    std::string h = v == 0 ? "z1" : (twice && lab[v] == 2) ? "z2" : lab[v] > 0 ? "y" + std::to_string(lab[v]) : "v";
    if (ch[v].empty()) return h;
    std::vector<std::string> parts;
    for (int c : ch[v]) parts.push_back(rec(c));
    std::sort(parts.begin(), parts.end());
    h += '[';
    for (std::size_t i = 0; i < parts.size(); ++i) h += (i ? "," : "") + parts[i];
    return h + ']';
  };
  return rec(0);
}

inline bool oracle_admissible(const std::vector<int>& par, const std::vector<int>& lab, int s, int l, bool twice) {
  const int n = static_cast<int>(par.size());
  std::vector<int> deg(n, 0);
  for (int v = 1; v < n; ++v) ++deg[v], ++deg[par[v]];
  int v2 = 0;
  for (int v = 1; v < n; ++v)
    if (!(twice && lab[v] == 2) && deg[v] == 2) ++v2;
  const int d = deg[0] == 1 ? 1 : 0;
  const double rhs = 3.0 * l - 2.0 + (twice ? (s - 1) / 2.0 : s / 2.0);
  if (l == 0) return v2 == 0 && (rhs < 0 || v2 + d <= rhs);
  return v2 + d <= rhs;
}

/// Brute-force class: every rooted tree with n_lo..n_hi vertices and every labelling.
inline std::set<std::string> brute_force(int s, int l, bool twice, int n_hi) {
  std::set<std::string> out;
  const int n_lo = s;  // root plus the s-1 labelled vertices
  for (int n = n_lo; n <= n_hi; ++n) {
    for (const auto& par : rooted_trees(n)) {
      std::vector<int> leaves, inner;
      std::vector<int> kids(n, 0);
      for (int v = 1; v < n; ++v) ++kids[par[v]];
      for (int v = 1; v < n; ++v) (kids[v] == 0 ? leaves : inner).push_back(v);
      auto assign = [&](int z2) {
        std::vector<int> ext;
        for (int v : leaves)
          if (v != z2) ext.push_back(v);
        const int first = twice ? 3 : 2;
        if (static_cast<int>(ext.size()) != s - first + 1) return;
        std::vector<int> perm(ext.size());
        std::iota(perm.begin(), perm.end(), first);
        do {
          std::vector<int> lab(n, 0);
          lab[0] = 1;
          if (z2 > 0) lab[z2] = 2;
          for (std::size_t i = 0; i < ext.size(); ++i) lab[ext[i]] = perm[i];
          if (oracle_admissible(par, lab, s, l, twice)) out.insert(canon(par, lab, twice));
        } while (std::next_permutation(perm.begin(), perm.end()));
      };
      if (twice) {
        for (int v = 1; v < n; ++v) assign(v);
      } else {
        assign(-1);
      }
    }
  }
  return out;
}

}  // namespace tree_oracle
