// Graded grid on the truncated half-line [0, zmax].
#pragma once

#include <cmath>
#include <vector>

#include "hsrg/numerics.hpp"

namespace hsrg {

struct GridHalfLine {
  std::vector<double> nodes;
  std::vector<double> weights;  // trapezoid weights on the graded nodes
  double zmax = 0.0;

  /// Geometric grading: spacings h0 r^k with h0 fixed by the node count.
  static GridHalfLine graded(int n_nodes, double ratio, double zmax) {
    if (n_nodes < 2) throw DomainError("grid needs at least two nodes");
    if (!(ratio >= 1.0)) throw DomainError("grid grading ratio must be >= 1");
    if (!(zmax > 0.0)) throw DomainError("grid extent must be > 0");
    GridHalfLine g;
    g.zmax = zmax;
    const int k = n_nodes - 1;
    const double total = ratio == 1.0 ? k : (std::pow(ratio, k) - 1.0) / (ratio - 1.0);
    const double h0 = zmax / total;
    g.nodes.resize(n_nodes);
    g.nodes[0] = 0.0;
    double h = h0;
    for (int i = 1; i < n_nodes; ++i) {
      g.nodes[i] = g.nodes[i - 1] + h;
      h *= ratio;
    }
    g.nodes.back() = zmax;
    g.weights.assign(n_nodes, 0.0);
    for (int i = 0; i + 1 < n_nodes; ++i) {
      const double d = g.nodes[i + 1] - g.nodes[i];
      g.weights[i] += 0.5 * d;
      g.weights[i + 1] += 0.5 * d;
    }
    return g;
  }

  /// Defaults: 96 nodes, ratio 1.08, zmax = 12/m.
  static GridHalfLine defaults(double m) { return graded(96, 1.08, 12.0 / m); }

  [[nodiscard]] std::size_t size() const { return nodes.size(); }
  [[nodiscard]] double spacing_ratio() const {
    const std::size_t n = nodes.size();
    return (nodes[n - 1] - nodes[n - 2]) / (nodes[1] - nodes[0]);
  }
};

}  // namespace hsrg
