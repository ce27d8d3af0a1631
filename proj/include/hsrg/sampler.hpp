// Gaussian fields on a half-line grid with the regularized propagator as
// covariance, for one transverse momentum mode.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "hsrg/grid.hpp"
#include "hsrg/numerics.hpp"
#include "hsrg/propagator.hpp"

namespace hsrg {

/// Philox4x32-10 counter-based generator.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

  static Key key_from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }

  /// Two standard normals for (stream, index) by Box-Muller on two 53-bit uniforms.
  static std::array<double, 2> normals(Key key, std::uint64_t stream, std::uint64_t index) {
    const Counter out = apply({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                               static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
                              key);
    auto u53 = [](std::uint32_t a, std::uint32_t b) {
      const std::uint64_t v = ((static_cast<std::uint64_t>(a) << 32) | b) >> 11;
      return (static_cast<double>(v) + 0.5) * 0x1.0p-53;  // in (0, 1)
    };
    const double u1 = u53(out[0], out[1]), u2 = u53(out[2], out[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(2.0 * kPi * u2), r * std::sin(2.0 * kPi * u2)};
  }
};

struct CovarianceMatrix {
  std::vector<double> z;
  std::vector<double> weights;
  double p = 0.0;
  PropagatorSpec spec;
  Eigen::MatrixXd entries;   // C_reg(p; z_i, z_j)
  Eigen::MatrixXd weighted;  // sqrt(w_i) C_ij sqrt(w_j), the operator on the grid
  Eigen::VectorXd eigenvalues;  // of `entries`, ascending
  Eigen::MatrixXd eigenvectors;
  double lambda_max = 0.0;
  double eigen_floor = 0.0;   // smallest eigenvalue / largest
  double weighted_floor = 0.0;

  [[nodiscard]] std::size_t size() const { return z.size(); }
};

inline constexpr double kEigenFloor = -1e-10;

/// Dense covariance on arbitrary nodes with quadrature weights.
inline CovarianceMatrix build_covariance(const PropagatorSpec& spec, std::vector<double> z, std::vector<double> w,
                                         double p) {
  spec.validate();
  if (!(spec.Lambda > 0.0)) throw DomainError("sampling needs Lambda > 0");
  if (!(p >= 0.0)) throw DomainError("momentum magnitude must be >= 0");
  if (z.size() != w.size()) throw ShapeError("nodes and weights differ in length");
  CovarianceMatrix cov;
  cov.spec = spec;
  cov.p = p;
  cov.z = std::move(z);
  cov.weights = std::move(w);
  const auto n = static_cast<Eigen::Index>(cov.z.size());
  cov.entries.resize(n, n);
  cov.weighted.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = C_reg(spec, p, cov.z[i], cov.z[j]);
      cov.entries(i, j) = cov.entries(j, i) = v;
    }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      cov.weighted(i, j) = std::sqrt(cov.weights[i] * cov.weights[j]) * cov.entries(i, j);
  if (n == 0) return cov;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.entries);
  if (es.info() != Eigen::Success) throw PositivityError("eigendecomposition failed");
  cov.eigenvalues = es.eigenvalues();
  cov.eigenvectors = es.eigenvectors();
  cov.lambda_max = cov.eigenvalues(n - 1);
  cov.eigen_floor = cov.lambda_max > 0.0 ? cov.eigenvalues(0) / cov.lambda_max : 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ew(cov.weighted, Eigen::EigenvaluesOnly);
  const double wmax = ew.eigenvalues()(n - 1);
  cov.weighted_floor = wmax > 0.0 ? ew.eigenvalues()(0) / wmax : 0.0;
  if (cov.eigen_floor < kEigenFloor || cov.weighted_floor < kEigenFloor)
    throw PositivityError("covariance has a negative eigenvalue beyond round-off");
  return cov;
}

inline CovarianceMatrix build_covariance(const PropagatorSpec& spec, const GridHalfLine& grid, double p) {
  return build_covariance(spec, grid.nodes, grid.weights, p);
}

/// Rows are samples.
struct SampleSet {
  Eigen::MatrixXd fields;
  std::uint64_t seed = 0;
};

/// Zero-mean Gaussian vectors through the clipped symmetric square root.
/// Sample k uses stream k of the generator, so results do not depend on `workers`.
inline SampleSet sample_fields(const CovarianceMatrix& cov, std::size_t count, std::uint64_t seed, int workers = 1) {
  SampleSet out;
  out.seed = seed;
  const auto n = static_cast<Eigen::Index>(cov.size());
  out.fields.resize(static_cast<Eigen::Index>(count), n);
  if (count == 0 || n == 0) return out;
  if (cov.eigen_floor < kEigenFloor) throw PositivityError("covariance is not positive within tolerance");
  Eigen::VectorXd sq(n);
  for (Eigen::Index i = 0; i < n; ++i) sq(i) = std::sqrt(std::max(0.0, cov.eigenvalues(i)));
  const Eigen::MatrixXd root = cov.eigenvectors * sq.asDiagonal();  // C = root root^T
  const auto key = Philox4x32::key_from_seed(seed);
  auto work = [&](std::size_t begin, std::size_t end) {
    Eigen::VectorXd xi(n);
    for (std::size_t k = begin; k < end; ++k) {
      for (Eigen::Index i = 0; i < n; i += 2) {
        const auto g = Philox4x32::normals(key, k, static_cast<std::uint64_t>(i / 2));
        xi(i) = g[0];
        if (i + 1 < n) xi(i + 1) = g[1];
      }
      out.fields.row(static_cast<Eigen::Index>(k)) = (root * xi).transpose();
    }
  };
  const std::size_t nw = static_cast<std::size_t>(std::max(1, workers));
  if (nw == 1 || count < 2 * nw) {
    work(0, count);
  } else {
    std::vector<std::thread> pool;
    const std::size_t block = (count + nw - 1) / nw;
    for (std::size_t b = 0; b < count; b += block) pool.emplace_back(work, b, std::min(count, b + block));
    for (auto& t : pool) t.join();
  }
  return out;
}

struct SampleStatistics {
  std::size_t count = 0;
  double max_mean_sigma = 0.0;          // max_i |mean_i| / (sigma_i / sqrt(N))
  double covariance_pass_fraction = 0.0;  // entries within 3 standard errors
  double max_cov_z = 0.0;
  Eigen::MatrixXd empirical;
};

/// Compares the sample covariance with the exact one entrywise; the standard
/// error of entry ij is sqrt((C_ii C_jj + C_ij^2) / N).
inline SampleStatistics sample_statistics(const CovarianceMatrix& cov, const SampleSet& s) {
  SampleStatistics st;
  st.count = static_cast<std::size_t>(s.fields.rows());
  const auto n = s.fields.cols();
  if (st.count == 0 || n == 0) return st;
  const double N = static_cast<double>(st.count);
  const Eigen::RowVectorXd mean = s.fields.colwise().mean();
  st.empirical = (s.fields.transpose() * s.fields) / N;
  int pass = 0, total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sd = std::sqrt(std::max(cov.entries(i, i), 0.0) / N);
    if (sd > 0.0) st.max_mean_sigma = std::max(st.max_mean_sigma, std::abs(mean(i)) / sd);
    for (Eigen::Index j = i; j < n; ++j) {
      const double c = cov.entries(i, j);
      const double se = std::sqrt((cov.entries(i, i) * cov.entries(j, j) + c * c) / N);
      const double zsc = se > 0.0 ? std::abs(st.empirical(i, j) - c) / se : 0.0;
      st.max_cov_z = std::max(st.max_cov_z, zsc);
      pass += zsc <= 3.0 ? 1 : 0;
      ++total;
    }
  }
  st.covariance_pass_fraction = static_cast<double>(pass) / total;
  return st;
}

struct RobinRegression {
  double c = 0.0;
  double slope = 0.0;       // from the samples
  double population = 0.0;  // the same stencil applied to the exact covariance
  double stderr_ = 0.0;
  double h = 0.0;
  std::size_t count = 0;
};

/// Regresses the one-sided second-order difference quotient at 0 on the field
/// value at 0, from samples on the nodes {0, h, 2h} with h = 0.02 / Lambda0.
inline RobinRegression robin_regression(const PropagatorSpec& spec, double p, std::size_t count, std::uint64_t seed,
                                        int workers = 1) {
  const RobinConstant rc = spec.bc.robin_constant();
  if (rc.is_dirichlet()) throw DomainError("the regression needs a finite Robin constant");
  RobinRegression rr;
  rr.c = rc.value();
  rr.h = 0.02 / spec.Lambda0;
  rr.count = count;
  const CovarianceMatrix cov = build_covariance(spec, {0.0, rr.h, 2.0 * rr.h}, {1.0, 1.0, 1.0}, p);
  const auto& C = cov.entries;
  rr.population = (-3.0 * C(0, 0) + 4.0 * C(0, 1) - C(0, 2)) / (2.0 * rr.h * C(0, 0));
  const SampleSet s = sample_fields(cov, count, seed, workers);
  CompensatedSum sxx, sxy;
  std::vector<double> x(count), y(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    x[k] = s.fields(r, 0);
    y[k] = (-3.0 * s.fields(r, 0) + 4.0 * s.fields(r, 1) - s.fields(r, 2)) / (2.0 * rr.h);
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  rr.slope = sxy.value() / sxx.value();
  CompensatedSum res;
  for (std::size_t k = 0; k < count; ++k) res += std::pow(y[k] - rr.slope * x[k], 2);
  const double var = res.value() / static_cast<double>(count > 1 ? count - 1 : 1);
  rr.stderr_ = std::sqrt(var / sxx.value());
  return rr;
}

}  // namespace hsrg
