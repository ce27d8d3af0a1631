// Numerical primitives shared by every module: error types, the scaled
// complementary error function, compensated summation, Gauss-Legendre and
// adaptive Gauss-Kronrod quadrature, and small fitting helpers.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsrg {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  double achieved = 0.0;
  NumericalError(const std::string& what, double achieved_tol)
      : Error(what), achieved(achieved_tol) {}
};
struct EnumerationError : Error {
  using Error::Error;
};
struct ChannelError : Error {
  using Error::Error;
};
struct SchedulingError : Error {
  using Error::Error;
};
struct ConsistencyError : Error {
  using Error::Error;
};
struct AccuracyError : Error {
  double lambda_lo = 0.0, lambda_hi = 0.0;
  AccuracyError(const std::string& what, double lo, double hi)
      : Error(what), lambda_lo(lo), lambda_hi(hi) {}
};
struct PositivityError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSqrtPi = 1.7724538509055160273;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kUnderflow = 1e-300;

/// Flushes values whose magnitude is below 1e-300 to exact zero.
inline double flush(double v) { return std::abs(v) < kUnderflow ? 0.0 : v; }

/// erfcx(x) = exp(x^2) erfc(x), accurate for all real x without overflow
/// for x >= 0. Negative arguments use the reflection 2 exp(x^2) - erfcx(-x).
inline double erfcx(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) {
    if (x < -26.6) return std::numeric_limits<double>::infinity();
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x < 5.0) return std::exp(x * x) * std::erfc(x);
  if (x > 1e8) return 1.0 / (kSqrtPi * x);
  // Continued fraction 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))) by
  // the modified Lentz method.
  const double tiny = 1e-300;
  double f = x, C = x, D = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double a = 0.5 * k;
    D = x + a * D;
    if (D == 0.0) D = tiny;
    C = x + a / C;
    if (C == 0.0) C = tiny;
    D = 1.0 / D;
    const double delta = C * D;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / (kSqrtPi * f);
}

/// Neumaier-compensated accumulator; the summation order is the call order,
/// so results are reproducible for a fixed sequence of additions.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) {
    add(v);
    return *this;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct QuadRule {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

namespace detail {
inline QuadRule make_gauss_legendre(int n) {
  QuadRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double p0 = 1.0, p1 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}
}  // namespace detail

/// Cached n-point Gauss-Legendre rule on [-1, 1].
inline const QuadRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, QuadRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::make_gauss_legendre(n)).first;
  return it->second;
}

/// Fixed Gauss-Legendre integral of f on [a, b].
template <class F>
double gl_integrate(F&& f, double a, double b, int n) {
  const QuadRule& r = gauss_legendre(n);
  const double h = 0.5 * (b - a), c = 0.5 * (a + b);
  CompensatedSum s;
  for (int i = 0; i < n; ++i) s += r.w[i] * f(c + h * r.x[i]);
  return h * s.value();
}

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  bool converged = true;
};

struct QuadOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_intervals = 4000;
  bool throw_on_failure = true;
};

namespace detail {
// 15-point Kronrod extension of the 7-point Gauss rule.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
void gk15(F& f, double a, double b, double& result, double& err) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double rk = fc * kWgk[7];
  double rg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double f1 = f(c - dx), f2 = f(c + dx);
    rk += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) rg += kWg[j / 2] * (f1 + f2);
  }
  result = rk * h;
  err = std::abs((rk - rg) * h);
}
}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on [a, b]; the interval
/// with the largest error estimate is bisected until the total estimate
/// meets max(abs_tol, rel_tol * |I|).
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, const QuadOptions& opt = {}) {
  QuadResult out;
  if (a == b) return out;
  struct Piece {
    double a, b, v, e;
    bool operator<(const Piece& o) const { return e < o.e; }
  };
  std::priority_queue<Piece> heap;
  double v, e;
  detail::gk15(f, a, b, v, e);
  out.evaluations = 15;
  heap.push({a, b, v, e});
  double total_v = v, total_e = e;
  int intervals = 1;
  while (total_e > std::max(opt.abs_tol, opt.rel_tol * std::abs(total_v))) {
    if (intervals >= opt.max_intervals) {
      out.converged = false;
      break;
    }
    Piece p = heap.top();
    heap.pop();
    const double mid = 0.5 * (p.a + p.b);
    if (!(mid > p.a && mid < p.b)) {
      out.converged = false;
      heap.push(p);
      break;
    }
    double v1, e1, v2, e2;
    detail::gk15(f, p.a, mid, v1, e1);
    detail::gk15(f, mid, p.b, v2, e2);
    out.evaluations += 30;
    heap.push({p.a, mid, v1, e1});
    heap.push({mid, p.b, v2, e2});
    ++intervals;
    // Recompute totals from scratch at intervals to limit drift.
    total_v += v1 + v2 - p.v;
    total_e += e1 + e2 - p.e;
  }
  // Deterministic final sum ordered by left endpoint.
  std::vector<Piece> pieces;
  pieces.reserve(heap.size());
  while (!heap.empty()) {
    pieces.push_back(heap.top());
    heap.pop();
  }
  std::sort(pieces.begin(), pieces.end(), [](const Piece& x, const Piece& y) { return x.a < y.a; });
  CompensatedSum sv, se;
  for (const auto& p : pieces) {
    sv += p.v;
    se += p.e;
  }
  out.value = sv.value();
  out.error = se.value();
  if (!out.converged && opt.throw_on_failure)
    throw NumericalError("adaptive quadrature did not converge", out.error);
  return out;
}

/// Adaptive quadrature over consecutive breakpoints; tolerances are shared
/// across panels in proportion to their count.
template <class F>
QuadResult integrate_panels(F&& f, std::span<const double> breaks, const QuadOptions& opt = {}) {
  QuadResult out;
  if (breaks.size() < 2) return out;
  QuadOptions o = opt;
  o.abs_tol = opt.abs_tol / static_cast<double>(breaks.size() - 1);
  CompensatedSum sv, se;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] <= breaks[i]) continue;
    QuadResult r = integrate_adaptive(f, breaks[i], breaks[i + 1], o);
    sv += r.value;
    se += r.error;
    out.evaluations += r.evaluations;
    out.converged = out.converged && r.converged;
  }
  out.value = sv.value();
  out.error = se.value();
  return out;
}

/// Composite rule: nodes and weights of an n-point Gauss-Legendre rule on
/// every panel between consecutive breakpoints.
struct CompositeRule {
  std::vector<double> x;
  std::vector<double> w;

  template <class F>
  double integrate(F&& f) const {
    CompensatedSum s;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(x[i]);
    return s.value();
  }
};

inline CompositeRule composite_rule(std::span<const double> breaks, int n) {
  CompositeRule cr;
  const QuadRule& r = gauss_legendre(n);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    if (!(b > a)) continue;
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (int k = 0; k < n; ++k) {
      cr.x.push_back(c + h * r.x[k]);
      cr.w.push_back(h * r.w[k]);
    }
  }
  return cr;
}

/// Breakpoints of a panel set on [lo, hi] refining geometrically (ratio 2)
/// toward each focus (position, finest width) and never wider than h_max.
inline std::vector<double> graded_breaks(double lo, double hi,
                                         std::span<const std::pair<double, double>> foci, double h_max) {
  std::vector<double> pts{lo, hi};
  for (const auto& [f, h_min] : foci) {
    if (f < lo || f > hi) continue;
    pts.push_back(f);
    for (int side = -1; side <= 1; side += 2) {
      double h = std::min(h_min, h_max);
      double pos = f;
      while (h < h_max) {
        pos += side * h;
        if (pos <= lo || pos >= hi) break;
        pts.push_back(pos);
        h = 2.0 * h;
      }
    }
  }
  std::sort(pts.begin(), pts.end());
  // Keep, for each region, the finest requested spacing: a panel between two
  // consecutive points is accepted as is, then capped at h_max.
  std::vector<double> out;
  for (double p : pts) {
    if (out.empty() || p - out.back() > 1e-13 * std::max(1.0, std::abs(p))) out.push_back(p);
  }
  std::vector<double> res{out.front()};
  for (std::size_t i = 1; i < out.size(); ++i) {
    const double a = res.back(), b = out[i];
    const int k = static_cast<int>(std::ceil((b - a) / h_max - 1e-9));
    for (int j = 1; j < k; ++j) res.push_back(a + (b - a) * j / k);
    res.push_back(b);
  }
  return res;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw DomainError("fit_line needs at least two paired points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Least squares y = c0 + c1 x + c2 z (two regressors).
inline std::array<double, 3> fit_plane(std::span<const double> x, std::span<const double> z,
                                       std::span<const double> y) {
  const std::size_t n = x.size();
  double A[3][3] = {}, b[3] = {};
  for (std::size_t i = 0; i < n; ++i) {
    const double r[3] = {1.0, x[i], z[i]};
    for (int p = 0; p < 3; ++p) {
      b[p] += r[p] * y[i];
      for (int q = 0; q < 3; ++q) A[p][q] += r[p] * r[q];
    }
  }
  // Gaussian elimination with partial pivoting.
  int idx[3] = {0, 1, 2};
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    if (std::abs(A[c][c]) < 1e-300) throw NumericalError("singular plane fit", 0.0);
    for (int r = c + 1; r < 3; ++r) {
      const double f = A[r][c] / A[c][c];
      for (int q = c; q < 3; ++q) A[r][q] -= f * A[c][q];
      b[r] -= f * b[c];
    }
  }
  (void)idx;
  std::array<double, 3> s{};
  for (int c = 2; c >= 0; --c) {
    double v = b[c];
    for (int q = c + 1; q < 3; ++q) v -= A[c][q] * s[q];
    s[c] = v / A[c][c];
  }
  return s;
}

/// Golden-section maximization of a unimodal function on [a, b].
template <class F>
std::pair<double, double> golden_max(F&& f, double a, double b, double tol, int max_iter = 60) {
  const double g = 0.6180339887498949;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    }
  }
  return f1 > f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

/// Log-spaced values lo * (hi/lo)^(i/(n-1)), i = 0..n-1.
inline std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  const double r = std::log(hi / lo);
  for (int i = 0; i < n; ++i) v[i] = lo * std::exp(r * i / (n - 1));
  v.back() = hi;
  return v;
}

}  // namespace hsrg
