// Shared independent oracles for the test suites: adaptive quadrature,
// simple statistical tests, and small distribution helpers. Everything here
// is deliberately implemented apart from the library code it checks.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace testutil {

inline double simpson_rule(const std::function<double(double)>& f, double a,
                           double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_impl(const std::function<double(double)>& f,
                                    double a, double b, double fa, double fm,
                                    double fb, double whole, double tol,
                                    int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson_rule(f, a, m, fa, flm, fm);
  const double right = simpson_rule(f, m, b, fm, frm, fb);
  if (depth <= 0) return left + right;
  if (std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson_impl(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         adaptive_simpson_impl(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

/// Adaptive Simpson quadrature of f over [a, b]. The interval is first cut
/// into fixed panels so concentrated integrands are not missed by the probe
/// points.
inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-10, int max_depth = 40,
                        int panels = 32) {
  double total = 0.0;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    const double hi = lo + h;
    const double fa = f(lo);
    const double fb = f(hi);
    const double fm = f(0.5 * (lo + hi));
    const double whole = simpson_rule(f, lo, hi, fa, fm, fb);
    total += adaptive_simpson_impl(f, lo, hi, fa, fm, fb, whole, tol / panels,
                                   max_depth);
  }
  return total;
}

/// E[g(||r||^2)] for r ~ N(0, v I3), via the chi-square(3) radial density.
inline double radial_expectation(const std::function<double(double)>& g,
                                 double v) {
  const auto integrand = [&](double u) {
    if (u <= 0.0) return 0.0;
    return g(v * u) * std::sqrt(u) * std::exp(-0.5 * u) /
           std::sqrt(2.0 * 3.14159265358979323846);
  };
  return integrate(integrand, 0.0, 400.0, 1e-12);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> values,
                           const std::function<double(double)>& cdf) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double c = cdf(values[i]);
    d = std::max(d, std::abs(c - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - c));
  }
  return d;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    const double fa = static_cast<double>(i) / static_cast<double>(a.size());
    const double fb = static_cast<double>(j) / static_cast<double>(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

/// KS critical value at significance alpha (asymptotic form).
inline double ks_critical(double alpha, double n) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c / std::sqrt(n);
}

inline double ks_two_sample_critical(double alpha, double n, double m) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt((n + m) / (n * m));
}

/// Gauss-Legendre nodes and weights on [-1, 1] via Newton iteration.
inline void gauss_legendre(int n, std::vector<double>& nodes,
                           std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) {
        p0 = 1.0;
        p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double dpf = n * (x * p1 - p0) / (x * x - 1.0);
        weights[i] = 2.0 / ((1.0 - x * x) * dpf * dpf);
        break;
      }
    }
    nodes[i] = x;
  }
}

/// Tensor-product Gauss-Legendre integration over a box in up to 6 dims.
inline double integrate_box(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& lo, const std::vector<double>& hi,
    int points_per_dim = 24) {
  std::vector<double> nodes, weights;
  gauss_legendre(points_per_dim, nodes, weights);
  const std::size_t d = lo.size();
  std::vector<double> x(d, 0.0);
  double total = 0.0;
  std::function<void(std::size_t, double)> recurse = [&](std::size_t dim,
                                                         double w) {
    if (dim == d) {
      total += w * f(x);
      return;
    }
    const double mid = 0.5 * (lo[dim] + hi[dim]);
    const double half = 0.5 * (hi[dim] - lo[dim]);
    for (int i = 0; i < points_per_dim; ++i) {
      x[dim] = mid + half * nodes[i];
      recurse(dim + 1, w * half * weights[i]);
    }
  };
  recurse(0, 1.0);
  return total;
}

/// Numerical KL(g1 || g2) of two Gaussians by Gauss-Legendre quadrature in
/// the whitened frame of g1 (x = mu1 + L1 y over y in [-8, 8]^d). Densities
/// are evaluated from scratch (inverse + determinant), independent of the
/// library's solver path.
template <typename Vec, typename Mat>
double kl_numeric_whitened(const Vec& mu1, const Mat& cov1, const Vec& mu2,
                           const Mat& cov2, int points_per_dim = 48) {
  const int d = static_cast<int>(mu1.size());
  const Mat l1 = Eigen::LLT<Mat>(cov1).matrixL();
  const Mat inv1 = cov1.inverse();
  const Mat inv2 = cov2.inverse();
  const double log_norm1 =
      -0.5 * d * std::log(2.0 * 3.14159265358979323846) -
      0.5 * std::log(cov1.determinant());
  const double log_norm2 =
      -0.5 * d * std::log(2.0 * 3.14159265358979323846) -
      0.5 * std::log(cov2.determinant());
  std::vector<double> lo(d, -8.0), hi(d, 8.0);
  const auto integrand = [&](const std::vector<double>& yv) {
    Vec y(d);
    for (int i = 0; i < d; ++i) y(i) = yv[i];
    const Vec x = mu1 + l1 * y;
    const double lp = log_norm1 - 0.5 * (x - mu1).dot(inv1 * (x - mu1));
    const double lq = log_norm2 - 0.5 * (x - mu2).dot(inv2 * (x - mu2));
    // Jacobian det(L1) converts the y-integral back to x; together with
    // exp(lp) this is p1(x) dx.
    return std::exp(lp) * (lp - lq);
  };
  const double det_l1 = Mat(l1).determinant();
  return det_l1 * integrate_box(integrand, lo, hi, points_per_dim);
}

template <typename Vec, typename Mat>
double skl_numeric_whitened(const Vec& mu1, const Mat& cov1, const Vec& mu2,
                            const Mat& cov2, int points_per_dim = 48) {
  return kl_numeric_whitened(mu1, cov1, mu2, cov2, points_per_dim) +
         kl_numeric_whitened(mu2, cov2, mu1, cov1, points_per_dim);
}

inline double gauss_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) /
         std::sqrt(2.0 * 3.14159265358979323846 * var);
}

/// Weighted 1-D Gaussian mixture for integration oracles.
struct Mix1D {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> vars;

  double operator()(double x) const {
    double p = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      p += weights[i] * gauss_pdf(x, means[i], vars[i]);
    }
    return p;
  }

  double min_support(double k = 12.0) const {
    double lo = means[0] - k * std::sqrt(vars[0]);
    for (std::size_t i = 1; i < means.size(); ++i) {
      lo = std::min(lo, means[i] - k * std::sqrt(vars[i]));
    }
    return lo;
  }
  double max_support(double k = 12.0) const {
    double hi = means[0] + k * std::sqrt(vars[0]);
    for (std::size_t i = 1; i < means.size(); ++i) {
      hi = std::max(hi, means[i] + k * std::sqrt(vars[i]));
    }
    return hi;
  }
};

/// Numerically integrated symmetrized KL divergence of two 1-D mixtures:
/// integral of (p - q) log(p/q).
inline double skl_numeric_1d(const Mix1D& p, const Mix1D& q) {
  const double lo = std::min(p.min_support(), q.min_support());
  const double hi = std::max(p.max_support(), q.max_support());
  const auto integrand = [&](double x) {
    const double px = std::max(p(x), 1e-300);
    const double qx = std::max(q(x), 1e-300);
    return (px - qx) * std::log(px / qx);
  };
  return integrate(integrand, lo, hi, 1e-12, 40, 64);
}

}  // namespace testutil
