#include "atr/numkit/pca.hpp"

#include <cmath>
#include <string>

namespace atr::numkit {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::vector<double> apply(const Matrix& m, const std::vector<double>& v) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v);
  return out;
}

void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (const auto& b : basis) {
    const double p = dot(v, b);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * b[i];
  }
}

double normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
  return n;
}

void fix_sign(std::vector<double>& v) {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  for (double x : v) {
    if (std::abs(x) > 1e-12 * scale) {
      if (x < 0.0) {
        for (double& y : v) y = -y;
      }
      return;
    }
  }
}

}  // namespace

Projection2d pca_2d(const Matrix& points, RandomStream& stream) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (n < 3 || d < 2) {
    throw InvalidParameterError("pca_2d: need >= 3 points of dimension >= 2, got " +
                                std::to_string(n) + "x" + std::to_string(d));
  }

  Projection2d out;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += points(i, j);
  for (double& m : out.mean) m /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = points(i, j) - out.mean[j];

  Matrix cov(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += centered(i, a) * centered(i, b);
      cov(a, b) = cov(b, a) = acc / static_cast<double>(n - 1);
    }
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace += cov(a, a);
  const double tol = 1e-12 * std::max(trace, 1e-300);
  if (!(trace > 0.0)) throw DegenerateProjectionError("pca_2d: zero covariance");

  std::vector<std::vector<double>> axes;
  for (int k = 0; k < 2; ++k) {
    std::vector<double> v(d);
    for (double& x : v) x = stream.normal();
    orthogonalize(v, axes);
    if (normalize(v) == 0.0) throw DegenerateProjectionError("pca_2d: degenerate start vector");
    for (int it = 0; it < kPowerIterations; ++it) {
      std::vector<double> w = apply(cov, v);
      orthogonalize(w, axes);
      if (normalize(w) <= tol) throw DegenerateProjectionError("pca_2d: covariance rank < 2");
      v = std::move(w);
    }
    const double lambda = dot(v, apply(cov, v));
    if (lambda <= tol) throw DegenerateProjectionError("pca_2d: covariance rank < 2");
    fix_sign(v);
    out.eigenvalues[static_cast<std::size_t>(k)] = lambda;
    axes.push_back(std::move(v));
  }

  out.components = Matrix(2, d);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < d; ++j) out.components(k, j) = axes[k][j];

  out.coordinates = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < 2; ++k) out.coordinates(i, k) = dot(centered.row(i), axes[k]);
  return out;
}

}  // namespace atr::numkit
