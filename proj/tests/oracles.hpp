#pragma once

// Independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t n)
{
  return Dense(n, std::vector<double>(n, 0.0));
}

inline Dense multiply(const Dense& a, const Dense& b)
{
  const std::size_t n = a.size();
  Dense c = zeros(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j)
        c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Dense transpose(const Dense& a)
{
  Dense t = zeros(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      t[j][i] = a[i][j];
  return t;
}

// Cyclic Jacobi rotations for a symmetric matrix: eigenvalues in `values`,
// eigenvectors in the columns of `vectors`.
inline void jacobi_eigen(Dense a, std::vector<double>& values, Dense& vectors)
{
  const std::size_t n = a.size();
  vectors = zeros(n);
  for (std::size_t i = 0; i < n; ++i)
    vectors[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        off += a[p][q] * a[p][q];
    if (off < 1e-30)
      break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0)
          continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vectors[k][p];
          const double vkq = vectors[k][q];
          vectors[k][p] = c * vkp - s * vkq;
          vectors[k][q] = s * vkp + c * vkq;
        }
      }
  }
  values.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    values[i] = a[i][i];
}

// Smallest eigenvalue of K u = lambda Kg u through Kg^-1/2 K Kg^-1/2.
inline double smallest_generalized_eigenvalue(const Dense& k, const Dense& kg)
{
  const std::size_t n = k.size();
  std::vector<double> gv;
  Dense gq;
  jacobi_eigen(kg, gv, gq);
  Dense s = zeros(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t m = 0; m < n; ++m)
        s[i][j] += gq[i][m] * gq[j][m] / std::sqrt(gv[m]);
  const Dense c = multiply(multiply(s, k), s);
  std::vector<double> values;
  Dense vectors;
  jacobi_eigen(c, values, vectors);
  return *std::min_element(values.begin(), values.end());
}

// Standard normal upper tail from a long double continued fraction (z > 0)
// or series (small z).
inline long double normal_upper_tail(long double z)
{
  if (z < 0)
    return 1.0L - normal_upper_tail(-z);
  const long double pi = 3.141592653589793238462643383279502884L;
  const long double pdf = std::exp(-0.5L * z * z) / std::sqrt(2.0L * pi);
  if (z < 3.0L) {
    // Phi(z) - 1/2 = pdf * sum z^(2k+1) / (1*3*...*(2k+1))
    long double term = z;
    long double sum = z;
    for (int k = 1; k < 500; ++k) {
      term *= z * z / (2.0L * k + 1.0L);
      sum += term;
      if (term < 1e-25L * sum)
        break;
    }
    return 0.5L - pdf * sum;
  }
  // Lentz evaluation of the Laplace continued fraction
  long double f = z;
  long double c = z;
  long double d = 0.0L;
  for (int k = 1; k < 5000; ++k) {
    d = z + k * d;
    c = z + k / c;
    d = 1.0L / d;
    const long double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0L) < 1e-22L)
      break;
  }
  return pdf / f;
}

// Root of a monotone function by bisection.
inline double bisect(const std::function<double(double)>& f, double lo, double hi)
{
  double flo = f(lo);
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace oracle
