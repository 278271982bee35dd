#pragma once

#include "errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>

namespace gradsens {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Standard normal distribution
// ---------------------------------------------------------------------------

inline double std_normal_pdf(double z)
{
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

//! Phi(z), evaluated through erfc so that both tails keep full relative
//! precision.
inline double std_normal_cdf(double z)
{
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

//! 1 - Phi(z) without cancellation.
inline double std_normal_ccdf(double z)
{
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

namespace detail {

// Acklam's rational approximation of the normal quantile (rel. err ~1e-9).
inline double normal_quantile_initial(double p)
{
  static constexpr std::array<double, 6> a{ -3.969683028665376e+01,
                                            2.209460984245205e+02,
                                            -2.759285104469687e+02,
                                            1.383577518672690e+02,
                                            -3.066479806614716e+01,
                                            2.506628277459239e+00 };
  static constexpr std::array<double, 5> b{ -5.447609879822406e+01,
                                            1.615858368580409e+02,
                                            -1.556989798598866e+02,
                                            6.680131188771972e+01,
                                            -1.328068155288572e+01 };
  static constexpr std::array<double, 6> c{ -7.784894002430293e-03,
                                            -3.223964580411365e-01,
                                            -2.400758277161838e+00,
                                            -2.549732539343734e+00,
                                            4.374664141464968e+00,
                                            2.938163982698783e+00 };
  static constexpr std::array<double, 4> d{ 7.784695709041462e-03,
                                            3.224671290700398e-01,
                                            2.445134137142996e+00,
                                            3.754408661907416e+00 };
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace detail

//! Inverse of the standard normal CCDF: returns z with 1 - Phi(z) = p.
//!
//! Rational initial guess followed by Halley steps on the erfc-based CCDF,
//! which keeps relative accuracy for p down to the smallest normal doubles.
inline double std_normal_ccdf_inv(double p)
{
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("std_normal_ccdf_inv: p must lie in (0, 1)");

  // Work on the tail where the probability is small for best conditioning.
  const bool upper = p < 0.5;
  const double q = upper ? p : 1.0 - p;
  double z = -detail::normal_quantile_initial(q); // ccdf(z) = q, z >= 0
  for (int it = 0; it < 3; ++it) {
    const double err = std_normal_ccdf(z) - q;
    const double pdf = std_normal_pdf(z);
    if (pdf == 0.0)
      break;
    // f(z) = ccdf(z) - q, f' = -pdf, f'' = z pdf
    const double step = err / pdf;
    z += step / (1.0 - 0.5 * z * step);
  }
  return upper ? z : -z;
}

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

//! Counter-based Gaussian stream built on Philox4x32-10 (Salmon et al.,
//! Random123).
//!
//! The generator is part of the external reproducibility contract:
//!   * key     = (seed & 0xffffffff, seed >> 32)
//!   * counter = (block & 0xffffffff, block >> 32,
//!                stream & 0xffffffff, stream >> 32)
//!   * each block yields two 53-bit uniforms u = (x + 0.5) 2^-53, taken from
//!     the words (c0:c1) and (c2:c3), which Box-Muller maps to two normals
//!     r cos(2 pi u2), r sin(2 pi u2) with r = sqrt(-2 ln u1).
//! Distinct stream ids address disjoint counter ranges of 2^64 blocks, so
//! streams never overlap.
class RngStream
{
public:
  using Block = std::array<std::uint32_t, 4>;

  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
    : seed_(seed)
    , stream_(stream)
  {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  //! Number of Philox blocks consumed so far.
  std::uint64_t position() const { return block_; }

  static Block philox(Block ctr, std::array<std::uint32_t, 2> key)
  {
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{ m0 } * ctr[0];
      const std::uint64_t p1 = std::uint64_t{ m1 } * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = { hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0 };
      key[0] += w0;
      key[1] += w1;
    }
    return ctr;
  }

  Block next_block()
  {
    const Block ctr{ static_cast<std::uint32_t>(block_),
                     static_cast<std::uint32_t>(block_ >> 32),
                     static_cast<std::uint32_t>(stream_),
                     static_cast<std::uint32_t>(stream_ >> 32) };
    ++block_;
    return philox(ctr,
                  { static_cast<std::uint32_t>(seed_),
                    static_cast<std::uint32_t>(seed_ >> 32) });
  }

  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const Block b = next_block();
    const double u1 = to_unit(b[0], b[1]);
    const double u2 = to_unit(b[2], b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  void fill_normal(std::span<double> out)
  {
    for (double& v : out)
      v = normal();
  }

  Vector normal_vector(Eigen::Index n)
  {
    Vector v(n);
    fill_normal({ v.data(), static_cast<std::size_t>(n) });
    return v;
  }

private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo)
  {
    const std::uint64_t x = ((std::uint64_t{ hi } << 32) | lo) >> 11;
    return (static_cast<double>(x) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Dense symmetric linear algebra
// ---------------------------------------------------------------------------

//! Dense symmetric matrix. The lower triangle of the input is authoritative;
//! the upper triangle is overwritten from it on construction.
class SymMatrix
{
public:
  explicit SymMatrix(Matrix m)
    : m_(std::move(m))
  {
    if (m_.rows() < 1 || m_.rows() != m_.cols())
      throw std::invalid_argument("SymMatrix: matrix must be square, order >= 1");
    m_.triangularView<Eigen::StrictlyUpper>() = m_.transpose();
  }

  static SymMatrix identity(Eigen::Index n)
  {
    return SymMatrix(Matrix::Identity(n, n));
  }

  Eigen::Index order() const { return m_.rows(); }
  const Matrix& dense() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
  Matrix m_;
};

//! Lower Cholesky factor L with L L^T = R.
inline Matrix cholesky_lower(const SymMatrix& r)
{
  const Eigen::Index n = r.order();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = r(j, j) - l.row(j).head(j).squaredNorm();
    if (!(diag > 0.0))
      throw NotPositiveDefiniteError(static_cast<std::size_t>(j));
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (r(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
  }
  return l;
}

struct EigenPair
{
  double value;
  Vector vector; // normalized so that u^T Kg u = 1
};

//! Smallest eigenpair of K u = lambda Kg u (Kg positive definite).
//!
//! Cholesky-reduces Kg and runs a dense symmetric eigensolve. The returned
//! eigenvector satisfies u^T Kg u = 1 and has a positive largest-magnitude
//! entry.
inline EigenPair smallest_gen_eigenpair(const SymMatrix& k, const SymMatrix& kg)
{
  if (k.order() != kg.order())
    throw std::invalid_argument("smallest_gen_eigenpair: order mismatch");

  // Reduction: Kg = L L^T, C = L^-1 K L^-T, C v = lambda v, u = L^-T v.
  const Matrix l = cholesky_lower(kg);
  const auto lt = l.triangularView<Eigen::Lower>();
  Matrix c = lt.solve(k.dense());
  c = lt.solve(c.transpose()).transpose();
  c = 0.5 * (c + c.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  if (es.info() != Eigen::Success)
    throw ConvergenceError("smallest_gen_eigenpair: eigensolver did not converge");

  EigenPair out{ es.eigenvalues()(0), Vector() };
  out.vector = l.transpose().triangularView<Eigen::Upper>().solve(
    es.eigenvectors().col(0));
  out.vector /= std::sqrt(out.vector.dot(kg.dense() * out.vector));

  Eigen::Index imax = 0;
  out.vector.cwiseAbs().maxCoeff(&imax);
  if (out.vector(imax) < 0.0)
    out.vector = -out.vector;
  return out;
}

//! Bordered linear system for the eigen-derivative; the coefficient matrix
//! is the same for every sensitivity parameter, so it is factorized once.
class EigenDerivativeSolver
{
public:
  EigenDerivativeSolver(const SymMatrix& k,
                        const SymMatrix& kg,
                        const EigenPair& pair)
    : lambda_(pair.value)
    , u_(pair.vector)
  {
    const Eigen::Index n = k.order();
    Matrix a(n + 1, n + 1);
    a.topLeftCorner(n, n) = k.dense() - lambda_ * kg.dense();
    const Vector kgu = kg.dense() * u_;
    a.topRightCorner(n, 1) = -kgu;
    a.bottomLeftCorner(1, n) = -kgu.transpose();
    a(n, n) = 0.0;
    lu_.compute(a);
    const auto piv = lu_.matrixLU().diagonal().cwiseAbs();
    const double rc = lu_.rcond();
    if (!(rc > 1e3 * std::numeric_limits<double>::epsilon()) ||
        !(piv.minCoeff() > 1e-12 * piv.maxCoeff()))
      throw SingularMatrixError(
        "eigen_derivative: bordered system is singular (repeated eigenvalue?)");
  }

  //! d lambda / d alpha given dK/d alpha and dKg/d alpha.
  double solve(const Matrix& dk, const Matrix& dkg) const
  {
    const Eigen::Index n = u_.size();
    Vector rhs(n + 1);
    rhs.head(n) = -(dk - lambda_ * dkg) * u_;
    rhs(n) = 0.5 * u_.dot(dkg * u_);
    const Vector sol = lu_.solve(rhs);
    return sol(n);
  }

private:
  double lambda_;
  Vector u_;
  Eigen::PartialPivLU<Matrix> lu_;
};

//! d lambda / d alpha for a simple eigenvalue of K u = lambda Kg u.
inline double eigen_derivative(const SymMatrix& k,
                               const SymMatrix& kg,
                               const Matrix& dk,
                               const Matrix& dkg,
                               const EigenPair& pair)
{
  return EigenDerivativeSolver(k, kg, pair).solve(dk, dkg);
}

} // namespace gradsens
