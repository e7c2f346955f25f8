#pragma once

// Independent reference implementations used by the tests. None of these call
// into the library's numerics: eigenproblems go through a cyclic Jacobi
// solver, Laplacians are assembled entry by entry from the edge list.

#include "recgeo/embedding_matrix.hpp"
#include "recgeo/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace testsupport {

using recgeo::Index;
using recgeo::Matrix;
using recgeo::Vector;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double normal() { return normal_(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Index index(Index lo, Index hi) {  // inclusive
    return std::uniform_int_distribution<Index>(lo, hi)(rng_);
  }
  bool coin(double p) { return uniform(0.0, 1.0) < p; }

  Matrix gaussian(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = normal();
    return m;
  }
  Vector gaussian(Index n) { return gaussian(n, 1).col(0); }

  // Random weighted graph with edge probability p and integer weights 1..max_w.
  std::vector<recgeo::Edge> edges(Index n, double p, int max_w = 5) {
    std::vector<recgeo::Edge> out;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j)
        if (coin(p)) out.push_back({i, j, static_cast<double>(index(1, max_w))});
    return out;
  }

  // Orthonormal columns via Gram-Schmidt on a Gaussian draw.
  Matrix orthonormal(Index rows, Index cols) {
    Matrix q = gaussian(rows, cols);
    for (Index c = 0; c < cols; ++c) {
      for (Index k = 0; k < c; ++k) q.col(c) -= q.col(k).dot(q.col(c)) * q.col(k);
      q.col(c).normalize();
    }
    return q;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct Eig {
  Vector values;   // ascending
  Matrix vectors;  // columns
};

// Cyclic Jacobi rotations on a symmetric matrix.
inline Eig jacobi(Matrix a, double tol = 1e-15, int max_sweeps = 100) {
  const Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * std::max(1.0, a.norm())) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) < a(y, y); });
  Eig out{Vector(n), Matrix(n, n)};
  for (Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

// f(A) for symmetric A through the Jacobi spectrum.
template <typename F>
Matrix spectral_apply(const Matrix& a, F f) {
  const Eig e = jacobi(a);
  Vector fv(e.values.size());
  for (Index k = 0; k < fv.size(); ++k) fv(k) = f(e.values(k));
  return e.vectors * fv.asDiagonal() * e.vectors.transpose();
}

// I - D^{-1/2} A D^{-1/2}, built entry by entry; isolated rows stay zero.
inline Matrix dense_laplacian(Index n, const std::vector<recgeo::Edge>& edges) {
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : edges) {
    a(e.u, e.v) += e.weight;
    a(e.v, e.u) += e.weight;
  }
  Vector deg = a.rowwise().sum();
  Matrix l = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    if (deg(i) == 0.0) continue;
    for (Index j = 0; j < n; ++j) {
      if (deg(j) == 0.0) continue;
      l(i, j) = (i == j ? 1.0 : 0.0) - a(i, j) / std::sqrt(deg(i) * deg(j));
    }
  }
  return l;
}

// Flip each column so that its largest-|entry| (first on ties) is positive.
inline Matrix sign_fix(Matrix v) {
  for (Index c = 0; c < v.cols(); ++c) {
    Index best = 0;
    for (Index r = 1; r < v.rows(); ++r)
      if (std::abs(v(r, c)) > std::abs(v(best, c))) best = r;
    if (v(best, c) < 0) v.col(c) *= -1.0;
  }
  return v;
}

// Rec-PCA with dense loops and Jacobi: returns (projection, embeddings).
inline std::pair<Matrix, Matrix> brute_force_recpca(const Matrix& x, const Matrix& lap, double alpha,
                                                    Index d) {
  const Index n = x.rows();
  const Index p = x.cols();
  Matrix g = Matrix::Identity(n, n) - alpha * lap;
  Matrix s = Matrix::Zero(p, p);
  for (Index a = 0; a < p; ++a)
    for (Index b = 0; b < p; ++b)
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) s(a, b) += x(i, a) * g(i, j) * x(j, b);
  s = 0.5 * (s + s.transpose());
  const Eig e = jacobi(s);
  Matrix proj(p, d);
  for (Index k = 0; k < d; ++k) proj.col(k) = e.vectors.col(p - 1 - k);
  proj = sign_fix(proj);
  const Matrix root = spectral_apply(g, [](double v) { return std::sqrt(std::max(0.0, v)); });
  return {proj, root * x * proj};
}

// Relative error helper: |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 1e-300) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testsupport
