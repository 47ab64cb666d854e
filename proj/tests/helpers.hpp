#pragma once

#include <cmath>
#include <vector>

#include "csopt/problem.hpp"
#include "csopt/rng.hpp"

namespace csopt::testing {

// Random smooth weighted instance with affine inner maps and convex
// quadratic outer terms; every derivative is analytic, so it serves as the
// workhorse for estimator and gradient identities.
inline CompositionProblem make_affine_quadratic(int q, int r, int m, int n, std::uint64_t seed,
                                                bool uniform = false) {
  Rng rng(seed);
  auto gauss_matrix = [&rng](int rows, int cols) {
    MatrixXd M(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) M(i, j) = rng.normal();
    return M;
  };
  auto random_weights = [&rng](int count) {
    VectorXd w(count);
    for (int i = 0; i < count; ++i) w[i] = 0.1 + rng.uniform01();
    w /= w.sum();
    return w;
  };

  std::vector<MatrixXd> maps, quads;
  std::vector<VectorXd> shifts, linears;
  for (int j = 0; j < m; ++j) {
    maps.push_back(gauss_matrix(r, q));
    VectorXd c(r);
    for (int i = 0; i < r; ++i) c[i] = rng.normal();
    shifts.push_back(c);
  }
  for (int i = 0; i < n; ++i) {
    const MatrixXd G = gauss_matrix(r, r);
    quads.push_back(G.transpose() * G / static_cast<double>(r) +
                    0.1 * MatrixXd::Identity(r, r));
    VectorXd b(r);
    for (int t = 0; t < r; ++t) b[t] = rng.normal();
    linears.push_back(b);
  }

  CompositionProblem p;
  p.q = q;
  p.r = r;
  p.m = m;
  p.n = n;
  p.inner_weights = uniform ? CompositionProblem::uniform_weights(m) : random_weights(m);
  p.outer_weights = uniform ? CompositionProblem::uniform_weights(n) : random_weights(n);
  p.inner_value = [maps, shifts](int j, const VectorXd& x) {
    return VectorXd(maps[static_cast<std::size_t>(j)] * x + shifts[static_cast<std::size_t>(j)]);
  };
  p.inner_jacobian = [maps](int j, const VectorXd&) { return maps[static_cast<std::size_t>(j)]; };
  p.outer_value = [quads, linears](int i, const VectorXd& y) {
    const auto& P = quads[static_cast<std::size_t>(i)];
    return 0.5 * y.dot(P * y) + linears[static_cast<std::size_t>(i)].dot(y);
  };
  p.outer_gradient = [quads, linears](int i, const VectorXd& y) {
    return VectorXd(quads[static_cast<std::size_t>(i)] * y +
                    linears[static_cast<std::size_t>(i)]);
  };
  return p;
}

inline VectorXd random_vector(Rng& rng, int dim, double scale = 1.0) {
  VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = scale * rng.normal();
  return v;
}

// Central-difference gradient of F, oblivious to the analytic Jacobians.
inline VectorXd fd_gradient(const CompositionProblem& problem, const VectorXd& x,
                            double h = 1e-6) {
  OracleLedger scratch;
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (composite_value(problem, scratch, hi) - composite_value(problem, scratch, lo)) /
           (2.0 * h);
  }
  return g;
}

}  // namespace csopt::testing
