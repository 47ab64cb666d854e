#pragma once

#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "csopt/problem.hpp"

namespace csopt {

// Cached Cholesky factorization of M = c*I + rho*A^T A. The x-subproblem
// reuses one of these across inner iterations; update() refactorizes only
// when (c, rho) actually changed.
class FactoredSpd {
 public:
  FactoredSpd(double c, double rho, const MatrixXd& A);

  void update(double c, double rho);
  VectorXd solve(const VectorXd& b) const;

  double c() const { return c_; }
  double rho() const { return rho_; }
  int dim() const { return dim_; }

 private:
  void factorize();

  MatrixXd ata_;
  double c_;
  double rho_;
  int dim_;
  Eigen::LLT<MatrixXd> llt_;
};

// Convenience one-shot solve of (c*I + rho*A^T A) x = b.
VectorXd solve_spd(double c, double rho, const MatrixXd& A, const VectorXd& b);

// Moore-Penrose pseudoinverse via dense SVD. Singular values below
// tol * sigma_max are treated as zero.
MatrixXd pseudoinverse(const MatrixXd& A, double tol = 1e-12);

// Extreme eigenvalues (largest, smallest) of a symmetric matrix.
std::pair<double, double> spectral_bounds(const MatrixXd& M);

// Inputs to the linear-rate certificate for the strongly convex solver.
struct Theorem1Params {
  double eta = 0.0;
  double K = 0.0;
  double N = 0.0;
  double rho = 0.0;
  double mu_F = 0.0;
  double L_F = 0.0;
  double L_f = 0.0;
  double C_G = 0.0;
  double L_G = 0.0;
  double D = 0.0;
  double ata_norm = 0.0;        // ||A^T A||
  double sigma_min_aat = 0.0;   // sigma_min(A A^T)
};

struct Theorem1Result {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma = 0.0;  // gamma2 / gamma1
  bool linear_rate = false;
};

// Per-epoch contraction constants gamma1, gamma2; linear_rate holds when
// both are positive and gamma2/gamma1 < 1.
Theorem1Result theorem1_constants(const Theorem1Params& params);

}  // namespace csopt
