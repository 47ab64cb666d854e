#include "csopt/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace csopt {

FactoredSpd::FactoredSpd(double c, double rho, const MatrixXd& A)
    : ata_(A.transpose() * A), c_(c), rho_(rho), dim_(static_cast<int>(A.cols())) {
  if (!(c > 0.0) || rho < 0.0)
    throw std::invalid_argument("FactoredSpd requires c > 0 and rho >= 0");
  factorize();
}

void FactoredSpd::update(double c, double rho) {
  if (c == c_ && rho == rho_) return;
  if (!(c > 0.0) || rho < 0.0)
    throw std::invalid_argument("FactoredSpd requires c > 0 and rho >= 0");
  c_ = c;
  rho_ = rho;
  factorize();
}

void FactoredSpd::factorize() {
  MatrixXd M = rho_ * ata_;
  M.diagonal().array() += c_;
  llt_.compute(M);
  if (llt_.info() != Eigen::Success)
    throw std::runtime_error("SPD factorization failed");
}

VectorXd FactoredSpd::solve(const VectorXd& b) const {
  if (b.size() != dim_) throw std::invalid_argument("right-hand side dimension mismatch");
  if (!b.allFinite()) throw std::invalid_argument("non-finite right-hand side");
  return llt_.solve(b);
}

VectorXd solve_spd(double c, double rho, const MatrixXd& A, const VectorXd& b) {
  if (!A.allFinite() || !b.allFinite() || !std::isfinite(c) || !std::isfinite(rho))
    throw std::invalid_argument("non-finite inputs to solve_spd");
  FactoredSpd factor(c, rho, A);
  return factor.solve(b);
}

MatrixXd pseudoinverse(const MatrixXd& A, double tol) {
  if (A.size() == 0) throw std::invalid_argument("pseudoinverse of empty matrix");
  if (tol < 0.0) throw std::invalid_argument("tolerance must be nonnegative");
  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? tol * sv(0) : 0.0;
  VectorXd inv = VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

std::pair<double, double> spectral_bounds(const MatrixXd& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("spectral_bounds requires a square matrix");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("spectral_bounds requires a symmetric matrix");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const auto& ev = es.eigenvalues();
  return {ev(ev.size() - 1), ev(0)};
}

Theorem1Result theorem1_constants(const Theorem1Params& p) {
  const double* fields[] = {&p.eta, &p.K,   &p.N,   &p.rho, &p.mu_F,     &p.L_F,
                            &p.L_f, &p.C_G, &p.L_G, &p.D,   &p.ata_norm, &p.sigma_min_aat};
  for (const double* f : fields)
    if (!(*f > 0.0)) throw std::invalid_argument("theorem1_constants: all parameters must be positive");
  if (p.eta > 1.0 / p.L_F)
    throw std::invalid_argument("theorem1_constants requires eta <= 1/L_F");

  const double sigma_n = std::sqrt(1.0 / p.N);
  const double variance_term = 32.0 * p.eta * p.eta * std::pow(p.C_G, 4) * p.L_f * p.L_f / (p.mu_F * p.N);
  const double smooth_term =
      (48.0 * p.eta * p.eta * p.L_F * p.L_F + 8.0 * p.eta * p.D * p.C_G * p.L_f * p.L_G * sigma_n) /
      p.mu_F;

  Theorem1Result out;
  out.gamma1 = (2.0 * p.eta - variance_term - smooth_term) * p.K;
  out.gamma2 = (p.K + 1.0) * (variance_term + smooth_term) + 2.0 / p.mu_F +
               2.0 * p.eta * p.rho * p.ata_norm / p.mu_F +
               2.0 * p.L_F * p.eta / (p.rho * p.sigma_min_aat);
  out.gamma = out.gamma2 / out.gamma1;
  out.linear_rate = out.gamma1 > 0.0 && out.gamma2 > 0.0 && out.gamma < 1.0;
  return out;
}

}  // namespace csopt
