#pragma once

#include <functional>
#include <optional>
#include <stdexcept>

#include <Eigen/Core>

namespace csopt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Counts oracle accesses for a single run. Value and Jacobian accesses are
// tracked separately; `paper` follows the coarser per-sample convention used
// by the complexity accounting (one unit per sampled component access), so
// totals like 2m+n+K(2N+4) per epoch can be checked exactly.
struct OracleLedger {
  long long inner_value = 0;
  long long inner_jacobian = 0;
  long long outer_value = 0;
  long long outer_gradient = 0;
  long long paper = 0;

  long long total() const { return inner_value + inner_jacobian + outer_value + outer_gradient; }
};

// Description of the regularizer R(omega) attached to the constraint block.
struct Regularizer {
  enum class Kind { None, ScaledSquaredNorm, L1, Custom };

  Kind kind = Kind::None;
  double mu = 0.0;   // ScaledSquaredNorm weight: R(w) = (mu/2)||w||^2
  double tau = 0.0;  // L1 weight: R(w) = tau*||w||_1
  std::function<double(const VectorXd&)> custom_value;
  // prox(v, t) = argmin_w R(w) + (1/(2t))||w - v||^2
  std::function<VectorXd(const VectorXd&, double)> custom_prox;

  static Regularizer none() { return {}; }
  static Regularizer scaled_squared_norm(double mu_r) {
    Regularizer r;
    r.kind = Kind::ScaledSquaredNorm;
    r.mu = mu_r;
    return r;
  }
  static Regularizer l1(double tau_r) {
    Regularizer r;
    r.kind = Kind::L1;
    r.tau = tau_r;
    return r;
  }

  bool smooth() const { return kind == Kind::None || kind == Kind::ScaledSquaredNorm; }
  double value(const VectorXd& w) const;
  VectorXd gradient(const VectorXd& w) const;  // smooth kinds only
};

// Linear coupling Ax + Bw = 0 plus the regularizer acting on w.
struct ConstraintSpec {
  MatrixXd A;  // p x q
  MatrixXd B;  // p x l
  Regularizer regularizer;

  int p() const { return static_cast<int>(A.rows()); }
  int l() const { return static_cast<int>(B.cols()); }

  void validate() const;
};

// Finite-sum composition problem F(x) = sum_i w_i f_i(sum_j w_j g_j(x)).
// Oracles are pure in x and shareable; the ledger is the only mutable piece
// and is owned by each run.
struct CompositionProblem {
  int q = 0;  // dimension of x
  int r = 0;  // dimension of the inner value
  int n = 0;  // outer component count
  int m = 0;  // inner component count

  VectorXd inner_weights;  // length m, nonnegative, sums to 1
  VectorXd outer_weights;  // length n, nonnegative, sums to 1

  std::function<VectorXd(int j, const VectorXd& x)> inner_value;
  std::function<MatrixXd(int j, const VectorXd& x)> inner_jacobian;
  std::function<double(int i, const VectorXd& y)> outer_value;
  std::function<VectorXd(int i, const VectorXd& y)> outer_gradient;

  // Smoothness metadata when known analytically.
  std::optional<double> L_F, L_f, C_G, L_G, mu_F;

  static VectorXd uniform_weights(int count) {
    return VectorXd::Constant(count, 1.0 / static_cast<double>(count));
  }

  void validate() const;
};

// A primal-dual point used as the gap oracle for a problem instance.
struct ReferenceSolution {
  VectorXd x;
  VectorXd w;
  VectorXd lambda;
  double objective = 0.0;
  bool reliable = true;
  double residual = 0.0;
};

struct InnerEval {
  VectorXd value;
  MatrixXd jacobian;
};

// Single sampled inner oracle access (value + Jacobian); one paper query.
InnerEval eval_inner(const CompositionProblem& problem, OracleLedger& ledger, int j,
                     const VectorXd& x);

// Value-only access; increments only the inner-value counter.
VectorXd eval_inner_value(const CompositionProblem& problem, OracleLedger& ledger, int j,
                          const VectorXd& x);

// Weighted mean inner value g(x); m inner-value queries.
VectorXd mean_inner(const CompositionProblem& problem, OracleLedger& ledger, const VectorXd& x);

// grad F(x) = (mean_j w_j dg_j(x))^T * sum_i w_i grad f_i(g(x)); m+n paper queries.
VectorXd full_gradient(const CompositionProblem& problem, OracleLedger& ledger, const VectorXd& x);

// Exact F(x) by full enumeration; m+n paper queries.
double composite_value(const CompositionProblem& problem, OracleLedger& ledger, const VectorXd& x);

// F(x) + R(w).
double objective_value(const CompositionProblem& problem, const ConstraintSpec& constraint,
                       OracleLedger& ledger, const VectorXd& x, const VectorXd& w);

}  // namespace csopt
