#include "csopt/problem.hpp"

#include <cmath>
#include <string>

namespace csopt {

namespace {

void check_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("shape error: " + what);
}

void check_weights(const VectorXd& w, const std::string& name) {
  if ((w.array() < 0.0).any())
    throw std::invalid_argument(name + " has negative entries");
  if (std::abs(w.sum() - 1.0) > 1e-12)
    throw std::invalid_argument(name + " does not sum to 1");
}

}  // namespace

double Regularizer::value(const VectorXd& w) const {
  switch (kind) {
    case Kind::None:
      return 0.0;
    case Kind::ScaledSquaredNorm:
      return 0.5 * mu * w.squaredNorm();
    case Kind::L1:
      return tau * w.lpNorm<1>();
    case Kind::Custom:
      if (!custom_value) throw std::logic_error("custom regularizer without value function");
      return custom_value(w);
  }
  throw std::logic_error("unreachable");
}

VectorXd Regularizer::gradient(const VectorXd& w) const {
  switch (kind) {
    case Kind::None:
      return VectorXd::Zero(w.size());
    case Kind::ScaledSquaredNorm:
      return mu * w;
    default:
      throw std::logic_error("gradient requested for nonsmooth regularizer");
  }
}

void ConstraintSpec::validate() const {
  if (A.rows() != B.rows())
    throw std::invalid_argument("constraint matrices A and B must have the same row count");
  if (A.size() == 0 || B.size() == 0)
    throw std::invalid_argument("constraint matrices must be nonempty");
}

void CompositionProblem::validate() const {
  if (q <= 0 || r <= 0 || n <= 0 || m <= 0)
    throw std::invalid_argument("problem dimensions must be positive");
  check_shape(inner_weights.size() == m, "inner_weights length");
  check_shape(outer_weights.size() == n, "outer_weights length");
  check_weights(inner_weights, "inner_weights");
  check_weights(outer_weights, "outer_weights");
  if (!inner_value || !inner_jacobian || !outer_value || !outer_gradient)
    throw std::invalid_argument("problem oracles must all be set");
}

InnerEval eval_inner(const CompositionProblem& problem, OracleLedger& ledger, int j,
                     const VectorXd& x) {
  if (j < 0 || j >= problem.m) throw std::out_of_range("inner index out of range");
  check_shape(x.size() == problem.q, "x length");
  InnerEval out{problem.inner_value(j, x), problem.inner_jacobian(j, x)};
  check_shape(out.value.size() == problem.r, "inner value dimension");
  check_shape(out.jacobian.rows() == problem.r && out.jacobian.cols() == problem.q,
              "inner Jacobian dimensions");
  ledger.inner_value += 1;
  ledger.inner_jacobian += 1;
  ledger.paper += 1;
  return out;
}

VectorXd eval_inner_value(const CompositionProblem& problem, OracleLedger& ledger, int j,
                          const VectorXd& x) {
  if (j < 0 || j >= problem.m) throw std::out_of_range("inner index out of range");
  check_shape(x.size() == problem.q, "x length");
  VectorXd v = problem.inner_value(j, x);
  check_shape(v.size() == problem.r, "inner value dimension");
  ledger.inner_value += 1;
  ledger.paper += 1;
  return v;
}

VectorXd mean_inner(const CompositionProblem& problem, OracleLedger& ledger, const VectorXd& x) {
  check_shape(x.size() == problem.q, "x length");
  VectorXd acc = VectorXd::Zero(problem.r);
  // fixed ascending order keeps runs bit-reproducible
  for (int j = 0; j < problem.m; ++j) {
    VectorXd v = problem.inner_value(j, x);
    check_shape(v.size() == problem.r, "inner value dimension");
    acc += problem.inner_weights[j] * v;
  }
  ledger.inner_value += problem.m;
  ledger.paper += problem.m;
  return acc;
}

VectorXd full_gradient(const CompositionProblem& problem, OracleLedger& ledger,
                       const VectorXd& x) {
  check_shape(x.size() == problem.q, "x length");
  VectorXd g = VectorXd::Zero(problem.r);
  MatrixXd jac = MatrixXd::Zero(problem.r, problem.q);
  for (int j = 0; j < problem.m; ++j) {
    VectorXd v = problem.inner_value(j, x);
    MatrixXd J = problem.inner_jacobian(j, x);
    check_shape(v.size() == problem.r, "inner value dimension");
    check_shape(J.rows() == problem.r && J.cols() == problem.q, "inner Jacobian dimensions");
    g += problem.inner_weights[j] * v;
    jac += problem.inner_weights[j] * J;
  }
  VectorXd outer = VectorXd::Zero(problem.r);
  for (int i = 0; i < problem.n; ++i) {
    VectorXd gi = problem.outer_gradient(i, g);
    check_shape(gi.size() == problem.r, "outer gradient dimension");
    outer += problem.outer_weights[i] * gi;
  }
  ledger.inner_value += problem.m;
  ledger.inner_jacobian += problem.m;
  ledger.outer_gradient += problem.n;
  ledger.paper += problem.m + problem.n;
  return jac.transpose() * outer;
}

double composite_value(const CompositionProblem& problem, OracleLedger& ledger,
                       const VectorXd& x) {
  VectorXd g = mean_inner(problem, ledger, x);
  double acc = 0.0;
  for (int i = 0; i < problem.n; ++i) acc += problem.outer_weights[i] * problem.outer_value(i, g);
  ledger.outer_value += problem.n;
  ledger.paper += problem.n;
  return acc;
}

double objective_value(const CompositionProblem& problem, const ConstraintSpec& constraint,
                       OracleLedger& ledger, const VectorXd& x, const VectorXd& w) {
  return composite_value(problem, ledger, x) + constraint.regularizer.value(w);
}

}  // namespace csopt
