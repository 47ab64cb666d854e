#include "csopt/problems.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "csopt/rng.hpp"

namespace csopt {

namespace {

MatrixXd random_gaussian(Rng& rng, int rows, int cols) {
  MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = rng.normal();
  return M;
}

MatrixXd symmetric_sqrt(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// composition split of the synthetic quadratic: four scaled copies of the
// identity inner map and of the quadratic outer term, both with unit mean
constexpr double kQuadAlpha[4] = {0.7, 0.9, 1.1, 1.3};
constexpr double kQuadScale[4] = {0.8, 0.9, 1.1, 1.2};

ConstraintSpec identity_split(int dim, double mu_ridge) {
  ConstraintSpec c;
  c.A = MatrixXd::Identity(dim, dim);
  c.B = -MatrixXd::Identity(dim, dim);
  c.regularizer = mu_ridge > 0.0 ? Regularizer::scaled_squared_norm(mu_ridge) : Regularizer::none();
  return c;
}

}  // namespace

GeneratedProblem make_portfolio_from_rewards(const MatrixXd& rewards, double mu_ridge) {
  const int slots = static_cast<int>(rewards.rows());
  const int assets = static_cast<int>(rewards.cols());
  if (slots < 1 || assets < 1) throw std::invalid_argument("portfolio needs rewards data");
  if (mu_ridge < 0.0) throw std::invalid_argument("ridge weight must be nonnegative");

  CompositionProblem p;
  p.q = assets;
  p.r = assets + 1;
  p.n = slots;
  p.m = slots;
  p.inner_weights = CompositionProblem::uniform_weights(slots);
  p.outer_weights = CompositionProblem::uniform_weights(slots);

  p.inner_value = [rewards, assets](int j, const VectorXd& x) {
    VectorXd y(assets + 1);
    y.head(assets) = x;
    y[assets] = rewards.row(j).dot(x);
    return y;
  };
  p.inner_jacobian = [rewards, assets](int j, const VectorXd&) {
    MatrixXd J(assets + 1, assets);
    J.topRows(assets) = MatrixXd::Identity(assets, assets);
    J.row(assets) = rewards.row(j);
    return J;
  };
  p.outer_value = [rewards, assets](int i, const VectorXd& y) {
    const double ret = rewards.row(i).dot(y.head(assets));
    const double dev = ret - y[assets];
    return -ret + dev * dev;
  };
  p.outer_gradient = [rewards, assets](int i, const VectorXd& y) {
    const double ret = rewards.row(i).dot(y.head(assets));
    const double dev = ret - y[assets];
    VectorXd g(assets + 1);
    g.head(assets) = (-1.0 + 2.0 * dev) * rewards.row(i).transpose();
    g[assets] = -2.0 * dev;
    return g;
  };

  // smoothness metadata from the reward geometry
  const VectorXd mean_reward = rewards.colwise().mean().transpose();
  double max_dev = 0.0, l_f = 0.0, c_g = 0.0;
  for (int i = 0; i < slots; ++i) {
    max_dev = std::max(max_dev, (rewards.row(i).transpose() - mean_reward).norm());
    const double sq = rewards.row(i).squaredNorm();
    l_f = std::max(l_f, 2.0 * (sq + 1.0));
    c_g = std::max(c_g, std::sqrt(1.0 + sq));
  }
  double l_F = 0.0;
  for (int i = 0; i < slots; ++i) {
    const double dev_i = (rewards.row(i).transpose() - mean_reward).norm();
    double max_pair = 0.0;
    for (int j = 0; j < slots; ++j)
      max_pair = std::max(max_pair, (rewards.row(i) - rewards.row(j)).norm());
    l_F = std::max(l_F, 2.0 * max_pair * dev_i);
  }
  p.L_F = std::max(l_F, 1e-12);
  p.L_f = l_f;
  p.C_G = c_g;

  MatrixXd hessian = MatrixXd::Zero(assets, assets);
  for (int i = 0; i < slots; ++i) {
    const VectorXd d = rewards.row(i).transpose() - mean_reward;
    hessian += d * d.transpose();
  }
  hessian *= 2.0 / static_cast<double>(slots);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(hessian, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) > 1e-12) p.mu_F = es.eigenvalues()(0);

  GeneratedProblem out;
  out.problem = std::move(p);
  out.constraint = identity_split(assets, mu_ridge);
  return out;
}

GeneratedProblem make_portfolio(const PortfolioSpec& spec) {
  if (spec.assets < 1 || spec.slots < 1) throw std::invalid_argument("portfolio counts must be positive");
  if (!(spec.cov > 0.0)) throw std::invalid_argument("cov must be positive");

  Rng rng(spec.seed);
  VectorXd mean_reward(spec.assets);
  for (int i = 0; i < spec.assets; ++i) mean_reward[i] = 0.5 + rng.uniform01();

  const double nd = static_cast<double>(spec.assets);
  MatrixXd sigma = spec.cov * (0.5 * MatrixXd::Identity(spec.assets, spec.assets) +
                               (0.5 / nd) * MatrixXd::Ones(spec.assets, spec.assets));
  const MatrixXd chol = symmetric_sqrt(sigma);

  MatrixXd rewards(spec.slots, spec.assets);
  for (int i = 0; i < spec.slots; ++i) {
    VectorXd xi(spec.assets);
    for (int j = 0; j < spec.assets; ++j) xi[j] = rng.normal();
    rewards.row(i) = (mean_reward + chol * xi).transpose();
  }
  return make_portfolio_from_rewards(rewards, spec.mu_ridge);
}

GeneratedProblem make_policy_eval_explicit(const MatrixXd& features, const VectorXd& mixing,
                                           const MatrixXd& rewards, double discount,
                                           double mu_ridge) {
  const int states = static_cast<int>(features.rows());
  const int dim = static_cast<int>(features.cols());
  if (states < 1 || dim < 1) throw std::invalid_argument("policy eval needs feature data");
  if (mixing.size() != states || rewards.rows() != states || rewards.cols() != states)
    throw std::invalid_argument("policy eval data dimensions disagree");
  if (discount < 0.0 || discount >= 1.0) throw std::invalid_argument("discount must be in [0, 1)");
  if ((mixing.array() < 0.0).any() || std::abs(mixing.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("mixing distribution must be a probability vector");

  CompositionProblem p;
  p.q = dim;
  p.r = 2 * states;
  p.n = states;
  p.m = states;
  p.inner_weights = mixing;
  p.outer_weights = CompositionProblem::uniform_weights(states);

  p.inner_value = [features, rewards, discount, states](int sp, const VectorXd& w) {
    VectorXd y(2 * states);
    const double next_value = discount * features.row(sp).dot(w);
    for (int s = 0; s < states; ++s) {
      y[2 * s] = features.row(s).dot(w);
      y[2 * s + 1] = rewards(s, sp) + next_value;
    }
    return y;
  };
  p.inner_jacobian = [features, discount, states, dim](int sp, const VectorXd&) {
    MatrixXd J(2 * states, dim);
    const auto next_row = discount * features.row(sp);
    for (int s = 0; s < states; ++s) {
      J.row(2 * s) = features.row(s);
      J.row(2 * s + 1) = next_row;
    }
    return J;
  };
  p.outer_value = [](int s, const VectorXd& y) {
    const double d = y[2 * s] - y[2 * s + 1];
    return d * d;
  };
  p.outer_gradient = [](int s, const VectorXd& y) {
    VectorXd g = VectorXd::Zero(y.size());
    const double d = y[2 * s] - y[2 * s + 1];
    g[2 * s] = 2.0 * d;
    g[2 * s + 1] = -2.0 * d;
    return g;
  };

  // metadata: F is quadratic in w with rows a_s = phi_s - gamma * phi_mix
  const VectorXd phi_mix = features.transpose() * mixing;
  double l_F = 0.0, c_g = 0.0;
  const double feat_sq = features.squaredNorm();
  for (int s = 0; s < states; ++s) {
    const VectorXd a_s = features.row(s).transpose() - discount * phi_mix;
    double max_pair = 0.0;
    for (int sp = 0; sp < states; ++sp) {
      max_pair = std::max(
          max_pair, (features.row(s).transpose() - discount * features.row(sp).transpose()).norm());
    }
    l_F = std::max(l_F, 2.0 * max_pair * a_s.norm());
    c_g = std::max(c_g, std::sqrt(feat_sq +
                                  discount * discount * states * features.row(s).squaredNorm()));
  }
  p.L_F = std::max(l_F, 1e-12);
  p.L_f = 4.0;
  p.C_G = c_g;

  MatrixXd hessian = MatrixXd::Zero(dim, dim);
  for (int s = 0; s < states; ++s) {
    const VectorXd a_s = features.row(s).transpose() - discount * phi_mix;
    hessian += a_s * a_s.transpose();
  }
  hessian *= 2.0 / static_cast<double>(states);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(hessian, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) > 1e-12) p.mu_F = es.eigenvalues()(0);

  GeneratedProblem out;
  out.problem = std::move(p);
  out.constraint = identity_split(dim, mu_ridge);
  return out;
}

GeneratedProblem make_policy_eval(const PolicyEvalSpec& spec) {
  if (spec.states < 1 || spec.feature_dim < 1)
    throw std::invalid_argument("policy eval counts must be positive");

  Rng rng(spec.seed);
  MatrixXd features = random_gaussian(rng, spec.states, spec.feature_dim);

  VectorXd mixing(spec.states);
  for (int s = 0; s < spec.states; ++s) mixing[s] = 0.1 + rng.uniform01();
  mixing /= mixing.sum();
  // guard the sum-to-one invariant against accumulated rounding
  mixing[spec.states - 1] += 1.0 - mixing.sum();

  MatrixXd rewards(spec.states, spec.states);
  for (int s = 0; s < spec.states; ++s)
    for (int sp = 0; sp < spec.states; ++sp) rewards(s, sp) = rng.uniform01();

  return make_policy_eval_explicit(features, mixing, rewards, spec.discount, spec.mu_ridge);
}

GeneratedProblem make_synthetic_quadratic(const SyntheticQuadraticSpec& spec) {
  if (spec.dim < 1 || spec.constraints < 1 || spec.constraints > spec.dim)
    throw std::invalid_argument("synthetic quadratic needs 1 <= p <= q");
  if (!(spec.condition >= 1.0)) throw std::invalid_argument("condition must be >= 1");
  const int rank = spec.rank < 0 ? spec.dim : spec.rank;
  if (rank < 1 || rank > spec.dim) throw std::invalid_argument("rank out of range");

  Rng rng(spec.seed);
  const Eigen::HouseholderQR<MatrixXd> qr(random_gaussian(rng, spec.dim, spec.dim));
  const MatrixXd U = qr.householderQ();
  VectorXd eigs = VectorXd::Zero(spec.dim);
  for (int i = 0; i < rank; ++i) {
    const double t = rank == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(rank - 1);
    eigs[i] = std::pow(spec.condition, t);
  }
  MatrixXd Q = U * eigs.asDiagonal() * U.transpose();
  Q = 0.5 * (Q + Q.transpose());

  MatrixXd A;
  for (int attempt = 0;; ++attempt) {
    A = random_gaussian(rng, spec.constraints, spec.dim);
    Eigen::JacobiSVD<MatrixXd> svd(A);
    if (svd.singularValues()(spec.constraints - 1) > 1e-8) break;
    if (attempt >= 10) throw std::runtime_error("failed to draw a full-row-rank constraint matrix");
  }

  // choose b so the optimum is a known point
  VectorXd x_star(spec.dim);
  for (int i = 0; i < spec.dim; ++i) x_star[i] = rng.normal();
  const MatrixXd reduced = Q + spec.mu_ridge * A.transpose() * A;
  const VectorXd b = -(reduced * x_star);

  CompositionProblem p;
  p.q = spec.dim;
  p.r = spec.dim;
  p.n = 4;
  p.m = 4;
  p.inner_weights = CompositionProblem::uniform_weights(4);
  p.outer_weights = CompositionProblem::uniform_weights(4);
  p.inner_value = [](int j, const VectorXd& x) { return VectorXd(kQuadAlpha[j] * x); };
  p.inner_jacobian = [dim = spec.dim](int j, const VectorXd&) {
    return MatrixXd(kQuadAlpha[j] * MatrixXd::Identity(dim, dim));
  };
  p.outer_value = [Q, b](int i, const VectorXd& y) {
    return kQuadScale[i] * (0.5 * y.dot(Q * y) + b.dot(y));
  };
  p.outer_gradient = [Q, b](int i, const VectorXd& y) {
    return VectorXd(kQuadScale[i] * (Q * y + b));
  };

  p.L_F = kQuadAlpha[3] * kQuadScale[3] * eigs.maxCoeff();
  p.L_f = kQuadScale[3] * eigs.maxCoeff();
  p.C_G = kQuadAlpha[3];
  if (rank == spec.dim) p.mu_F = 1.0;  // spectrum runs from 1 to `condition`

  GeneratedProblem out;
  out.problem = std::move(p);
  out.constraint.A = A;
  out.constraint.B = -MatrixXd::Identity(spec.constraints, spec.constraints);
  out.constraint.regularizer = spec.mu_ridge > 0.0
                                   ? Regularizer::scaled_squared_norm(spec.mu_ridge)
                                   : Regularizer::none();

  ReferenceSolution ref;
  ref.x = x_star;
  ref.w = A * x_star;
  ref.lambda = spec.mu_ridge * ref.w;
  ref.objective = 0.5 * x_star.dot(Q * x_star) + b.dot(x_star) +
                  0.5 * spec.mu_ridge * ref.w.squaredNorm();
  ref.residual = 0.0;
  out.optimum = std::move(ref);
  return out;
}

}  // namespace csopt
