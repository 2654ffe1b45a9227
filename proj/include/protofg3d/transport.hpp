#pragma once

// Entropic view-to-prototype assignment.
//
// Given a K x V similarity matrix S (prototypes x views), both solvers return
// the coupling Z maximizing  Tr(Z^T S) + kappa * H(Z)  subject to
//   columns sum to 1      (every view is fully assigned)
//   rows sum to V / K     (prototypes share the views equally)
// The maximizer has the scaling form Z = diag(mu) exp(S / kappa) diag(nu).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "protofg3d/error.hpp"

namespace protofg3d::transport {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class SolverKind { Sinkhorn, Apdagd };

inline const char* to_string(SolverKind kind) {
  return kind == SolverKind::Sinkhorn ? "sinkhorn" : "apdagd";
}

inline SolverKind solver_kind_from_string(const std::string& name) {
  if (name == "sinkhorn") return SolverKind::Sinkhorn;
  if (name == "apdagd") return SolverKind::Apdagd;
  throw Error(ErrorCode::ParseError, "unknown solver '" + name + "' (expected sinkhorn|apdagd)");
}

struct SolverConfig {
  double kappa = 0.05;
  int max_iters = 1000;
  double marginal_tolerance = 1e-6;
  SolverKind kind = SolverKind::Sinkhorn;
  /// Sinkhorn sweeps before switching to Newton steps on the same dual.
  int newton_after = 50;

  void validate() const {
    require(kappa > 0 && std::isfinite(kappa), "kappa must be positive");
    require(max_iters > 0, "max_iters must be positive");
    require(newton_after >= 0, "newton_after must be nonnegative");
    require(marginal_tolerance > 0, "marginal_tolerance must be positive");
  }
};

/// Diagonal scalings of the solution, kept in log space. For small kappa the
/// linear-domain values leave the double range long before their logs do.
template <typename Scalar>
struct ScalingVectors {
  Vector<Scalar> log_mu;
  Vector<Scalar> log_nu;

  Vector<Scalar> mu() const { return log_mu.array().exp().matrix(); }
  Vector<Scalar> nu() const { return log_nu.array().exp().matrix(); }
};

struct MarginalViolation {
  double row = 0;
  double col = 0;
  double max() const { return std::max(row, col); }
};

template <typename Scalar>
struct Assignment {
  Matrix<Scalar> Z;
  ScalingVectors<Scalar> scalings;  // empty for APDAGD
  int iterations = 0;
  MarginalViolation violation;
  /// False when max_iters ran out first; Z is then the best iterate seen.
  bool converged = false;
};

// ---------------------------------------------------------------------------
// Evaluables

template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& Z) {
  using Scalar = typename Derived::Scalar;
  constexpr Scalar slack = Scalar(1e-12);
  Scalar h = 0;
  for (Eigen::Index v = 0; v < Z.cols(); ++v) {
    for (Eigen::Index k = 0; k < Z.rows(); ++k) {
      const Scalar z = Z(k, v);
      require(z >= -slack && z <= 1 + slack, "entropy: entries must lie in [0, 1]");
      if (z > 0) h -= z * std::log(z);
    }
  }
  return std::max(h, Scalar(0));
}

template <typename DerivedS, typename DerivedZ>
typename DerivedS::Scalar assignment_objective(const Eigen::MatrixBase<DerivedS>& S,
                                               const Eigen::MatrixBase<DerivedZ>& Z,
                                               double kappa) {
  require(S.rows() == Z.rows() && S.cols() == Z.cols(),
          "assignment_objective: similarity and assignment shapes differ");
  using Scalar = typename DerivedS::Scalar;
  Scalar trace = 0;
  for (Eigen::Index v = 0; v < S.cols(); ++v)
    for (Eigen::Index k = 0; k < S.rows(); ++k) trace += Z(k, v) * S(k, v);
  return trace + Scalar(kappa) * entropy(Z);
}

template <typename Derived>
MarginalViolation marginal_violation(const Eigen::MatrixBase<Derived>& Z) {
  using Scalar = typename Derived::Scalar;
  const Scalar row_target = Scalar(Z.cols()) / Scalar(Z.rows());
  MarginalViolation out;
  for (Eigen::Index k = 0; k < Z.rows(); ++k) {
    Scalar sum = 0;
    for (Eigen::Index v = 0; v < Z.cols(); ++v) sum += Z(k, v);
    out.row = std::max(out.row, double(std::abs(sum - row_target)));
  }
  for (Eigen::Index v = 0; v < Z.cols(); ++v) {
    Scalar sum = 0;
    for (Eigen::Index k = 0; k < Z.rows(); ++k) sum += Z(k, v);
    out.col = std::max(out.col, double(std::abs(sum - Scalar(1))));
  }
  return out;
}

namespace detail {

template <typename Scalar>
void check_instance(const Matrix<Scalar>& S, const SolverConfig& cfg) {
  cfg.validate();
  require(S.rows() >= 1 && S.cols() >= 1, "similarity matrix must be non-empty");
  require(S.allFinite(), "similarity matrix must be finite");
}

// log(sum_i exp(x_i)) over a strided sequence, fixed summation order.
template <typename Scalar, typename Get>
Scalar log_sum_exp(Eigen::Index n, Get&& get) {
  Scalar hi = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) hi = std::max(hi, get(i));
  if (!std::isfinite(hi)) return hi;
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) sum += std::exp(get(i) - hi);
  return hi + std::log(sum);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sinkhorn-Knopp

namespace detail {

// Row-wise log(sum_v exp(M_kv)) of a K x V array, with a fixed reduction order.
template <typename Scalar>
Vector<Scalar> row_log_sum_exp(const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>& M) {
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> hi = M.rowwise().maxCoeff();
  return (hi + (M.colwise() - hi).exp().rowwise().sum().log()).matrix();
}

template <typename Scalar>
Vector<Scalar> col_log_sum_exp(const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>& M) {
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> hi = M.colwise().maxCoeff();
  return (hi + (M.rowwise() - hi).exp().colwise().sum().log()).transpose().matrix();
}

}  // namespace detail

/// Alternating row/column rescaling with log-domain stabilization: the
/// scalings live in log space (a, b) and the iteration runs on the bounded
/// kernel exp(S/kappa + a + b) with multiplicative corrections (u, v) that are
/// absorbed into (a, b), followed by an exact log-sum-exp sweep, whenever they
/// leave [e^-30, e^30] or underflow. This keeps kappa down to ~1e-3 stable with
/// |S| <= 1.
///
/// Near-permutation solutions make the sweeps contract very slowly, so after
/// cfg.newton_after sweeps the row potentials a are updated by damped Newton
/// steps on  phi(a) = sum_v LSE_k(S_kv/kappa + a_k) - (V/K) sum_k a_k,  each
/// followed by the exact column rescaling. The fixed point and the scaling
/// form are those of the plain iteration. Stops when both marginals are within
/// cfg.marginal_tolerance or after cfg.max_iters iterations of either kind.
template <typename Scalar>
Assignment<Scalar> sinkhorn_assign(const Matrix<Scalar>& S, const SolverConfig& cfg) {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  detail::check_instance(S, cfg);
  const Eigen::Index K = S.rows();
  const Eigen::Index V = S.cols();
  const Array logits = S.array() / Scalar(cfg.kappa);
  const Scalar row_target = Scalar(V) / Scalar(K);
  const Scalar log_row_target = std::log(row_target);
  const Scalar absorb_bound = Scalar(30);

  Vector<Scalar> a = Vector<Scalar>::Zero(K);
  Vector<Scalar> b = -detail::col_log_sum_exp<Scalar>(logits);
  Matrix<Scalar> kernel;
  Vector<Scalar> u, v;
  auto absorb_and_sweep = [&] {
    a = (log_row_target - detail::row_log_sum_exp<Scalar>(logits.rowwise() + b.transpose().array()).array()).matrix();
    b = -detail::col_log_sum_exp<Scalar>(logits.colwise() + a.array());
    if (!a.allFinite() || !b.allFinite())
      throw Error(ErrorCode::NumericalOverflow, "sinkhorn: log scalings diverged");
    kernel = ((logits.colwise() + a.array()).rowwise() + b.transpose().array()).exp().matrix();
    u = Vector<Scalar>::Ones(K);
    v = Vector<Scalar>::Ones(V);
  };
  kernel = (logits.rowwise() + b.transpose().array()).exp().matrix();
  u = Vector<Scalar>::Ones(K);
  v = Vector<Scalar>::Ones(V);

  Vector<Scalar> best_a = a, best_b = b;
  double best_violation = std::numeric_limits<double>::infinity();
  int best_iter = 0;

  Assignment<Scalar> out;
  int last_iter = 0;
  for (int it = 0;; ++it) {
    // Columns are exact after every v-update; the rows carry the residual.
    const Vector<Scalar> kv = kernel * v;
    const double violation = double((u.cwiseProduct(kv).array() - row_target).abs().maxCoeff());
    if (violation < best_violation) {
      best_violation = violation;
      best_a = a + u.array().log().matrix();
      best_b = b + v.array().log().matrix();
      best_iter = it;
    }
    if (violation < cfg.marginal_tolerance) {
      out.converged = true;
      break;
    }
    if (it == cfg.max_iters || it == cfg.newton_after) {
      last_iter = it;
      break;
    }

    Vector<Scalar> u_next = (row_target / kv.array()).matrix();
    Vector<Scalar> v_next = (Scalar(1) / (kernel.transpose() * u_next).array()).matrix();
    const bool representable = u_next.allFinite() && v_next.allFinite() && u_next.minCoeff() > 0 &&
                               v_next.minCoeff() > 0 && u_next.array().log().abs().maxCoeff() < absorb_bound &&
                               v_next.array().log().abs().maxCoeff() < absorb_bound;
    if (representable) {
      u = std::move(u_next);
      v = std::move(v_next);
    } else {
      a += u.array().log().matrix();
      b += v.array().log().matrix();
      absorb_and_sweep();
    }
  }

  if (!out.converged && last_iter < cfg.max_iters) {
    Vector<Scalar> x = a + u.array().log().matrix();
    Vector<Scalar> col_pot, grad, row_sums;
    Array plan;
    // Semi-dual value; fills the column potentials, the plan and the row residual.
    auto evaluate = [&](const Vector<Scalar>& rows, Vector<Scalar>& cols, Array& P, Vector<Scalar>& g,
                        Vector<Scalar>& sums) {
      const Array M = logits.colwise() + rows.array();
      cols = -detail::col_log_sum_exp<Scalar>(M);
      P = (M.rowwise() + cols.transpose().array()).exp();
      sums = P.rowwise().sum().matrix();
      g = (sums.array() - row_target).matrix();
      return -cols.sum() - row_target * rows.sum();
    };
    Scalar phi = evaluate(x, col_pot, plan, grad, row_sums);
    for (int it = last_iter;; ++it) {
      if (!x.allFinite() || !col_pot.allFinite())
        throw Error(ErrorCode::NumericalOverflow, "sinkhorn: log scalings diverged");
      const double violation = double(grad.cwiseAbs().maxCoeff());
      if (violation < best_violation) {
        best_violation = violation;
        best_a = x;
        best_b = col_pot;
        best_iter = it;
      }
      if (violation < cfg.marginal_tolerance) {
        out.converged = true;
        break;
      }
      if (it == cfg.max_iters) break;

      // Hessian diag(rows) - P P^T is singular along the ones vector, which
      // the gradient is orthogonal to; the rank-one term removes the null space.
      Matrix<Scalar> H = -(plan.matrix() * plan.matrix().transpose());
      H.diagonal() += row_sums;
      H.array() += Scalar(1) / Scalar(K);
      const Vector<Scalar> step = -H.ldlt().solve(grad);
      const Scalar slope = grad.dot(step);

      bool accepted = false;
      Vector<Scalar> cols_try, grad_try, sums_try;
      Array plan_try;
      if (step.allFinite() && slope < 0) {
        for (Scalar t = 1; t > Scalar(1e-10); t /= 2) {
          const Vector<Scalar> x_try = x + t * step;
          const Scalar phi_try = evaluate(x_try, cols_try, plan_try, grad_try, sums_try);
          if (!std::isfinite(phi_try)) continue;
          if (phi_try <= phi + Scalar(1e-4) * t * slope ||
              double(grad_try.cwiseAbs().maxCoeff()) < violation) {
            x = x_try;
            phi = phi_try;
            accepted = true;
            break;
          }
        }
      }
      if (accepted) {
        col_pot = std::move(cols_try);
        plan = std::move(plan_try);
        grad = std::move(grad_try);
        row_sums = std::move(sums_try);
      } else {
        x = (log_row_target -
             detail::row_log_sum_exp<Scalar>(logits.rowwise() + col_pot.transpose().array()).array())
                .matrix();
        phi = evaluate(x, col_pot, plan, grad, row_sums);
      }
    }
  }

  // Split the free additive constant between the two scalings.
  const Scalar shift = (best_b.maxCoeff() - best_a.maxCoeff()) / 2;
  best_a.array() += shift;
  best_b.array() -= shift;
  if (!best_a.allFinite() || !best_b.allFinite())
    throw Error(ErrorCode::NumericalOverflow, "sinkhorn: log scalings diverged");

  out.Z = ((logits.colwise() + best_a.array()).rowwise() + best_b.transpose().array()).exp().matrix();
  out.scalings.log_mu = std::move(best_a);
  out.scalings.log_nu = std::move(best_b);
  out.iterations = best_iter;
  out.violation = marginal_violation(out.Z);
  return out;
}

// ---------------------------------------------------------------------------
// APDAGD

namespace detail {

// Dual of the entropic program (minimized):
//   phi(l, e) = kappa * sum_kv exp((S_kv - l_k - e_v) / kappa - 1) + l . r + e . c
// with primal map X_kv = exp((S_kv - l_k - e_v) / kappa - 1).
template <typename Scalar>
struct DualProblem {
  const Matrix<Scalar>& S;
  Scalar kappa;
  Scalar row_target;
  Eigen::Index K, V;

  Scalar value(const Vector<Scalar>& y, Matrix<Scalar>* primal = nullptr) const {
    Scalar mass = 0;
    for (Eigen::Index v = 0; v < V; ++v) {
      for (Eigen::Index k = 0; k < K; ++k) {
        const Scalar x = std::exp((S(k, v) - y(k) - y(K + v)) / kappa - 1);
        if (primal) (*primal)(k, v) = x;
        mass += x;
      }
    }
    if (!std::isfinite(mass)) return std::numeric_limits<Scalar>::infinity();
    return kappa * mass + row_target * y.head(K).sum() + y.tail(V).sum();
  }

  Vector<Scalar> gradient(const Matrix<Scalar>& X) const {
    Vector<Scalar> g(K + V);
    for (Eigen::Index k = 0; k < K; ++k) {
      Scalar row = 0;
      for (Eigen::Index v = 0; v < V; ++v) row += X(k, v);
      g(k) = row_target - row;
    }
    for (Eigen::Index v = 0; v < V; ++v) {
      Scalar col = 0;
      for (Eigen::Index k = 0; k < K; ++k) col += X(k, v);
      g(K + v) = 1 - col;
    }
    return g;
  }
};

// Projects a nearly-feasible nonnegative matrix onto the transport polytope
// (row-then-column clipping followed by a rank-one correction).
template <typename Scalar>
Matrix<Scalar> round_to_feasible(Matrix<Scalar> F, Scalar row_target) {
  const Eigen::Index K = F.rows(), V = F.cols();
  for (Eigen::Index k = 0; k < K; ++k) {
    const Scalar row = F.row(k).sum();
    if (row > row_target) F.row(k) *= row_target / row;
  }
  for (Eigen::Index v = 0; v < V; ++v) {
    const Scalar col = F.col(v).sum();
    if (col > 1) F.col(v) /= col;
  }
  Vector<Scalar> err_r(K), err_c(V);
  for (Eigen::Index k = 0; k < K; ++k) err_r(k) = row_target - F.row(k).sum();
  for (Eigen::Index v = 0; v < V; ++v) err_c(v) = 1 - F.col(v).sum();
  const Scalar l1 = err_r.sum();
  if (l1 > 0) F += err_r * err_c.transpose() / l1;
  return F;
}

}  // namespace detail

/// Adaptive primal-dual accelerated gradient descent on the dual of the same
/// entropic program. The Lipschitz estimate is doubled until the descent
/// condition holds and halved after every accepted step; the primal iterate is
/// the step-weighted average of the dual-point primals, rounded onto the
/// feasible set once its marginals are within tolerance.
template <typename Scalar>
Assignment<Scalar> apdagd_assign(const Matrix<Scalar>& S, const SolverConfig& cfg) {
  detail::check_instance(S, cfg);
  const Eigen::Index K = S.rows();
  const Eigen::Index V = S.cols();
  const Scalar kappa = Scalar(cfg.kappa);
  const Scalar row_target = Scalar(V) / Scalar(K);
  const detail::DualProblem<Scalar> dual{S, kappa, row_target, K, V};

  // Start from column-normalized primal: e_v = kappa * logsumexp_k(S_kv / kappa - 1).
  Vector<Scalar> x = Vector<Scalar>::Zero(K + V);
  for (Eigen::Index v = 0; v < V; ++v)
    x(K + v) = kappa * detail::log_sum_exp<Scalar>(K, [&](Eigen::Index k) { return S(k, v) / kappa - 1; });
  Vector<Scalar> z = x;
  Scalar beta = 0;
  Scalar lipschitz = Scalar(1) / kappa;

  Matrix<Scalar> X_y(K, V), X_avg = Matrix<Scalar>::Zero(K, V);
  Vector<Scalar> y(K + V), z_next(K + V), x_next(K + V);

  Assignment<Scalar> out;
  out.violation.row = out.violation.col = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iters; ++it) {
    Scalar M = lipschitz / 2;
    Scalar tau = 1;
    Scalar alpha = 0;
    bool accepted = false;
    for (int doubling = 0; doubling < 100 && !accepted; ++doubling) {
      M *= 2;
      alpha = (1 + std::sqrt(1 + 4 * M * beta)) / (2 * M);
      tau = alpha / (beta + alpha);
      y = tau * z + (1 - tau) * x;
      const Scalar phi_y = dual.value(y, &X_y);
      if (!std::isfinite(phi_y)) continue;
      const Vector<Scalar> grad = dual.gradient(X_y);
      z_next = z - alpha * grad;
      x_next = tau * z_next + (1 - tau) * x;
      const Vector<Scalar> step = x_next - y;
      const Scalar phi_x = dual.value(x_next);
      const Scalar bound = phi_y + grad.dot(step) + M / 2 * step.squaredNorm();
      const Scalar slack = 64 * std::numeric_limits<Scalar>::epsilon() * (std::abs(phi_y) + kappa * K * V);
      accepted = std::isfinite(phi_x) && phi_x <= bound + slack;
    }
    if (!accepted)
      throw Error(ErrorCode::NumericalOverflow,
                  "apdagd: line search failed at iteration " + std::to_string(it));

    X_avg = tau * X_y + (1 - tau) * X_avg;
    x = x_next;
    z = z_next;
    beta += alpha;
    lipschitz = M / 2;

    out.iterations = it;
    out.violation = marginal_violation(X_avg);
    if (out.violation.max() < cfg.marginal_tolerance) {
      out.converged = true;
      break;
    }
  }

  out.Z = detail::round_to_feasible(X_avg, row_target);
  out.Z = out.Z.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
  if (out.converged) out.violation = marginal_violation(out.Z);
  return out;
}

template <typename Scalar>
Assignment<Scalar> solve(const Matrix<Scalar>& S, const SolverConfig& cfg) {
  return cfg.kind == SolverKind::Sinkhorn ? sinkhorn_assign(S, cfg) : apdagd_assign(S, cfg);
}

/// Throws NonConvergence unless the solver met its tolerance.
template <typename Scalar>
const Assignment<Scalar>& require_converged(const Assignment<Scalar>& result, const SolverConfig& cfg) {
  if (!result.converged)
    throw Error(ErrorCode::NonConvergence,
                std::string(to_string(cfg.kind)) + " did not reach tolerance " +
                    std::to_string(cfg.marginal_tolerance) + " in " + std::to_string(cfg.max_iters) +
                    " iterations (achieved " + std::to_string(result.violation.max()) + ")");
  return result;
}

}  // namespace protofg3d::transport
