#include "arbench/motion_control.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace arbench {

ImpedanceGains ImpedanceGains::uniform(std::size_t dof, double stiffness, double damping) {
  const auto n = static_cast<Eigen::Index>(dof);
  return {Eigen::VectorXd::Constant(n, stiffness), Eigen::VectorXd::Constant(n, damping)};
}

void ImpedanceGains::validate(std::size_t dof) const {
  const auto n = static_cast<Eigen::Index>(dof);
  if (stiffness.size() != n || damping.size() != n) {
    throw DimensionError("impedance gains must have one entry per joint");
  }
  if ((stiffness.array() <= 0.0).any() || (damping.array() <= 0.0).any()) {
    throw InvalidArgument("impedance gains must be strictly positive");
  }
}

Twist pose_error(const RigidTransform& current, const RigidTransform& target) {
  Twist e;
  e.head<3>() = target.translation() - current.translation();

  Eigen::Quaterniond delta = target.rotation() * current.rotation().conjugate();
  if (delta.w() < 0.0) delta.coeffs() = -delta.coeffs();
  const Eigen::Vector3d v = delta.vec();
  const double s = v.norm();
  if (s < 1e-12) {
    e.tail<3>() = 2.0 * v;
    return e;
  }
  const double angle = 2.0 * std::atan2(s, delta.w());
  Eigen::Vector3d axis = v / s;
  if (std::abs(delta.w()) < 1e-12) {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  e.tail<3>() = angle * axis;
  return e;
}

namespace {

Eigen::MatrixXd inverse_weights(const Eigen::MatrixXd& joint_weights, Eigen::Index n) {
  if (joint_weights.size() == 0) return Eigen::MatrixXd::Identity(n, n);
  if (joint_weights.rows() != n || joint_weights.cols() != n) {
    throw DimensionError("joint weight matrix must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if ((joint_weights - joint_weights.transpose()).norm() > 1e-12 * (1.0 + joint_weights.norm())) {
    throw InvalidArgument("joint weight matrix is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(joint_weights);
  if (llt.info() != Eigen::Success) {
    throw InvalidArgument("joint weight matrix is not positive definite (Cholesky failed)");
  }
  return llt.solve(Eigen::MatrixXd::Identity(n, n));
}

}  // namespace

namespace {

/// W^-1 J^T (J W^-1 J^T + damping^2 I)^-1 applied to every column of rhs.
Eigen::MatrixXd damped_weighted_solve(const Eigen::MatrixXd& task_jacobian, const Eigen::MatrixXd& rhs,
                                      const Eigen::MatrixXd& joint_weights, double damping) {
  if (damping < 0.0) throw InvalidArgument("damping must be non-negative");
  if (task_jacobian.rows() != rhs.rows()) throw DimensionError("task Jacobian and error sizes differ");
  const Eigen::MatrixXd w_inv = inverse_weights(joint_weights, task_jacobian.cols());
  const Eigen::MatrixXd jw = task_jacobian * w_inv;
  Eigen::MatrixXd gram = jw * task_jacobian.transpose();
  gram.diagonal().array() += damping * damping;
  Eigen::MatrixXd y;
  if (damping > 0.0) {
    y = gram.llt().solve(rhs);
  } else {
    y = gram.completeOrthogonalDecomposition().solve(rhs);
  }
  return jw.transpose() * y;
}

}  // namespace

Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& task_jacobian, const Eigen::VectorXd& error,
                                       const Eigen::MatrixXd& joint_weights, double damping) {
  return damped_weighted_solve(task_jacobian, error, joint_weights, damping);
}

Eigen::VectorXd weighted_ik_step(const KinematicChain& chain, const Eigen::VectorXd& q,
                                 const RigidTransform& target, const IkWeights& weights, TaskMask mask) {
  const Twist e = pose_error(forward_kinematics(chain, q), target);
  const Jacobian jac = jacobian(chain, q);
  Eigen::VectorXd step;
  if (mask == TaskMask::position_only) {
    step = weighted_least_squares(jac.topRows<3>(), e.head<3>(), weights.joint_weights, weights.damping);
  } else {
    step = weighted_least_squares(jac, e, weights.joint_weights, weights.damping);
  }
  // Uniform scaling keeps the step on the least-squares direction.
  const double largest = step.cwiseAbs().maxCoeff();
  if (weights.max_step > 0.0 && largest > weights.max_step) step *= weights.max_step / largest;
  return step;
}

IkNotConverged::IkNotConverged(double best_residual, Eigen::VectorXd best_q, int iterations)
    : Error("inverse kinematics did not converge (best residual " + std::to_string(best_residual) + " after " +
            std::to_string(iterations) + " iterations)"),
      best_residual_(best_residual),
      best_q_(std::move(best_q)),
      iterations_(iterations) {}

double task_residual(const KinematicChain& chain, const Eigen::VectorXd& q, const RigidTransform& target,
                     TaskMask mask) {
  const Twist e = pose_error(forward_kinematics(chain, q), target);
  return mask == TaskMask::position_only ? e.head<3>().norm() : e.norm();
}

namespace {

void limit_step(Eigen::VectorXd& step, double max_step) {
  const double largest = step.size() == 0 ? 0.0 : step.cwiseAbs().maxCoeff();
  if (max_step > 0.0 && largest > max_step) step *= max_step / largest;
}

/// The weighted step with every joint that sits on a limit and is pushed
/// outward removed from the solve, so the free joints take over its share.
Eigen::VectorXd limit_aware_step(const KinematicChain& chain, const Eigen::VectorXd& q, const RigidTransform& target,
                                 const IkWeights& weights, const Eigen::MatrixXd& w, TaskMask mask) {
  const Twist e = pose_error(forward_kinematics(chain, q), target);
  const Jacobian jac = jacobian(chain, q);
  const Eigen::MatrixXd task = mask == TaskMask::position_only ? Eigen::MatrixXd(jac.topRows<3>()) : Eigen::MatrixXd(jac);
  const Eigen::VectorXd err = mask == TaskMask::position_only ? Eigen::VectorXd(e.head<3>()) : Eigen::VectorXd(e);
  const auto n = q.size();
  const Eigen::VectorXd lower = chain.lower_limits();
  const Eigen::VectorXd upper = chain.upper_limits();
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
  for (Eigen::Index pass = 0; pass <= n; ++pass) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!pinned[static_cast<std::size_t>(j)]) free.push_back(j);
    }
    step.setZero();
    if (free.empty()) break;
    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd task_free(task.rows(), m);
    Eigen::MatrixXd w_free(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      task_free.col(a) = task.col(free[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < m; ++b) w_free(a, b) = w(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
    }
    const Eigen::VectorXd partial = weighted_least_squares(task_free, err, w_free, weights.damping);
    for (Eigen::Index a = 0; a < m; ++a) step[free[static_cast<std::size_t>(a)]] = partial[a];
    bool changed = false;
    for (const auto j : free) {
      if ((q[j] >= upper[j] && step[j] > 0.0) || (q[j] <= lower[j] && step[j] < 0.0)) {
        pinned[static_cast<std::size_t>(j)] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  limit_step(step, weights.max_step);
  return step;
}

/// Best of `samples` random configurations by task residual. Unbounded joints
/// are drawn within pi of `around`.
Eigen::VectorXd restart_seed(const KinematicChain& chain, const RigidTransform& target, TaskMask mask, int samples,
                             const Eigen::VectorXd& around, std::mt19937_64& rng) {
  const Eigen::VectorXd lower = chain.lower_limits();
  const Eigen::VectorXd upper = chain.upper_limits();
  Eigen::VectorXd best = around;
  double best_residual = std::numeric_limits<double>::infinity();
  Eigen::VectorXd candidate(around.size());
  for (int s = 0; s < samples; ++s) {
    for (Eigen::Index j = 0; j < candidate.size(); ++j) {
      const bool bounded = std::isfinite(lower[j]) && std::isfinite(upper[j]);
      const double lo = bounded ? lower[j] : around[j] - M_PI;
      const double hi = bounded ? upper[j] : around[j] + M_PI;
      candidate[j] = std::uniform_real_distribution<double>(lo, hi)(rng);
    }
    const double r = task_residual(chain, candidate, target, mask);
    if (r < best_residual) {
      best_residual = r;
      best = candidate;
    }
  }
  return best;
}

}  // namespace

IkSolution solve_ik(const KinematicChain& chain, const Eigen::VectorXd& q0, const RigidTransform& target,
                    const IkWeights& weights, double tol, int max_iter, TaskMask mask) {
  if (!(tol > 0.0)) throw InvalidArgument("IK tolerance must be positive");
  chain.check_dimension(q0);
  const Eigen::MatrixXd w =
      weights.joint_weights.size() == 0 ? Eigen::MatrixXd::Identity(q0.size(), q0.size()) : weights.joint_weights;
  inverse_weights(w, q0.size());  // validates
  // Fixed seed: the solver stays a pure function of its arguments.
  std::mt19937_64 rng(0x5eedULL);
  Eigen::VectorXd q = q0;
  Eigen::VectorXd best_q = q0;
  double best = std::numeric_limits<double>::infinity();
  double attempt_best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int iter = 0;; ++iter) {
    const double residual = task_residual(chain, q, target, mask);
    if (residual < best) {
      best = residual;
      best_q = q;
    }
    if (residual < tol) return {q, iter, residual};
    if (iter >= max_iter) throw IkNotConverged(best, best_q, iter);
    if (residual < 0.99 * attempt_best) {
      attempt_best = residual;
      stalled = 0;
    } else if (weights.stall_window > 0 && ++stalled >= weights.stall_window) {
      // Stuck in a local minimum, usually against a joint limit.
      q = restart_seed(chain, target, mask, std::max(weights.restart_samples, 1), q0, rng);
      attempt_best = std::numeric_limits<double>::infinity();
      stalled = 0;
      continue;
    }
    q = chain.clamp(q + limit_aware_step(chain, q, target, weights, w, mask));
  }
}

Eigen::Vector3d project_to_plane(const Eigen::Vector3d& displacement, const Eigen::Vector3d& normal) {
  // A normal component at roundoff level is already zero; this makes the
  // projection exactly idempotent.
  const double along = normal.dot(displacement);
  if (std::abs(along) <= 16.0 * std::numeric_limits<double>::epsilon() * displacement.norm()) return displacement;
  return displacement - normal * along;
}

Eigen::MatrixXd nullspace_projector(const Eigen::MatrixXd& task_jacobian, double damping) {
  const auto n = task_jacobian.cols();
  const auto m = task_jacobian.rows();
  const Eigen::MatrixXd pinv =
      damped_weighted_solve(task_jacobian, Eigen::MatrixXd::Identity(m, m), Eigen::MatrixXd(), damping);
  return Eigen::MatrixXd::Identity(n, n) - pinv * task_jacobian;
}

Eigen::VectorXd nullspace_jog(const KinematicChain& chain, const Eigen::VectorXd& q, std::size_t joint,
                              double delta, bool nullspace, double damping) {
  chain.check_dimension(q);
  if (joint >= chain.dof()) throw InvalidArgument("joint index out of range");
  Eigen::VectorXd step = Eigen::VectorXd::Zero(q.size());
  step[static_cast<Eigen::Index>(joint)] = delta;
  if (nullspace) step = nullspace_projector(jacobian(chain, q), damping) * step;
  return chain.clamp(q + step) - q;
}

void validate(const ControlMode& mode, std::size_t dof) {
  if (const auto* plane = std::get_if<PlaneMotion>(&mode)) {
    if (std::abs(plane->normal.norm() - 1.0) > 1e-9) throw InvalidArgument("plane normal must be unit length");
  } else if (const auto* jog = std::get_if<JointJog>(&mode)) {
    if (jog->joint >= dof) throw InvalidArgument("joint index out of range");
  }
}

Eigen::VectorXd apply_control(const KinematicChain& chain, const Eigen::VectorXd& q, const ControlMode& mode,
                              const IkWeights& weights) {
  validate(mode, chain.dof());
  if (const auto* jog = std::get_if<JointJog>(&mode)) {
    return q + nullspace_jog(chain, q, jog->joint, jog->delta, jog->nullspace, weights.damping);
  }

  const RigidTransform current = forward_kinematics(chain, q);
  RigidTransform target = current;
  if (const auto* t = std::get_if<TranslateAxis>(&mode)) {
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
    offset[static_cast<int>(t->axis)] = t->distance;
    target = {current.translation() + offset, current.rotation()};
  } else if (const auto* r = std::get_if<RotateRing>(&mode)) {
    Eigen::Vector3d axis = Eigen::Vector3d::Zero();
    axis[static_cast<int>(r->axis)] = 1.0;
    target = {current.translation(), Eigen::Quaterniond(Eigen::AngleAxisd(r->angle, axis)) * current.rotation()};
  } else if (const auto* p = std::get_if<PlaneMotion>(&mode)) {
    target = {current.translation() + project_to_plane(p->displacement, p->normal), current.rotation()};
  }
  try {
    return solve_ik(chain, q, target, weights, 1e-6, 100).q;
  } catch (const IkNotConverged& e) {
    return e.best_q();
  }
}

JointState impedance_step(const KinematicChain& chain, const JointState& state, const Eigen::VectorXd& q_target,
                          const ImpedanceGains& gains, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  chain.check_dimension(state.q);
  chain.check_dimension(state.dq);
  chain.check_dimension(q_target);
  gains.validate(chain.dof());

  const Eigen::VectorXd accel =
      gains.stiffness.cwiseProduct(q_target - state.q) - gains.damping.cwiseProduct(state.dq);
  JointState next;
  next.dq = state.dq + accel * dt;
  next.q = state.q + next.dq * dt;
  const auto& lo = chain.lower_limits();
  const auto& hi = chain.upper_limits();
  for (Eigen::Index i = 0; i < next.q.size(); ++i) {
    if (next.q[i] < lo[i]) {
      next.q[i] = lo[i];
      next.dq[i] = 0.0;
    } else if (next.q[i] > hi[i]) {
      next.q[i] = hi[i];
      next.dq[i] = 0.0;
    }
  }
  return next;
}

}  // namespace arbench
