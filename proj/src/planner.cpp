#include "arbench/planner.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "arbench/motion_control.hpp"

namespace arbench {

void GaussianKeypoint::validate() const {
  const Eigen::Matrix3d& s = position_covariance;
  if (!s.allFinite()) throw InvalidArgument("keypoint '" + id + "': covariance is not finite");
  if ((s - s.transpose()).norm() > 1e-12 * (1.0 + s.norm())) {
    throw InvalidArgument("keypoint '" + id + "': covariance is not symmetric");
  }
  const Eigen::Vector3d eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(s, Eigen::EigenvaluesOnly).eigenvalues();
  if (eig.minCoeff() < 1e-8 || eig.maxCoeff() > 1e2) {
    throw InvalidArgument("keypoint '" + id + "': covariance eigenvalues must lie in [1e-8, 1e2]");
  }
  if (!std::isfinite(orientation_precision) || orientation_precision < 0.0) {
    throw InvalidArgument("keypoint '" + id + "': orientation precision must be finite and non-negative");
  }
  if (!pose.translation().allFinite() || !pose.rotation().coeffs().allFinite()) {
    throw InvalidArgument("keypoint '" + id + "': pose is not finite");
  }
}

Eigen::Matrix3d covariance_from_ellipsoid(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& semi_axes) {
  if (!(semi_axes.array() > 0.0).all() || !semi_axes.allFinite()) {
    throw InvalidArgument("ellipsoid semi-axes must be positive");
  }
  const Eigen::Matrix3d r = rotation.normalized().toRotationMatrix();
  Eigen::Matrix3d cov = r * semi_axes.array().square().matrix().asDiagonal() * r.transpose();
  return 0.5 * (cov + cov.transpose());
}

Eigen::Matrix3d precision_from_covariance(const Eigen::Matrix3d& covariance) {
  if (!covariance.allFinite() || (covariance - covariance.transpose()).norm() > 1e-12 * (1.0 + covariance.norm())) {
    throw InvalidArgument("covariance must be a finite symmetric matrix");
  }
  Eigen::LLT<Eigen::Matrix3d> llt(covariance);
  if (llt.info() != Eigen::Success) throw InvalidArgument("covariance is not positive definite");
  Eigen::Matrix3d precision = llt.solve(Eigen::Matrix3d::Identity());
  return 0.5 * (precision + precision.transpose());
}

GaussianKeypoint transform_keypoint(const RigidTransform& frame_from_world, const GaussianKeypoint& keypoint) {
  GaussianKeypoint out = keypoint;
  out.pose = compose(frame_from_world, keypoint.pose);
  const Eigen::Matrix3d r = frame_from_world.rotation_matrix();
  out.position_covariance = r * keypoint.position_covariance * r.transpose();
  out.position_covariance = 0.5 * (out.position_covariance + out.position_covariance.transpose());
  return out;
}

void PlannerParams::validate(std::size_t keypoints) const {
  if (horizon < 1) throw InvalidArgument("horizon must be at least one step");
  if (static_cast<std::size_t>(horizon) < keypoints) throw InvalidArgument("K > T: more keypoints than steps");
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (!(control_cost > 0.0)) throw InvalidArgument("control cost must be positive");
  if (max_iterations < 0) throw InvalidArgument("max_iterations must be non-negative");
  if (!(cost_tolerance >= 0.0)) throw InvalidArgument("cost tolerance must be non-negative");
  if (!(line_search_shrink > 0.0 && line_search_shrink < 1.0)) {
    throw InvalidArgument("line search shrink factor must lie in (0, 1)");
  }
}

std::vector<Eigen::VectorXd> JointTrajectory::controls() const {
  std::vector<Eigen::VectorXd> u;
  for (std::size_t t = 0; t + 1 < configs.size(); ++t) u.push_back((configs[t + 1] - configs[t]) / dt);
  return u;
}

void JointTrajectory::validate(const KinematicChain& chain) const {
  if (configs.empty()) throw InvalidArgument("trajectory has no samples");
  if (timestamps.size() != configs.size()) throw InvalidArgument("trajectory timestamps and configs differ in length");
  if (!(dt > 0.0)) throw InvalidArgument("trajectory time step must be positive");
  for (std::size_t i = 0; i < configs.size(); ++i) {
    chain.check_dimension(configs[i]);
    if (!configs[i].allFinite()) throw InvalidArgument("trajectory sample " + std::to_string(i) + " is not finite");
    if (!chain.within_limits(configs[i], 1e-9)) {
      throw InvalidArgument("trajectory sample " + std::to_string(i) + " violates joint limits");
    }
    if (i > 0) {
      const double gap = timestamps[i] - timestamps[i - 1];
      if (!(gap > 0.0) || std::abs(gap - dt) > 1e-9 * std::max(1.0, std::abs(timestamps[i]))) {
        throw InvalidArgument("trajectory timestamps are not uniformly spaced by dt");
      }
    }
  }
  for (const auto& [id, step] : keypoint_indices) {
    if (step < 0 || static_cast<std::size_t>(step) >= configs.size()) {
      throw InvalidArgument("keypoint '" + id + "' index outside the trajectory");
    }
  }
}

JointTrajectory JointTrajectory::stationary(const Eigen::VectorXd& q, int horizon, double dt) {
  JointTrajectory traj;
  traj.dt = dt;
  for (int t = 0; t <= horizon; ++t) {
    traj.timestamps.push_back(t * dt);
    traj.configs.push_back(q);
  }
  return traj;
}

PlanDivergence::PlanDivergence(PlanResult last_finite)
    : Error("trajectory optimization diverged: cost became non-finite"), last_(std::move(last_finite)) {}

std::vector<int> allocate_keypoint_times(std::size_t keypoints, int horizon) {
  if (horizon < 1) throw InvalidArgument("horizon must be at least one step");
  const auto big_k = static_cast<long long>(keypoints);
  if (big_k < 1) throw InvalidArgument("at least one keypoint is required for time allocation");
  if (big_k > horizon) throw InvalidArgument("K > T: more keypoints than steps");
  std::vector<int> steps;
  for (long long k = 1; k <= big_k; ++k) {
    // round(k T / K), halves rounded up, in exact integer arithmetic
    steps.push_back(static_cast<int>((2 * k * horizon + big_k) / (2 * big_k)));
  }
  return steps;
}

namespace {

/// Residual [p - mu; log(R R_target^-1)] and its diagonal-block weight.
struct KeypointResidual {
  Eigen::Matrix<double, 6, 1> residual;
  Eigen::Matrix<double, 6, 6> weight;
};

KeypointResidual keypoint_residual(const RigidTransform& pose, const GaussianKeypoint& kp,
                                   const Eigen::Matrix3d& precision) {
  KeypointResidual r;
  r.residual = -pose_error(pose, kp.pose);
  r.weight.setZero();
  r.weight.topLeftCorner<3, 3>() = precision;
  r.weight.bottomRightCorner<3, 3>() = kp.orientation_precision * Eigen::Matrix3d::Identity();
  return r;
}

double evaluate(const KeypointResidual& r) { return r.residual.dot(r.weight * r.residual); }

struct Problem {
  const KinematicChain& chain;
  Eigen::VectorXd q0;
  std::vector<GaussianKeypoint> keypoints;
  std::vector<Eigen::Matrix3d> precisions;
  std::vector<int> steps;
  /// step index -> keypoint index, -1 when the step carries no cost
  std::vector<int> keypoint_at;
  PlannerParams params;
};

struct Rollout {
  std::vector<Eigen::VectorXd> q;  // T + 1
  std::vector<Eigen::VectorXd> u;  // T
  double cost = 0.0;
};

double rollout_cost(const Problem& p, Rollout& r) {
  double cost = 0.0;
  for (const auto& u : r.u) cost += p.params.control_cost * u.squaredNorm();
  for (std::size_t k = 0; k < p.keypoints.size(); ++k) {
    const auto pose = forward_kinematics(p.chain, r.q[static_cast<std::size_t>(p.steps[k])]);
    cost += evaluate(keypoint_residual(pose, p.keypoints[k], p.precisions[k]));
  }
  r.cost = cost;
  return cost;
}

/// Integrates q_{t+1} = clamp(q_t + u_t dt); the stored controls are the
/// ones actually realized after clamping.
Rollout integrate(const Problem& p, const std::vector<Eigen::VectorXd>& controls) {
  Rollout r;
  const double dt = p.params.dt;
  r.q.push_back(p.q0);
  for (const auto& u : controls) {
    const Eigen::VectorXd next = p.chain.clamp(r.q.back() + u * dt);
    r.u.push_back((next - r.q.back()) / dt);
    r.q.push_back(next);
  }
  rollout_cost(p, r);
  return r;
}

struct Gains {
  std::vector<Eigen::VectorXd> feedforward;
  std::vector<Eigen::MatrixXd> feedback;
};

/// Controls of one step minimizing 1/2 x'Hx + g'x inside [lo, hi]
/// (projected Newton). `free` marks the coordinates not held at a bound.
struct BoxSolution {
  Eigen::VectorXd x;
  std::vector<bool> free;
};

BoxSolution solve_box_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi, const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const auto n = g.size();
  BoxSolution sol{-llt.solve(g), std::vector<bool>(static_cast<std::size_t>(n), true)};
  if ((sol.x.array() >= lo.array()).all() && (sol.x.array() <= hi.array()).all()) return sol;

  auto objective = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(h * x) + g.dot(x); };
  Eigen::VectorXd x = sol.x.cwiseMax(lo).cwiseMin(hi);
  for (int iter = 0; iter < 50; ++iter) {
    const Eigen::VectorXd grad = g + h * x;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool held = (x[i] <= lo[i] && grad[i] > 0.0) || (x[i] >= hi[i] && grad[i] < 0.0);
      if (!held) free.push_back(i);
    }
    if (free.empty()) break;
    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd h_free(m, m);
    Eigen::VectorXd g_free(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      g_free[a] = grad[free[static_cast<std::size_t>(a)]];
      for (Eigen::Index b = 0; b < m; ++b) h_free(a, b) = h(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
    }
    const Eigen::VectorXd step_free = -h_free.llt().solve(g_free);
    if (step_free.norm() < 1e-14 * (1.0 + x.norm())) break;
    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    for (Eigen::Index a = 0; a < m; ++a) step[free[static_cast<std::size_t>(a)]] = step_free[a];
    const double f0 = objective(x);
    bool moved = false;
    for (double alpha = 1.0; alpha > 1e-10; alpha *= 0.5) {
      const Eigen::VectorXd trial = (x + alpha * step).cwiseMax(lo).cwiseMin(hi);
      if (objective(trial) <= f0 + 0.1 * grad.dot(trial - x)) {
        moved = (trial - x).norm() > 0.0;
        x = trial;
        break;
      }
    }
    if (!moved) break;
  }
  const Eigen::VectorXd grad = g + h * x;
  for (Eigen::Index i = 0; i < n; ++i) {
    sol.free[static_cast<std::size_t>(i)] = !((x[i] <= lo[i] && grad[i] > 0.0) || (x[i] >= hi[i] && grad[i] < 0.0));
  }
  sol.x = std::move(x);
  return sol;
}

/// `mu` penalizes deviation from the nominal states (Levenberg-Marquardt
/// regularization of V_xx inside Q_uu and Q_ux).
Gains backward_pass(const Problem& p, const Rollout& nominal, double mu) {
  const auto n = static_cast<Eigen::Index>(p.chain.dof());
  const int horizon = p.params.horizon;
  const double dt = p.params.dt;
  const double r2 = 2.0 * p.params.control_cost;

  Eigen::VectorXd vx = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd vxx = Eigen::MatrixXd::Zero(n, n);
  auto add_state_cost = [&](int t) {
    const int k = p.keypoint_at[static_cast<std::size_t>(t)];
    if (k < 0) return;
    const auto& q = nominal.q[static_cast<std::size_t>(t)];
    const auto res = keypoint_residual(forward_kinematics(p.chain, q), p.keypoints[static_cast<std::size_t>(k)],
                                       p.precisions[static_cast<std::size_t>(k)]);
    const Jacobian jac = jacobian(p.chain, q);
    const Eigen::MatrixXd wj = res.weight * jac;
    vx += 2.0 * jac.transpose() * (res.weight * res.residual);
    vxx += 2.0 * jac.transpose() * wj;
  };

  Gains g;
  g.feedforward.resize(static_cast<std::size_t>(horizon));
  g.feedback.resize(static_cast<std::size_t>(horizon));
  add_state_cost(horizon);
  for (int t = horizon - 1; t >= 0; --t) {
    const auto& u = nominal.u[static_cast<std::size_t>(t)];
    const Eigen::VectorXd qu = r2 * u + dt * vx;
    Eigen::MatrixXd vxx_reg = vxx;
    vxx_reg.diagonal().array() += mu;
    Eigen::MatrixXd quu = dt * dt * vxx_reg;
    quu.diagonal().array() += r2;
    const Eigen::MatrixXd qux = dt * vxx_reg;
    Eigen::MatrixXd quu_plain = dt * dt * vxx;
    quu_plain.diagonal().array() += r2;

    // Joint limits bound the control change: q_t + (u + du) dt stays in range.
    const auto& q = nominal.q[static_cast<std::size_t>(t)];
    const Eigen::VectorXd lo = (p.chain.lower_limits() - q) / dt - u;
    const Eigen::VectorXd hi = (p.chain.upper_limits() - q) / dt - u;
    Eigen::LLT<Eigen::MatrixXd> llt(quu);
    const BoxSolution box = solve_box_qp(quu, qu, lo, hi, llt);
    const Eigen::VectorXd& k = box.x;
    Eigen::MatrixXd big_k;
    if (std::all_of(box.free.begin(), box.free.end(), [](bool f) { return f; })) {
      big_k = -llt.solve(qux);
    } else {
      // Held coordinates get no feedback; the rest solve the reduced system.
      big_k = Eigen::MatrixXd::Zero(n, n);
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (box.free[static_cast<std::size_t>(i)]) free.push_back(i);
      }
      const auto m = static_cast<Eigen::Index>(free.size());
      if (m > 0) {
        Eigen::MatrixXd quu_free(m, m), qux_free(m, n);
        for (Eigen::Index a = 0; a < m; ++a) {
          qux_free.row(a) = qux.row(free[static_cast<std::size_t>(a)]);
          for (Eigen::Index b = 0; b < m; ++b) {
            quu_free(a, b) = quu(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
          }
        }
        const Eigen::MatrixXd rows = -quu_free.llt().solve(qux_free);
        for (Eigen::Index a = 0; a < m; ++a) big_k.row(free[static_cast<std::size_t>(a)]) = rows.row(a);
      }
    }

    // Single integrator: Q_x = V_x', Q_xx = V_xx' (A = I).
    // Value update uses the unregularized blocks.
    const Eigen::MatrixXd qux_plain = dt * vxx;
    Eigen::VectorXd next_vx =
        vx + big_k.transpose() * quu_plain * k + big_k.transpose() * qu + qux_plain.transpose() * k;
    Eigen::MatrixXd next_vxx = vxx + big_k.transpose() * quu_plain * big_k + big_k.transpose() * qux_plain +
                               qux_plain.transpose() * big_k;
    vx = std::move(next_vx);
    vxx = 0.5 * (next_vxx + next_vxx.transpose());
    g.feedforward[static_cast<std::size_t>(t)] = k;
    g.feedback[static_cast<std::size_t>(t)] = big_k;
    add_state_cost(t);
  }
  return g;
}

Rollout forward_pass(const Problem& p, const Rollout& nominal, const Gains& g, double alpha) {
  Rollout r;
  const double dt = p.params.dt;
  r.q.push_back(p.q0);
  for (std::size_t t = 0; t < nominal.u.size(); ++t) {
    const Eigen::VectorXd& q = r.q.back();
    const Eigen::VectorXd u = nominal.u[t] + alpha * g.feedforward[t] + g.feedback[t] * (q - nominal.q[t]);
    const Eigen::VectorXd next = p.chain.clamp(q + u * dt);
    r.u.push_back((next - q) / dt);
    r.q.push_back(next);
  }
  rollout_cost(p, r);
  return r;
}

PlanResult to_result(const Problem& p, const Rollout& r) {
  PlanResult result;
  auto& traj = result.trajectory;
  traj.dt = p.params.dt;
  for (std::size_t t = 0; t < r.q.size(); ++t) {
    traj.timestamps.push_back(static_cast<double>(t) * p.params.dt);
    traj.configs.push_back(r.q[t]);
  }
  for (std::size_t k = 0; k < p.keypoints.size(); ++k) traj.keypoint_indices[p.keypoints[k].id] = p.steps[k];
  result.cost = r.cost;
  return result;
}

Problem make_problem(const KinematicChain& chain, const Eigen::VectorXd& q0,
                     const std::vector<GaussianKeypoint>& keypoints, const PlannerParams& params) {
  params.validate(keypoints.size());
  chain.check_dimension(q0);
  if (!chain.within_limits(q0, 1e-9)) throw InvalidArgument("initial configuration violates joint limits");
  Problem p{chain, chain.clamp(q0), keypoints, {},
            keypoints.empty() ? std::vector<int>() : allocate_keypoint_times(keypoints.size(), params.horizon),
            std::vector<int>(static_cast<std::size_t>(params.horizon) + 1, -1), params};
  for (std::size_t k = 0; k < keypoints.size(); ++k) {
    keypoints[k].validate();
    p.precisions.push_back(precision_from_covariance(keypoints[k].position_covariance));
    p.keypoint_at[static_cast<std::size_t>(p.steps[k])] = static_cast<int>(k);
  }
  return p;
}

PlanResult optimize(const Problem& p, std::vector<Eigen::VectorXd> initial_controls) {
  if (p.keypoints.empty()) {
    PlanResult result = to_result(p, integrate(p, std::vector<Eigen::VectorXd>(
                                                      static_cast<std::size_t>(p.params.horizon),
                                                      Eigen::VectorXd::Zero(p.q0.size()))));
    result.converged = true;
    result.cost_history.push_back(result.cost);
    return result;
  }

  Rollout nominal = integrate(p, initial_controls);
  PlanResult last = to_result(p, nominal);
  last.cost_history.push_back(nominal.cost);
  if (!std::isfinite(nominal.cost)) throw PlanDivergence(last);

  constexpr int kMaxLineSearchSteps = 8;
  constexpr double kMinMu = 1e-6;
  constexpr double kMaxMu = 1e10;
  int iterations = 0;
  bool converged = false;
  double mu = 0.0;
  while (iterations < p.params.max_iterations) {
    ++iterations;
    const Gains gains = backward_pass(p, nominal, mu);
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < kMaxLineSearchSteps; ++ls, alpha *= p.params.line_search_shrink) {
      Rollout candidate = forward_pass(p, nominal, gains, alpha);
      if (!std::isfinite(candidate.cost)) {
        last.iterations = iterations;
        throw PlanDivergence(last);
      }
      if (candidate.cost < nominal.cost) {
        const double improvement = nominal.cost - candidate.cost;
        nominal = std::move(candidate);
        accepted = true;
        converged = improvement < p.params.cost_tolerance;
        break;
      }
    }
    if (!accepted) {
      mu = std::max(kMinMu, mu * 10.0);
      // No descent left even for a heavily damped step: local minimum.
      if (mu > kMaxMu) {
        converged = true;
        break;
      }
      continue;
    }
    // Full steps mean the quadratic model is trustworthy; relax the damping.
    if (alpha == 1.0) {
      mu = mu / 10.0 < kMinMu ? 0.0 : mu / 10.0;
    } else if (alpha < 0.25) {
      mu = std::max(kMinMu, mu * 10.0);
    }
    auto history = std::move(last.cost_history);
    history.push_back(nominal.cost);
    last = to_result(p, nominal);
    last.cost_history = std::move(history);
    if (converged) break;
  }
  last.iterations = iterations;
  last.converged = converged;
  return last;
}

}  // namespace

double keypoint_cost(const KinematicChain& chain, const Eigen::VectorXd& q, const GaussianKeypoint& keypoint) {
  return evaluate(keypoint_residual(forward_kinematics(chain, q), keypoint,
                                    precision_from_covariance(keypoint.position_covariance)));
}

double trajectory_cost(const KinematicChain& chain, const JointTrajectory& trajectory,
                       const std::vector<GaussianKeypoint>& keypoints, const PlannerParams& params) {
  double cost = 0.0;
  for (const auto& u : trajectory.controls()) cost += params.control_cost * u.squaredNorm();
  if (keypoints.empty()) return cost;
  const auto steps = allocate_keypoint_times(keypoints.size(), static_cast<int>(trajectory.steps()));
  for (std::size_t k = 0; k < keypoints.size(); ++k) {
    cost += keypoint_cost(chain, trajectory.configs[static_cast<std::size_t>(steps[k])], keypoints[k]);
  }
  return cost;
}

std::vector<double> keypoint_position_errors(const KinematicChain& chain, const JointTrajectory& trajectory,
                                             const std::vector<GaussianKeypoint>& keypoints) {
  std::vector<double> errors;
  if (keypoints.empty()) return errors;
  const auto steps = allocate_keypoint_times(keypoints.size(), static_cast<int>(trajectory.steps()));
  for (std::size_t k = 0; k < keypoints.size(); ++k) {
    const auto pose = forward_kinematics(chain, trajectory.configs[static_cast<std::size_t>(steps[k])]);
    errors.push_back((pose.translation() - keypoints[k].pose.translation()).norm());
  }
  return errors;
}

PlanResult plan_ilqr(const KinematicChain& chain, const Eigen::VectorXd& q0,
                     const std::vector<GaussianKeypoint>& keypoints, const PlannerParams& params) {
  return replan_incremental(chain, q0, keypoints, params, nullptr);
}

PlanResult replan_incremental(const KinematicChain& chain, const Eigen::VectorXd& q0,
                              const std::vector<GaussianKeypoint>& keypoints, const PlannerParams& params,
                              const JointTrajectory* warm_start) {
  const Problem p = make_problem(chain, q0, keypoints, params);
  std::vector<Eigen::VectorXd> controls(static_cast<std::size_t>(params.horizon), Eigen::VectorXd::Zero(q0.size()));
  if (warm_start != nullptr && !warm_start->configs.empty()) {
    const auto previous = warm_start->controls();
    for (std::size_t t = 0; t < std::min(previous.size(), controls.size()); ++t) {
      chain.check_dimension(previous[t]);
      controls[t] = previous[t];
    }
  }
  return optimize(p, std::move(controls));
}

std::vector<RigidTransform> task_path(const KinematicChain& chain, const JointTrajectory& trajectory) {
  std::vector<RigidTransform> path;
  path.reserve(trajectory.configs.size());
  for (const auto& q : trajectory.configs) path.push_back(forward_kinematics(chain, q));
  return path;
}

std::string trajectory_to_csv(const JointTrajectory& trajectory) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "t";
  const auto n = trajectory.configs.empty() ? 0 : trajectory.configs.front().size();
  for (Eigen::Index j = 0; j < n; ++j) out << ",q" << (j + 1);
  out << "\n";
  for (std::size_t i = 0; i < trajectory.configs.size(); ++i) {
    out << trajectory.timestamps[i];
    for (Eigen::Index j = 0; j < n; ++j) out << "," << trajectory.configs[i][j];
    out << "\n";
  }
  return out.str();
}

}  // namespace arbench
