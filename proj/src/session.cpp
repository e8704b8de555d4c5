#include "arbench/session.hpp"

#include <cmath>

namespace arbench {

using namespace wire;

namespace {

constexpr double kDefaultStiffness = 400.0;
constexpr double kDefaultDamping = 40.0;
constexpr double kDefaultRampVelocity = 1.0;  // rad/s when the URDF gives no limit
constexpr double kSettledVelocity = 1e-2;

ErrorReply error(std::optional<MessageId> ref, std::string code, std::string text) {
  return {ref, std::move(code), std::move(text)};
}

}  // namespace

Session::Session(KinematicChain urdf_chain, Workspace workspace, SessionConfig config)
    : Session(urdf_chain, std::move(workspace), std::move(config), urdf_chain.neutral_configuration()) {}

Session::Session(KinematicChain urdf_chain, Workspace workspace, SessionConfig config, const Eigen::VectorXd& q0)
    : urdf_chain_(std::move(urdf_chain)),
      chain_(workspace_chain(workspace, urdf_chain_)),
      workspace_(std::move(workspace)),
      config_(std::move(config)) {
  if (!(config_.tick_rate > 0.0) || !(config_.state_rate > 0.0)) {
    throw InvalidArgument("tick and state rates must be positive");
  }
  if (config_.gains.stiffness.size() == 0) {
    config_.gains = ImpedanceGains::uniform(chain_.dof(), kDefaultStiffness, kDefaultDamping);
  }
  config_.gains.validate(chain_.dof());
  if (config_.robot_name.empty()) config_.robot_name = chain_.name();
  chain_.check_dimension(q0);
  joints_.q = chain_.clamp(q0);
  joints_.dq = Eigen::VectorXd::Zero(joints_.q.size());
  target_ = joints_.q;
  ticks_per_state_ = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(config_.tick_rate / config_.state_rate)));
}

void Session::connect(ClientId client) { greeted_.erase(client); }

void Session::disconnect(ClientId client) {
  greeted_.erase(client);
  if (operator_ == client) operator_.reset();
}

double Session::time() const { return static_cast<double>(ticks_) / config_.tick_rate; }

std::optional<std::string> Session::attached_object() const {
  for (const auto& obj : workspace_.objects) {
    if (obj.attached_to_gripper) return obj.id;
  }
  return std::nullopt;
}

State Session::state() const { return {time(), joints_.q, joints_.dq, mode_, attached_object()}; }

bool Session::settled() const {
  return (joints_.q - target_).cwiseAbs().maxCoeff() < config_.settle_tolerance &&
         joints_.dq.cwiseAbs().maxCoeff() < kSettledVelocity;
}

std::vector<Outgoing> Session::handle_line(ClientId client, std::string_view line) {
  try {
    return handle(client, decode_client(line));
  } catch (const DecodeError& e) {
    return {{client, error(e.ref(), "bad_request", e.what())}};
  }
}

std::vector<Outgoing> Session::handle(ClientId client, const ClientMessage& message) {
  const auto ref = message_id(message);
  if (!std::holds_alternative<Hello>(message) && !greeted_.count(client)) {
    return {{client, error(ref, "bad_request", "send hello first")}};
  }
  if (mode_ == SessionMode::safety_stop && !std::holds_alternative<Hello>(message) &&
      !std::holds_alternative<GetWorkspace>(message) && !std::holds_alternative<Reset>(message)) {
    return {{client, error(ref, "stopped", "robot is in safety stop; send reset")}};
  }
  const bool needs_operator = !std::holds_alternative<Hello>(message) &&
                              !std::holds_alternative<GetWorkspace>(message) && !std::holds_alternative<Stop>(message);
  if (needs_operator && operator_ != client) {
    return {{client, error(ref, "not_operator", "another client holds the operator role")}};
  }
  return dispatch(client, message);
}

std::vector<Outgoing> Session::dispatch(ClientId client, const ClientMessage& message) {
  const auto ref = message_id(message);
  std::vector<Outgoing> out;
  auto ack = [&](std::optional<std::string> document = std::nullopt) {
    out.push_back({client, Ack{ref, std::move(document)}});
    return out;
  };
  auto fail = [&](const char* code, std::string text) {
    out.push_back({client, error(ref, code, std::move(text))});
    return out;
  };
  const bool busy = mode_ == SessionMode::executing;

  if (std::holds_alternative<Hello>(message)) {
    greeted_.insert(client);
    if (!operator_) operator_ = client;
    out.push_back({client, Welcome{config_.robot_name, chain_.dof(), kProtocolVersion}});
    return ack();
  }
  if (std::holds_alternative<GetWorkspace>(message)) return ack(save_workspace(workspace_));

  if (const auto* m = std::get_if<SetWorkspace>(&message)) {
    if (busy) return fail("busy", "cannot replace the workspace while executing");
    try {
      Workspace ws = load_workspace(m->document);
      KinematicChain chain = workspace_chain(ws, urdf_chain_);
      workspace_ = std::move(ws);
      chain_ = std::move(chain);
    } catch (const Error& e) {
      return fail("bad_request", e.what());
    }
    return ack();
  }

  if (const auto* m = std::get_if<SetJointTarget>(&message)) {
    if (busy) return fail("busy", "trajectory execution in progress");
    if (static_cast<std::size_t>(m->q.size()) != chain_.dof()) {
      return fail("bad_request", "q must have " + std::to_string(chain_.dof()) + " entries");
    }
    if (!chain_.within_limits(m->q, 1e-9)) return fail("limits", "joint target outside the joint limits");
    ramp_goal_ = m->q;
    mode_ = SessionMode::jogging;
    return ack();
  }

  if (const auto* m = std::get_if<Jog>(&message)) {
    if (busy) return fail("busy", "trajectory execution in progress");
    Eigen::VectorXd next;
    try {
      next = chain_.clamp(apply_control(chain_, target_, m->mode, config_.ik));
    } catch (const InvalidArgument& e) {
      return fail("bad_request", e.what());
    }
    ramp_goal_.reset();
    if (!command_target(next, out)) return fail("safety_stop", "jog commanded a joint jump above the threshold");
    mode_ = SessionMode::jogging;
    return ack();
  }

  if (const auto* m = std::get_if<ExecuteTrajectory>(&message)) {
    if (busy) return fail("busy", "trajectory execution in progress");
    JointTrajectory traj;
    if (m->trajectory) {
      traj = *m->trajectory;
    } else {
      auto it = workspace_.trajectories.find(m->name);
      if (it == workspace_.trajectories.end()) return fail("not_found", "no trajectory named '" + m->name + "'");
      traj = it->second;
    }
    try {
      traj.validate(chain_);
    } catch (const DimensionError& e) {
      return fail("bad_request", e.what());
    } catch (const InvalidArgument& e) {
      const bool limits = std::string(e.what()).find("limits") != std::string::npos;
      return fail(limits ? "limits" : "bad_request", e.what());
    }
    Execution exec{m->name, std::move(traj), {}, Execution::Phase::approach, 0, time()};
    for (const auto& kp : workspace_.keypoints) {
      auto it = exec.trajectory.keypoint_indices.find(kp.id);
      if (it != exec.trajectory.keypoint_indices.end() && kp.gripper_action != GripperAction::none) {
        exec.actions[static_cast<std::size_t>(it->second)] = kp.gripper_action;
      }
    }
    ramp_goal_ = exec.trajectory.configs.front();
    execution_ = std::move(exec);
    mode_ = SessionMode::executing;
    return ack();
  }

  if (const auto* m = std::get_if<Gripper>(&message)) {
    if (busy) return fail("busy", "trajectory execution in progress");
    workspace_ = apply_gripper_action(workspace_, chain_, joints_.q, m->action).workspace;
    return ack();
  }

  if (std::holds_alternative<Stop>(message)) {
    if (execution_) finish_execution(false, out);
    ramp_goal_.reset();
    target_ = joints_.q;
    mode_ = SessionMode::idle;
    return ack();
  }

  if (std::holds_alternative<Reset>(message)) {
    if (mode_ == SessionMode::safety_stop) {
      target_ = joints_.q;
      joints_.dq.setZero();
      mode_ = SessionMode::idle;
    }
    return ack();
  }
  return fail("bad_request", "unsupported message");
}

bool Session::command_target(const Eigen::VectorXd& target, std::vector<Outgoing>& out) {
  const double jump = (target - target_).cwiseAbs().maxCoeff();
  if (jump > config_.jump_threshold) {
    trip_safety("commanded joint jump of " + std::to_string(jump) + " rad exceeds " +
                    std::to_string(config_.jump_threshold) + " rad",
                out);
    return false;
  }
  target_ = target;
  return true;
}

void Session::trip_safety(const std::string& reason, std::vector<Outgoing>& out) {
  if (execution_) finish_execution(false, out);
  mode_ = SessionMode::safety_stop;
  ramp_goal_.reset();
  target_ = joints_.q;
  joints_.dq.setZero();
  out.push_back({std::nullopt, error(std::nullopt, "safety_stop", reason)});
}

void Session::finish_execution(bool success, std::vector<Outgoing>& out) {
  out.push_back({std::nullopt, ExecutionDone{execution_->name, success}});
  execution_.reset();
  ramp_goal_.reset();
  if (mode_ == SessionMode::executing) mode_ = SessionMode::idle;
}

void Session::advance_execution(std::vector<Outgoing>& out) {
  using Phase = Execution::Phase;
  auto& exec = *execution_;
  const double now = time();
  const auto& configs = exec.trajectory.configs;
  const std::size_t last = configs.size() - 1;

  switch (exec.phase) {
    case Phase::approach:
      if (ramp_goal_) {
        exec.phase_start = now;
        return;
      }
      if (settled()) {
        exec.phase = Phase::stream;
        exec.step = 0;
        exec.phase_start = now;
      } else if (now - exec.phase_start > config_.settle_timeout) {
        finish_execution(false, out);
        return;
      }
      break;
    case Phase::settle_action:
      if (settled()) {
        const auto action = exec.actions.at(exec.step);
        workspace_ = apply_gripper_action(workspace_, chain_, joints_.q, action).workspace;
        exec.actions.erase(exec.step);
        exec.phase = Phase::stream;
        // Resume the clock as if streaming had just reached this step.
        exec.phase_start = now - static_cast<double>(exec.step) * exec.trajectory.dt;
      } else if (now - exec.phase_start > config_.settle_timeout) {
        finish_execution(false, out);
      }
      return;
    case Phase::settle_final:
      if (settled()) {
        finish_execution(true, out);
      } else if (now - exec.phase_start > config_.settle_timeout) {
        finish_execution(false, out);
      }
      return;
    case Phase::stream:
      break;
  }
  if (exec.phase != Phase::stream) return;

  const double elapsed = now - exec.phase_start;
  const auto due = std::min<std::size_t>(last, static_cast<std::size_t>(std::floor(elapsed / exec.trajectory.dt + 1e-9)));
  while (exec.step <= due) {
    if (!command_target(configs[exec.step], out)) return;
    if (exec.actions.count(exec.step)) {
      exec.phase = Phase::settle_action;
      exec.phase_start = now;
      return;
    }
    if (exec.step == last) {
      exec.phase = Phase::settle_final;
      exec.phase_start = now;
      return;
    }
    ++exec.step;
  }
}

std::vector<Outgoing> Session::tick() {
  std::vector<Outgoing> out;
  const double dt = tick_period();
  if (mode_ != SessionMode::safety_stop) {
    if (ramp_goal_) {
      Eigen::VectorXd speed = chain_.velocity_limits();
      for (Eigen::Index i = 0; i < speed.size(); ++i) {
        if (!(speed[i] > 0.0)) speed[i] = kDefaultRampVelocity;
      }
      const Eigen::VectorXd max_step = speed * dt;
      const Eigen::VectorXd remaining = *ramp_goal_ - target_;
      if (((remaining.cwiseAbs() - max_step).array() <= 0.0).all()) {
        if (command_target(*ramp_goal_, out)) ramp_goal_.reset();
      } else {
        command_target(target_ + remaining.cwiseMax(-max_step).cwiseMin(max_step), out);
      }
    }
    if (execution_) advance_execution(out);
  }

  joints_ = impedance_step(chain_, joints_, target_, config_.gains, dt);
  if (mode_ != SessionMode::safety_stop && !chain_.within_limits(joints_.q, config_.limit_tolerance)) {
    trip_safety("joint limit violated", out);
  }
  if (mode_ == SessionMode::jogging && !ramp_goal_ && settled()) mode_ = SessionMode::idle;

  bool holding = false;
  for (const auto& obj : workspace_.objects) holding = holding || obj.attached_to_gripper;
  if (holding) {
    const RigidTransform tool = compose(workspace_.robot.placement, forward_kinematics(chain_, joints_.q));
    for (auto& obj : workspace_.objects) {
      if (obj.attached_to_gripper) obj.pose = tool;
    }
  }

  ++ticks_;
  if (ticks_ % ticks_per_state_ == 0) out.push_back({std::nullopt, state()});
  return out;
}

}  // namespace arbench
