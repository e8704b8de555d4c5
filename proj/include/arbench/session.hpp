#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "arbench/kinematics.hpp"
#include "arbench/motion_control.hpp"
#include "arbench/wire.hpp"
#include "arbench/workspace.hpp"

namespace arbench {

struct SessionConfig {
  std::string robot_name;
  double tick_rate = 500.0;  // Hz, simulation
  double state_rate = 50.0;  // Hz, state broadcast
  /// Empty vectors select 400 1/s^2 and 40 1/s (critically damped) per joint.
  ImpedanceGains gains;
  IkWeights ik;
  /// Largest commanded target change between two ticks before a safety stop (rad).
  double jump_threshold = 0.5;
  double limit_tolerance = 1e-6;
  /// |q - target|_inf below which the robot counts as settled.
  double settle_tolerance = 1e-3;
  /// Simulated seconds to wait for settling before an execution fails.
  double settle_timeout = 5.0;
};

using ClientId = std::uint64_t;

/// A server message addressed to one client, or broadcast when `to` is empty.
struct Outgoing {
  std::optional<ClientId> to;
  wire::ServerMessage message;
};

/// The authoritative robot session: simulated joints, workspace, execution
/// and safety state. Not thread-safe; the server drives it from a single loop.
class Session {
 public:
  Session(KinematicChain urdf_chain, Workspace workspace, SessionConfig config = {});
  Session(KinematicChain urdf_chain, Workspace workspace, SessionConfig config, const Eigen::VectorXd& q0);

  void connect(ClientId client);
  void disconnect(ClientId client);

  /// Decodes one line; malformed input yields error{code:"bad_request"}.
  std::vector<Outgoing> handle_line(ClientId client, std::string_view line);
  std::vector<Outgoing> handle(ClientId client, const wire::ClientMessage& message);

  /// Advances the simulation by 1 / tick_rate; includes a state broadcast
  /// every tick_rate / state_rate ticks.
  std::vector<Outgoing> tick();

  wire::State state() const;
  wire::SessionMode mode() const { return mode_; }
  double time() const;
  std::uint64_t ticks() const { return ticks_; }
  double tick_period() const { return 1.0 / config_.tick_rate; }
  const Workspace& workspace() const { return workspace_; }
  const KinematicChain& chain() const { return chain_; }
  const Eigen::VectorXd& joint_target() const { return target_; }
  std::optional<ClientId> operator_client() const { return operator_; }

 private:
  struct Execution {
    enum class Phase { approach, stream, settle_action, settle_final };
    std::string name;
    JointTrajectory trajectory;
    std::map<std::size_t, GripperAction> actions;
    Phase phase = Phase::approach;
    std::size_t step = 0;
    double phase_start = 0.0;
  };

  std::vector<Outgoing> dispatch(ClientId client, const wire::ClientMessage& message);
  /// Moves the impedance target; a jump above the threshold trips the safety stop.
  bool command_target(const Eigen::VectorXd& target, std::vector<Outgoing>& out);
  void trip_safety(const std::string& reason, std::vector<Outgoing>& out);
  void finish_execution(bool success, std::vector<Outgoing>& out);
  void advance_execution(std::vector<Outgoing>& out);
  bool settled() const;
  std::optional<std::string> attached_object() const;

  KinematicChain urdf_chain_;
  KinematicChain chain_;
  Workspace workspace_;
  SessionConfig config_;
  JointState joints_;
  Eigen::VectorXd target_;
  std::optional<Eigen::VectorXd> ramp_goal_;
  std::optional<Execution> execution_;
  wire::SessionMode mode_ = wire::SessionMode::idle;
  std::uint64_t ticks_ = 0;
  std::uint64_t ticks_per_state_ = 1;
  std::set<ClientId> greeted_;
  std::optional<ClientId> operator_;
};

}  // namespace arbench
