#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "arbench/error.hpp"
#include "arbench/motion_control.hpp"
#include "arbench/planner.hpp"

// Newline-delimited JSON messages exchanged between clients and the robot
// server. Every message is one JSON object on one line with a "type" field.
// Client messages may carry an integer "id"; the server answers each with
// exactly one ack or error whose "ref" echoes it.

namespace arbench::wire {

inline constexpr int kProtocolVersion = 1;

using MessageId = std::int64_t;

enum class SessionMode { idle, jogging, executing, safety_stop };

std::string to_string(SessionMode mode);
SessionMode session_mode_from_string(std::string_view text);

// client -> server

struct Hello {
  std::optional<MessageId> id;
  std::string client_name;
};
struct GetWorkspace {
  std::optional<MessageId> id;
};
struct SetWorkspace {
  std::optional<MessageId> id;
  std::string document;
};
struct SetJointTarget {
  std::optional<MessageId> id;
  Eigen::VectorXd q;
};
struct Jog {
  std::optional<MessageId> id;
  ControlMode mode;
};
struct ExecuteTrajectory {
  std::optional<MessageId> id;
  /// Name of a workspace trajectory, or the label reported for an inline one.
  std::string name;
  std::optional<JointTrajectory> trajectory;
};
struct Gripper {
  std::optional<MessageId> id;
  GripperAction action;
};
struct Stop {
  std::optional<MessageId> id;
};
struct Reset {
  std::optional<MessageId> id;
};

using ClientMessage =
    std::variant<Hello, GetWorkspace, SetWorkspace, SetJointTarget, Jog, ExecuteTrajectory, Gripper, Stop, Reset>;

// server -> client

struct Welcome {
  std::string robot_name;
  std::size_t dof = 0;
  int protocol_version = kProtocolVersion;
};
struct State {
  double t = 0.0;
  Eigen::VectorXd q;
  Eigen::VectorXd dq;
  SessionMode mode = SessionMode::idle;
  std::optional<std::string> attached_object;
};
struct Ack {
  std::optional<MessageId> ref;
  /// Workspace document; only present in the reply to get_workspace.
  std::optional<std::string> document;
};
struct ErrorReply {
  std::optional<MessageId> ref;
  std::string code;
  std::string text;
};
struct ExecutionDone {
  std::string name;
  bool success = false;
};

using ServerMessage = std::variant<Welcome, State, Ack, ErrorReply, ExecutionDone>;

/// Raised when a line cannot be decoded; carries the id if one was readable.
class DecodeError : public Error {
 public:
  DecodeError(std::optional<MessageId> ref, const std::string& what) : Error(what), ref_(ref) {}
  std::optional<MessageId> ref() const { return ref_; }

 private:
  std::optional<MessageId> ref_;
};

std::optional<MessageId> message_id(const ClientMessage& message);
std::string type_name(const ClientMessage& message);
std::string type_name(const ServerMessage& message);

/// One line, without the trailing newline.
std::string encode(const ClientMessage& message);
std::string encode(const ServerMessage& message);

ClientMessage decode_client(std::string_view line);
ServerMessage decode_server(std::string_view line);

struct Address {
  std::string host;
  std::uint16_t port = 0;
};

/// "host:port"; throws InvalidArgument.
Address parse_address(std::string_view text);

}  // namespace arbench::wire
