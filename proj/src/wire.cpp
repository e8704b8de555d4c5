#include "arbench/wire.hpp"

#include <cmath>
#include <json.hpp>

#include "arbench/workspace.hpp"

namespace arbench::wire {

using Json = nlohmann::ordered_json;

std::string to_string(SessionMode mode) {
  switch (mode) {
    case SessionMode::idle:
      return "idle";
    case SessionMode::jogging:
      return "jogging";
    case SessionMode::executing:
      return "executing";
    case SessionMode::safety_stop:
      return "safety_stop";
  }
  return "idle";
}

SessionMode session_mode_from_string(std::string_view text) {
  if (text == "idle") return SessionMode::idle;
  if (text == "jogging") return SessionMode::jogging;
  if (text == "executing") return SessionMode::executing;
  if (text == "safety_stop") return SessionMode::safety_stop;
  throw InvalidArgument("unknown session mode '" + std::string(text) + "'");
}

std::optional<MessageId> message_id(const ClientMessage& message) {
  return std::visit([](const auto& m) { return m.id; }, message);
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::x:
      return "x";
    case Axis::y:
      return "y";
    case Axis::z:
      return "z";
  }
  return "x";
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json id_json(const std::optional<MessageId>& id) { return id ? Json(*id) : Json(nullptr); }

/// Decoding helper: every failure becomes a DecodeError carrying the id.
class Fields {
 public:
  Fields(const Json& obj, std::optional<MessageId> id) : obj_(obj), id_(id) {}

  [[noreturn]] void fail(const std::string& what) const { throw DecodeError(id_, what); }

  const Json& at(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }
  bool has(const char* key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }

  std::string str(const char* key) const {
    const Json& j = at(key);
    if (!j.is_string()) fail(std::string("field '") + key + "' must be a string");
    return j.get<std::string>();
  }
  double num(const char* key) const { return number(at(key), key); }
  double number(const Json& j, const char* key) const {
    if (!j.is_number()) fail(std::string("field '") + key + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(std::string("field '") + key + "' must be finite");
    return v;
  }
  bool boolean(const char* key) const {
    const Json& j = at(key);
    if (!j.is_boolean()) fail(std::string("field '") + key + "' must be a boolean");
    return j.get<bool>();
  }
  Eigen::VectorXd vec(const char* key, std::optional<Eigen::Index> size = {}) const {
    const Json& j = at(key);
    if (!j.is_array()) fail(std::string("field '") + key + "' must be an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], key);
    if (size && v.size() != *size) fail(std::string("field '") + key + "' has the wrong length");
    return v;
  }
  Axis axis(const char* key) const {
    const std::string a = str(key);
    if (a == "x") return Axis::x;
    if (a == "y") return Axis::y;
    if (a == "z") return Axis::z;
    fail("axis must be one of x, y, z");
  }
  std::optional<MessageId> id() const { return id_; }

 private:
  const Json& obj_;
  std::optional<MessageId> id_;
};

Json parse_line(std::string_view line, std::optional<MessageId>& id) {
  Json doc;
  try {
    doc = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw DecodeError(std::nullopt, std::string("malformed message: ") + e.what());
  }
  if (!doc.is_object()) throw DecodeError(std::nullopt, "message must be a JSON object");
  if (auto it = doc.find("id"); it != doc.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw DecodeError(std::nullopt, "field 'id' must be an integer");
    id = it->get<MessageId>();
  }
  if (!doc.contains("type") || !doc["type"].is_string()) throw DecodeError(id, "missing message type");
  return doc;
}

ControlMode decode_jog(const Fields& f) {
  const std::string mode = f.str("mode");
  const Json& payload_json = f.at("payload");
  if (!payload_json.is_object()) f.fail("field 'payload' must be an object");
  const Fields p(payload_json, f.id());
  if (mode == "translate_axis") return TranslateAxis{p.axis("axis"), p.num("distance")};
  if (mode == "rotate_ring") return RotateRing{p.axis("axis"), p.num("angle")};
  if (mode == "plane") return PlaneMotion{p.vec("normal", 3), p.vec("displacement", 3)};
  if (mode == "joint_jog") {
    const double joint = p.num("joint");
    if (joint < 0 || std::floor(joint) != joint) p.fail("field 'joint' must be a non-negative integer");
    return JointJog{static_cast<std::size_t>(joint), p.num("delta"), p.has("nullspace") && p.boolean("nullspace")};
  }
  f.fail("unknown jog mode '" + mode + "'");
}

Json encode_jog(const ControlMode& mode) {
  return std::visit(
      Overloaded{
          [](const TranslateAxis& m) {
            return Json{{"mode", "translate_axis"}, {"payload", {{"axis", axis_name(m.axis)}, {"distance", m.distance}}}};
          },
          [](const RotateRing& m) {
            return Json{{"mode", "rotate_ring"}, {"payload", {{"axis", axis_name(m.axis)}, {"angle", m.angle}}}};
          },
          [](const PlaneMotion& m) {
            return Json{{"mode", "plane"},
                        {"payload", {{"normal", vector_json(m.normal)}, {"displacement", vector_json(m.displacement)}}}};
          },
          [](const JointJog& m) {
            return Json{{"mode", "joint_jog"},
                        {"payload", {{"joint", m.joint}, {"delta", m.delta}, {"nullspace", m.nullspace}}}};
          },
      },
      mode);
}

}  // namespace

std::string type_name(const ClientMessage& message) {
  return std::visit(Overloaded{
                        [](const Hello&) { return "hello"; },
                        [](const GetWorkspace&) { return "get_workspace"; },
                        [](const SetWorkspace&) { return "set_workspace"; },
                        [](const SetJointTarget&) { return "set_joint_target"; },
                        [](const Jog&) { return "jog"; },
                        [](const ExecuteTrajectory&) { return "execute_trajectory"; },
                        [](const Gripper&) { return "gripper"; },
                        [](const Stop&) { return "stop"; },
                        [](const Reset&) { return "reset"; },
                    },
                    message);
}

std::string type_name(const ServerMessage& message) {
  return std::visit(Overloaded{
                        [](const Welcome&) { return "welcome"; },
                        [](const State&) { return "state"; },
                        [](const Ack&) { return "ack"; },
                        [](const ErrorReply&) { return "error"; },
                        [](const ExecutionDone&) { return "execution_done"; },
                    },
                    message);
}

std::string encode(const ClientMessage& message) {
  Json j{{"type", type_name(message)}};
  if (const auto id = message_id(message)) j["id"] = *id;
  std::visit(Overloaded{
                 [&](const Hello& m) { j["client_name"] = m.client_name; },
                 [&](const GetWorkspace&) {},
                 [&](const SetWorkspace& m) { j["document"] = m.document; },
                 [&](const SetJointTarget& m) { j["q"] = vector_json(m.q); },
                 [&](const Jog& m) { j.update(encode_jog(m.mode)); },
                 [&](const ExecuteTrajectory& m) {
                   j["name"] = m.name;
                   if (m.trajectory) j["inline"] = Json::parse(save_trajectory(*m.trajectory));
                 },
                 [&](const Gripper& m) { j["action"] = to_string(m.action); },
                 [&](const Stop&) {},
                 [&](const Reset&) {},
             },
             message);
  return j.dump();
}

std::string encode(const ServerMessage& message) {
  Json j{{"type", type_name(message)}};
  std::visit(Overloaded{
                 [&](const Welcome& m) {
                   j["robot_name"] = m.robot_name;
                   j["dof"] = m.dof;
                   j["protocol_version"] = m.protocol_version;
                 },
                 [&](const State& m) {
                   j["t"] = m.t;
                   j["q"] = vector_json(m.q);
                   j["dq"] = vector_json(m.dq);
                   j["mode"] = to_string(m.mode);
                   j["attached_object"] = m.attached_object ? Json(*m.attached_object) : Json(nullptr);
                 },
                 [&](const Ack& m) {
                   j["ref"] = id_json(m.ref);
                   if (m.document) j["document"] = *m.document;
                 },
                 [&](const ErrorReply& m) {
                   j["ref"] = id_json(m.ref);
                   j["code"] = m.code;
                   j["text"] = m.text;
                 },
                 [&](const ExecutionDone& m) {
                   j["name"] = m.name;
                   j["success"] = m.success;
                 },
             },
             message);
  return j.dump();
}

ClientMessage decode_client(std::string_view line) {
  std::optional<MessageId> id;
  const Json doc = parse_line(line, id);
  const Fields f(doc, id);
  const std::string type = doc["type"].get<std::string>();
  if (type == "hello") return Hello{id, f.has("client_name") ? f.str("client_name") : std::string()};
  if (type == "get_workspace") return GetWorkspace{id};
  if (type == "set_workspace") return SetWorkspace{id, f.str("document")};
  if (type == "set_joint_target") return SetJointTarget{id, f.vec("q")};
  if (type == "jog") return Jog{id, decode_jog(f)};
  if (type == "execute_trajectory") {
    ExecuteTrajectory m{id, f.has("name") ? f.str("name") : std::string(), std::nullopt};
    if (f.has("inline")) {
      try {
        m.trajectory = load_trajectory(f.at("inline").dump());
      } catch (const Error& e) {
        f.fail(e.what());
      }
      if (m.name.empty()) m.name = "inline";
    } else if (m.name.empty()) {
      f.fail("execute_trajectory needs a 'name' or an 'inline' trajectory");
    }
    return m;
  }
  if (type == "gripper") {
    const std::string action = f.str("action");
    if (action != "grasp" && action != "release") f.fail("gripper action must be 'grasp' or 'release'");
    return Gripper{id, gripper_action_from_string(action)};
  }
  if (type == "stop") return Stop{id};
  if (type == "reset") return Reset{id};
  throw DecodeError(id, "unknown message type '" + type + "'");
}

ServerMessage decode_server(std::string_view line) {
  std::optional<MessageId> id;
  const Json doc = parse_line(line, id);
  const Fields f(doc, id);
  const std::string type = doc["type"].get<std::string>();
  auto ref = [&]() -> std::optional<MessageId> {
    const Json& r = f.at("ref");
    if (r.is_null()) return std::nullopt;
    if (!r.is_number_integer()) f.fail("field 'ref' must be an integer or null");
    return r.get<MessageId>();
  };
  if (type == "welcome") {
    return Welcome{f.str("robot_name"), static_cast<std::size_t>(f.num("dof")),
                   static_cast<int>(f.num("protocol_version"))};
  }
  if (type == "state") {
    State s{f.num("t"), f.vec("q"), f.vec("dq"), SessionMode::idle, std::nullopt};
    try {
      s.mode = session_mode_from_string(f.str("mode"));
    } catch (const InvalidArgument& e) {
      f.fail(e.what());
    }
    if (f.has("attached_object")) s.attached_object = f.str("attached_object");
    return s;
  }
  if (type == "ack") {
    Ack a{ref(), std::nullopt};
    if (f.has("document")) a.document = f.str("document");
    return a;
  }
  if (type == "error") return ErrorReply{ref(), f.str("code"), f.str("text")};
  if (type == "execution_done") return ExecutionDone{f.str("name"), f.boolean("success")};
  throw DecodeError(id, "unknown message type '" + type + "'");
}

Address parse_address(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw InvalidArgument("address must look like host:port, got '" + std::string(text) + "'");
  }
  const std::string port_text(text.substr(colon + 1));
  std::size_t used = 0;
  long port = -1;
  try {
    port = std::stol(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_text.size() || port < 0 || port > 65535) {
    throw InvalidArgument("invalid port in address '" + std::string(text) + "'");
  }
  return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

}  // namespace arbench::wire
