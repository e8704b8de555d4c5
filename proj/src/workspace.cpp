#include "arbench/workspace.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <json.hpp>
#include <set>
#include <sstream>

namespace arbench {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormatTag = "arbench-workspace";

struct ShapeValidator {
  void operator()(const Cuboid& c) const {
    if (!(c.extents.array() > 0.0).all() || !c.extents.allFinite()) throw InvalidArgument("invalid dimensions");
  }
  void operator()(const Sphere& s) const {
    if (!(s.radius > 0.0) || !std::isfinite(s.radius)) throw InvalidArgument("invalid dimensions");
  }
  void operator()(const Cylinder& c) const {
    if (!(c.radius > 0.0 && c.height > 0.0) || !std::isfinite(c.radius) || !std::isfinite(c.height)) {
      throw InvalidArgument("invalid dimensions");
    }
  }
};

}  // namespace

void validate(const ShapePrimitive& shape) { std::visit(ShapeValidator{}, shape); }

double signed_distance(const ShapePrimitive& shape, const RigidTransform& pose, const Eigen::Vector3d& point) {
  const Eigen::Vector3d p = invert(pose).apply(point);
  if (const auto* s = std::get_if<Sphere>(&shape)) return p.norm() - s->radius;
  if (const auto* c = std::get_if<Cuboid>(&shape)) {
    const Eigen::Vector3d d = p.cwiseAbs() - 0.5 * c->extents;
    return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
  }
  const auto& cyl = std::get<Cylinder>(shape);
  const Eigen::Vector2d d(std::hypot(p.x(), p.y()) - cyl.radius, std::abs(p.z()) - 0.5 * cyl.height);
  return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
}

const SceneObject* Workspace::find_object(std::string_view id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

Workspace place_robot_manual(Workspace ws, const Eigen::Vector3d& ground_point, double yaw) {
  ws.robot.placement = {ground_point, Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()))};
  return ws;
}

RigidTransform calibrate_from_marker(const RigidTransform& world_to_marker, const RigidTransform& marker_to_base) {
  return compose(world_to_marker, marker_to_base);
}

Workspace upsert_object(Workspace ws, SceneObject object) {
  validate(object.shape);
  if (object.role == ObjectRole::obstacle && object.attached_to_gripper) {
    throw InvalidArgument("obstacles cannot be attached to the gripper");
  }
  for (auto& existing : ws.objects) {
    if (existing.id == object.id) {
      existing = std::move(object);
      return ws;
    }
  }
  ws.objects.push_back(std::move(object));
  return ws;
}

Workspace remove_object(Workspace ws, std::string_view id) {
  const auto it = std::find_if(ws.objects.begin(), ws.objects.end(), [&](const auto& o) { return o.id == id; });
  if (it == ws.objects.end()) throw WorkspaceError("no such object '" + std::string(id) + "'");
  ws.objects.erase(it);
  return ws;
}

// ---------------------------------------------------------------------------
// Serialization

std::string to_string(GripperAction action) {
  switch (action) {
    case GripperAction::grasp:
      return "grasp";
    case GripperAction::release:
      return "release";
    case GripperAction::none:
      break;
  }
  return "none";
}

GripperAction gripper_action_from_string(std::string_view text) {
  if (text == "none") return GripperAction::none;
  if (text == "grasp") return GripperAction::grasp;
  if (text == "release") return GripperAction::release;
  throw InvalidArgument("unknown gripper action '" + std::string(text) + "'");
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw WorkspaceError(std::string("cannot save non-finite ") + what);
}

Json vector_json(const Eigen::VectorXd& v, const char* what) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    require_finite(v[i], what);
    out.push_back(v[i]);
  }
  return out;
}

Json pose_json(const RigidTransform& t) {
  const auto& q = t.rotation();
  return Json{{"translation", vector_json(t.translation(), "translation")},
              {"rotation", vector_json(Eigen::Vector4d(q.w(), q.x(), q.y(), q.z()), "rotation")}};
}

Json shape_json(const ShapePrimitive& shape) {
  if (const auto* c = std::get_if<Cuboid>(&shape)) {
    return Json{{"kind", "cuboid"}, {"extents", vector_json(c->extents, "extents")}};
  }
  if (const auto* s = std::get_if<Sphere>(&shape)) {
    require_finite(s->radius, "radius");
    return Json{{"kind", "sphere"}, {"radius", s->radius}};
  }
  const auto& c = std::get<Cylinder>(shape);
  require_finite(c.radius, "radius");
  require_finite(c.height, "height");
  return Json{{"kind", "cylinder"}, {"radius", c.radius}, {"height", c.height}};
}

Json trajectory_json(const JointTrajectory& traj) {
  Json configs = Json::array();
  for (const auto& q : traj.configs) configs.push_back(vector_json(q, "joint value"));
  Json indices = Json::object();
  for (const auto& [id, step] : traj.keypoint_indices) indices[id] = step;
  require_finite(traj.dt, "dt");
  return Json{{"dt", traj.dt},
              {"timestamps", vector_json(Eigen::Map<const Eigen::VectorXd>(
                                             traj.timestamps.data(), static_cast<Eigen::Index>(traj.timestamps.size())),
                                         "timestamp")},
              {"configs", std::move(configs)},
              {"keypoint_indices", std::move(indices)}};
}

/// Replaces bare NaN / Infinity tokens (not valid JSON, but written by many
/// tools) with strings so that the reader can name the offending field.
std::string quote_non_finite_literals(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < text.size()) {
        out.push_back(text[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    bool replaced = false;
    for (std::string_view token : {"-Infinity", "Infinity", "NaN"}) {
      if (text.substr(i, token.size()) == token) {
        out += '"';
        out += token;
        out += '"';
        i += token.size() - 1;
        replaced = true;
        break;
      }
    }
    if (!replaced) out.push_back(c);
  }
  return out;
}

/// Walks a parsed document, collecting every violation with its field path.
class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& message) { errors.push_back(path + ": " + message); }

  const Json* field(const Json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) {
      fail(path, "expected an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
      fail(path + "." + key, "missing field");
      return nullptr;
    }
    return &*it;
  }

  double number(const Json& j, const std::string& path) {
    if (!j.is_number()) {
      fail(path, "expected a finite number");
      return 0.0;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "expected a finite number");
    return v;
  }

  Eigen::VectorXd numbers(const Json& j, const std::string& path, std::optional<std::size_t> expected = {}) {
    if (!j.is_array()) {
      fail(path, "expected an array of numbers");
      return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(expected.value_or(0)));
    }
    if (expected && j.size() != *expected) {
      fail(path, "expected " + std::to_string(*expected) + " numbers");
      return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(*expected));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = number(j[i], path + "[" + std::to_string(i) + "]");
    }
    return v;
  }

  std::string string(const Json& j, const std::string& path) {
    if (!j.is_string()) {
      fail(path, "expected a string");
      return {};
    }
    return j.get<std::string>();
  }

  RigidTransform pose(const Json& obj, const std::string& path) {
    const Json* t = field(obj, "translation", path);
    const Json* r = field(obj, "rotation", path);
    if (!t || !r) return {};
    const Eigen::Vector3d translation = numbers(*t, path + ".translation", 3);
    const Eigen::Vector4d q = numbers(*r, path + ".rotation", 4);
    if (!q.allFinite() || q.norm() < 1e-12) {
      fail(path + ".rotation", "expected a non-zero quaternion (w, x, y, z)");
      return {};
    }
    return {translation, Eigen::Quaterniond(q[0], q[1], q[2], q[3])};
  }

  ShapePrimitive shape(const Json& obj, const std::string& path) {
    const Json* kind = field(obj, "kind", path);
    if (!kind) return Sphere{1.0};
    const std::string k = string(*kind, path + ".kind");
    ShapePrimitive shape = Sphere{1.0};
    std::string dims_path = path;
    if (k == "cuboid") {
      const Json* e = field(obj, "extents", path);
      if (!e) return shape;
      shape = Cuboid{numbers(*e, path + ".extents", 3)};
      dims_path += ".extents";
    } else if (k == "sphere") {
      const Json* r = field(obj, "radius", path);
      if (!r) return shape;
      shape = Sphere{number(*r, path + ".radius")};
      dims_path += ".radius";
    } else if (k == "cylinder") {
      const Json* r = field(obj, "radius", path);
      const Json* h = field(obj, "height", path);
      if (!r || !h) return shape;
      shape = Cylinder{number(*r, path + ".radius"), number(*h, path + ".height")};
    } else {
      fail(path + ".kind", "unknown shape kind '" + k + "'");
      return shape;
    }
    try {
      validate(shape);
    } catch (const InvalidArgument&) {
      fail(dims_path, "invalid dimensions (every dimension must be > 0)");
    }
    return shape;
  }

  SceneObject object(const Json& obj, const std::string& path) {
    SceneObject o;
    if (const Json* id = field(obj, "id", path)) o.id = string(*id, path + ".id");
    if (const Json* s = field(obj, "shape", path)) o.shape = shape(*s, path + ".shape");
    if (const Json* p = field(obj, "pose", path)) o.pose = pose(*p, path + ".pose");
    if (const Json* role = field(obj, "role", path)) {
      const std::string r = string(*role, path + ".role");
      if (r == "object") {
        o.role = ObjectRole::object;
      } else if (r == "obstacle") {
        o.role = ObjectRole::obstacle;
      } else {
        fail(path + ".role", "expected \"object\" or \"obstacle\"");
      }
    }
    if (const Json* a = field(obj, "attached_to_gripper", path)) {
      if (a->is_boolean()) {
        o.attached_to_gripper = a->get<bool>();
      } else {
        fail(path + ".attached_to_gripper", "expected a boolean");
      }
    }
    if (o.role == ObjectRole::obstacle && o.attached_to_gripper) {
      fail(path + ".attached_to_gripper", "obstacles cannot be attached to the gripper");
    }
    return o;
  }

  GaussianKeypoint keypoint(const Json& obj, const std::string& path) {
    GaussianKeypoint kp;
    if (const Json* id = field(obj, "id", path)) kp.id = string(*id, path + ".id");
    if (const Json* p = field(obj, "pose", path)) kp.pose = pose(*p, path + ".pose");
    if (const Json* c = field(obj, "position_covariance", path)) {
      const std::string cpath = path + ".position_covariance";
      if (!c->is_array() || c->size() != 3) {
        fail(cpath, "expected a 3x3 matrix");
      } else {
        for (int r = 0; r < 3; ++r) {
          kp.position_covariance.row(r) =
              numbers((*c)[static_cast<std::size_t>(r)], cpath + "[" + std::to_string(r) + "]", 3).transpose();
        }
      }
    }
    if (const Json* w = field(obj, "orientation_precision", path)) {
      kp.orientation_precision = number(*w, path + ".orientation_precision");
    }
    if (const Json* g = field(obj, "gripper_action", path)) {
      try {
        kp.gripper_action = gripper_action_from_string(string(*g, path + ".gripper_action"));
      } catch (const InvalidArgument& e) {
        fail(path + ".gripper_action", e.what());
      }
    }
    if (kp.position_covariance.allFinite() && std::isfinite(kp.orientation_precision)) {
      try {
        kp.validate();
      } catch (const InvalidArgument& e) {
        fail(path, e.what());
      }
    }
    return kp;
  }

  JointTrajectory trajectory(const Json& obj, const std::string& path) {
    JointTrajectory traj;
    if (const Json* dt = field(obj, "dt", path)) {
      traj.dt = number(*dt, path + ".dt");
      if (!(traj.dt > 0.0)) fail(path + ".dt", "must be positive");
    }
    if (const Json* ts = field(obj, "timestamps", path)) {
      const Eigen::VectorXd v = numbers(*ts, path + ".timestamps");
      traj.timestamps.assign(v.data(), v.data() + v.size());
    }
    if (const Json* cs = field(obj, "configs", path)) {
      if (!cs->is_array()) {
        fail(path + ".configs", "expected an array of joint vectors");
      } else {
        for (std::size_t i = 0; i < cs->size(); ++i) {
          traj.configs.push_back(numbers((*cs)[i], path + ".configs[" + std::to_string(i) + "]"));
          if (traj.configs.back().size() != traj.configs.front().size()) {
            fail(path + ".configs[" + std::to_string(i) + "]", "joint vector length differs from the first sample");
          }
        }
      }
    }
    if (traj.configs.empty()) fail(path + ".configs", "trajectory has no samples");
    if (traj.timestamps.size() != traj.configs.size()) {
      fail(path + ".timestamps", "length differs from configs");
    } else if (traj.dt > 0.0) {
      for (std::size_t i = 1; i < traj.timestamps.size(); ++i) {
        const double gap = traj.timestamps[i] - traj.timestamps[i - 1];
        if (!(gap > 0.0) || std::abs(gap - traj.dt) > 1e-9 * std::max(1.0, std::abs(traj.timestamps[i]))) {
          fail(path + ".timestamps[" + std::to_string(i) + "]", "not uniformly spaced by dt");
          break;
        }
      }
    }
    if (const Json* ki = field(obj, "keypoint_indices", path)) {
      if (!ki->is_object()) {
        fail(path + ".keypoint_indices", "expected an object");
      } else {
        for (const auto& [id, step] : ki->items()) {
          const std::string spath = path + ".keypoint_indices." + id;
          if (!step.is_number_integer()) {
            fail(spath, "expected an integer step index");
            continue;
          }
          const auto s = step.get<long long>();
          if (s < 0 || static_cast<std::size_t>(s) >= traj.configs.size()) fail(spath, "step outside trajectory");
          traj.keypoint_indices[id] = static_cast<int>(s);
        }
      }
    }
    return traj;
  }

  Workspace workspace(const Json& doc) {
    Workspace ws;
    if (!doc.is_object()) {
      fail("$", "expected an object");
      return ws;
    }
    if (const Json* format = field(doc, "format", "$")) {
      if (string(*format, "$.format") != kFormatTag) fail("$.format", std::string("expected \"") + kFormatTag + "\"");
    }
    const Json* version = field(doc, "version", "$");
    if (!version) return ws;
    if (!version->is_number_integer() || version->get<long long>() != kWorkspaceVersion) {
      fail("$.version", "unknown version " + version->dump() + " (supported: " + std::to_string(kWorkspaceVersion) + ")");
      return ws;
    }
    ws.version = kWorkspaceVersion;

    if (const Json* robot = field(doc, "robot", "$")) {
      if (const Json* u = field(*robot, "urdf", "$.robot")) ws.robot.urdf = string(*u, "$.robot.urdf");
      if (const Json* p = field(*robot, "placement", "$.robot")) ws.robot.placement = pose(*p, "$.robot.placement");
      if (const Json* t = field(*robot, "tool_offset", "$.robot")) {
        ws.robot.tool_offset = pose(*t, "$.robot.tool_offset");
      }
    }
    if (const Json* marker = field(doc, "marker", "$"); marker && !marker->is_null()) {
      if (const Json* m = field(*marker, "marker_to_base", "$.marker")) {
        ws.marker = Marker{pose(*m, "$.marker.marker_to_base")};
      }
    }
    if (const Json* objects = field(doc, "objects", "$")) {
      if (!objects->is_array()) {
        fail("$.objects", "expected an array");
      } else {
        std::set<std::string> ids;
        for (std::size_t i = 0; i < objects->size(); ++i) {
          const std::string path = "$.objects[" + std::to_string(i) + "]";
          ws.objects.push_back(object((*objects)[i], path));
          if (!ids.insert(ws.objects.back().id).second) fail(path + ".id", "duplicate object id");
        }
      }
    }
    std::set<std::string> keypoint_ids;
    if (const Json* keypoints = field(doc, "keypoints", "$")) {
      if (!keypoints->is_array()) {
        fail("$.keypoints", "expected an array");
      } else {
        for (std::size_t i = 0; i < keypoints->size(); ++i) {
          const std::string path = "$.keypoints[" + std::to_string(i) + "]";
          ws.keypoints.push_back(keypoint((*keypoints)[i], path));
          if (!keypoint_ids.insert(ws.keypoints.back().id).second) fail(path + ".id", "duplicate keypoint id");
        }
      }
    }
    if (const Json* trajectories = field(doc, "trajectories", "$")) {
      if (!trajectories->is_object()) {
        fail("$.trajectories", "expected an object");
      } else {
        for (const auto& [name, t] : trajectories->items()) {
          const std::string path = "$.trajectories." + name;
          JointTrajectory traj = trajectory(t, path);
          for (const auto& [id, step] : traj.keypoint_indices) {
            if (!keypoint_ids.count(id)) fail(path + ".keypoint_indices." + id, "references an unknown keypoint");
          }
          ws.trajectories.emplace(name, std::move(traj));
        }
      }
    }
    return ws;
  }
};

std::pair<Workspace, std::vector<std::string>> read_document(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(quote_non_finite_literals(document));
  } catch (const Json::parse_error& e) {
    return {Workspace{}, {std::string("$: malformed document: ") + e.what()}};
  }
  Reader reader;
  Workspace ws = reader.workspace(doc);
  return {std::move(ws), std::move(reader.errors)};
}

}  // namespace

std::string save_workspace(const Workspace& ws) {
  Json objects = Json::array();
  for (const auto& o : ws.objects) {
    validate(o.shape);
    objects.push_back(Json{{"id", o.id},
                           {"role", o.role == ObjectRole::obstacle ? "obstacle" : "object"},
                           {"shape", shape_json(o.shape)},
                           {"pose", pose_json(o.pose)},
                           {"attached_to_gripper", o.attached_to_gripper}});
  }
  Json keypoints = Json::array();
  for (const auto& kp : ws.keypoints) {
    Json cov = Json::array();
    for (int r = 0; r < 3; ++r) cov.push_back(vector_json(kp.position_covariance.row(r).transpose(), "covariance"));
    require_finite(kp.orientation_precision, "orientation precision");
    keypoints.push_back(Json{{"id", kp.id},
                             {"pose", pose_json(kp.pose)},
                             {"position_covariance", std::move(cov)},
                             {"orientation_precision", kp.orientation_precision},
                             {"gripper_action", to_string(kp.gripper_action)}});
  }
  Json trajectories = Json::object();
  for (const auto& [name, traj] : ws.trajectories) trajectories[name] = trajectory_json(traj);

  Json doc{{"format", kFormatTag},
           {"version", ws.version},
           {"robot", Json{{"urdf", ws.robot.urdf},
                          {"placement", pose_json(ws.robot.placement)},
                          {"tool_offset", pose_json(ws.robot.tool_offset)}}},
           {"marker", ws.marker ? Json{{"marker_to_base", pose_json(ws.marker->marker_to_base)}} : Json(nullptr)},
           {"objects", std::move(objects)},
           {"keypoints", std::move(keypoints)},
           {"trajectories", std::move(trajectories)}};
  return doc.dump(2) + "\n";
}

Workspace load_workspace(std::string_view document) {
  auto [ws, errors] = read_document(document);
  if (!errors.empty()) {
    std::string message = "invalid workspace document: " + errors.front();
    if (errors.size() > 1) message += " (and " + std::to_string(errors.size() - 1) + " more)";
    throw WorkspaceError(message);
  }
  return ws;
}

std::vector<std::string> validate_workspace_document(std::string_view document) {
  return read_document(document).second;
}

std::string save_trajectory(const JointTrajectory& trajectory) { return trajectory_json(trajectory).dump(); }

JointTrajectory load_trajectory(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(quote_non_finite_literals(document));
  } catch (const Json::parse_error& e) {
    throw WorkspaceError(std::string("malformed trajectory: ") + e.what());
  }
  Reader reader;
  JointTrajectory traj = reader.trajectory(doc, "$");
  if (!reader.errors.empty()) throw WorkspaceError("invalid trajectory: " + reader.errors.front());
  return traj;
}

Workspace load_workspace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WorkspaceError("cannot open workspace file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_workspace(buffer.str());
}

void save_workspace_file(const Workspace& ws, const std::string& path) {
  const std::string document = save_workspace(ws);
  const std::filesystem::path target(path);
  std::filesystem::path temp = target;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw WorkspaceError("cannot write '" + temp.string() + "'");
    out << document;
    out.flush();
    if (!out) throw WorkspaceError("failed writing '" + temp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(temp, target, ec);
  if (ec) {
    std::filesystem::remove(temp);
    throw WorkspaceError("cannot replace '" + path + "': " + ec.message());
  }
}

namespace {

bool close(double a, double b, double tol) { return a == b || std::abs(a - b) <= tol; }

bool close(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || (a - b).cwiseAbs().maxCoeff() <= tol);
}

bool close(const RigidTransform& a, const RigidTransform& b, double tol) {
  return close(a.translation(), b.translation(), tol) && close(a.rotation().coeffs(), b.rotation().coeffs(), tol);
}

bool close(const ShapePrimitive& a, const ShapePrimitive& b, double tol) {
  if (a.index() != b.index()) return false;
  if (const auto* c = std::get_if<Cuboid>(&a)) return close(c->extents, std::get<Cuboid>(b).extents, tol);
  if (const auto* s = std::get_if<Sphere>(&a)) return close(s->radius, std::get<Sphere>(b).radius, tol);
  const auto& ca = std::get<Cylinder>(a);
  const auto& cb = std::get<Cylinder>(b);
  return close(ca.radius, cb.radius, tol) && close(ca.height, cb.height, tol);
}

}  // namespace

bool structurally_equal(const Workspace& a, const Workspace& b, double tol) {
  if (a.version != b.version || a.robot.urdf != b.robot.urdf) return false;
  if (!close(a.robot.placement, b.robot.placement, tol) || !close(a.robot.tool_offset, b.robot.tool_offset, tol)) {
    return false;
  }
  if (a.marker.has_value() != b.marker.has_value()) return false;
  if (a.marker && !close(a.marker->marker_to_base, b.marker->marker_to_base, tol)) return false;
  if (a.objects.size() != b.objects.size() || a.keypoints.size() != b.keypoints.size() ||
      a.trajectories.size() != b.trajectories.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    const auto& x = a.objects[i];
    const auto& y = b.objects[i];
    if (x.id != y.id || x.role != y.role || x.attached_to_gripper != y.attached_to_gripper) return false;
    if (!close(x.shape, y.shape, tol) || !close(x.pose, y.pose, tol)) return false;
  }
  for (std::size_t i = 0; i < a.keypoints.size(); ++i) {
    const auto& x = a.keypoints[i];
    const auto& y = b.keypoints[i];
    if (x.id != y.id || x.gripper_action != y.gripper_action) return false;
    if (!close(x.pose, y.pose, tol) || !close(x.position_covariance, y.position_covariance, tol) ||
        !close(x.orientation_precision, y.orientation_precision, tol)) {
      return false;
    }
  }
  for (const auto& [name, x] : a.trajectories) {
    auto it = b.trajectories.find(name);
    if (it == b.trajectories.end()) return false;
    const auto& y = it->second;
    if (!close(x.dt, y.dt, tol) || x.keypoint_indices != y.keypoint_indices) return false;
    if (x.timestamps.size() != y.timestamps.size() || x.configs.size() != y.configs.size()) return false;
    for (std::size_t i = 0; i < x.timestamps.size(); ++i) {
      if (!close(x.timestamps[i], y.timestamps[i], tol) || !close(x.configs[i], y.configs[i], tol)) return false;
    }
  }
  return true;
}

KinematicChain workspace_chain(const Workspace& ws, const KinematicChain& urdf_chain) {
  return urdf_chain.with_tool_offset(compose(urdf_chain.tool_offset(), ws.robot.tool_offset));
}

std::vector<GaussianKeypoint> keypoints_in_base_frame(const Workspace& ws) {
  const RigidTransform base_from_world = invert(ws.robot.placement);
  std::vector<GaussianKeypoint> out;
  out.reserve(ws.keypoints.size());
  for (const auto& kp : ws.keypoints) out.push_back(transform_keypoint(base_from_world, kp));
  return out;
}

CollisionReport check_collisions(const KinematicChain& chain, const JointTrajectory& trajectory, const Workspace& ws,
                                 double link_radius) {
  CollisionReport report;
  for (std::size_t step = 0; step < trajectory.configs.size(); ++step) {
    const auto frames = joint_frames(chain, trajectory.configs[step]);
    for (std::size_t link = 0; link < frames.size(); ++link) {
      const Eigen::Vector3d center = ws.robot.placement.apply(frames[link].translation());
      for (const auto& obj : ws.objects) {
        if (obj.role != ObjectRole::obstacle) continue;
        const double penetration = link_radius - signed_distance(obj.shape, obj.pose, center);
        if (penetration > 0.0) report.entries.push_back({step, link, obj.id, penetration});
      }
    }
  }
  return report;
}

namespace {

RigidTransform tool_pose_world(const Workspace& ws, const KinematicChain& chain, const Eigen::VectorXd& q) {
  return compose(ws.robot.placement, forward_kinematics(chain, q));
}

}  // namespace

GripperOutcome apply_gripper_action(const Workspace& ws, const KinematicChain& chain, const Eigen::VectorXd& q,
                                    GripperAction action) {
  GripperOutcome outcome{ws, {}};
  if (action == GripperAction::none) return outcome;
  const RigidTransform tool = tool_pose_world(ws, chain, q);
  auto& objects = outcome.workspace.objects;
  const auto held = std::find_if(objects.begin(), objects.end(), [](const auto& o) { return o.attached_to_gripper; });

  if (action == GripperAction::release) {
    if (held == objects.end()) return outcome;
    held->pose = tool;
    held->attached_to_gripper = false;
    outcome.object_id = held->id;
    return outcome;
  }

  if (held != objects.end()) return outcome;
  SceneObject* nearest = nullptr;
  double nearest_distance = kGraspDistance;
  for (auto& obj : objects) {
    if (obj.role != ObjectRole::object) continue;
    const double d = signed_distance(obj.shape, obj.pose, tool.translation());
    if (d <= nearest_distance) {
      nearest = &obj;
      nearest_distance = d;
    }
  }
  if (nearest == nullptr) return outcome;
  nearest->attached_to_gripper = true;
  nearest->pose = tool;
  outcome.object_id = nearest->id;
  return outcome;
}

Workspace update_attached_objects(Workspace ws, const KinematicChain& chain, const Eigen::VectorXd& q) {
  const RigidTransform tool = tool_pose_world(ws, chain, q);
  for (auto& obj : ws.objects) {
    if (obj.attached_to_gripper) obj.pose = tool;
  }
  return ws;
}

}  // namespace arbench
