#include "arbench/kinematics.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "arbench/error.hpp"

namespace arbench {

namespace pt = boost::property_tree;

KinematicChain::KinematicChain(std::string name, std::vector<JointSpec> joints,
                               std::vector<std::string> link_names, RigidTransform tool_offset,
                               std::vector<MeshReference> meshes)
    : name_(std::move(name)),
      joints_(std::move(joints)),
      link_names_(std::move(link_names)),
      tool_offset_(tool_offset),
      meshes_(std::move(meshes)) {
  lower_.resize(static_cast<Eigen::Index>(joints_.size()));
  upper_.resize(static_cast<Eigen::Index>(joints_.size()));
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const auto& j = joints_[i];
    if (j.kind == JointKind::fixed) {
      throw UrdfError("chain joint '" + j.name + "' is fixed; fixed joints must be folded");
    }
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw UrdfError("joint '" + j.name + "' axis is not unit length");
    }
    if (!(j.lower <= j.upper)) {
      throw UrdfError("joint '" + j.name + "' has invalid limits");
    }
    lower_[static_cast<Eigen::Index>(i)] = j.lower;
    upper_[static_cast<Eigen::Index>(i)] = j.upper;
  }
}

KinematicChain KinematicChain::with_tool_offset(const RigidTransform& tool_offset) const {
  KinematicChain copy = *this;
  copy.tool_offset_ = tool_offset;
  return copy;
}

Eigen::VectorXd KinematicChain::velocity_limits() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dof()));
  for (std::size_t i = 0; i < dof(); ++i) v[static_cast<Eigen::Index>(i)] = joints_[i].velocity_limit;
  return v;
}

Eigen::VectorXd KinematicChain::clamp(const Eigen::VectorXd& q) const {
  check_dimension(q);
  return q.cwiseMax(lower_).cwiseMin(upper_);
}

bool KinematicChain::within_limits(const Eigen::VectorXd& q, double tol) const {
  check_dimension(q);
  return ((q - lower_).array() >= -tol).all() && ((upper_ - q).array() >= -tol).all();
}

Eigen::VectorXd KinematicChain::neutral_configuration() const {
  Eigen::VectorXd q(static_cast<Eigen::Index>(dof()));
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    q[i] = (std::isfinite(lower_[i]) && std::isfinite(upper_[i])) ? 0.5 * (lower_[i] + upper_[i]) : 0.0;
  }
  return q;
}

void KinematicChain::check_dimension(const Eigen::VectorXd& q) const {
  if (static_cast<std::size_t>(q.size()) != dof()) {
    throw DimensionError("joint vector has " + std::to_string(q.size()) + " entries, chain has " +
                         std::to_string(dof()) + " degrees of freedom");
  }
}

namespace {

Eigen::Vector3d parse_vector3(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!(in >> v[i])) throw UrdfError("malformed " + what + " '" + text + "'");
  }
  std::string rest;
  if (in >> rest) throw UrdfError("malformed " + what + " '" + text + "'");
  return v;
}

double parse_scalar(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (text.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UrdfError("malformed " + what + " '" + text + "'");
  }
}

struct RawJoint {
  JointSpec spec;
  std::string parent;
  std::string child;
  bool has_axis = false;
};

JointKind parse_kind(const std::string& type, const std::string& joint) {
  if (type == "revolute" || type == "continuous") return JointKind::revolute;
  if (type == "prismatic") return JointKind::prismatic;
  if (type == "fixed") return JointKind::fixed;
  throw UrdfError("joint '" + joint + "' has unsupported type '" + type + "'");
}

RawJoint parse_joint(const pt::ptree& node) {
  RawJoint raw;
  auto& spec = raw.spec;
  spec.name = node.get<std::string>("<xmlattr>.name", "");
  if (spec.name.empty()) throw UrdfError("joint without a name");
  const std::string type = node.get<std::string>("<xmlattr>.type", "");
  spec.kind = parse_kind(type, spec.name);
  raw.parent = node.get<std::string>("parent.<xmlattr>.link", "");
  raw.child = node.get<std::string>("child.<xmlattr>.link", "");
  if (raw.parent.empty() || raw.child.empty()) {
    throw UrdfError("joint '" + spec.name + "' is missing its parent or child link");
  }

  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
  if (auto origin = node.get_child_optional("origin")) {
    xyz = parse_vector3(origin->get<std::string>("<xmlattr>.xyz", "0 0 0"), "origin xyz");
    rpy = parse_vector3(origin->get<std::string>("<xmlattr>.rpy", "0 0 0"), "origin rpy");
  }
  spec.origin = RigidTransform::from_xyz_rpy(xyz, rpy);

  if (auto axis = node.get_optional<std::string>("axis.<xmlattr>.xyz")) {
    raw.has_axis = true;
    const Eigen::Vector3d a = parse_vector3(*axis, "axis");
    if (a.norm() < 1e-12) throw UrdfError("joint '" + spec.name + "' has a zero axis");
    spec.axis = a.normalized();
  }
  if (spec.kind != JointKind::fixed && !raw.has_axis) {
    throw UrdfError("joint '" + spec.name + "' is missing its axis");
  }

  if (spec.kind == JointKind::fixed) return raw;

  if (type == "continuous") {
    spec.lower = -std::numeric_limits<double>::infinity();
    spec.upper = std::numeric_limits<double>::infinity();
    spec.velocity_limit = parse_scalar(node.get<std::string>("limit.<xmlattr>.velocity", "0"), "velocity limit");
    return raw;
  }
  auto limit = node.get_child_optional("limit");
  if (!limit) throw UrdfError("joint '" + spec.name + "' is missing its limit element");
  spec.lower = parse_scalar(limit->get<std::string>("<xmlattr>.lower", "0"), "lower limit");
  spec.upper = parse_scalar(limit->get<std::string>("<xmlattr>.upper", "0"), "upper limit");
  spec.velocity_limit = parse_scalar(limit->get<std::string>("<xmlattr>.velocity", "0"), "velocity limit");
  if (spec.lower > spec.upper) {
    throw UrdfError("joint '" + spec.name + "' has invalid limits (lower > upper)");
  }
  return raw;
}

void collect_meshes(const pt::ptree& link, const std::string& link_name, std::vector<MeshReference>& out) {
  for (const char* element : {"visual", "collision"}) {
    for (const auto& [key, child] : link) {
      if (key != element) continue;
      if (auto uri = child.get_optional<std::string>("geometry.mesh.<xmlattr>.filename")) {
        out.push_back({link_name, *uri});
      }
    }
  }
}

std::string format_number(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string format_vector(const Eigen::Vector3d& v) {
  return format_number(v.x()) + " " + format_number(v.y()) + " " + format_number(v.z());
}

}  // namespace

KinematicChain parse_urdf(std::string_view document, const UrdfOptions& options) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(document)};
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw UrdfError(std::string("malformed document: ") + e.what());
  }
  auto robot = tree.get_child_optional("robot");
  if (!robot) throw UrdfError("malformed document: no <robot> element");
  const std::string robot_name = robot->get<std::string>("<xmlattr>.name", "");

  std::set<std::string> links;
  std::vector<MeshReference> meshes;
  std::vector<RawJoint> joints;
  for (const auto& [key, node] : *robot) {
    if (key == "link") {
      const auto name = node.get<std::string>("<xmlattr>.name", "");
      if (name.empty()) throw UrdfError("link without a name");
      if (!links.insert(name).second) throw UrdfError("duplicate link '" + name + "'");
      collect_meshes(node, name, meshes);
    } else if (key == "joint") {
      joints.push_back(parse_joint(node));
    }
  }

  std::map<std::string, const RawJoint*> joint_by_child;
  std::map<std::string, std::vector<const RawJoint*>> joints_by_parent;
  for (const auto& j : joints) {
    for (const auto* link : {&j.parent, &j.child}) {
      if (!links.count(*link)) {
        throw UrdfError("joint '" + j.spec.name + "' references unknown link '" + *link + "'");
      }
    }
    if (!joint_by_child.emplace(j.child, &j).second) {
      throw UrdfError("link '" + j.child + "' has more than one parent joint");
    }
    joints_by_parent[j.parent].push_back(&j);
  }

  std::string base = options.base_link;
  if (base.empty()) {
    std::vector<std::string> roots;
    for (const auto& l : links) {
      if (!joint_by_child.count(l)) roots.push_back(l);
    }
    if (roots.size() != 1) {
      throw UrdfError("branching chain: expected exactly one root link, found " + std::to_string(roots.size()));
    }
    base = roots.front();
  } else if (!links.count(base)) {
    throw UrdfError("unknown base link '" + base + "'");
  }

  std::vector<const RawJoint*> path;
  if (!options.tip_link.empty()) {
    if (!links.count(options.tip_link)) throw UrdfError("unknown tip link '" + options.tip_link + "'");
    std::string link = options.tip_link;
    while (link != base) {
      auto it = joint_by_child.find(link);
      if (it == joint_by_child.end()) {
        throw UrdfError("no path from base link '" + base + "' to tip link '" + options.tip_link + "'");
      }
      path.push_back(it->second);
      link = it->second->parent;
    }
    std::reverse(path.begin(), path.end());
  } else {
    std::string link = base;
    std::set<std::string> visited{base};
    for (;;) {
      auto it = joints_by_parent.find(link);
      if (it == joints_by_parent.end() || it->second.empty()) break;
      if (it->second.size() > 1) {
        throw UrdfError("branching chain: link '" + link + "' has " + std::to_string(it->second.size()) +
                        " child joints, no unique base-to-tip path");
      }
      path.push_back(it->second.front());
      link = it->second.front()->child;
      if (!visited.insert(link).second) throw UrdfError("kinematic loop at link '" + link + "'");
    }
  }

  std::vector<JointSpec> chain_joints;
  std::vector<std::string> link_names{base};
  RigidTransform pending;
  for (const auto* raw : path) {
    if (raw->spec.kind == JointKind::fixed) {
      pending = compose(pending, raw->spec.origin);
      continue;
    }
    JointSpec spec = raw->spec;
    spec.origin = compose(pending, spec.origin);
    pending = RigidTransform();
    chain_joints.push_back(spec);
    link_names.push_back(raw->child);
  }
  const std::string tip = path.empty() ? base : path.back()->child;
  if (link_names.back() != tip) link_names.push_back(tip);

  return KinematicChain(robot_name, std::move(chain_joints), std::move(link_names), pending, std::move(meshes));
}

KinematicChain load_urdf_file(const std::string& path, const UrdfOptions& options) {
  std::ifstream in(path);
  if (!in) throw UrdfError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_urdf(buffer.str(), options);
}

std::string to_urdf(const KinematicChain& chain) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\"?>\n<robot name=\"" << chain.name() << "\">\n";
  const auto& links = chain.link_names();
  for (const auto& link : links) {
    out << "  <link name=\"" << link << "\">\n";
    for (const auto& mesh : chain.meshes()) {
      if (mesh.link != link) continue;
      out << "    <visual><geometry><mesh filename=\"" << mesh.uri << "\"/></geometry></visual>\n";
    }
    out << "  </link>\n";
  }
  auto origin = [&](const RigidTransform& t) {
    out << "    <origin xyz=\"" << format_vector(t.translation()) << "\" rpy=\""
        << format_vector(rpy_from_quaternion(t.rotation())) << "\"/>\n";
  };
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const auto& j = chain.joints()[i];
    const bool continuous = j.kind == JointKind::revolute && std::isinf(j.lower) && std::isinf(j.upper);
    const char* type = continuous ? "continuous" : (j.kind == JointKind::prismatic ? "prismatic" : "revolute");
    out << "  <joint name=\"" << j.name << "\" type=\"" << type << "\">\n";
    out << "    <parent link=\"" << links[i] << "\"/>\n    <child link=\"" << links[i + 1] << "\"/>\n";
    origin(j.origin);
    out << "    <axis xyz=\"" << format_vector(j.axis) << "\"/>\n";
    if (continuous) {
      out << "    <limit velocity=\"" << format_number(j.velocity_limit) << "\"/>\n";
    } else {
      out << "    <limit lower=\"" << format_number(j.lower) << "\" upper=\"" << format_number(j.upper)
          << "\" velocity=\"" << format_number(j.velocity_limit) << "\"/>\n";
    }
    out << "  </joint>\n";
  }
  if (links.size() == chain.dof() + 2) {
    out << "  <joint name=\"" << links.back() << "_fixed\" type=\"fixed\">\n";
    out << "    <parent link=\"" << links[chain.dof()] << "\"/>\n    <child link=\"" << links.back() << "\"/>\n";
    origin(chain.tool_offset());
    out << "  </joint>\n";
  }
  out << "</robot>\n";
  return out.str();
}

bool structurally_equal(const KinematicChain& a, const KinematicChain& b, double tol) {
  if (a.name() != b.name() || a.dof() != b.dof() || a.link_names() != b.link_names()) return false;
  if (!approx_equal(a.tool_offset(), b.tool_offset(), tol)) return false;
  auto same = [tol](double x, double y) { return x == y || std::abs(x - y) <= tol; };
  for (std::size_t i = 0; i < a.dof(); ++i) {
    const auto& ja = a.joints()[i];
    const auto& jb = b.joints()[i];
    if (ja.name != jb.name || ja.kind != jb.kind) return false;
    if ((ja.axis - jb.axis).norm() > tol || !approx_equal(ja.origin, jb.origin, tol)) return false;
    if (!same(ja.lower, jb.lower) || !same(ja.upper, jb.upper) || !same(ja.velocity_limit, jb.velocity_limit)) {
      return false;
    }
  }
  return true;
}

namespace {

RigidTransform joint_motion(const JointSpec& joint, double value) {
  if (joint.kind == JointKind::prismatic) {
    return {joint.axis * value, Eigen::Quaterniond::Identity()};
  }
  return RigidTransform::from_rotation(Eigen::Quaterniond(Eigen::AngleAxisd(value, joint.axis)));
}

}  // namespace

std::vector<RigidTransform> joint_frames(const KinematicChain& chain, const Eigen::VectorXd& q) {
  chain.check_dimension(q);
  std::vector<RigidTransform> frames;
  frames.reserve(chain.dof() + 1);
  RigidTransform pose;
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const auto& joint = chain.joints()[i];
    pose = compose(pose, joint.origin);
    frames.push_back(pose);
    pose = compose(pose, joint_motion(joint, q[static_cast<Eigen::Index>(i)]));
  }
  frames.push_back(compose(pose, chain.tool_offset()));
  return frames;
}

RigidTransform forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q) {
  return joint_frames(chain, q).back();
}

Jacobian jacobian(const KinematicChain& chain, const Eigen::VectorXd& q) {
  const auto frames = joint_frames(chain, q);
  const Eigen::Vector3d tool = frames.back().translation();
  Jacobian jac = Jacobian::Zero(6, static_cast<Eigen::Index>(chain.dof()));
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const auto& joint = chain.joints()[i];
    const Eigen::Vector3d z = frames[i].rotation() * joint.axis;
    const auto col = static_cast<Eigen::Index>(i);
    if (joint.kind == JointKind::prismatic) {
      jac.block<3, 1>(0, col) = z;
    } else {
      jac.block<3, 1>(0, col) = z.cross(tool - frames[i].translation());
      jac.block<3, 1>(3, col) = z;
    }
  }
  return jac;
}

}  // namespace arbench
