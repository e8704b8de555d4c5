#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "arbench/kinematics.hpp"
#include "arbench/motion_control.hpp"
#include "arbench/planner.hpp"
#include "arbench/workspace.hpp"

namespace py = pybind11;
using namespace arbench;

namespace {

// Quaternions cross the boundary as [w, x, y, z].
Eigen::Vector4d wxyz(const Eigen::Quaterniond& q) { return {q.w(), q.x(), q.y(), q.z()}; }
Eigen::Quaterniond from_wxyz(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "arbench core: kinematics, IK, via-point planning and workspace persistence";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<IkNotConverged>(m, "IkNotConverged", error.ptr());

  py::class_<RigidTransform>(m, "RigidTransform")
      .def(py::init<>())
      .def(py::init([](const Eigen::Vector3d& t, const Eigen::Vector4d& q) { return RigidTransform(t, from_wxyz(q)); }),
           py::arg("translation"), py::arg("rotation") = Eigen::Vector4d(1, 0, 0, 0))
      .def_static("from_xyz_rpy", &RigidTransform::from_xyz_rpy, py::arg("xyz"), py::arg("rpy"))
      .def_property_readonly("translation", [](const RigidTransform& t) { return Eigen::Vector3d(t.translation()); })
      .def_property_readonly("rotation", [](const RigidTransform& t) { return wxyz(t.rotation()); })
      .def("matrix", &RigidTransform::matrix)
      .def("apply", &RigidTransform::apply)
      .def("inverse", [](const RigidTransform& t) { return invert(t); })
      .def("__mul__", [](const RigidTransform& a, const RigidTransform& b) { return a * b; })
      .def("__repr__", [](const RigidTransform& t) {
        const auto& p = t.translation();
        const auto q = wxyz(t.rotation());
        return "RigidTransform(translation=[" + std::to_string(p.x()) + ", " + std::to_string(p.y()) + ", " +
               std::to_string(p.z()) + "], rotation=[" + std::to_string(q[0]) + ", " + std::to_string(q[1]) + ", " +
               std::to_string(q[2]) + ", " + std::to_string(q[3]) + "])";
      });

  py::class_<KinematicChain>(m, "KinematicChain")
      .def_property_readonly("name", &KinematicChain::name)
      .def_property_readonly("dof", &KinematicChain::dof)
      .def_property_readonly("joint_names",
                             [](const KinematicChain& c) {
                               std::vector<std::string> names;
                               for (const auto& j : c.joints()) names.push_back(j.name);
                               return names;
                             })
      .def_property_readonly("link_names", &KinematicChain::link_names)
      .def_property_readonly("lower_limits", &KinematicChain::lower_limits)
      .def_property_readonly("upper_limits", &KinematicChain::upper_limits)
      .def_property_readonly("tool_offset", &KinematicChain::tool_offset)
      .def("neutral_configuration", &KinematicChain::neutral_configuration)
      .def("within_limits", &KinematicChain::within_limits, py::arg("q"), py::arg("tol") = 0.0)
      .def("to_urdf", [](const KinematicChain& c) { return to_urdf(c); });

  m.def("parse_urdf", [](const std::string& text) { return parse_urdf(text); }, py::arg("document"));
  m.def("load_urdf", [](const std::string& path) { return load_urdf_file(path); }, py::arg("path"));
  m.def("forward_kinematics", &forward_kinematics, py::arg("chain"), py::arg("q"));
  m.def("jacobian", [](const KinematicChain& c, const Eigen::VectorXd& q) { return Eigen::MatrixXd(jacobian(c, q)); },
        py::arg("chain"), py::arg("q"));
  m.def(
      "solve_ik",
      [](const KinematicChain& c, const Eigen::VectorXd& q0, const RigidTransform& target, double tol, int max_iter,
         double damping, bool position_only) {
        IkWeights weights;
        weights.damping = damping;
        const auto sol =
            solve_ik(c, q0, target, weights, tol, max_iter, position_only ? TaskMask::position_only : TaskMask::full_pose);
        return py::make_tuple(sol.q, sol.iterations, sol.residual);
      },
      py::arg("chain"), py::arg("q0"), py::arg("target"), py::arg("tol") = 1e-6, py::arg("max_iter") = 200,
      py::arg("damping") = kDefaultIkDamping, py::arg("position_only") = false,
      "Returns (q, iterations, residual); raises IkNotConverged.");

  py::class_<GaussianKeypoint>(m, "GaussianKeypoint")
      .def(py::init([](std::string id, const RigidTransform& pose, const Eigen::Matrix3d& cov, double orientation_precision,
                       const std::string& action) {
             GaussianKeypoint k;
             k.id = std::move(id);
             k.pose = pose;
             k.position_covariance = cov;
             k.orientation_precision = orientation_precision;
             k.gripper_action = gripper_action_from_string(action);
             k.validate();
             return k;
           }),
           py::arg("id"), py::arg("pose"), py::arg("position_covariance") = Eigen::Matrix3d(Eigen::Matrix3d::Identity() * 1e-4),
           py::arg("orientation_precision") = kDefaultOrientationPrecision, py::arg("gripper_action") = "none")
      .def_readonly("id", &GaussianKeypoint::id)
      .def_readonly("pose", &GaussianKeypoint::pose)
      .def_readonly("position_covariance", &GaussianKeypoint::position_covariance)
      .def_readonly("orientation_precision", &GaussianKeypoint::orientation_precision)
      .def_property_readonly("gripper_action", [](const GaussianKeypoint& k) { return to_string(k.gripper_action); });

  py::class_<JointTrajectory>(m, "Trajectory")
      .def_readonly("dt", &JointTrajectory::dt)
      .def_readonly("timestamps", &JointTrajectory::timestamps)
      .def_readonly("configs", &JointTrajectory::configs)
      .def_readonly("keypoint_indices", &JointTrajectory::keypoint_indices)
      .def_property_readonly("steps", &JointTrajectory::steps);

  py::class_<PlanResult>(m, "PlanResult")
      .def_readonly("trajectory", &PlanResult::trajectory)
      .def_readonly("cost", &PlanResult::cost)
      .def_readonly("iterations", &PlanResult::iterations)
      .def_readonly("converged", &PlanResult::converged)
      .def_readonly("cost_history", &PlanResult::cost_history);

  m.def(
      "plan",
      [](const KinematicChain& c, const Eigen::VectorXd& q0, const std::vector<GaussianKeypoint>& keypoints, int horizon,
         double dt, double control_cost, int max_iterations) {
        PlannerParams params;
        params.horizon = horizon;
        params.dt = dt;
        params.control_cost = control_cost;
        params.max_iterations = max_iterations;
        return plan_ilqr(c, q0, keypoints, params);
      },
      py::arg("chain"), py::arg("q0"), py::arg("keypoints"), py::arg("horizon") = 100, py::arg("dt") = 0.02,
      py::arg("control_cost") = 1e-4, py::arg("max_iterations") = 100);
  m.def("trajectory_to_csv", &trajectory_to_csv, py::arg("trajectory"));

  py::class_<Workspace>(m, "Workspace")
      .def_readonly("version", &Workspace::version)
      .def_property_readonly("urdf", [](const Workspace& w) { return w.robot.urdf; })
      .def_property_readonly("placement", [](const Workspace& w) { return w.robot.placement; })
      .def_property_readonly("object_ids",
                             [](const Workspace& w) {
                               std::vector<std::string> ids;
                               for (const auto& o : w.objects) ids.push_back(o.id);
                               return ids;
                             })
      .def_readonly("keypoints", &Workspace::keypoints)
      .def_readonly("trajectories", &Workspace::trajectories)
      .def("keypoints_in_base_frame", [](const Workspace& w) { return keypoints_in_base_frame(w); });

  m.def("load_workspace", [](const std::string& text) { return load_workspace(text); }, py::arg("document"));
  m.def("save_workspace", &save_workspace, py::arg("workspace"));
  m.def("validate_workspace", [](const std::string& text) { return validate_workspace_document(text); },
        py::arg("document"), "List of problems; empty when the document is valid.");
}
