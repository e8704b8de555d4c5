"""Python bindings for the arbench robot programming core."""

from ._core import (
    Error,
    GaussianKeypoint,
    IkNotConverged,
    KinematicChain,
    PlanResult,
    RigidTransform,
    Trajectory,
    Workspace,
    forward_kinematics,
    jacobian,
    load_urdf,
    load_workspace,
    parse_urdf,
    plan,
    save_workspace,
    solve_ik,
    trajectory_to_csv,
    validate_workspace,
)

__all__ = [
    "Error",
    "GaussianKeypoint",
    "IkNotConverged",
    "KinematicChain",
    "PlanResult",
    "RigidTransform",
    "Trajectory",
    "Workspace",
    "forward_kinematics",
    "jacobian",
    "load_urdf",
    "load_workspace",
    "parse_urdf",
    "plan",
    "save_workspace",
    "solve_ik",
    "trajectory_to_csv",
    "validate_workspace",
]
