"""Forward kinematics over the parsed body tree."""

from __future__ import annotations

import numpy as np

from ..errors import PoseLengthMismatch
from ..mjcf import RobotModel


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a (w, x, y, z) unit quaternion."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    k = np.asarray(axis, dtype=float)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)


def homogeneous(rotation=None, translation=None) -> np.ndarray:
    t = np.eye(4)
    if rotation is not None:
        t[:3, :3] = rotation
    if translation is not None:
        t[:3, 3] = translation
    return t


def local_transform(position, orientation) -> np.ndarray:
    return homogeneous(quat_to_matrix(orientation), position)


def joint_motion(kind: str, axis, anchor, value: float) -> np.ndarray:
    """Transform contributed by one joint at ``value``.

    Hinges rotate about ``axis`` through ``anchor`` (body frame); slides
    translate along ``axis``.
    """
    axis = np.asarray(axis, dtype=float)
    if kind == "slide":
        return homogeneous(translation=axis * value)
    rot = axis_angle_matrix(axis, value)
    p = np.asarray(anchor, dtype=float)
    return homogeneous(rot, p - rot @ p)


def check_pose(model: RobotModel, pose) -> np.ndarray:
    arr = np.asarray(pose, dtype=float).reshape(-1)
    if arr.shape[0] != model.n_joints:
        raise PoseLengthMismatch(f"pose has {arr.shape[0]} values, model {model.name!r} has {model.n_joints} joints")
    return arr


def forward_kinematics(model: RobotModel, pose) -> dict[str, np.ndarray]:
    """World transform (4x4) of every body for the given joint values."""
    q = check_pose(model, pose)
    index = {j.name: i for i, j in enumerate(model.joints)}
    joints = {j.name: j for j in model.joints}
    world: dict[str, np.ndarray] = {}
    for body in model.bodies:
        if body.parent is None:
            world[body.name] = np.eye(4)
            continue
        t = world[body.parent] @ local_transform(body.local_position, body.local_orientation)
        for name in body.attached_joints:
            j = joints[name]
            t = t @ joint_motion(j.kind, j.axis, j.position, q[index[name]])
        world[body.name] = t
    return world


def body_positions(model: RobotModel, pose) -> dict[str, np.ndarray]:
    return {name: t[:3, 3].copy() for name, t in forward_kinematics(model, pose).items()}
