"""SO(3) helpers shared by the dynamics, seeding and environment code.

Rotation matrices map body coordinates to world coordinates. The world
frame is Z-up.
"""

import math

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import RotationAmbiguityError, UndefinedAttitudeError
from .typedefs import Matrix, Vector

E3 = np.array([0.0, 0.0, 1.0])


def hat(vec: Vector) -> Matrix:
    """Skew-symmetric matrix with hat(a) @ b == cross(a, b)."""
    return np.array(
        [
            [0.0, -vec[2], vec[1]],
            [vec[2], 0.0, -vec[0]],
            [-vec[1], vec[0], 0.0],
        ]
    )


def vee(mat: Matrix) -> Vector:
    """Inverse of `hat` on the skew part of `mat`."""
    return 0.5 * np.array(
        [
            mat[2, 1] - mat[1, 2],
            mat[0, 2] - mat[2, 0],
            mat[1, 0] - mat[0, 1],
        ]
    )


def orthonormalize(rot: Matrix) -> Matrix:
    """Gram-Schmidt on the columns, keeping the first column's direction."""
    x = rot[:, 0] / np.linalg.norm(rot[:, 0])
    y = rot[:, 1] - np.dot(x, rot[:, 1]) * x
    y = y / np.linalg.norm(y)
    z = np.cross(x, y)
    return np.column_stack((x, y, z))


def is_rotation(rot: Matrix, tol: float = 1e-9) -> bool:
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3) or not np.all(np.isfinite(rot)):
        return False
    return bool(
        np.allclose(rot.T @ rot, np.eye(3), atol=tol)
        and abs(np.linalg.det(rot) - 1.0) <= tol
    )


def rot_x(angle: float) -> Matrix:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_z(angle: float) -> Matrix:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def yaw_of(rot: Matrix) -> float:
    """Heading of the body x-axis projected on the world xy-plane."""
    return math.atan2(rot[1, 0], rot[0, 0])


def geodesic_angle(rot: Matrix) -> float:
    """Rotation angle of `rot`, in [0, pi]."""
    cos_angle = (np.trace(rot) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos_angle, -1.0, 1.0)))


def thrust_frame(z_body: Vector, yaw: float) -> Matrix:
    """Complete a thrust axis into a rotation with the requested heading.

    Raises:
        UndefinedAttitudeError: `z_body` lies along the heading direction.
    """
    x_c = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    y_b = np.cross(z_body, x_c)
    norm = np.linalg.norm(y_b)
    if norm < 1e-9:
        raise UndefinedAttitudeError(
            f"thrust axis {z_body.tolist()} is parallel to heading {yaw:.3f}"
        )
    y_b = y_b / norm
    x_b = np.cross(y_b, z_body)
    return np.column_stack((x_b, y_b, z_body))


def relative_rotvec(rot_prev: Matrix, rot_next: Matrix) -> Vector:
    """Body-frame rotation vector log(rot_prev^T rot_next).

    Raises:
        RotationAmbiguityError: the two attitudes are (nearly) pi apart,
            where the log map has no unique axis.
    """
    rotvec = Rotation.from_matrix(rot_prev.T @ rot_next).as_rotvec()
    angle = float(np.linalg.norm(rotvec))
    if angle >= math.pi - 1e-6:
        raise RotationAmbiguityError(
            f"consecutive attitudes are {angle:.9f} rad apart"
        )
    return rotvec


def exp_map(rotvec: Vector) -> Matrix:
    return Rotation.from_rotvec(rotvec).as_matrix()


def to_quaternion(rot: Matrix) -> Vector:
    """Scalar-first quaternion [w, x, y, z] with w >= 0."""
    x, y, z, w = Rotation.from_matrix(rot).as_quat()
    quat = np.array([w, x, y, z])
    return -quat if w < 0 else quat


def from_quaternion(quat: Vector) -> Matrix:
    """Inverse of `to_quaternion`; the quaternion must be unit length."""
    w, x, y, z = quat
    return Rotation.from_quat([x, y, z, w]).as_matrix()
