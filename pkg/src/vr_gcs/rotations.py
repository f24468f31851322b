"""SO(3) helpers shared by the dynamics and controller code.

Conventions: rotation matrices are body->world with columns c1 (forward),
c2, c3 (thrust axis); Euler angles follow the 3-2-1 (yaw-pitch-roll)
sequence; quaternions are [w, x, y, z] and unit norm.
"""

import numpy as np

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


class NonSkewMatrixError(ValueError):
    """Input to vee() is not skew-symmetric within tolerance."""


def hat(v: np.ndarray) -> np.ndarray:
    """Map a 3-vector to its skew-symmetric cross-product matrix."""
    x, y, z = v
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


def vee(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Inverse of hat(): extract the 3-vector from a skew-symmetric matrix.

    For [[0,a,b],[-a,0,c],[-b,-c,0]] the result is (-c, b, -a).
    Raises NonSkewMatrixError when max|M + M^T| exceeds tol.
    """
    m = np.asarray(m, dtype=float)
    if np.max(np.abs(m + m.T)) > tol:
        raise NonSkewMatrixError("matrix is not skew-symmetric")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def rot_x(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(psi: float) -> np.ndarray:
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def orthonormalize(m: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix back onto SO(3).

    Polar projection via SVD: the closest rotation in the Frobenius sense.
    Keeps det = +1 even if the input drifted past a reflection.
    """
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Convert a rotation matrix to a unit quaternion [w, x, y, z].

    Shepperd's method: branch on the largest diagonal combination for
    numerical stability near all attitudes.
    """
    t = np.trace(m)
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    q = np.array([w, x, y, z])
    return q / np.linalg.norm(q)


def matrix_from_quat(q: np.ndarray) -> np.ndarray:
    """Convert a unit quaternion [w, x, y, z] to a rotation matrix."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed random rotation (via random unit quaternion)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return matrix_from_quat(q)
