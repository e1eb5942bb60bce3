"""Coordinate frames, rotations, spatial frequencies and UPA steering vectors.

Conventions
-----------
* Euler angles are ordered ``(psi_z, psi_y, psi_x)`` and compose as
  ``Q = Rz(psi_z) @ Ry(psi_y) @ Rx(psi_x)``.
* A UPA steering vector is ``kron(outer, inner)`` where the outer axis
  (y for YZ arrays, x for XY arrays) carries the azimuth frequency and the
  inner axis carries the elevation frequency.  Element indices start at 0.
* Spatial frequencies absorb ``2d/lambda`` so the per-element phase step is
  ``pi * f``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

__all__ = [
    "Plane",
    "ArrayGeometry",
    "SphericalAngles",
    "SpatialFreqPair",
    "Pose",
    "rot_x",
    "rot_y",
    "rot_z",
    "rotation_from_euler",
    "euler_from_rotation",
    "rotation_derivatives",
    "is_rotation",
    "global_to_local",
    "local_to_global",
    "direction_angles",
    "spatial_freqs_yz",
    "spatial_freqs_xy",
    "phase_progression",
    "upa_steering",
    "steering_yz",
    "steering_xy",
    "cascaded_freqs",
    "cascaded_freqs_geometric",
    "direction_vector_b",
    "direction_matrix_b",
    "condition_number",
]


class Plane(str, Enum):
    YZ = "YZ"
    XY = "XY"


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar array.

    ``n_first`` counts elements along the outer (azimuth) axis, ``n_second``
    along the inner (elevation) axis.
    """

    n_first: int
    n_second: int
    spacing: float
    plane: Plane = Plane.YZ

    def __post_init__(self):
        if self.n_first < 1 or self.n_second < 1:
            raise ValueError("array needs at least one element per axis")
        if not self.spacing > 0:
            raise ValueError("element spacing must be positive")
        object.__setattr__(self, "plane", Plane(self.plane))

    @property
    def size(self) -> int:
        return self.n_first * self.n_second

    def freq_bound(self, wavelength: float) -> float:
        """Largest attainable |spatial frequency|, ``2d/lambda``."""
        return 2.0 * self.spacing / wavelength


class SphericalAngles(NamedTuple):
    elevation: float
    azimuth: float


class SpatialFreqPair(NamedTuple):
    elev: float
    azim: float


@dataclass(frozen=True)
class Pose:
    """IRS reference-element location (m) and body-to-world rotation."""

    location: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.location, dtype=float).reshape(3)
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "rotation", rot)

    @classmethod
    def from_euler(cls, location, psi) -> "Pose":
        return cls(location, rotation_from_euler(psi))

    @property
    def euler(self) -> np.ndarray:
        return euler_from_rotation(self.rotation)


# --------------------------------------------------------------------------
# rotations

def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _drot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def _drot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def _drot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def rotation_from_euler(psi) -> np.ndarray:
    """Rotation matrix ``Rz(psi_z) Ry(psi_y) Rx(psi_x)``."""
    psi_z, psi_y, psi_x = (float(v) for v in psi)
    return rot_z(psi_z) @ rot_y(psi_y) @ rot_x(psi_x)


def rotation_derivatives(psi) -> np.ndarray:
    """Partial derivatives of the Euler rotation, shape ``(3, 3, 3)``.

    Entry ``[i]`` is ``dQ/dpsi_i`` with ``psi`` ordered ``(z, y, x)``.
    """
    psi_z, psi_y, psi_x = (float(v) for v in psi)
    Rz, Ry, Rx = rot_z(psi_z), rot_y(psi_y), rot_x(psi_x)
    return np.stack([
        _drot_z(psi_z) @ Ry @ Rx,
        Rz @ _drot_y(psi_y) @ Rx,
        Rz @ Ry @ _drot_x(psi_x),
    ])


def euler_from_rotation(Q) -> np.ndarray:
    """Inverse of :func:`rotation_from_euler` (``psi_y`` in [-pi/2, pi/2])."""
    Q = np.asarray(Q, dtype=float)
    psi_y = -np.arcsin(np.clip(Q[2, 0], -1.0, 1.0))
    psi_z = np.arctan2(Q[1, 0], Q[0, 0])
    psi_x = np.arctan2(Q[2, 1], Q[2, 2])
    return np.array([psi_z, psi_y, psi_x])


def is_rotation(Q, tol: float = 1e-12) -> bool:
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (3, 3):
        return False
    orth = np.linalg.norm(Q @ Q.T - np.eye(3))
    return bool(orth <= tol and abs(np.linalg.det(Q) - 1.0) <= tol)


def global_to_local(p_global, pose: Pose) -> np.ndarray:
    return pose.rotation.T @ (np.asarray(p_global, dtype=float) - pose.location)


def local_to_global(p_local, pose: Pose) -> np.ndarray:
    return pose.location + pose.rotation @ np.asarray(p_local, dtype=float)


# --------------------------------------------------------------------------
# angles and spatial frequencies

def direction_angles(delta) -> SphericalAngles:
    """Elevation from +z and quadrant-correct azimuth of a direction vector."""
    d = np.asarray(delta, dtype=float).reshape(3)
    r = np.linalg.norm(d)
    if not r > 0:
        raise ValueError("direction vector has zero length")
    elevation = float(np.arccos(np.clip(d[2] / r, -1.0, 1.0)))
    if d[0] == 0.0 and d[1] == 0.0:
        azimuth = 0.0
    else:
        azimuth = float(np.arctan2(d[1], d[0]))
        if azimuth == -np.pi:
            azimuth = np.pi
    return SphericalAngles(elevation, azimuth)


def spatial_freqs_yz(angles: SphericalAngles, spacing: float, wavelength: float) -> SpatialFreqPair:
    c = 2.0 * spacing / wavelength
    el, az = angles
    return SpatialFreqPair(c * np.cos(el), c * np.sin(el) * np.sin(az))


def spatial_freqs_xy(angles: SphericalAngles, spacing: float, wavelength: float) -> SpatialFreqPair:
    c = 2.0 * spacing / wavelength
    el, az = angles
    return SpatialFreqPair(c * np.sin(el) * np.sin(az), c * np.sin(el) * np.cos(az))


# --------------------------------------------------------------------------
# steering vectors

def phase_progression(n: int, freq: float) -> np.ndarray:
    return np.exp(1j * np.pi * freq * np.arange(n))


def upa_steering(n_first: int, n_second: int, f_first: float, f_second: float) -> np.ndarray:
    return np.kron(phase_progression(n_first, f_first), phase_progression(n_second, f_second))


def steering_yz(geom: ArrayGeometry, f: SpatialFreqPair) -> np.ndarray:
    if geom.plane is not Plane.YZ:
        raise ValueError("steering_yz needs a YZ-plane array")
    return upa_steering(geom.n_first, geom.n_second, f.azim, f.elev)


def steering_xy(geom: ArrayGeometry, f: SpatialFreqPair) -> np.ndarray:
    if geom.plane is not Plane.XY:
        raise ValueError("steering_xy needs an XY-plane array")
    return upa_steering(geom.n_first, geom.n_second, f.azim, f.elev)


# --------------------------------------------------------------------------
# cascaded IRS frequencies

def _unit(v):
    n = np.linalg.norm(v)
    if not n > 0:
        raise ValueError("IRS is colocated with a transmitter or receiver")
    return v / n


def direction_vector_b(p, p_tx, p_rx, irs_spacing: float, wavelength: float) -> np.ndarray:
    """Scaled difference of the TX->IRS and IRS->RX unit directions."""
    p = np.asarray(p, dtype=float)
    u_in = _unit(p - np.asarray(p_tx, dtype=float))
    u_out = _unit(np.asarray(p_rx, dtype=float) - p)
    return (2.0 * irs_spacing / wavelength) * (u_in - u_out)


def direction_matrix_b(p, scenario) -> np.ndarray:
    """Stack ``b_k(p)`` for every receiver as the columns of a 3 x K matrix."""
    d_i = scenario.irs_array.spacing
    cols = [direction_vector_b(p, scenario.p_tx, rx, d_i, scenario.wavelength)
            for rx in scenario.p_rx]
    return np.column_stack(cols)


def cascaded_freqs(pose: Pose, scenario, k: int) -> SpatialFreqPair:
    """Cascaded IRS frequencies for receiver ``k`` (0-based) from ``Q^T b_k``."""
    b = direction_vector_b(pose.location, scenario.p_tx, scenario.p_rx[k],
                           scenario.irs_array.spacing, scenario.wavelength)
    qb = pose.rotation.T @ b
    return SpatialFreqPair(float(qb[1]), float(qb[0]))


def cascaded_freqs_geometric(pose: Pose, scenario, k: int) -> SpatialFreqPair:
    """Same quantity computed through local-frame arrival/departure angles."""
    d_i, lam = scenario.irs_array.spacing, scenario.wavelength
    q_a = pose.rotation.T @ (pose.location - np.asarray(scenario.p_tx, dtype=float))
    q_d = global_to_local(scenario.p_rx[k], pose)
    w_a = spatial_freqs_xy(direction_angles(q_a), d_i, lam)
    w_d = spatial_freqs_xy(direction_angles(q_d), d_i, lam)
    return SpatialFreqPair(w_a.elev - w_d.elev, w_a.azim - w_d.azim)


def condition_number(B) -> float:
    """Spectral condition number ``||B||_2 ||B^-1||_2`` (pseudo-inverse if not square)."""
    s = np.linalg.svd(np.asarray(B, dtype=float), compute_uv=False)
    if s[-1] == 0:
        return float("inf")
    return float(s[0] / s[-1])
