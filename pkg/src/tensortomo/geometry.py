"""Isochrone geometry: ellipse parameters, curvature bounds, azimuths.

An isochrone is the locus of constant transmitter-point-receiver travel
time: an ellipse (2D) or prolate spheroid (3D) with the transmitter and
receiver at the foci.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (DegenerateIsochroneError, InputDomainError,
                     OutOfSceneError)

__all__ = [
    "SceneGeometry",
    "Isochrone",
    "isochrone",
    "max_curvature_2d",
    "max_gauss_curvature_3d",
    "vertex_curvatures",
    "flat_validity_ratio",
    "average_azimuth",
    "bistatic_angle",
    "directions_from_azimuth",
    "tangent_line_at_scene",
]


@dataclass
class SceneGeometry:
    """Transmitter/receiver pair, wave speed, scene ball and time grid."""

    xT: np.ndarray
    xR: np.ndarray
    c: float
    scene_radius: float
    time_grid: np.ndarray

    def __post_init__(self):
        self.xT = np.asarray(self.xT, dtype=float)
        self.xR = np.asarray(self.xR, dtype=float)
        self.time_grid = np.atleast_1d(np.asarray(self.time_grid, dtype=float))
        if self.xT.shape != self.xR.shape or self.xT.size not in (2, 3):
            raise InputDomainError("xT and xR must both be 2- or 3-vectors")
        if self.c <= 0:
            raise InputDomainError("wave speed must be positive")
        if self.scene_radius < 0:
            raise InputDomainError("scene radius must be non-negative")
        if np.any(np.diff(self.time_grid) <= 0) and self.time_grid.size > 1:
            raise InputDomainError("time grid must be strictly increasing")
        focal = np.linalg.norm(self.xR - self.xT)
        if np.any(self.c * self.time_grid <= focal):
            raise DegenerateIsochroneError(
                "every time must satisfy c*t > |xR - xT|")
        if (np.linalg.norm(self.xT) <= self.scene_radius
                or np.linalg.norm(self.xR) <= self.scene_radius):
            raise InputDomainError("transmitter/receiver must lie outside "
                                   "the scene ball")

    @property
    def dim(self) -> int:
        return self.xT.size

    @property
    def half_focal(self) -> float:
        return 0.5 * float(np.linalg.norm(self.xR - self.xT))


@dataclass
class Isochrone:
    """Ellipse with foci xT, xR; a = ct/2, b = sqrt(a^2 - d^2)."""

    center: np.ndarray
    a: float
    b: float
    d: float
    axis_dir: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.axis_dir = np.asarray(self.axis_dir, dtype=float)
        if not self.a > self.d >= 0:
            raise DegenerateIsochroneError("requires a > d >= 0")

    @property
    def minor_dir(self) -> np.ndarray:
        e = self.axis_dir
        return np.array([-e[1], e[0]])

    def point(self, theta):
        """Parametric point(s) center + a*cos(theta)*e1 + b*sin(theta)*e2."""
        theta = np.asarray(theta, dtype=float)
        return (self.center
                + self.a * np.cos(theta)[..., None] * self.axis_dir
                + self.b * np.sin(theta)[..., None] * self.minor_dir)

    def speed(self, theta):
        """|d point / d theta|."""
        theta = np.asarray(theta, dtype=float)
        return np.sqrt((self.a * np.sin(theta)) ** 2
                       + (self.b * np.cos(theta)) ** 2)


def isochrone(geom: SceneGeometry, t: float) -> Isochrone:
    """Isochrone of travel time ``t`` for the pair in ``geom``."""
    d = geom.half_focal
    a = 0.5 * geom.c * t
    if a <= d:
        raise DegenerateIsochroneError(f"c*t = {geom.c * t} <= 2d = {2 * d}")
    b = np.sqrt(a * a - d * d)
    sep = geom.xR - geom.xT
    if d > 0:
        axis = sep / np.linalg.norm(sep)
    else:
        axis = np.zeros_like(geom.xT)
        axis[0] = 1.0
    return Isochrone(0.5 * (geom.xT + geom.xR), a, b, d, axis)


def _check_nondegenerate(t: float, d: float, c: float):
    if c * t <= 2.0 * d:
        raise DegenerateIsochroneError(f"c*t = {c * t} <= 2d = {2 * d}")


def max_curvature_2d(t: float, d: float, c: float) -> float:
    """Maximum curvature of the 2D isochrone ellipse."""
    _check_nondegenerate(t, d, c)
    ct = c * t
    return 4.0 * np.sqrt(ct * ct / 4.0 - d * d) / (ct * ct)


def max_gauss_curvature_3d(t: float, d: float, c: float) -> float:
    """Maximum Gaussian curvature of the 3D isochrone spheroid."""
    _check_nondegenerate(t, d, c)
    ct = c * t
    return 16.0 * (ct * ct / 4.0 - d * d) / ct ** 4


def vertex_curvatures(iso: Isochrone):
    """Curvatures at the minor-axis and major-axis vertices (b/a^2, a/b^2)."""
    return iso.b / iso.a ** 2, iso.a / iso.b ** 2


def flat_validity_ratio(geom: SceneGeometry, t: float) -> float:
    """Scene radius over the maximum radius of curvature at time ``t``.

    Small values justify replacing the isochrone by its tangent line.
    """
    d = geom.half_focal
    if geom.dim == 2:
        return geom.scene_radius * max_curvature_2d(t, d, geom.c)
    return geom.scene_radius * np.sqrt(max_gauss_curvature_3d(t, d, geom.c))


def _unit_from(x, y, what: str):
    v = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise InputDomainError(f"point coincides with {what}")
    return v / nrm


def average_azimuth(x, xT, xR):
    """Unit bisector of the focus-pointing directions and its magnitude.

    Returns (nHat, |n|) with n the average of the unit vectors from the
    foci to ``x``; |n| equals cos(beta/2) and nHat is normal to the
    isochrone through ``x``.
    """
    u = _unit_from(xT, x, "the transmitter")
    v = _unit_from(xR, x, "the receiver")
    n = 0.5 * (u + v)
    mag = np.linalg.norm(n)
    if mag < 1e-14:
        raise InputDomainError("average azimuth vanishes (x on the open "
                               "focal segment)")
    return n / mag, float(mag)


def bistatic_angle(x, xT, xR) -> float:
    """Angle in [0, pi] between the focus-pointing unit directions at x."""
    u = _unit_from(xT, x, "the transmitter")
    v = _unit_from(xR, x, "the receiver")
    # atan2 form is accurate near 0 and pi
    return float(2.0 * np.arctan2(np.linalg.norm(u - v),
                                  np.linalg.norm(u + v)))


def directions_from_azimuth(n_hat, beta: float):
    """Unordered direction pair {xi_in, xi_out} from azimuth and angle."""
    if not 0.0 <= beta < np.pi:
        raise InputDomainError("beta must lie in [0, pi)")
    n_hat = np.asarray(n_hat, dtype=float)
    if n_hat.size != 2:
        raise InputDomainError("directions_from_azimuth is 2D only")
    ca, sa = np.cos(0.5 * beta), np.sin(0.5 * beta)
    rot_m = np.array([[ca, sa], [-sa, ca]]) @ n_hat
    rot_p = np.array([[ca, -sa], [sa, ca]]) @ n_hat
    return rot_m, rot_p


def tangent_line_at_scene(geom: SceneGeometry, t: float, scene_center=None):
    """Tangent-line parameters of the isochrone near the scene.

    Finds the isochrone point nearest to the scene center, and returns
    (nHat, s) for the line {y : (y - (xT+xR)/2) . nHat = s} through it.
    """
    if scene_center is None:
        scene_center = np.zeros(geom.dim)
    scene_center = np.asarray(scene_center, dtype=float)
    if geom.dim != 2:
        raise InputDomainError("tangent line bridge is 2D only")
    iso = isochrone(geom, t)

    def dist2(theta):
        return float(np.sum((iso.point(theta) - scene_center) ** 2))

    thetas = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    pts = iso.point(thetas)
    d2 = np.sum((pts - scene_center[None, :]) ** 2, axis=1)
    i0 = int(np.argmin(d2))
    lo, hi = thetas[i0] - 2 * np.pi / 720, thetas[i0] + 2 * np.pi / 720
    res = minimize_scalar(dist2, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14})
    x0 = iso.point(float(res.x))
    if np.linalg.norm(x0 - scene_center) > geom.scene_radius:
        raise OutOfSceneError("isochrone does not meet the scene ball")
    n_hat, _ = average_azimuth(x0, geom.xT, geom.xR)
    s = float(np.dot(x0 - iso.center, n_hat))
    return n_hat, s
