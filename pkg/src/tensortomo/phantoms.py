"""Test-scene factories: phantoms, angular responses, masks, noise."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import GridError, InputDomainError
from .forward import ReflectivityModel, Sinogram
from .tensors import TensorField

__all__ = [
    "SceneSpec",
    "Inclusion",
    "deviatoric_delta",
    "mollifier_2d",
    "corner_reflector_profile",
    "scene_to_reflectivity",
    "hemisphere_mask",
    "add_noise",
    "disk_indicator_field",
    "gaussian_scalar_field",
    "bump_scalar_field",
]


@dataclass
class Inclusion:
    center: tuple
    radius: float
    response: callable  # response(xi_in, xi_out), swap-symmetric


@dataclass
class SceneSpec:
    """Isotropic background with anisotropic inclusions, plus run knobs."""

    background: float = 0.0
    inclusions: list = dc_field(default_factory=list)
    mollify_eps: float = 0.05
    noise_sigma: float = 0.0
    mask: str = "none"
    mask_axis: float = np.pi / 2

    def __post_init__(self):
        if self.mollify_eps <= 0:
            raise InputDomainError("mollification width must be positive")
        for inc in self.inclusions:
            if np.linalg.norm(inc.center) + inc.radius > 1.0 + 1e-12:
                raise InputDomainError(
                    "inclusion support must lie inside the unit disk")


def mollifier_2d(epsilon: float):
    """Unit-integral Gaussian bump of width eps (standard deviation eps/2).

    m(x) = 2 exp(-2|x|^2/eps^2) / (pi eps^2); the width convention keeps
    the second-moment smoothing bias of 1/r^2 far fields at 1.5 (eps/r)^2.
    """
    def m(x, y):
        return 2.0 * np.exp(-2.0 * (x ** 2 + y ** 2)
                            / epsilon ** 2) / (np.pi * epsilon ** 2)
    return m


def deviatoric_delta(epsilon: float, grid_n: int,
                     extent: float = 1.0) -> TensorField:
    """Mollified trace-free point tensor diag(1, -1) at the origin.

    Each diagonal component is a unit-integral Gaussian of width
    ``epsilon`` (with the matching sign); the off-diagonal component is
    zero.
    """
    field = TensorField.zeros(2, grid_n, extent)
    if epsilon <= 2.0 * field.spacing:
        raise GridError("mollification width must exceed twice the grid "
                        "spacing")
    x, y = field.meshgrid()
    g = mollifier_2d(epsilon)(x, y)
    field.values[:, :, 0] = g
    field.values[:, :, 2] = -g
    return field


def corner_reflector_profile(sharpness: float):
    """Gaussian-in-angle response peaking at xi_in == xi_out."""
    if sharpness <= 0:
        raise InputDomainError("sharpness must be positive")

    def response(xi_in, xi_out):
        xi_in = np.asarray(xi_in, float)
        xi_out = np.asarray(xi_out, float)
        cosang = np.clip(np.sum(xi_in * xi_out, axis=-1), -1.0, 1.0)
        angle = np.arccos(cosang)
        return np.exp(-(angle / sharpness) ** 2)

    return response


def scene_to_reflectivity(spec: SceneSpec,
                          scene_radius: float = 1.0) -> ReflectivityModel:
    """Reflectivity evaluator for a scene, in physical scene coordinates.

    The spec describes the scene in disk-normalized units; positions are
    divided by ``scene_radius`` before evaluation.  Swap symmetry holds by
    construction because every angular response depends only on the angle
    between the two directions.
    """
    for i, a in enumerate(spec.inclusions):
        for b in spec.inclusions[i + 1:]:
            gap = np.linalg.norm(np.asarray(a.center) - np.asarray(b.center))
            if gap < a.radius + b.radius:
                warnings.warn("overlapping inclusion supports are summed")
                break

    background = spec.background
    inclusions = list(spec.inclusions)

    def evaluator(x, xi_in, xi_out):
        x = np.asarray(x, float) / scene_radius
        r2 = np.sum(x * x, axis=-1)
        out = np.where(r2 <= 1.0, background, 0.0).astype(float)
        for inc in inclusions:
            d2 = np.sum((x - np.asarray(inc.center, float)) ** 2, axis=-1)
            out = out + np.where(d2 <= inc.radius ** 2,
                                 inc.response(xi_in, xi_out), 0.0)
        return out

    return ReflectivityModel(evaluator, scene_radius)


def hemisphere_mask(sino: Sinogram, axis: float) -> Sinogram:
    """Keep only bins whose line normal lies in the half-circle about axis.

    2D analog of the airborne hemisphere restriction on look directions.
    """
    out = sino.copy()
    keep = np.cos(out.phi_grid - axis) > 0.0
    out.mask = out.mask & keep[None, :]
    return out


def add_noise(sino: Sinogram, sigma: float, seed: int) -> Sinogram:
    """Additive Gaussian noise on valid bins, deterministic per seed."""
    if sigma < 0:
        raise InputDomainError("noise level must be non-negative")
    out = sino.copy()
    if sigma == 0.0:
        return out
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=out.values.shape)
    out.values = out.values + np.where(out.mask, noise, 0.0)
    return out


# ---------------------------------------------------------------------------
# scalar helper fields used across the test suite and examples


def disk_indicator_field(grid_n: int, extent: float = 1.0,
                         radius: float = 1.0,
                         supersample: int = 4) -> TensorField:
    """Antialiased indicator of a centered disk as a rank-0 field."""
    field = TensorField.zeros(0, grid_n, extent)
    h = field.spacing
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    acc = np.zeros((grid_n, grid_n))
    x, y = field.meshgrid()
    for ox in offs:
        for oy in offs:
            acc += ((x + ox * h) ** 2 + (y + oy * h) ** 2) <= radius ** 2
    field.values[:, :, 0] = acc / supersample ** 2
    return field


def gaussian_scalar_field(sigma: float, grid_n: int,
                          extent: float = 1.0, center=(0.0, 0.0),
                          amplitude: float = 1.0) -> TensorField:
    """Gaussian amplitude * exp(-|x - center|^2 / (2 sigma^2))."""
    cx, cy = center
    return TensorField.from_function(
        0, grid_n, extent,
        lambda x, y: amplitude * np.exp(-((x - cx) ** 2 + (y - cy) ** 2)
                                        / (2.0 * sigma ** 2)))


def bump_scalar_field(grid_n: int, extent: float = 1.0, radius: float = 0.8,
                      center=(0.0, 0.0), power: int = 6) -> TensorField:
    """Compactly supported polynomial bump (1 - r^2/R^2)^power."""
    cx, cy = center

    def f(x, y):
        q = ((x - cx) ** 2 + (y - cy) ** 2) / radius ** 2
        return np.where(q < 1.0, (1.0 - np.minimum(q, 1.0)) ** power, 0.0)

    return TensorField.from_function(0, grid_n, extent, f)
