"""Symmetric tensor algebra and calculus on 2D grids.

Rank-k symmetric tensors in dimension 2 have k+1 independent components.
They are stored multiplicity-reduced: entry ``j`` of the component vector
holds the component whose multi-index contains exactly ``j`` indices equal
to 2.  Full components are recovered by permutation symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.special import comb

from .errors import BandlimitError, GridError, InputDomainError

__all__ = [
    "SymTensor",
    "TensorField",
    "AngularProfile",
    "contract",
    "evaluate_polynomial",
    "sym_derivative",
    "divergence",
    "grid_derivative",
    "even_odd_split",
    "profile_to_tensors",
    "tensors_to_profile",
    "l2_norm",
    "pointwise_dot",
]


@dataclass(frozen=True)
class SymTensor:
    """Pointwise symmetric rank-k tensor in dimension 2."""

    rank: int
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        object.__setattr__(self, "components", comps)
        if self.rank < 0:
            raise InputDomainError("rank must be non-negative")
        if comps.shape != (self.rank + 1,):
            raise InputDomainError(
                f"rank-{self.rank} tensor needs {self.rank + 1} components, "
                f"got shape {comps.shape}"
            )

    def component(self, *indices) -> float:
        """Full component by multi-index; each index is 1 or 2."""
        if len(indices) != self.rank:
            raise InputDomainError(f"expected {self.rank} indices")
        if any(i not in (1, 2) for i in indices):
            raise InputDomainError("indices must be 1 or 2")
        return float(self.components[sum(i == 2 for i in indices)])

    @staticmethod
    def zero(rank: int) -> "SymTensor":
        return SymTensor(rank, np.zeros(rank + 1))


def multiplicities(rank: int) -> np.ndarray:
    """Number of distinct multi-index permutations per reduced component."""
    return comb(rank, np.arange(rank + 1))


def evaluate_polynomial(t: SymTensor, v) -> float:
    """Degree-k homogeneous polynomial of ``t`` at an arbitrary 2-vector."""
    v = np.asarray(v, dtype=float)
    j = np.arange(t.rank + 1)
    return float(np.sum(multiplicities(t.rank) * t.components
                        * v[0] ** (t.rank - j) * v[1] ** j))


def contract(t: SymTensor, n) -> float:
    """Full contraction of ``t`` with a unit vector ``n``.

    Equals the sum over all multi-indices of full components times the
    matching products of entries of ``n``.
    """
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise InputDomainError("contract requires a unit vector")
    return evaluate_polynomial(t, n)


@dataclass
class TensorField:
    """Grid-sampled symmetric tensor field on the square [-L, L]^2.

    ``values`` has shape (nx, ny, rank+1) with axis 0 along x.  ``atoms``
    is an optional list of (location, SymTensor) delta atoms.
    """

    rank: int
    values: np.ndarray
    extent: float
    atoms: list = dc_field(default_factory=list)
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[2] != self.rank + 1:
            raise GridError(
                f"values must have shape (nx, ny, {self.rank + 1})")
        if self.values.shape[0] != self.values.shape[1]:
            raise GridError("square extent requires nx == ny for uniform "
                            "and equal spacing")
        if self.extent <= 0:
            raise GridError("extent must be positive")
        for loc, coeff in self.atoms:
            if coeff.rank != self.rank:
                raise GridError("atom rank differs from field rank")

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.nx - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.ny)

    def meshgrid(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def copy(self) -> "TensorField":
        return TensorField(self.rank, self.values.copy(), self.extent,
                           [(np.array(loc), c) for loc, c in self.atoms],
                           dict(self.meta))

    @staticmethod
    def zeros(rank: int, n: int, extent: float) -> "TensorField":
        return TensorField(rank, np.zeros((n, n, rank + 1)), extent)

    @staticmethod
    def from_function(rank: int, n: int, extent: float, func) -> "TensorField":
        """Sample ``func(xx, yy) -> (nx, ny, rank+1)`` on the grid."""
        x = np.linspace(-extent, extent, n)
        xx, yy = np.meshgrid(x, x, indexing="ij")
        vals = np.asarray(func(xx, yy), dtype=float)
        if vals.ndim == 2:
            vals = vals[:, :, None]
        return TensorField(rank, vals, extent)


def pointwise_dot(a: TensorField, b: TensorField) -> np.ndarray:
    """Pointwise full tensor inner product Sum_I a_I b_I on the grid."""
    if a.rank != b.rank:
        raise InputDomainError("rank mismatch")
    mult = multiplicities(a.rank)
    return np.einsum("xyj,xyj,j->xy", a.values, b.values, mult)


def l2_norm(field: TensorField, mask: np.ndarray | None = None) -> float:
    """Grid L2 norm with the tensor inner product; optional node mask."""
    dens = pointwise_dot(field, field)
    if mask is not None:
        dens = dens * mask
    return float(np.sqrt(dens.sum()) * field.spacing)


def grid_derivative(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Partial derivative along an axis of a grid-sampled array.

    6th-order central differences deep in the interior, falling back to
    4th-order one ring further out and 2nd-order at the two outermost
    rings.  Requires at least 5 nodes along the axis.
    """
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    n = v.shape[0]
    if n < 5:
        raise GridError("need at least 5 nodes per axis for derivatives")
    out = np.empty_like(v)
    out[2:-2] = (-v[4:] + 8.0 * v[3:-1] - 8.0 * v[1:-3] + v[:-4]) / (12.0 * h)
    if n >= 7:
        out[3:-3] = (v[6:] - 9.0 * v[5:-1] + 45.0 * v[4:-2]
                     - 45.0 * v[2:-4] + 9.0 * v[1:-5] - v[:-6]) / (60.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[1] = (v[2] - v[0]) / (2.0 * h)
    out[-2] = (v[-1] - v[-3]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def _require_no_atoms(field: TensorField, what: str):
    if field.atoms:
        raise GridError(f"{what} does not support delta atoms; mollify first")


def sym_derivative(field: TensorField) -> TensorField:
    """Symmetrized derivative, raising the rank by one.

    Component with j indices equal to 2 (out of k+1) is the symmetrization
    ((k+1-j) dx F_j + j dy F_{j-1}) / (k+1).
    """
    _require_no_atoms(field, "sym_derivative")
    k = field.rank
    h = field.spacing
    dx = grid_derivative(field.values, 0, h)
    dy = grid_derivative(field.values, 1, h)
    out = np.zeros((field.nx, field.ny, k + 2))
    for j in range(k + 2):
        if j <= k:
            out[:, :, j] += (k + 1 - j) / (k + 1) * dx[:, :, j]
        if j >= 1:
            out[:, :, j] += j / (k + 1) * dy[:, :, j - 1]
    return TensorField(k + 1, out, field.extent)


def divergence(field: TensorField) -> TensorField:
    """Divergence on the first slot, lowering the rank by one."""
    if field.rank < 1:
        raise InputDomainError("divergence requires rank >= 1")
    _require_no_atoms(field, "divergence")
    h = field.spacing
    dx = grid_derivative(field.values, 0, h)
    dy = grid_derivative(field.values, 1, h)
    k = field.rank
    out = dx[:, :, :k] + dy[:, :, 1:]
    return TensorField(k - 1, out, field.extent)


@dataclass
class AngularProfile:
    """Real samples on a uniform angle grid over [0, 2*pi)."""

    angles: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        m = self.angles.size
        if m < 2 or self.values.shape != (m,):
            raise InputDomainError("angles/values size mismatch")
        expected = np.arange(m) * (2.0 * np.pi / m)
        if not np.allclose(self.angles, expected, atol=1e-10):
            raise InputDomainError("angles must uniformly sample [0, 2*pi)")

    @staticmethod
    def from_function(m: int, func) -> "AngularProfile":
        angles = np.arange(m) * (2.0 * np.pi / m)
        return AngularProfile(angles, np.asarray(func(angles), dtype=float))


def even_odd_split(p: AngularProfile):
    """Split into parts even/odd under alpha -> alpha + pi.

    The sample count must be even so that alpha + pi stays on the grid.
    """
    m = p.angles.size
    if m % 2 != 0:
        raise InputDomainError("even_odd_split needs an even sample count")
    shifted = np.roll(p.values, m // 2)
    even = AngularProfile(p.angles, 0.5 * (p.values + shifted))
    odd = AngularProfile(p.angles, 0.5 * (p.values - shifted))
    return even, odd


def _angular_design_matrix(angles: np.ndarray, rank: int) -> np.ndarray:
    j = np.arange(rank + 1)
    c, s = np.cos(angles)[:, None], np.sin(angles)[:, None]
    return multiplicities(rank)[None, :] * c ** (rank - j)[None, :] * s ** j[None, :]


def profile_to_tensors(p: AngularProfile, n_deg: int, tol: float = 1e-8):
    """Represent a bandlimited profile by a pair of homogeneous tensors.

    The even part of ``p`` becomes a rank-``n_deg`` tensor and the odd part
    a rank-``n_deg - 1`` tensor; contraction with the unit direction at each
    sample angle reproduces the respective part.  ``n_deg`` must be even.

    Raises :class:`BandlimitError` if the relative Fourier-tail energy at
    frequencies above ``n_deg`` exceeds ``tol``.
    """
    if n_deg <= 0 or n_deg % 2 != 0:
        raise InputDomainError("n_deg must be a positive even integer")
    m = p.angles.size
    if m < 2 * n_deg + 1:
        raise InputDomainError("profile undersampled for requested degree")
    coeffs = np.fft.rfft(p.values) / m
    total = float(np.sum(np.abs(coeffs) ** 2))
    tail = float(np.sum(np.abs(coeffs[n_deg + 1:]) ** 2))
    if total > 0 and tail / total > tol:
        raise BandlimitError(
            f"profile has relative tail energy {tail / total:.3e} above "
            f"frequency {n_deg}", tail / total)

    # Parity split in the Fourier domain: even frequencies are invariant
    # under alpha -> alpha + pi, odd frequencies flip sign.
    even_coeffs = coeffs.copy()
    even_coeffs[1::2] = 0.0
    odd_coeffs = coeffs - even_coeffs
    even_vals = np.fft.irfft(even_coeffs * m, m)
    odd_vals = np.fft.irfft(odd_coeffs * m, m)
    even_c, *_ = np.linalg.lstsq(
        _angular_design_matrix(p.angles, n_deg), even_vals, rcond=None)
    odd_c, *_ = np.linalg.lstsq(
        _angular_design_matrix(p.angles, n_deg - 1), odd_vals, rcond=None)
    return SymTensor(n_deg, even_c), SymTensor(n_deg - 1, odd_c)


def tensors_to_profile(even: SymTensor, odd: SymTensor | None,
                       angles) -> AngularProfile:
    """Contract the tensor pair with the unit direction at each angle."""
    angles = np.asarray(angles, dtype=float)
    vals = _angular_design_matrix(angles, even.rank) @ even.components
    if odd is not None:
        vals = vals + _angular_design_matrix(angles, odd.rank) @ odd.components
    return AngularProfile(angles, vals)
