"""Forward transforms: elliptic volume/Radon transforms and line transforms.

The elliptic transforms integrate an anisotropic reflectivity over the
interior (volume transform) or boundary (elliptic Radon transform, the
time derivative of the volume transform) of an isochrone.  The normal
Radon transform integrates a symmetric tensor field along straight lines,
contracted with the line normal.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.optimize import brentq
from scipy.special import roots_legendre

from .errors import (GridError, InputDomainError, OutOfSceneError,
                     SingularConfigurationError)
from .geometry import (SceneGeometry, bistatic_angle, flat_validity_ratio,
                       isochrone, tangent_line_at_scene)
from .tensors import TensorField, multiplicities

__all__ = [
    "ReflectivityModel",
    "Sinogram",
    "volume_transform",
    "elliptic_radon",
    "normal_radon_point",
    "scalar_radon",
    "sinogram",
    "multistatic_sinogram",
]


@dataclass
class ReflectivityModel:
    """Direction-dependent scene reflectivity.

    ``evaluator(x, xi_in, xi_out)`` takes points of shape (..., 2) and unit
    directions of the same shape and returns reflectivity values.  Swap
    symmetry in the directions is the caller's responsibility; the
    factories in :mod:`tensortomo.phantoms` enforce it by construction.
    """

    evaluator: callable
    support_radius: float

    def __call__(self, x, xi_in, xi_out):
        return self.evaluator(np.asarray(x, float), np.asarray(xi_in, float),
                              np.asarray(xi_out, float))


@dataclass
class Sinogram:
    """Line-transform samples over (offset s, normal angle phi) grids."""

    s_grid: np.ndarray
    phi_grid: np.ndarray
    values: np.ndarray
    mask: np.ndarray | None = None
    rank: int = 0
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.s_grid = np.asarray(self.s_grid, dtype=float)
        self.phi_grid = np.asarray(self.phi_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.s_grid.size, self.phi_grid.size):
            raise GridError("values shape must be (s_count, phi_count)")
        if np.any(np.diff(self.s_grid) <= 0):
            raise GridError("s grid must be strictly increasing")
        if np.any(np.diff(self.phi_grid) <= 0):
            raise GridError("phi grid must be strictly increasing")
        if self.mask is None:
            self.mask = np.ones(self.values.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.values.shape:
                raise GridError("mask shape must match values")

    def copy(self) -> "Sinogram":
        return Sinogram(self.s_grid.copy(), self.phi_grid.copy(),
                        self.values.copy(), self.mask.copy(), self.rank,
                        dict(self.meta))

    @staticmethod
    def grids(s_count: int, phi_count: int, s_max: float = 1.0):
        return (np.linspace(-s_max, s_max, s_count),
                np.arange(phi_count) * (2.0 * np.pi / phi_count))


# ---------------------------------------------------------------------------
# elliptic transforms


def _directions(points, xT, xR):
    u = points - xT
    v = points - xR
    un = np.linalg.norm(u, axis=-1, keepdims=True)
    vn = np.linalg.norm(v, axis=-1, keepdims=True)
    return u / un, v / vn


def _ellipse_chord_in_x(iso, y, r_sup):
    """Interval of x with (x, y) inside the ellipse, clipped to the disk.

    Returns (lo, hi) or None when empty.  Works in the ellipse frame:
    ((p-c).e1/a)^2 + ((p-c).e2/b)^2 < 1 is a quadratic in x.
    """
    e1, e2 = iso.axis_dir, iso.minor_dir
    c = iso.center
    # p = (x, y); u = (p-c).e1, v = (p-c).e2
    # u = e1x*x + e1y*y - c.e1, linear in x (same for v)
    au, bu = e1[0] / iso.a, (e1[1] * y - np.dot(c, e1)) / iso.a
    av, bv = e2[0] / iso.b, (e2[1] * y - np.dot(c, e2)) / iso.b
    qa = au * au + av * av
    qb = 2.0 * (au * bu + av * bv)
    qc = bu * bu + bv * bv - 1.0
    disc = qb * qb - 4.0 * qa * qc
    if disc <= 0.0:
        return None
    root = np.sqrt(disc)
    lo, hi = (-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)
    half = np.sqrt(max(r_sup * r_sup - y * y, 0.0))
    lo, hi = max(lo, -half), min(hi, half)
    if lo >= hi:
        return None
    return lo, hi


def _scanline_kinks(iso, r_sup):
    """Ordinates where the scan-line endpoints lose smoothness.

    The chord endpoints switch between ellipse-limited and disk-limited
    where the ellipse boundary crosses the support circle, and a chord
    appears or vanishes where the ellipse has a horizontal tangent inside
    the disk.  Splitting the outer integral there restores spectral
    accuracy of the composite Gauss-Legendre rule.
    """
    ys = []
    intervals = _support_intervals(iso, r_sup)
    if intervals and intervals != [(0.0, 2.0 * np.pi)]:
        for a, b in intervals:
            ys.append(float(iso.point(a)[1]))
            ys.append(float(iso.point(b)[1]))
    e1y, e2y = iso.axis_dir[1], iso.minor_dir[1]
    theta0 = float(np.arctan2(iso.b * e2y, iso.a * e1y))
    for theta in (theta0, theta0 + np.pi):
        p = iso.point(theta)
        if float(np.dot(p, p)) < r_sup * r_sup:
            ys.append(float(p[1]))
    ys = [y for y in ys if -r_sup < y < r_sup]
    ys.sort()
    out = []
    for y in ys:
        if not out or y - out[-1] > 1e-12 * r_sup:
            out.append(y)
    return out


def volume_transform(model: ReflectivityModel, geom: SceneGeometry, t: float,
                     n_outer: int = 160, n_inner: int = 160) -> float:
    """Integral of the reflectivity over the isochrone interior.

    Gauss-Legendre in both directions; each scan line is clipped exactly to
    the intersection of the isochrone interior and the support disk, and
    the outer integral is split where the chord endpoints lose smoothness,
    so smooth reflectivities integrate with spectral accuracy.
    """
    iso = isochrone(geom, t)
    r = model.support_radius
    if r <= 0.0:
        return 0.0
    # substitute y = r*sin(psi) to absorb the sqrt chord endpoints
    psi_breaks = [-0.5 * np.pi]
    psi_breaks += [float(np.arcsin(np.clip(y / r, -1.0, 1.0)))
                   for y in _scanline_kinks(iso, r)]
    psi_breaks.append(0.5 * np.pi)
    psi_nodes, psi_weights = roots_legendre(n_outer)
    xi_nodes, xi_weights = roots_legendre(n_inner)

    total = 0.0
    for p_lo, p_hi in zip(psi_breaks[:-1], psi_breaks[1:]):
        if p_hi - p_lo <= 0.0:
            continue
        psi = 0.5 * (p_hi - p_lo) * psi_nodes + 0.5 * (p_hi + p_lo)
        wy = 0.5 * (p_hi - p_lo) * psi_weights * r * np.cos(psi)
        ys = r * np.sin(psi)
        for y, w in zip(ys, wy):
            interval = _ellipse_chord_in_x(iso, y, r)
            if interval is None:
                continue
            lo, hi = interval
            xs = 0.5 * (hi - lo) * xi_nodes + 0.5 * (hi + lo)
            pts = np.stack([xs, np.full_like(xs, y)], axis=-1)
            xi_in, xi_out = _directions(pts, geom.xT, geom.xR)
            vals = model(pts, xi_in, xi_out)
            total += w * 0.5 * (hi - lo) * float(np.dot(xi_weights, vals))
    return total


def _support_intervals(iso, r_sup, n_scan: int = 4096):
    """Parameter intervals of the ellipse lying inside the support disk."""
    thetas = np.linspace(0.0, 2.0 * np.pi, n_scan, endpoint=False)
    pts = iso.point(thetas)
    inside = np.sum(pts * pts, axis=1) <= r_sup * r_sup
    if not inside.any():
        return []
    if inside.all():
        return [(0.0, 2.0 * np.pi)]

    def g(theta):
        p = iso.point(theta)
        return float(np.dot(p, p)) - r_sup * r_sup

    step = 2.0 * np.pi / n_scan
    edges_in, edges_out = [], []
    for i in range(n_scan):
        j = (i + 1) % n_scan
        if inside[j] and not inside[i]:
            edges_in.append(brentq(g, thetas[i], thetas[i] + step,
                                   xtol=1e-14))
        elif inside[i] and not inside[j]:
            edges_out.append(brentq(g, thetas[i], thetas[i] + step,
                                    xtol=1e-14))
    intervals = []
    for a in edges_in:
        b = min((b for b in edges_out if b > a),
                default=min(edges_out) + 2.0 * np.pi)
        intervals.append((a, b))
    return intervals


def elliptic_radon(model: ReflectivityModel, geom: SceneGeometry, t: float,
                   gl_order: int = 8, nodes_per_unit: int = 64) -> float:
    """Time derivative of the volume transform via the coarea formula.

    Integrates c * f / (2 cos(beta/2)) over the isochrone arc inside the
    support disk; composite Gauss-Legendre along the arc.
    """
    iso = isochrone(geom, t)
    intervals = _support_intervals(iso, model.support_radius)
    if not intervals:
        return 0.0
    nodes, weights = roots_legendre(gl_order)
    total = 0.0
    for a, b in intervals:
        arclen = float(iso.speed(0.5 * (a + b))) * (b - a)
        n_seg = int(np.clip(np.ceil(arclen * nodes_per_unit
                                    / model.support_radius), 4, 4096))
        edges = np.linspace(a, b, n_seg + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        thetas = (mid[:, None] + half * nodes[None, :]).ravel()
        w = np.tile(half * weights, n_seg)
        pts = iso.point(thetas)
        xi_in, xi_out = _directions(pts, geom.xT, geom.xR)
        cos_half_beta = 0.5 * np.linalg.norm(xi_in + xi_out, axis=-1)
        if np.any(cos_half_beta < 1e-9):
            raise SingularConfigurationError(
                "bistatic angle reaches pi on the integration path")
        vals = model(pts, xi_in, xi_out)
        integrand = vals * iso.speed(thetas) / (2.0 * cos_half_beta)
        total += float(np.dot(w, integrand))
    return geom.c * total


# ---------------------------------------------------------------------------
# straight-line transforms


def _slot_weights(rank: int, phi):
    """Angular factors multiplying each reduced component on a line.

    Contraction with n = (cos phi, sin phi) weights component j by
    C(rank, j) cos^(rank-j) sin^j.
    """
    phi = np.asarray(phi, dtype=float)
    j = np.arange(rank + 1)
    return (multiplicities(rank)[:, None]
            * np.cos(phi)[None, :] ** (rank - j)[:, None]
            * np.sin(phi)[None, :] ** j[:, None])


def _chord_quadrature(field: TensorField, s_vals: np.ndarray, phi: float,
                      nodes_per_cell: int, interp_order: int = 1):
    """Line integrals of every component along chords at fixed angle.

    Chords are clipped to the disk of radius ``extent`` inscribed in the
    grid square.  Returns an array of shape (rank+1, len(s_vals)).
    """
    radius = field.extent
    h = field.spacing
    n_seg = field.nx - 1
    gl_nodes, gl_weights = roots_legendre(nodes_per_cell)
    # composite rule on [-1, 1], scaled per chord by its half length
    edges = np.linspace(-1.0, 1.0, n_seg + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    seg_half = 1.0 / n_seg
    xi = (mid[:, None] + seg_half * gl_nodes[None, :]).ravel()
    base_w = np.tile(seg_half * gl_weights, n_seg)

    half_len = np.sqrt(np.clip(radius ** 2 - s_vals ** 2, 0.0, None))
    n_hat = np.array([np.cos(phi), np.sin(phi)])
    perp = np.array([-n_hat[1], n_hat[0]])
    # points[s, node, dim]
    u = half_len[:, None] * xi[None, :]
    px = s_vals[:, None] * n_hat[0] + u * perp[0]
    py = s_vals[:, None] * n_hat[1] + u * perp[1]
    # grid index coordinates (axis 0 is x)
    ix = (px + radius) / h
    iy = (py + radius) / h
    coords = np.stack([ix.ravel(), iy.ravel()])
    out = np.empty((field.rank + 1, s_vals.size))
    for j in range(field.rank + 1):
        samples = map_coordinates(field.values[:, :, j], coords,
                                  order=interp_order, mode="constant",
                                  cval=0.0)
        samples = samples.reshape(px.shape)
        out[j] = (samples * base_w[None, :]).sum(axis=1) * half_len
    return out


def _atom_contributions(field: TensorField, s_vals, phi):
    """Mollified-line delta atom terms, shape (rank+1, len(s_vals)).

    An atom within half a grid spacing of a line contributes its
    components scaled by 1/spacing.
    """
    h = field.spacing
    n_hat = np.array([np.cos(phi), np.sin(phi)])
    out = np.zeros((field.rank + 1, s_vals.size))
    for loc, coeff in field.atoms:
        offs = np.abs(np.dot(loc, n_hat) - s_vals)
        hit = offs <= 0.5 * h
        out[:, hit] += coeff.components[:, None] / h
    return out


def _sinogram_column(field: TensorField, s_vals: np.ndarray, phi: float,
                     nodes_per_cell: int = 4,
                     interp_order: int = 1) -> np.ndarray:
    comps = _chord_quadrature(field, s_vals, phi, nodes_per_cell,
                              interp_order)
    if field.atoms:
        comps = comps + _atom_contributions(field, s_vals, phi)
    return _slot_weights(field.rank, [phi])[:, 0] @ comps


def normal_radon_point(field: TensorField, s: float, phi: float,
                       nodes_per_cell: int = 4,
                       interp_order: int = 1) -> float:
    """Normal Radon transform at a single (offset, normal angle) sample.

    Integrates the field contracted ``rank`` times with the line normal
    along the chord {x . n = s} of the disk of radius ``extent``.  Offsets
    beyond the disk give 0.  ``interp_order`` selects the spline order of
    the field interpolation (1 = bilinear default; 3 for smooth fields
    needing better than O(h^2)).
    """
    if abs(s) >= field.extent:
        return 0.0
    return float(_sinogram_column(field, np.array([float(s)]), float(phi),
                                  nodes_per_cell, interp_order)[0])


def scalar_radon(field: TensorField, s: float, phi: float,
                 nodes_per_cell: int = 4, interp_order: int = 1) -> float:
    """Standard Radon transform of a scalar (rank-0) field."""
    if field.rank != 0:
        raise InputDomainError("scalar_radon requires a rank-0 field")
    return normal_radon_point(field, s, phi, nodes_per_cell, interp_order)


def sinogram(field: TensorField, s_count: int, phi_count: int,
             s_max: float = 1.0, nodes_per_cell: int = 4,
             interp_order: int = 1) -> Sinogram:
    """Normal Radon transform sampled on uniform (s, phi) grids."""
    if s_count <= 0 or phi_count <= 0:
        raise InputDomainError("sample counts must be positive")
    s_grid, phi_grid = Sinogram.grids(s_count, phi_count, s_max)
    if interp_order > 1:
        # prefilter once instead of per column
        from scipy.ndimage import spline_filter
        field = TensorField(field.rank, np.stack(
            [spline_filter(field.values[:, :, j], order=interp_order)
             for j in range(field.rank + 1)], axis=-1), field.extent,
            field.atoms)
        prefiltered = True
    else:
        prefiltered = False
    values = np.empty((s_count, phi_count))
    for jp, phi in enumerate(phi_grid):
        values[:, jp] = _sinogram_column(field, s_grid, phi, nodes_per_cell,
                                         interp_order)
    return Sinogram(s_grid, phi_grid, values, rank=field.rank)


# ---------------------------------------------------------------------------
# multistatic pipeline


def multistatic_sinogram(model: ReflectivityModel, constellation,
                         time_grid, s_count: int, phi_count: int,
                         scene_radius: float, c: float = 1.0,
                         scene_center=(0.0, 0.0),
                         flat_threshold: float = 0.02,
                         bistatic_bin: float = 0.2,
                         nominal_beta: float = 0.0) -> Sinogram:
    """Bin elliptic Radon data onto a normal-Radon sinogram grid.

    For each (transmitter, receiver) pair and time, the elliptic Radon
    value is rescaled to the flat-isochrone normal-Radon datum
    ``2 cos(beta/2) R / (c * scene_radius)`` and binned at the (s, phi) of
    the tangent line, with s in disk-normalized units.  Samples failing
    the flat-validity threshold are masked out (counted in ``meta``), not
    fatal.  Colliding bins are averaged in pair order.
    """
    scene_center = np.asarray(scene_center, dtype=float)
    s_grid, phi_grid = Sinogram.grids(s_count, phi_count)
    sums = np.zeros((s_count, phi_count))
    counts = np.zeros((s_count, phi_count), dtype=int)
    rejected = 0
    ds = s_grid[1] - s_grid[0] if s_count > 1 else 2.0
    dphi = 2.0 * np.pi / phi_count

    for xT, xR in constellation:
        geom = SceneGeometry(np.asarray(xT, float), np.asarray(xR, float), c,
                             scene_radius, np.asarray(time_grid, float))
        beta_c = bistatic_angle(scene_center, geom.xT, geom.xR)
        if abs(beta_c - nominal_beta) > bistatic_bin:
            raise InputDomainError(
                f"pair bistatic angle {beta_c:.3f} departs from nominal "
                f"{nominal_beta:.3f} by more than {bistatic_bin}")
        for t in geom.time_grid:
            if flat_validity_ratio(geom, t) > flat_threshold:
                rejected += 1
                continue
            iso = isochrone(geom, t)
            try:
                n_hat, s_phys = tangent_line_at_scene(geom, t, scene_center)
            except OutOfSceneError:
                continue
            s_disk = (s_phys - float(np.dot(scene_center - iso.center,
                                            n_hat))) / scene_radius
            phi = float(np.arctan2(n_hat[1], n_hat[0])) % (2.0 * np.pi)
            i_s = int(np.round((s_disk - s_grid[0]) / ds))
            i_p = int(np.round(phi / dphi)) % phi_count
            if not 0 <= i_s < s_count:
                continue
            value = elliptic_radon(model, geom, t)
            datum = 2.0 * np.cos(0.5 * beta_c) * value / (c * scene_radius)
            sums[i_s, i_p] += datum
            counts[i_s, i_p] += 1

    mask = counts > 0
    values = np.divide(sums, counts, out=np.zeros_like(sums), where=mask)
    if rejected:
        warnings.warn(f"{rejected} samples masked out by the flat-isochrone "
                      "validity check")
    return Sinogram(s_grid, phi_grid, values, mask,
                    meta={"flat_rejections": rejected})
