"""End-to-end acceptance criteria A1-A8.

Each test prints a single ``A<k> ... PASS``/``FAIL`` line and asserts the
pinned tolerances.  A4, A6, A7 and A8 share one large singular system
(radial cap 50, angular cap 40, 112 x 168 data grid) that is cached on
disk between sessions (``TENSO_CACHE_DIR``), so the first run pays the
~1 minute factorization once.
"""

import numpy as np
import pytest

from tensortomo.decomposition import (closed_form_discrepancy_report,
                                      make_null_field, make_solenoidal,
                                      singular_support_score,
                                      solenoidal_projection, visible_part)
from tensortomo.forward import Sinogram, multistatic_sinogram, sinogram
from tensortomo.geometry import (SceneGeometry, isochrone, max_curvature_2d,
                                 max_gauss_curvature_3d, vertex_curvatures)
from tensortomo.io import load_or_build_system
from tensortomo.phantoms import (SceneSpec, bump_scalar_field,
                                 deviatoric_delta, disk_indicator_field,
                                 gaussian_scalar_field, hemisphere_mask,
                                 scene_to_reflectivity)
from tensortomo.sve import (reconstruct, reconstruct_worked_example,
                            worked_example_sinogram)
from tensortomo.tensors import (TensorField, divergence, l2_norm,
                                pointwise_dot, sym_derivative)

N_RAD, K_ANG = 50, 40
S_COUNT, PHI_COUNT = 112, 168
GRID_N = 257


def report(label: str, ok: bool, detail: str) -> None:
    print(f"{label}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, f"{label}: {detail}"


@pytest.fixture(scope="session")
def big_system():
    return load_or_build_system(2, N_RAD, K_ANG, S_COUNT, PHI_COUNT, GRID_N)


def bump_vector_field(n=GRID_N, extent=1.0, radius=0.7, seed=0):
    rng = np.random.default_rng(seed)
    a, b, c, d = rng.normal(size=4)

    def f(x, y):
        q = (x ** 2 + y ** 2) / radius ** 2
        env = np.where(q < 1.0, (1.0 - np.minimum(q, 1.0)) ** 6, 0.0)
        return np.stack([(a + b * x) * env, (c + d * y) * env], axis=-1)

    return TensorField.from_function(1, n, extent, f)


def test_a1_curvature_formulas():
    rng = np.random.default_rng(7)
    # zero-separation limits hit the circle/sphere values exactly
    exact = True
    for ct in (0.5, 1.0, 3.0, 10.0):
        exact &= max_curvature_2d(ct, 0.0, 1.0) == 2.0 / ct
        exact &= max_gauss_curvature_3d(ct, 0.0, 1.0) == 4.0 / ct ** 2
    worst = 0.0
    for _ in range(20):
        xt = rng.normal(size=2) * 5.0
        xr = rng.normal(size=2) * 5.0
        c = rng.uniform(0.5, 2.0)
        d = 0.5 * np.linalg.norm(xt - xr)
        t = (2.0 * d + rng.uniform(0.5, 5.0)) / c
        geom = SceneGeometry(xt, xr, c, 1.0, np.array([t]))
        iso = isochrone(geom, t)
        kappa_minor, _ = vertex_curvatures(iso)
        worst = max(worst, abs(max_curvature_2d(t, d, c) - kappa_minor))
    report("A1 curvature formulas", exact and worst < 1e-12,
           f"flat-limit exact, vertex mismatch {worst:.3g}")


def test_a2_second_derivative_identity():
    sigma = 0.2
    w = gaussian_scalar_field(sigma, GRID_N)
    hess = sym_derivative(sym_derivative(w))
    s_count, phi_count = 400, 360
    g2 = sinogram(hess, s_count, phi_count, interp_order=3)
    g0 = sinogram(w, s_count, phi_count, interp_order=3)
    ds = g0.s_grid[1] - g0.s_grid[0]
    v = g0.values
    dss = (-v[:-4] + 16 * v[1:-3] - 30 * v[2:-2] + 16 * v[3:-1]
           - v[4:]) / (12.0 * ds ** 2)
    diff = g2.values[2:-2] - dss
    rel = np.linalg.norm(diff) / np.linalg.norm(dss)
    report("A2 second-derivative line identity", rel < 1e-3,
           f"relative L2 {rel:.3g} < 1e-3")


def test_a3_flat_isochrone_bridge():
    model = scene_to_reflectivity(SceneSpec(background=1.0))
    s_count, phi_count = 41, 36
    s_grid, phi_grid = Sinogram.grids(s_count, phi_count)
    radius = 100.0
    constellation = [(-radius * np.array([np.cos(p), np.sin(p)]),) * 2
                     for p in phi_grid]
    times = 2.0 * (radius + s_grid[1:-1])
    g = multistatic_sinogram(model, constellation, times, s_count,
                             phi_count, 1.0)
    direct = sinogram(disk_indicator_field(GRID_N), s_count, phi_count)
    diff = (g.values - direct.values)[g.mask]
    rel = np.linalg.norm(diff) / np.linalg.norm(direct.values[g.mask])
    report("A3 flat-isochrone bridge", rel < 0.01,
           f"relative L2 {rel:.3g} < 1% on {int(g.mask.sum())} bins")


def test_a4_null_space(big_system):
    v = bump_vector_field()
    null = make_null_field(v)
    dv = sym_derivative(v)
    g_null = sinogram(null, S_COUNT, PHI_COUNT, interp_order=3)
    g_ref = sinogram(dv, S_COUNT, PHI_COUNT, interp_order=3)
    rel_sino = (np.linalg.norm(g_null.values)
                / np.linalg.norm(g_ref.values))
    recon = reconstruct(g_null, big_system, grid_n=GRID_N)
    rel_recon = l2_norm(recon) / l2_norm(dv)
    ok = rel_sino < 1e-3 and rel_recon < 0.02
    report("A4 null space", ok,
           f"sinogram rel {rel_sino:.3g} < 1e-3, "
           f"reconstruction rel {rel_recon:.3g} < 2%")


def test_a5_solenoidal_decomposition():
    rng = np.random.default_rng(11)
    def components(x, y):
        env = np.where(x ** 2 + y ** 2 < 1.0,
                       (1.0 - np.minimum(x ** 2 + y ** 2, 1.0)) ** 6, 0.0)
        return np.stack([env, x * env, (y - 0.2 * x) * env], axis=-1)

    field = TensorField.from_function(2, GRID_N, 1.5, components)
    dec = solenoidal_projection(field)
    g = dec.solenoidal
    # interior residual: the projected part has tails truncated at the
    # grid edge, where the one-sided stencils disagree with the spectral
    # solve; away from that ring the construction is exact
    interior = np.zeros((GRID_N, GRID_N), dtype=bool)
    interior[8:-8, 8:-8] = True
    resid = l2_norm(divergence(g), interior) / l2_norm(g)
    # idempotence on a compactly supported divergence-free field (the
    # projected part of a generic field has long-range tails by design)
    g0 = make_solenoidal(bump_scalar_field(GRID_N, 1.5, radius=0.8))
    idem = l2_norm(solenoidal_projection(g0).potential_grad) / l2_norm(g0)
    worst_dot = 0.0
    h = field.spacing
    for _ in range(10):
        w = bump_vector_field(GRID_N, 1.5, 1.0, seed=rng.integers(1 << 30))
        dw = sym_derivative(w)
        dot = abs(np.sum(pointwise_dot(g, dw)) * h * h)
        worst_dot = max(worst_dot, dot / (l2_norm(g) * l2_norm(dw)))
    ok = resid < 1e-6 and idem < 1e-6 and worst_dot < 1e-5
    report("A5 solenoidal decomposition", ok,
           f"divergence rel {resid:.3g} < 1e-6, idempotence {idem:.3g} "
           f"< 1e-6, orthogonality {worst_dot:.3g} < 1e-5")


def test_a6_worked_example(big_system):
    epsilon = 0.05
    # truncate where sigma reaches the modelling-error level: the
    # mollifier is narrower than the basis resolution, so ~23% of the
    # analytic data lies outside the operator range
    sv = big_system.singular_values
    m = int(np.count_nonzero(sv >= 0.1 * sv[0]))
    recon = reconstruct_worked_example(epsilon, system=big_system,
                                       m_trunc=m, grid_n=GRID_N)
    # decomposition oracle: the component orthogonal to the transform's
    # null space, filtered to the same basis resolution as the output
    oracle = big_system.basis.evaluate(big_system.basis.project(
        visible_part(deviatoric_delta(epsilon, GRID_N, 1.0))), GRID_N)
    x, y = oracle.meshgrid()
    r = np.hypot(x, y)
    annulus = (r > 0.3) & (r < 0.7)
    diff = recon.values[annulus] - oracle.values[annulus]
    rel = np.linalg.norm(diff) / np.linalg.norm(oracle.values[annulus])

    # ringing: sign changes of the first component along the +x ray
    mid = GRID_N // 2
    ray_x = x[mid:, mid]
    profile = recon.values[mid:, mid, 0]
    sel = (ray_x > 0.1) & (ray_x < 0.9)
    vals = profile[sel]
    vals = vals[np.abs(vals) > 1e-3 * np.abs(vals).max()]
    sign_changes = int(np.count_nonzero(np.diff(np.sign(vals)) != 0))

    cf = closed_form_discrepancy_report(GRID_N, epsilon)
    has_report = ("relative_l2" in cf
                  and "component_12_relative_l2" in cf)
    # the closed-form comparison is diagnostic only: reported, not asserted
    ok = rel < 0.15 and sign_changes >= 2 and has_report
    report("A6 worked example", ok,
           f"oracle rel {rel:.3g} < 15% on annulus, sign changes "
           f"{sign_changes} >= 2, closed-form report overall "
           f"{cf['relative_l2']:.3g}")


def test_a7_limited_angle(big_system):
    epsilon = 0.05
    g = worked_example_sinogram(epsilon, S_COUNT, PHI_COUNT)
    g = hemisphere_mask(g, np.pi / 2 + np.pi / 8)
    sv = big_system.singular_values
    m = int(np.count_nonzero(sv >= 0.1 * sv[0]))
    recon = reconstruct(g, big_system, m_trunc=m, grid_n=GRID_N)
    score = singular_support_score(recon, 5)
    x, y = recon.meshgrid()
    # the basis jumps to zero at the disk rim; exclude it from the search
    score[np.hypot(x, y) > 0.9] = 0.0
    ix, iy = np.unravel_index(np.argmax(score), score.shape)
    mid = GRID_N // 2
    h = 2.0 / (GRID_N - 1)
    dist = np.hypot(ix - mid, iy - mid) * h
    # the mollified spike's non-smoothness peaks on its flank, so the
    # argmax localizes the inclusion to within the mollification width
    report("A7 limited angle", dist <= 1.5 * epsilon,
           f"masked-data non-smoothness argmax {dist:.3f} from the "
           f"inclusion center, within 1.5*eps = {1.5 * epsilon} "
           f"(coverage {recon.meta['coverage']:.2f})")


def test_a8_basis_and_svd_hygiene(big_system):
    gram = big_system.basis.gram_tol
    a, u = big_system.matrix, big_system.u
    sv, v = big_system.singular_values, big_system.v
    pair = np.max(np.linalg.norm(a @ v - u * sv, axis=0))
    # round trip: data of a mid-spectrum singular vector recovers it
    i = big_system.kept // 2
    data = (a @ v[:, i]) / big_system.row_weight
    g = Sinogram(big_system.s_grid, big_system.phi_grid,
                 data.reshape(S_COUNT, PHI_COUNT), rank=2)
    recon = reconstruct(g, big_system, grid_n=GRID_N)
    rel = (np.linalg.norm(recon.meta["coefficients"] - v[:, i])
           / np.linalg.norm(v[:, i]))
    ok = gram < 1e-8 and pair < 1e-8 and rel < 1e-6
    report("A8 basis/SVD hygiene", ok,
           f"gram {gram:.3g} < 1e-8, pairing {pair:.3g} < 1e-8, "
           f"round trip {rel:.3g} < 1e-6")


def test_invariant_visible_round_trip(big_system):
    """A smooth recoverable phantom reconstructs to < 5% in the interior."""
    def components(x, y):
        q = (x ** 2 + y ** 2) / 0.64
        env = np.where(q < 1.0, (1.0 - np.minimum(q, 1.0)) ** 6, 0.0)
        return np.stack([env, x * env, (y - 0.3 * x) * env], axis=-1)

    f = TensorField.from_function(2, GRID_N, 1.0, components)
    target = visible_part(f)
    data = sinogram(target, S_COUNT, PHI_COUNT, interp_order=3)
    recon = reconstruct(data, big_system, grid_n=GRID_N)
    x, y = recon.meshgrid()
    interior = np.hypot(x, y) < 0.9
    diff = recon.values[interior] - target.values[interior]
    rel = np.linalg.norm(diff) / np.linalg.norm(target.values[interior])
    report("invariant recoverable-phantom round trip", rel < 0.05,
           f"interior rel {rel:.3g} < 5%, null fraction removed "
           f"{target.meta['null_fraction']:.2f}")
