"""Command-line interface: simulate, decompose, reconstruct, render.

Exit codes: 0 success, 2 configuration error, 3 system/grid mismatch,
4 numerical precondition failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .decomposition import (closed_form_discrepancy_report, mollify_atoms,
                            solenoidal_projection)
from .errors import (ConfigError, GridError, InputDomainError, PaddingError,
                     TensorTomoError)
from .forward import Sinogram, multistatic_sinogram, sinogram
from .geometry import SceneGeometry, flat_validity_ratio
from .io import (load_or_build_system, read_config, read_field,
                 read_sinogram, render_field, write_field, write_sinogram)
from .phantoms import (Inclusion, SceneSpec, add_noise,
                       corner_reflector_profile, deviatoric_delta,
                       disk_indicator_field, hemisphere_mask,
                       scene_to_reflectivity)
from .sve import reconstruct
from .tensors import divergence, l2_norm

__all__ = ["main"]


def _get(cfg: dict, key: str, default=None, cast=str):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing config key: {key}")
        return default
    try:
        return cast(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {cfg[key]}") from exc


def _constellation(cfg: dict):
    pairs = []
    ring_count = _get(cfg, "ring_count", 0, int)
    if ring_count:
        radius = _get(cfg, "ring_radius", None, float)
        angles = np.arange(ring_count) * (2.0 * np.pi / ring_count)
        for a in angles:
            pos = radius * np.array([np.cos(a), np.sin(a)])
            pairs.append((pos, pos))
    i = 1
    while f"pair{i}" in cfg:
        vals = [float(t) for t in cfg[f"pair{i}"].split()]
        if len(vals) != 4:
            raise ConfigError(f"pair{i} must hold 4 numbers (xT, then xR)")
        pairs.append((np.array(vals[:2]), np.array(vals[2:])))
        i += 1
    if not pairs:
        raise ConfigError("empty constellation: set ring_count/ring_radius "
                          "or pairN keys")
    return pairs


def _time_grid(cfg: dict) -> np.ndarray:
    if "times" in cfg:
        return np.array([float(t) for t in cfg["times"].split()])
    t0 = _get(cfg, "time_min", None, float)
    t1 = _get(cfg, "time_max", None, float)
    n = _get(cfg, "time_count", None, int)
    return np.linspace(t0, t1, n)


def _phantom_field(cfg: dict):
    kind = _get(cfg, "phantom", "disk")
    grid_n = _get(cfg, "grid_n", 257, int)
    if kind == "disk":
        return disk_indicator_field(grid_n)
    if kind == "deviatoric":
        eps = _get(cfg, "epsilon", 0.05, float)
        return deviatoric_delta(eps, grid_n)
    raise ConfigError(f"unknown phantom for direct mode: {kind}")


def _scene_spec(cfg: dict) -> SceneSpec:
    inclusions = []
    i = 1
    while f"inclusion{i}" in cfg:
        vals = [float(t) for t in cfg[f"inclusion{i}"].split()]
        if len(vals) != 4:
            raise ConfigError(f"inclusion{i} must hold cx cy radius "
                              "sharpness")
        inclusions.append(Inclusion((vals[0], vals[1]), vals[2],
                                    corner_reflector_profile(vals[3])))
        i += 1
    return SceneSpec(background=_get(cfg, "background", 0.0, float),
                     inclusions=inclusions)


def cmd_validate_flat(args) -> int:
    cfg = read_config(args.config)
    threshold = (args.threshold if args.threshold is not None
                 else _get(cfg, "threshold", 0.02, float))
    pairs = _constellation(cfg)
    times = _time_grid(cfg)
    scene_radius = _get(cfg, "scene_radius", 1.0, float)
    speed = _get(cfg, "speed", 1.0, float)
    all_ok = True
    for ip, (xt, xr) in enumerate(pairs):
        geom = SceneGeometry(xt, xr, speed, scene_radius, times)
        for t in times:
            ratio = flat_validity_ratio(geom, t)
            ok = ratio <= threshold
            all_ok &= ok
            print(f"pair {ip} time {t:.6g} ratio {ratio:.6g} "
                  f"{'PASS' if ok else 'FAIL'}")
    print(f"flat-isochrone validation: {'PASS' if all_ok else 'FAIL'} "
          f"(threshold {threshold})")
    return 0 if all_ok else 1


def cmd_simulate(args) -> int:
    cfg = read_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    s_count = _get(cfg, "s_count", 64, int)
    phi_count = _get(cfg, "phi_count", 48, int)
    report = []
    if args.mode == "normal":
        field = _phantom_field(cfg)
        sino = sinogram(field, s_count, phi_count)
    else:
        model = scene_to_reflectivity(_scene_spec(cfg),
                                      _get(cfg, "scene_radius", 1.0, float))
        sino = multistatic_sinogram(
            model, _constellation(cfg), _time_grid(cfg), s_count, phi_count,
            _get(cfg, "scene_radius", 1.0, float),
            _get(cfg, "speed", 1.0, float),
            flat_threshold=_get(cfg, "threshold", 0.02, float))
        report.append(f"flat_rejections {sino.meta['flat_rejections']}")
    if _get(cfg, "mask", "none") == "hemisphere":
        sino = hemisphere_mask(sino, _get(cfg, "mask_axis", np.pi / 2,
                                          float))
    sigma = _get(cfg, "noise_sigma", 0.0, float)
    if sigma > 0.0:
        seed = args.seed if args.seed is not None else _get(cfg, "seed", 0,
                                                            int)
        sino = add_noise(sino, sigma, seed)
        report.append(f"noise_sigma {sigma}")
    path = out_dir / "sinogram.tsino"
    write_sinogram(path, sino)
    (out_dir / "simulate_report.txt").write_text(
        "\n".join(report + [f"valid_bins {int(sino.mask.sum())}"]) + "\n")
    print(f"wrote {path}")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = read_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    g = read_sinogram(args.sino)
    n_rad = _get(cfg, "n_rad", 20, int)
    k_ang = _get(cfg, "k_ang", 16, int)
    grid_n = _get(cfg, "recon_grid_n", 257, int)
    s_count = _get(cfg, "s_count", g.s_grid.size, int)
    phi_count = _get(cfg, "phi_count", g.phi_grid.size, int)
    if (s_count, phi_count) != (g.s_grid.size, g.phi_grid.size):
        raise GridError("sinogram grids do not match the configured system")
    system = load_or_build_system(g.rank, n_rad, k_ang, s_count, phi_count,
                                  grid_n)
    m_trunc = _get(cfg, "m_trunc", 0, int) or None
    field = reconstruct(g, system, m_trunc, grid_n)
    path = out_dir / "field.tfld"
    write_field(path, field)
    coeffs = field.meta["coefficients"]
    resid = float(np.linalg.norm(
        system.matrix @ coeffs - g.values.ravel() * system.row_weight))
    sv = system.singular_values
    (out_dir / "reconstruct_report.txt").write_text(
        f"kept {system.kept}\ntruncation {field.meta['truncation']}\n"
        f"sigma_max {sv[0]:.9g}\nsigma_min_kept {sv[-1]:.9g}\n"
        f"data_residual {resid:.9g}\ncoverage {field.meta['coverage']:.6g}\n")
    print(f"wrote {path}")
    return 0


def cmd_decompose(args) -> int:
    cfg = read_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    field = read_field(args.field)
    if field.atoms:
        field = mollify_atoms(field, _get(cfg, "epsilon", 0.05, float))
    dec = solenoidal_projection(field, _get(cfg, "pad_factor", 4, int))
    write_field(out_dir / "G.tfld", dec.solenoidal)
    write_field(out_dir / "dV.tfld", dec.potential_grad)
    write_field(out_dir / "V.tfld", dec.potential)
    norm_g = l2_norm(dec.solenoidal)
    resid = l2_norm(divergence(dec.solenoidal)) / norm_g if norm_g else 0.0
    lines = [f"divergence_residual_relative {resid:.9g}",
             f"potential_grad_norm {l2_norm(dec.potential_grad):.9g}",
             f"solenoidal_norm {norm_g:.9g}"]
    if _get(cfg, "compare_closed_form", 0, int):
        rep = closed_form_discrepancy_report(
            grid_n=field.nx, epsilon=_get(cfg, "epsilon", 0.05, float),
            extent=field.extent, pad_factor=_get(cfg, "pad_factor", 4, int))
        lines += [f"closed_form_{k} {v}" for k, v in rep.items()]
    (out_dir / "decompose_report.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote {out_dir / 'G.tfld'}")
    return 0


def cmd_render(args) -> int:
    field = read_field(args.field)
    stem = args.stem or Path(args.field).stem
    paths = render_field(field, args.out, stem)
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensortomo",
        description="travel-time tensor tomography pipelines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-flat",
                       help="check the flat-isochrone approximation")
    p.add_argument("--config", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_validate_flat)

    p = sub.add_parser("simulate", help="generate sinogram data")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("normal", "multistatic"),
                   default="normal")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="truncated SVE inversion")
    p.add_argument("--config", required=True)
    p.add_argument("--sino", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("decompose", help="solenoidal/potential splitting")
    p.add_argument("--config", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("render", help="write grayscale component images")
    p.add_argument("--field", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stem", default=None)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PaddingError as exc:
        print(f"numerical precondition failure: {exc}", file=sys.stderr)
        return 4
    except GridError as exc:
        print(f"grid/system mismatch: {exc}", file=sys.stderr)
        return 3
    except (InputDomainError, TensorTomoError) as exc:
        print(f"numerical precondition failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
