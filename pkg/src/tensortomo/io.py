"""Bit-specified file formats, flat configs, image rendering, caching.

Formats:

* ``TSINO 1`` — sinogram: ASCII header (``TSINO 1`` / ``rank R`` /
  ``s S_COUNT S_MIN S_MAX`` / ``phi P_COUNT`` / ``mask 0|1``) followed by
  little-endian float32 values with the offset index fastest, then one
  byte per bin for the mask when present.
* ``TFLD 1`` — tensor field: ASCII header (``TFLD 1`` / ``rank R`` /
  ``grid NX NY`` / ``extent L`` / ``atoms A``) followed by per-component
  little-endian float32 planes in component order, then ``A`` atom
  records as float64 ``(x, y, components...)``.
* Config files are flat ``key = value`` text with ``#`` comments.
* Rendering writes binary PGM (P5, maxval 65535) per component plus a
  text sidecar with the value range and grid metadata.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputDomainError
from .forward import Sinogram
from .sve import SVESystem, assemble_forward, build_basis, factorize
from .tensors import SymTensor, TensorField

__all__ = [
    "read_config",
    "write_sinogram",
    "read_sinogram",
    "write_field",
    "read_field",
    "render_field",
    "cache_dir",
    "load_or_build_system",
]


# ---------------------------------------------------------------------------
# flat key = value configs


def read_config(path) -> dict:
    """Parse a flat key = value file with # comments into a str dict."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    out: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------------------
# TSINO v1


def write_sinogram(path, sino: Sinogram) -> None:
    has_mask = int(not sino.mask.all())
    header = (f"TSINO 1\nrank {sino.rank}\n"
              f"s {sino.s_grid.size} {sino.s_grid[0]:.17g} "
              f"{sino.s_grid[-1]:.17g}\n"
              f"phi {sino.phi_grid.size}\nmask {has_mask}\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.asarray(sino.values, dtype="<f4").ravel(
            order="F").tobytes())
        if has_mask:
            fh.write(sino.mask.astype(np.uint8).ravel(order="F").tobytes())


def _read_header_lines(fh, count):
    lines = []
    for _ in range(count):
        line = b""
        while (ch := fh.read(1)) not in (b"\n", b""):
            line += ch
        lines.append(line.decode("ascii"))
    return lines


def read_sinogram(path) -> Sinogram:
    with open(path, "rb") as fh:
        magic, rank_l, s_l, phi_l, mask_l = _read_header_lines(fh, 5)
        if magic != "TSINO 1":
            raise InputDomainError(f"not a TSINO v1 file: {path}")
        rank = int(rank_l.split()[1])
        _, s_count, s_min, s_max = s_l.split()
        s_count = int(s_count)
        phi_count = int(phi_l.split()[1])
        has_mask = int(mask_l.split()[1])
        n = s_count * phi_count
        values = np.frombuffer(fh.read(4 * n), dtype="<f4").astype(float)
        values = values.reshape((s_count, phi_count), order="F")
        mask = None
        if has_mask:
            mask = np.frombuffer(fh.read(n), dtype=np.uint8).astype(bool)
            mask = mask.reshape((s_count, phi_count), order="F")
    s_grid = np.linspace(float(s_min), float(s_max), s_count)
    phi_grid = np.arange(phi_count) * (2.0 * np.pi / phi_count)
    return Sinogram(s_grid, phi_grid, values, mask, rank)


# ---------------------------------------------------------------------------
# TFLD v1


def write_field(path, field: TensorField) -> None:
    header = (f"TFLD 1\nrank {field.rank}\ngrid {field.nx} {field.ny}\n"
              f"extent {field.extent:.17g}\natoms {len(field.atoms)}\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for j in range(field.rank + 1):
            fh.write(np.asarray(field.values[:, :, j],
                                dtype="<f4").tobytes())
        for loc, coeff in field.atoms:
            rec = np.concatenate([np.asarray(loc, dtype=float),
                                  np.asarray(coeff.components, dtype=float)])
            fh.write(rec.astype("<f8").tobytes())


def read_field(path) -> TensorField:
    with open(path, "rb") as fh:
        magic, rank_l, grid_l, extent_l, atoms_l = _read_header_lines(fh, 5)
        if magic != "TFLD 1":
            raise InputDomainError(f"not a TFLD v1 file: {path}")
        rank = int(rank_l.split()[1])
        nx, ny = (int(t) for t in grid_l.split()[1:])
        extent = float(extent_l.split()[1])
        n_atoms = int(atoms_l.split()[1])
        planes = []
        for _ in range(rank + 1):
            buf = np.frombuffer(fh.read(4 * nx * ny), dtype="<f4")
            planes.append(buf.astype(float).reshape(nx, ny))
        atoms = []
        rec_len = 2 + rank + 1
        for _ in range(n_atoms):
            rec = np.frombuffer(fh.read(8 * rec_len), dtype="<f8")
            atoms.append((rec[:2].copy(), SymTensor(rank, rec[2:].copy())))
    return TensorField(rank, np.stack(planes, axis=-1), extent, atoms)


# ---------------------------------------------------------------------------
# rendering


_COMPONENT_LABELS = {0: ("value",), 1: ("1", "2"), 2: ("11", "12", "22")}


def render_field(field: TensorField, out_dir, stem: str) -> list:
    """Write one 16-bit PGM per component plus a text sidecar.

    Values map linearly from [min, max] to [0, 65535]; a constant
    component renders mid-gray (32768) and is flagged as degenerate in
    the sidecar.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = _COMPONENT_LABELS.get(field.rank) or tuple(
        str(j) for j in range(field.rank + 1))
    paths = []
    sidecar = [f"stem {stem}", f"rank {field.rank}",
               f"grid {field.nx} {field.ny}",
               f"extent {field.extent:.17g}"]
    for j, label in enumerate(labels):
        plane = field.values[:, :, j]
        lo, hi = float(plane.min()), float(plane.max())
        if hi > lo:
            pix = np.round((plane - lo) / (hi - lo) * 65535.0)
            degenerate = False
        else:
            pix = np.full(plane.shape, 32768.0)
            degenerate = True
        path = out_dir / f"{stem}_{label}.pgm"
        with open(path, "wb") as fh:
            fh.write(f"P5\n{field.ny} {field.nx}\n65535\n".encode("ascii"))
            fh.write(pix.astype(">u2").tobytes())
        sidecar.append(f"component {label} min {lo:.17g} max {hi:.17g}"
                       + (" degenerate" if degenerate else ""))
        paths.append(path)
    (out_dir / f"{stem}.txt").write_text("\n".join(sidecar) + "\n")
    return paths


# ---------------------------------------------------------------------------
# singular-system cache


def cache_dir() -> Path:
    env = os.environ.get("TENSO_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "tensortomo"


def load_or_build_system(rank: int, n_rad: int, k_ang: int, s_count: int,
                         phi_count: int, grid_n: int = 257,
                         use_cache: bool = True) -> SVESystem:
    """Factorized forward system, cached on disk by its fingerprint."""
    tag = f"sve_r{rank}_n{n_rad}_k{k_ang}_s{s_count}_p{phi_count}"
    cache = cache_dir() / f"{tag}.npz"
    basis = build_basis(rank, n_rad, k_ang, grid_n)
    if use_cache and cache.is_file():
        with np.load(cache) as data:
            system = SVESystem(basis, data["s_grid"], data["phi_grid"],
                               data["matrix"], float(data["row_weight"]),
                               data["sv"], data["u"], data["v"],
                               int(data["default_truncation"]))
        return system
    system = factorize(assemble_forward(basis, s_count, phi_count))
    if use_cache:
        cache.parent.mkdir(parents=True, exist_ok=True)
        np.savez(cache, s_grid=system.s_grid, phi_grid=system.phi_grid,
                 matrix=system.matrix, row_weight=system.row_weight,
                 sv=system.singular_values, u=system.u, v=system.v,
                 default_truncation=system.default_truncation)
    return system
