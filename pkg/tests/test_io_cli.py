import time

import numpy as np
import pytest

from tensortomo.cli import main
from tensortomo.errors import ConfigError
from tensortomo.forward import Sinogram
from tensortomo.io import (read_config, read_field, read_sinogram,
                           render_field, write_field, write_sinogram)
from tensortomo.tensors import SymTensor, TensorField


class TestConfig:
    def test_parse_key_values(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("# comment\nalpha = 3\n\npath = a b c  # trailing\n")
        cfg = read_config(p)
        assert cfg == {"alpha": "3", "path": "a b c"}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config(tmp_path / "nope.cfg")

    def test_malformed_line(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("just a line\n")
        with pytest.raises(ConfigError):
            read_config(p)


class TestSinogramFormat:
    def make(self, masked):
        s, p = Sinogram.grids(9, 6)
        rng = np.random.default_rng(1)
        vals = rng.normal(size=(9, 6))
        mask = None
        if masked:
            mask = rng.random((9, 6)) > 0.3
        return Sinogram(s, p, vals, mask, rank=2)

    @pytest.mark.parametrize("masked", [False, True])
    def test_round_trip_bit_identical(self, tmp_path, masked):
        g = self.make(masked)
        p1, p2 = tmp_path / "a.tsino", tmp_path / "b.tsino"
        write_sinogram(p1, g)
        g2 = read_sinogram(p1)
        write_sinogram(p2, g2)
        assert p1.read_bytes() == p2.read_bytes()
        assert g2.rank == 2
        assert np.array_equal(g2.mask, g.mask)
        assert np.allclose(g2.values, g.values, atol=1e-7)

    def test_header_layout(self, tmp_path):
        g = self.make(False)
        path = tmp_path / "a.tsino"
        write_sinogram(path, g)
        head = path.read_bytes().split(b"\n")[:5]
        assert head[0] == b"TSINO 1"
        assert head[1] == b"rank 2"
        assert head[2].startswith(b"s 9 -1 1")
        assert head[3] == b"phi 6"
        assert head[4] == b"mask 0"


class TestFieldFormat:
    def make(self):
        rng = np.random.default_rng(2)
        f = TensorField(2, rng.normal(size=(17, 17, 3)), 1.5)
        f.atoms.append((np.array([0.1, -0.2]),
                        SymTensor(2, [1.0, 0.0, -1.0])))
        return f

    def test_round_trip_bit_identical(self, tmp_path):
        f = self.make()
        p1, p2 = tmp_path / "a.tfld", tmp_path / "b.tfld"
        write_field(p1, f)
        f2 = read_field(p1)
        write_field(p2, f2)
        assert p1.read_bytes() == p2.read_bytes()
        assert f2.rank == 2 and f2.extent == 1.5
        assert len(f2.atoms) == 1
        assert np.allclose(f2.atoms[0][0], [0.1, -0.2])
        assert np.allclose(f2.atoms[0][1].components, [1.0, 0.0, -1.0])

    def test_header_layout(self, tmp_path):
        path = tmp_path / "a.tfld"
        write_field(path, self.make())
        head = path.read_bytes().split(b"\n")[:5]
        assert head[:3] == [b"TFLD 1", b"rank 2", b"grid 17 17"]
        assert head[3] == b"extent 1.5"
        assert head[4] == b"atoms 1"


class TestRender:
    def test_constant_field_mid_gray(self, tmp_path):
        f = TensorField(0, np.full((8, 8, 1), 3.0), 1.0)
        paths = render_field(f, tmp_path, "flat")
        data = paths[0].read_bytes()
        header, pixels = data.split(b"65535\n", 1)
        assert header.startswith(b"P5\n8 8\n")
        pix = np.frombuffer(pixels, dtype=">u2")
        assert np.all(pix == 32768)
        sidecar = (tmp_path / "flat.txt").read_text()
        assert "degenerate" in sidecar

    def test_three_panels_for_rank2(self, tmp_path):
        rng = np.random.default_rng(3)
        f = TensorField(2, rng.normal(size=(8, 8, 3)), 1.0)
        paths = render_field(f, tmp_path, "g")
        assert [p.name for p in paths] == ["g_11.pgm", "g_12.pgm",
                                           "g_22.pgm"]
        sidecar = (tmp_path / "g.txt").read_text()
        assert "component 12" in sidecar

    def test_idempotent_rerender(self, tmp_path):
        rng = np.random.default_rng(4)
        f = TensorField(0, rng.normal(size=(8, 8, 1)), 1.0)
        a = render_field(f, tmp_path / "a", "x")[0].read_bytes()
        b = render_field(f, tmp_path / "b", "x")[0].read_bytes()
        assert a == b

    def test_linear_range_map(self, tmp_path):
        f = TensorField(0, np.linspace(0, 1, 64).reshape(8, 8, 1), 1.0)
        paths = render_field(f, tmp_path, "ramp")
        pix = np.frombuffer(paths[0].read_bytes().split(b"65535\n", 1)[1],
                            dtype=">u2")
        assert pix.min() == 0 and pix.max() == 65535


@pytest.fixture()
def cache_env(tmp_path, monkeypatch):
    monkeypatch.setenv("TENSO_CACHE_DIR", str(tmp_path / "cache"))
    return tmp_path


class TestCLI:
    def write(self, tmp_path, text, name="run.cfg"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    def test_validate_flat_far_ring_passes(self, tmp_path, capsys):
        cfg = self.write(tmp_path, "ring_radius = 100\nring_count = 4\n"
                         "time_min = 199\ntime_max = 201\ntime_count = 3\n")
        assert main(["validate-flat", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_validate_flat_near_ring_fails(self, tmp_path, capsys):
        cfg = self.write(tmp_path, "ring_radius = 2\nring_count = 4\n"
                         "time_min = 3\ntime_max = 5\ntime_count = 3\n")
        assert main(["validate-flat", "--config", cfg]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_validate_flat_empty_constellation(self, tmp_path):
        cfg = self.write(tmp_path, "time_min = 3\ntime_max = 5\n"
                         "time_count = 3\n")
        assert main(["validate-flat", "--config", cfg]) == 2

    def test_missing_config_exit_2(self, tmp_path):
        assert main(["validate-flat", "--config",
                     str(tmp_path / "missing.cfg")]) == 2

    def test_simulate_normal_disk(self, tmp_path):
        cfg = self.write(tmp_path, "phantom = disk\ngrid_n = 129\n"
                         "s_count = 15\nphi_count = 8\n")
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        g = read_sinogram(out / "sinogram.tsino")
        pred = 2 * np.sqrt(np.clip(1 - g.s_grid ** 2, 0, None))
        # antialiased disk edge on a 129^2 grid limits pointwise accuracy
        assert np.max(np.abs(g.values - pred[:, None])) < 3e-2

    def test_simulate_deviatoric_parity(self, tmp_path):
        cfg = self.write(tmp_path, "phantom = deviatoric\nepsilon = 0.1\n"
                         "grid_n = 129\ns_count = 16\nphi_count = 12\n")
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        g = read_sinogram(out / "sinogram.tsino")
        assert g.rank == 2
        flipped = g.values[::-1][:, np.roll(np.arange(12), -6)]
        assert np.allclose(g.values, flipped, atol=1e-6)

    def test_simulate_noise_deterministic(self, tmp_path):
        cfg = self.write(tmp_path, "phantom = disk\ngrid_n = 65\n"
                         "s_count = 10\nphi_count = 6\n"
                         "noise_sigma = 0.1\nseed = 42\n")
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(b)]) == 0
        assert ((a / "sinogram.tsino").read_bytes()
                == (b / "sinogram.tsino").read_bytes())

    def test_reconstruct_zero_sinogram(self, tmp_path, cache_env):
        s, p = Sinogram.grids(31, 24)
        write_sinogram(tmp_path / "z.tsino",
                       Sinogram(s, p, np.zeros((31, 24)), rank=2))
        cfg = self.write(tmp_path, "n_rad = 6\nk_ang = 4\ns_count = 31\n"
                         "phi_count = 24\nrecon_grid_n = 257\n")
        out = tmp_path / "out"
        assert main(["reconstruct", "--config", cfg, "--sino",
                     str(tmp_path / "z.tsino"), "--out", str(out)]) == 0
        f = read_field(out / "field.tfld")
        assert np.allclose(f.values, 0.0)
        assert (out / "reconstruct_report.txt").exists()

    def test_reconstruct_grid_mismatch_exit_3(self, tmp_path, cache_env):
        s, p = Sinogram.grids(30, 24)
        write_sinogram(tmp_path / "z.tsino",
                       Sinogram(s, p, np.zeros((30, 24)), rank=2))
        cfg = self.write(tmp_path, "n_rad = 6\nk_ang = 4\ns_count = 31\n"
                         "phi_count = 24\n")
        assert main(["reconstruct", "--config", cfg, "--sino",
                     str(tmp_path / "z.tsino"),
                     "--out", str(tmp_path / "out")]) == 3

    def test_reconstruct_cache_speedup(self, tmp_path, cache_env):
        s, p = Sinogram.grids(41, 36)
        write_sinogram(tmp_path / "z.tsino",
                       Sinogram(s, p, np.zeros((41, 36)), rank=2))
        cfg = self.write(tmp_path, "n_rad = 10\nk_ang = 8\ns_count = 41\n"
                         "phi_count = 36\nrecon_grid_n = 257\n")
        argv = ["reconstruct", "--config", cfg, "--sino",
                str(tmp_path / "z.tsino"), "--out", str(tmp_path / "out")]
        t0 = time.time()
        assert main(argv) == 0
        cold = time.time() - t0
        t0 = time.time()
        assert main(argv) == 0
        warm = time.time() - t0
        assert warm < cold

    def test_decompose_pipeline(self, tmp_path):
        from tensortomo.phantoms import deviatoric_delta
        write_field(tmp_path / "f.tfld", deviatoric_delta(0.1, 129, 1.5))
        cfg = self.write(tmp_path, "pad_factor = 4\n")
        out = tmp_path / "out"
        assert main(["decompose", "--config", cfg, "--field",
                     str(tmp_path / "f.tfld"), "--out", str(out)]) == 0
        g = read_field(out / "G.tfld")
        dv = read_field(out / "dV.tfld")
        v = read_field(out / "V.tfld")
        assert g.rank == 2 and dv.rank == 2 and v.rank == 1
        report = (out / "decompose_report.txt").read_text()
        assert "divergence_residual_relative" in report

    def test_decompose_padding_failure_exit_4(self, tmp_path):
        f = TensorField(2, np.ones((33, 33, 3)), 1.0)
        write_field(tmp_path / "f.tfld", f)
        cfg = self.write(tmp_path, "pad_factor = 4\n")
        assert main(["decompose", "--config", cfg, "--field",
                     str(tmp_path / "f.tfld"),
                     "--out", str(tmp_path / "out")]) == 4

    def test_render_cli(self, tmp_path):
        rng = np.random.default_rng(6)
        write_field(tmp_path / "f.tfld",
                    TensorField(2, rng.normal(size=(9, 9, 3)), 1.0))
        out = tmp_path / "img"
        assert main(["render", "--field", str(tmp_path / "f.tfld"),
                     "--out", str(out)]) == 0
        assert sorted(p.name for p in out.glob("*.pgm")) == [
            "f_11.pgm", "f_12.pgm", "f_22.pgm"]
