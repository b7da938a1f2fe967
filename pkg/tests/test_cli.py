import json

import numpy as np
import pytest

from eulerchannel.cli import (
    ConfigError,
    ExperimentConfig,
    export_table,
    main,
    parse_vorticity,
    run_theorem1_matrix,
)
from eulerchannel.equilibrium import AffineVorticity, ConstantVorticity, ExponentialVorticity


@pytest.fixture()
def small_config(tmp_path):
    """Coarse, fast configuration for orchestration tests."""
    return ExperimentConfig(
        nx=64, ny=33, eps=0.1, eps_nontrivial=0.004, tol=1e-9,
        n_centerline=12, seed_grid=[8, 7],
        carleman_nx=32, carleman_ny=17,
        out_dir=str(tmp_path / "out"),
    )


class TestConfig:
    def test_round_trip_lossless(self, tmp_path):
        cfg = ExperimentConfig(eps=0.1234567890123456789, tol=3e-11)
        p = tmp_path / "cfg.json"
        cfg.to_file(p)
        back = ExperimentConfig.from_file(p)
        assert back.to_dict() == cfg.to_dict()
        # a second serialization is byte-identical
        p2 = tmp_path / "cfg2.json"
        back.to_file(p2)
        assert p.read_bytes() == p2.read_bytes()

    def test_rejects_unknown_fields(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_dict({"no_such_field": 1})

    def test_rejects_even_ny(self):
        with pytest.raises(ConfigError, match="odd"):
            ExperimentConfig.from_dict({"ny": 64})

    def test_rejects_tall_wall(self):
        with pytest.raises(ConfigError, match="eps"):
            ExperimentConfig.from_dict({"eps": 1.5})

    def test_rejects_bad_vorticity(self):
        with pytest.raises(ConfigError, match="vorticity"):
            ExperimentConfig.from_dict({"vorticity": {"kind": "cubic"}})

    def test_parse_vorticity_kinds(self):
        assert parse_vorticity({"kind": "constant", "value": -2.0}) == ConstantVorticity(-2.0)
        assert parse_vorticity({"kind": "affine", "slope": -1.0, "offset": 0.5}) == \
            AffineVorticity(-1.0, 0.5)
        assert parse_vorticity({"kind": "exponential", "scale": 2.0}) == ExponentialVorticity(2.0)

    def test_inadmissible_affine_warns(self, capsys):
        ExperimentConfig.from_dict({"vorticity": {"kind": "affine", "slope": -5.0}})
        assert "outside the stable ranges" in capsys.readouterr().err

    def test_inadmissible_affine_errors_when_asked(self):
        with pytest.raises(ConfigError, match="outside the stable ranges"):
            ExperimentConfig.from_dict(
                {"vorticity": {"kind": "affine", "slope": -5.0}, "admissibility": "error"}
            )

    def test_bad_config_file_exit_code(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{not json", encoding="utf-8")
        assert main(["solve", "--config", str(p)]) == 1


class TestExportTable:
    def test_header_only_for_empty(self, tmp_path):
        p = export_table([], tmp_path / "t.csv", columns=("a", "b"))
        assert p.read_text() == "a,b\n"

    def test_full_precision_floats(self, tmp_path):
        value = 0.1 + 0.2  # not representable prettily
        p = export_table([(value,)], tmp_path / "t.csv", columns=("v",))
        text = p.read_text().splitlines()[1]
        assert float(text) == value

    def test_preamble_and_bools(self, tmp_path):
        p = export_table([{"a": True, "b": 3}], tmp_path / "t.csv",
                         columns=("a", "b"), preamble=("note=1",))
        assert p.read_text() == "# note=1\na,b\ntrue,3\n"


class TestSubcommands:
    def test_eigen_writes_sweep(self, tmp_path):
        cfg = ExperimentConfig(nx=32, ny=17, eps_list=[0.0, 0.1], tol=1e-8,
                               out_dir=str(tmp_path))
        p = tmp_path / "cfg.json"
        cfg.to_file(p)
        assert main(["eigen", "--config", str(p)]) == 0
        lines = (tmp_path / "eigen.csv").read_text().splitlines()
        assert lines[0] == "eps,lambda1,residual,iterations"
        assert len(lines) == 3
        lam0 = float(lines[1].split(",")[1])
        assert lam0 == pytest.approx(np.pi**2 / 4, abs=0.01)

    def test_solve_exports_projection_header(self, tmp_path):
        cfg = ExperimentConfig(nx=32, ny=17, eps=0.0, gap=2.02,
                               vorticity={"kind": "constant", "value": -1.0},
                               out_dir=str(tmp_path))
        p = tmp_path / "cfg.json"
        cfg.to_file(p)
        assert main(["solve", "--config", str(p)]) == 0
        text = (tmp_path / "solution.csv").read_text()
        first = text.splitlines()[0]
        assert first.startswith("# homology_projection=")
        assert abs(float(first.split("=")[1])) > 1.0
        assert text.splitlines()[1] == "x,y,psi,u1,u2,omega"

    def test_topology_report(self, tmp_path):
        cfg = ExperimentConfig(nx=64, ny=33, eps=0.1, tol=1e-9,
                               n_centerline=8, seed_grid=[6, 5],
                               out_dir=str(tmp_path))
        p = tmp_path / "cfg.json"
        cfg.to_file(p)
        assert main(["topology", "--config", str(p)]) == 0
        report = (tmp_path / "topology_report.txt").read_text()
        assert "islands: 1" in report
        assert (tmp_path / "topology_orbits.csv").exists()
        assert (tmp_path / "topology.svg").read_text().startswith("<svg")

    def test_carleman_tables(self, tmp_path):
        cfg = ExperimentConfig(carleman_nx=32, carleman_ny=17, out_dir=str(tmp_path))
        p = tmp_path / "cfg.json"
        cfg.to_file(p)
        assert main(["carleman", "--config", str(p)]) == 0
        lines = (tmp_path / "carleman_sweep.csv").read_text().splitlines()
        assert lines[0].startswith("strength,lhs,scaled_mass,ratio,log_lhs")
        ratios = [float(l.split(",")[3]) for l in lines[1:]]
        assert min(ratios) > 0
        ident = (tmp_path / "carleman_identity.csv").read_text().splitlines()
        assert float(ident[1].split(",")[1]) == pytest.approx(0.0, abs=1e-12)

    def test_render_writes_svg(self, tmp_path):
        cfg = ExperimentConfig(nx=32, ny=17, eps=0.0, n_centerline=6, seed_grid=[4, 3],
                               out_dir=str(tmp_path))
        p = tmp_path / "cfg.json"
        cfg.to_file(p)
        assert main(["render", "--config", str(p)]) == 0
        svg = (tmp_path / "flow.svg").read_text()
        assert svg.startswith("<svg") and "polyline" in svg and svg.endswith("</svg>\n")


class TestMatrix:
    def test_four_cells_and_manifest(self, small_config, tmp_path):
        manifest = run_theorem1_matrix(small_config)
        assert [c["cell"] for c in manifest.cells] == [
            "flat_trivial", "curved_trivial", "flat_nontrivial", "curved_nontrivial"]
        assert manifest.failed_cells == []
        by_name = {c["cell"]: c for c in manifest.cells}
        assert by_name["flat_trivial"]["islands"] == 0
        assert by_name["curved_trivial"]["islands"] >= 1
        assert by_name["flat_nontrivial"]["islands"] == 0
        assert abs(by_name["flat_nontrivial"]["projection"]) > 1.0
        assert by_name["flat_trivial"]["symmetry_residual"] < 1e-6
        # every listed output exists with its checksum
        out = small_config.out_dir
        import hashlib, os
        for rel, digest in manifest.outputs.items():
            data = open(os.path.join(out, rel), "rb").read()
            assert hashlib.sha256(data).hexdigest() == digest
        assert (tmp_path / "out" / "manifest.json").exists()

    def test_workers_do_not_change_outputs(self, tmp_path):
        cfgs = []
        for name, workers in (("a", 1), ("b", 3)):
            cfgs.append(ExperimentConfig(
                nx=64, ny=33, eps=0.1, eps_nontrivial=0.004, tol=1e-9,
                n_centerline=8, seed_grid=[6, 5], carleman_nx=32, carleman_ny=17,
                out_dir=str(tmp_path / name), workers=workers))
        m1 = run_theorem1_matrix(cfgs[0])
        m2 = run_theorem1_matrix(cfgs[1])
        assert m1.outputs == m2.outputs

    def test_cell_failure_is_partial(self, tmp_path, monkeypatch):
        cfg = ExperimentConfig(nx=64, ny=33, tol=1e-9, n_centerline=8, seed_grid=[6, 5],
                               out_dir=str(tmp_path / "out"))
        import eulerchannel.cli as cli_mod

        original = cli_mod._solve_cell

        def sabotage(config, eps, gap, vorticity):
            if eps == 0.0 and gap == 0.0:
                raise RuntimeError("synthetic cell failure")
            return original(config, eps, gap, vorticity)

        monkeypatch.setattr(cli_mod, "_solve_cell", sabotage)
        manifest = run_theorem1_matrix(cfg)
        assert manifest.failed_cells == ["flat_trivial"]
        ok = [c for c in manifest.cells if c["status"] == "ok"]
        assert len(ok) == 3
