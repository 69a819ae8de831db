import json

import pytest

from morsegraph.cli import main
from morsegraph.config import parse_config
from morsegraph.errors import ConfigError
from morsegraph.runner import run


def minimal_config(**extra):
    doc = {
        "id": "minimal",
        "graph": {"generator": "half_line", "length": 20},
        "potential": {"family": "zero"},
        "operations": ["morse"],
    }
    doc.update(extra)
    return doc


class TestParseConfig:
    def test_minimal_valid_with_defaults(self):
        cfg = parse_config(minimal_config())
        assert cfg.scenario_id == "minimal"
        assert cfg.operations == ("morse",)
        assert cfg.tolerances["zero"] == 1e-8
        assert cfg.seed is None

    def test_accepts_json_text(self):
        cfg = parse_config(json.dumps(minimal_config()))
        assert cfg.operations == ("morse",)

    def test_unknown_operation_names_field(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_config(operations=["spectra"]))
        assert exc.value.path == "operations[0]"

    def test_decreasing_radii_is_nestedness_error(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_config(exhaustion={"center": 0, "radii": [4, 2]}))
        assert exc.value.path == "exhaustion.radii"
        assert "nested" in str(exc.value)

    def test_empty_operations(self):
        with pytest.raises(ConfigError):
            parse_config(minimal_config(operations=[]))

    def test_unknown_tolerance(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_config(tolerances={"bogus": 1.0}))
        assert exc.value.path == "tolerances.bogus"

    def test_unknown_generator(self):
        doc = minimal_config()
        doc["graph"] = {"generator": "mesh"}
        with pytest.raises(ConfigError) as exc:
            parse_config(doc)
        assert exc.value.path == "graph.generator"

    def test_seed_required_for_random_profile(self):
        doc = minimal_config()
        doc["graph"] = {
            "generator": "half_line", "length": 10,
            "w_profile": {"kind": "uniform", "low": 0.9, "high": 1.1},
        }
        with pytest.raises(ConfigError) as exc:
            parse_config(doc)
        assert exc.value.path == "seed"
        doc["seed"] = 7
        assert parse_config(doc).seed == 7


class TestRun:
    def test_morse_on_p2_well(self):
        cfg = parse_config({
            "id": "p2",
            "graph": {"generator": "half_line", "length": 1},
            "potential": {"family": "constant_well", "depth": 2.0, "center": 0},
            "operations": ["morse"],
        })
        report = run(cfg)
        assert report.results["morse"]["morse_index"] == 1
        assert report.ok

    def test_parabolicity_dichotomy_via_configs(self):
        base = {
            "potential": {"family": "zero"},
            "operations": ["parabolicity"],
        }
        cfg1 = parse_config({
            "id": "z1", **base,
            "graph": {"generator": "lattice", "dimension": 1, "radius": 90},
            "exhaustion": {"center": [0], "radii": [20, 30, 40, 50, 60]},
        })
        cfg3 = parse_config({
            "id": "z3", **base,
            "graph": {"generator": "lattice", "dimension": 3, "radius": 9},
            "exhaustion": {"center": [0, 0, 0], "radii": [3, 4, 5, 6, 7, 8]},
        })
        assert run(cfg1).results["parabolicity"]["verdict"] == "parabolic_suspected"
        assert run(cfg3).results["parabolicity"]["verdict"] == "nonparabolic"

    def test_pipeline_halfline_all_verdicts(self):
        cfg = parse_config({
            "id": "halfline-well",
            "graph": {"generator": "half_line", "length": 60},
            "potential": {"family": "constant_well", "depth": 8.0, "center": 0, "radius": 4},
            "exhaustion": {"center": 0, "radii": [4, 8, 16, 40]},
            "operations": ["pipeline"],
        })
        report = run(cfg)
        frag = report.results["pipeline"]
        assert frag["ok"] is True
        assert frag["morse_index"] == 5
        assert report.ok

    def test_operation_error_is_recorded_not_raised(self):
        cfg = parse_config({
            "id": "broken",
            "graph": {"generator": "half_line", "length": 10},
            "potential": {"family": "zero"},
            "operations": ["green"],  # green needs an exhaustion
        })
        report = run(cfg)
        assert "error" in report.results["green"]
        assert not report.ok

    def test_echo_fidelity(self):
        cfg = parse_config({
            "id": "echo",
            "graph": {"generator": "half_line", "length": 30},
            "potential": {"family": "constant_well", "depth": 3.0, "center": 0, "radius": 2},
            "operations": ["morse", "bs"],
            "seed": 11,
        })
        report = run(cfg)
        again = run(parse_config(report.config_echo))
        assert json.dumps(report.as_json(normalize=True), sort_keys=True) == \
            json.dumps(again.as_json(normalize=True), sort_keys=True)

    def test_vertex_existence_checked_at_materialization(self):
        cfg = parse_config({
            "id": "bad-center",
            "graph": {"generator": "half_line", "length": 5},
            "potential": {"family": "constant_well", "depth": 1.0, "center": 99},
            "operations": ["morse"],
        })
        with pytest.raises(ConfigError) as exc:
            run(cfg)
        assert exc.value.path == "potential.center"

    def test_graph_file_roundtrip(self, tmp_path):
        doc = {
            "vertices": [{"id": "a", "mu": 1.0, "W": 1.0}, {"id": "b", "mu": 1.0, "W": 0.0}],
            "edges": [{"u": "a", "v": "b", "w": 1.0}],
        }
        gpath = tmp_path / "g.json"
        gpath.write_text(json.dumps(doc))
        ppath = tmp_path / "v.json"
        ppath.write_text(json.dumps({"values": {"a": -3.0}}))
        cfg = parse_config({
            "id": "file-graph",
            "graph": {"file": str(gpath)},
            "potential": {"file": str(ppath)},
            "operations": ["morse"],
        })
        report = run(cfg)
        assert report.results["morse"]["morse_index"] == 1

    def test_seeded_profiles_are_reproducible(self):
        doc = {
            "id": "seeded",
            "seed": 123,
            "graph": {
                "generator": "half_line", "length": 25,
                "mu_profile": {"kind": "uniform", "low": 0.5, "high": 2.0},
                "w_profile": {"kind": "uniform", "low": 0.5, "high": 2.0},
            },
            "potential": {"family": "constant_well", "depth": 2.0, "center": 0, "radius": 3},
            "operations": ["morse", "bs"],
        }
        a = run(parse_config(doc)).as_json(normalize=True)
        b = run(parse_config(doc)).as_json(normalize=True)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


class TestCLI:
    def write(self, tmp_path, doc, name="cfg.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)

    def test_single_op_exit_code(self, tmp_path):
        path = self.write(tmp_path, minimal_config())
        out = tmp_path / "report.json"
        assert main(["morse", "--config", path, "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["results"]["morse"]["morse_index"] == 0

    def test_subcommand_overrides_operations(self, tmp_path):
        doc = minimal_config(operations=["bs"])
        path = self.write(tmp_path, doc)
        out = tmp_path / "report.json"
        main(["morse", "--config", path, "--out", str(out)])
        assert "morse" in json.loads(out.read_text())["results"]

    def test_tol_override_is_reported(self, tmp_path):
        path = self.write(tmp_path, minimal_config())
        out = tmp_path / "report.json"
        main(["morse", "--config", path, "--out", str(out), "--tol", "zero=1e-6"])
        assert json.loads(out.read_text())["tolerances"]["zero"] == 1e-6

    def test_csv_sidecars(self, tmp_path):
        doc = {
            "id": "sweep",
            "graph": {"generator": "lattice", "dimension": 1, "radius": 60},
            "potential": {"family": "zero"},
            "exhaustion": {"center": [0], "radii": [10, 20, 30, 40]},
            "operations": ["parabolicity"],
        }
        path = self.write(tmp_path, doc)
        csvdir = tmp_path / "csv"
        out = tmp_path / "report.json"
        main(["parabolicity", "--config", path, "--out", str(out), "--csv", str(csvdir)])
        assert (csvdir / "sweep_levels.csv").exists()

    def test_batch_determinism(self, tmp_path):
        batch = {
            "scenarios": [
                {
                    "id": "a",
                    "seed": 5,
                    "graph": {"generator": "half_line", "length": 30,
                              "w_profile": {"kind": "uniform", "low": 0.8, "high": 1.2}},
                    "potential": {"family": "constant_well", "depth": 4.0,
                                  "center": 0, "radius": 3},
                    "operations": ["morse", "bs"],
                },
                {
                    "id": "b",
                    "graph": {"generator": "half_line", "length": 40},
                    "potential": {"family": "power_decay", "amplitude": 2.0, "center": 0},
                    "operations": ["morse"],
                },
            ]
        }
        path = self.write(tmp_path, batch, "batch.json")
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        code1 = main(["batch", "--config", path, "--out", str(out1), "--normalize"])
        code2 = main(["batch", "--config", path, "--out", str(out2), "--normalize"])
        assert code1 == code2 == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_batch_parallel_matches_serial(self, tmp_path):
        batch = {
            "scenarios": [
                minimal_config() | {"id": "s1"},
                minimal_config() | {"id": "s2",
                                    "potential": {"family": "constant_well",
                                                  "depth": 1.0, "center": 0, "radius": 2}},
            ]
        }
        path = self.write(tmp_path, batch, "batch.json")
        out1, out2 = tmp_path / "serial.json", tmp_path / "par.json"
        main(["batch", "--config", path, "--out", str(out1), "--normalize"])
        main(["batch", "--config", path, "--out", str(out2), "--normalize", "--jobs", "2"])
        assert out1.read_bytes() == out2.read_bytes()

    def test_failing_verdict_nonzero_exit(self, tmp_path):
        # uniform negative potential: no stable exterior, pipeline verdicts fail
        doc = {
            "id": "unstable",
            "graph": {"generator": "half_line", "length": 60},
            "potential": {"family": "constant_well", "depth": 0.5, "center": 0, "radius": 60},
            "exhaustion": {"center": 0, "radii": [5, 10, 20, 40]},
            "operations": ["pipeline"],
        }
        path = self.write(tmp_path, doc)
        out = tmp_path / "report.json"
        code = main(["pipeline", "--config", path, "--out", str(out)])
        assert code == 1
