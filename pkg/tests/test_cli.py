import json
import math

import pytest

from asepcross.cli import dumps_record, loads_record, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    return code, out


class TestSerialization:
    def test_round_trip_is_byte_stable(self):
        record = {
            "command": "green",
            "value": 0.1839397205857212,
            "est_error": 1e-12,
            "input": {"t": 1.0, "mu": [0, 1]},
            "flag": True,
            "note": None,
        }
        line = dumps_record(record)
        parsed = loads_record(line)
        assert dumps_record(parsed) == line

    def test_sorted_keys(self):
        assert dumps_record({"b": 1, "a": 2}) == '{"a":2,"b":1}'

    def test_seventeen_digit_floats(self):
        line = dumps_record({"x": 1.0 / 3.0})
        assert line == '{"x":0.33333333333333331}'
        assert json.loads(line)["x"] == 1.0 / 3.0


class TestGreenCommand:
    def test_identity_query_uses_laurent(self, capsys):
        code, out = run_cli(
            capsys, "green", "--json",
            '{"kind":"two_species","mu":[0],"p0":[],"nu":[0],"p":[],"t":0.0}',
        )
        assert code == 0
        rec = loads_record(out[-1])
        assert rec["value"] == 1.0
        assert rec["method"] == "laurent"

    def test_poisson_query(self, capsys):
        code, out = run_cli(
            capsys, "green", "--json",
            '{"kind":"two_species","mu":[0],"p0":[],"nu":[2],"p":[],"t":1.0}',
        )
        rec = loads_record(out[-1])
        assert abs(rec["value"] - math.exp(-1) / 2) < 1e-12

    def test_rainbow_payload(self, capsys):
        code, out = run_cli(
            capsys, "green", "--json",
            '{"kind":"rainbow_asep","mu":[1,0],"nu":[0,1],"q":0.5,"t":0.0}',
        )
        assert code == 0
        rec = loads_record(out[-1])
        assert abs(rec["value"]) < 1e-10

    def test_golden_instance_from_config_file(self, capsys, tmp_path):
        golden = 0.06766764161830637
        cfg = tmp_path / "query.json"
        cfg.write_text(
            '{"kind":"two_species","mu":[0,1],"p0":[1],"nu":[1,2],"p":[2],"t":1.0}'
        )
        code, out = run_cli(capsys, "green", "--config", str(cfg))
        assert code == 0
        assert abs(loads_record(out[-1])["value"] - golden) < 1e-9


class TestCrossingCommand:
    def test_t0_crossed_target_is_zero(self, capsys):
        code, out = run_cli(
            capsys, "crossing", "--json",
            '{"kind":"tasep_blocks","mu_blocks":[[0],[-1]],'
            '"lambda_blocks":[[2],[3]],"t":0.0}',
        )
        assert code == 0
        assert abs(loads_record(out[-1])["value"]) < 1e-12

    def test_blocks_match_python_api(self, capsys):
        from asepcross.formulas import CrossingQuery, block_crossing
        from conftest import make_blocks

        code, out = run_cli(
            capsys, "crossing", "--json",
            '{"kind":"blocks","mu_blocks":[[1],[0]],'
            '"lambda_blocks":[[2],[3]],"q":0.5,"t":1.0}',
        )
        rec = loads_record(out[-1])
        query = CrossingQuery(
            make_blocks([[1], [0]], "initial"),
            make_blocks([[2], [3]], "final"),
            0.5,
            1.0,
        )
        assert abs(rec["value"] - block_crossing(query)) < 1e-12


class TestWallCommand:
    def test_infeasible_wall_is_zero(self, capsys):
        code, out = run_cli(
            capsys, "wall", "--json",
            '{"form":"step","mu":[-1,0],"m":1,"s1":0,"s2":0,"t":1.0}',
        )
        assert code == 0
        assert loads_record(out[-1])["value"] == 0.0

    def test_rho_one_matches_step(self, capsys):
        _, out1 = run_cli(
            capsys, "wall", "--json",
            '{"form":"bernoulli","s1":-3,"s2":2,"rho":1.0,"n":2,"m":1,"t":2.0}',
        )
        _, out2 = run_cli(
            capsys, "wall", "--json",
            '{"form":"step","mu":[-1,0],"m":1,"s1":-3,"s2":2,"t":2.0}',
        )
        v1 = loads_record(out1[-1])["value"]
        v2 = loads_record(out2[-1])["value"]
        assert abs(v1 - v2) < 1e-9

    def test_gamma_form(self, capsys):
        _, out = run_cli(
            capsys, "wall", "--json", '{"form":"gamma","n":1,"s":2,"t":1.0}'
        )
        assert abs(loads_record(out[-1])["value"] - (1 - math.exp(-1))) < 1e-12


class TestSimulateCommand:
    def test_t0_returns_initial_state(self, capsys):
        code, out = run_cli(
            capsys, "simulate", "--json",
            '{"task":"run","positions":[0,2],"species":[2,1],"t":0.0}',
        )
        rec = loads_record(out[-1])
        assert rec["result"] == {"positions": [0, 2], "species": [2, 1]}

    def test_fixed_seed_reproducible(self, capsys):
        argv = (
            "simulate", "--json",
            '{"task":"estimate","positions":[0],"species":[1],"t":1.0,'
            '"samples":20000,"target_positions":[1],"target_species":[1]}',
            "--seed", "42",
        )
        _, out1 = run_cli(capsys, *argv)
        _, out2 = run_cli(capsys, *argv)
        rec1, rec2 = loads_record(out1[-1]), loads_record(out2[-1])
        rec1.pop("wall_ms")
        rec2.pop("wall_ms")
        assert rec1 == rec2

    def test_thread_count_invariance(self, capsys):
        base = (
            "simulate", "--json",
            '{"task":"estimate_wall","rho":0.5,"n":2,"m":1,"s1":-3,"s2":2,'
            '"t":2.0,"samples":30000}',
            "--seed", "7",
        )
        _, out1 = run_cli(capsys, *base, "--threads", "1")
        _, out2 = run_cli(capsys, *base, "--threads", "2")
        rec1, rec2 = loads_record(out1[-1]), loads_record(out2[-1])
        rec1.pop("wall_ms")
        rec2.pop("wall_ms")
        assert rec1 == rec2

    def test_budget_caps_samples(self, capsys):
        code, out = run_cli(
            capsys, "simulate", "--json",
            '{"task":"estimate","positions":[0],"species":[1],"t":1.0,'
            '"samples":50000,"target_positions":[1],"target_species":[1]}',
            "--budget", "5000",
        )
        assert loads_record(out[-1])["samples"] == 5000


class TestVerifyCommand:
    def test_vertex_suite_passes(self, capsys):
        code, out = run_cli(
            capsys, "verify", "--json",
            '{"suite":"vertex","negative_control":true}',
        )
        assert code == 0
        rec = loads_record(out[-1])
        assert rec["all_passed"] is True
        names = [c["name"] for c in rec["checks"]]
        assert "perturbation_control_breaks_sums" in names


class TestExitCodes:
    def test_usage_error_without_payload(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["green"])
        assert exc.value.code == 2

    def test_unknown_verify_suite_is_usage_error(self, capsys):
        code, _ = run_cli(capsys, "verify", "--json", '{"suite":"bogus"}')
        assert code == 2

    def test_validation_error(self, capsys):
        code, _ = run_cli(
            capsys, "green", "--json",
            '{"kind":"two_species","mu":[1,0],"p0":[],"nu":[0,1],"p":[],"t":1.0}',
        )
        assert code == 2

    def test_resource_cap(self, capsys):
        code, _ = run_cli(
            capsys, "green", "--json",
            '{"kind":"two_species","mu":[0,1,2,3,4,5],"p0":[],'
            '"nu":[1,2,3,4,5,6],"p":[],"t":1.0,"method":"quadrature"}',
        )
        assert code == 4

    def test_accuracy_failure_under_tiny_budget(self, capsys):
        code, _ = run_cli(
            capsys, "green", "--json",
            '{"kind":"two_species","mu":[0,1],"p0":[1],"nu":[1,2],"p":[2],"t":1.0}',
            "--budget", "64",
        )
        assert code == 3


class TestOutputs:
    def test_out_file_appends(self, capsys, tmp_path):
        out_path = tmp_path / "records.jsonl"
        argv = (
            "green", "--json",
            '{"kind":"two_species","mu":[0],"p0":[],"nu":[1],"p":[],"t":1.0}',
            "--out", str(out_path),
        )
        run_cli(capsys, *argv)
        run_cli(capsys, *argv)
        lines = out_path.read_text().strip().splitlines()
        assert len(lines) == 2
        assert loads_record(lines[0])["command"] == "green"

    def test_csv_export(self, capsys, tmp_path):
        csv_path = tmp_path / "table.csv"
        run_cli(
            capsys, "green", "--json",
            '{"kind":"two_species","mu":[0],"p0":[],"nu":[1],"p":[],"t":1.0}',
            "--csv", str(csv_path),
        )
        content = csv_path.read_text().splitlines()
        assert content[0].startswith("command,")
        assert content[1].startswith("green,")
