import csv
import json
import os

import pytest

from fragsim.cli import main
from fragsim.experiments import TRACE_COLUMNS


def write_config(tmp_path, **kw):
    cfg = {
        "model": {"family": "uniform_binary", "params": {}},
        "eta_grid": [2**-4, 2**-6, 2**-8],
        "replicas": 24,
        "master_seed": 31337,
        "functionals": [
            {"kind": "empirical", "f": {"name": "power", "q": 1.0}},
            {"kind": "lambda", "p": "p_star"},
        ],
    }
    cfg.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


class TestPhiAndMalthus:
    def test_phi_uniform(self, capsys):
        assert main(["phi", "--family", "uniform_binary", "--p", "1"]) == 0
        out = capsys.readouterr().out.strip()
        assert out.startswith("0.333333")

    def test_malthus_dirac(self, capsys):
        rc = main(["malthus", "--family", "dirac_binary",
                   "--b", "0.4", "--b2", "0.4"])
        assert rc == 0
        out = capsys.readouterr().out.strip()
        assert out.startswith("-0.2435")

    def test_missing_family_params(self, capsys):
        rc = main(["phi", "--family", "dirac_binary", "--p", "0.5"])
        assert rc == 2

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["phi", "--family", "uniform_binary"])  # --p missing
        assert exc.value.code == 2


class TestSimulate:
    def test_writes_state_and_events(self, tmp_path, capsys):
        state_csv = tmp_path / "state.csv"
        events = tmp_path / "events.jsonl"
        rc = main(["simulate", "--family", "uniform_binary", "--eta", "0.05",
                   "--seed", "7", "--state-csv", str(state_csv),
                   "--dump-events", str(events)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "sum_lambda=1" in out
        assert state_csv.read_text().startswith("k,lambda_k")
        first = json.loads(events.read_text().splitlines()[0])
        assert first["parent_mass"] == 1.0


class TestVerify:
    def test_missing_config_is_usage_error(self, capsys):
        assert main(["verify", "--config", "does-not-exist.json"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_bad_config_shows_schema_hint(self, tmp_path, capsys):
        cfg = write_config(tmp_path, bogus_key=1)
        assert main(["verify", "--config", cfg]) == 2
        assert "expected config shape" in capsys.readouterr().err

    def test_full_run_outputs(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "report.json"
        trace = tmp_path / "trace.csv"
        figs = tmp_path / "figs"
        rc = main(["verify", "--config", cfg, "--out", str(out),
                   "--csv", str(trace), "--figdir", str(figs)])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "verdict: PASS" in printed
        report = json.loads(out.read_text())
        assert report["passed"] is True
        with open(trace) as fh:
            rows = list(csv.DictReader(fh))
        assert tuple(rows[0].keys()) == TRACE_COLUMNS
        assert len(rows) == 24 * 3 * 2
        pngs = [f for f in os.listdir(figs) if f.endswith(".png")]
        assert len(pngs) == 2

    def test_round_trip_from_embedded_config(self, tmp_path):
        cfg = write_config(tmp_path)
        out1 = tmp_path / "r1.json"
        assert main(["verify", "--config", cfg, "--out", str(out1)]) == 0
        embedded = json.loads(out1.read_text())["config"]
        cfg2 = tmp_path / "embedded.json"
        cfg2.write_text(json.dumps(embedded))
        out2 = tmp_path / "r2.json"
        assert main(["verify", "--config", str(cfg2), "--out",
                     str(out2)]) == 0
        a = json.loads(out1.read_text())
        b = json.loads(out2.read_text())
        a.pop("runtime_seconds")
        b.pop("runtime_seconds")
        assert a == b

    def test_override_applies_and_bad_paths_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "r.json"
        rc = main(["verify", "--config", cfg, "--out", str(out),
                   "--set", "replicas=8"])
        assert rc == 0
        assert json.loads(out.read_text())["config"]["replicas"] == 8
        assert main(["verify", "--config", cfg,
                     "--set", "nope.deep=1"]) == 2

    def test_failing_verdict_exit_one(self, tmp_path):
        # the finite-threshold energy mean resolves below the limit at this
        # replica count, so the in-mean verdict fails by design
        cfg = write_config(tmp_path, functionals=[
            {"kind": "energy", "psi": {"name": "const"}, "p": -0.5}],
            replicas=128)
        assert main(["verify", "--config", cfg]) == 1


class TestLimitsCommand:
    def test_emits_values(self, tmp_path, capsys):
        cfg = write_config(tmp_path, functionals=[
            {"kind": "energy", "psi": {"name": "const"}, "p": -0.5},
            {"kind": "empirical", "f": {"name": "power", "q": 1.0}},
        ])
        out = tmp_path / "limits.json"
        assert main(["limits", "--config", cfg, "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        vals = {e["theorem"]: e["value"] for e in payload["limits"]}
        assert vals["energy"] == pytest.approx(4.0, abs=1e-9)
        assert vals["empirical"] == pytest.approx(2.0 / 3.0, abs=1e-7)
        for e in payload["limits"]:
            assert {"functional", "theorem", "value", "method",
                    "error_estimate"} <= set(e)


class TestRenewalCommand:
    def test_outputs(self, tmp_path, capsys):
        cfg = tmp_path / "ren.json"
        cfg.write_text(json.dumps({
            "model": {"family": "uniform_binary", "params": {}},
            "characteristic": {"kind": "energy", "psi": {"name": "const"},
                               "p": -0.5},
            "t_max": 6.0, "h": 0.02, "mc_budget": 1500, "seed": 2,
        }))
        out = tmp_path / "ren_out.json"
        table = tmp_path / "ren.csv"
        figs = tmp_path / "figs"
        rc = main(["renewal", "--config", str(cfg), "--out", str(out),
                   "--csv", str(table), "--figdir", str(figs)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["n_paths"] == 1500
        assert payload["theorem_constant"] == pytest.approx(4.0, abs=1e-8)
        with open(table) as fh:
            header = fh.readline().strip().split(",")
        assert header == ["t", "g", "g_se", "f_hat", "rho"]
        assert os.path.exists(figs / "renewal.png")

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "ren.json"
        cfg.write_text(json.dumps({"model": {"family": "uniform_binary"},
                                   "who": 1}))
        assert main(["renewal", "--config", str(cfg)]) == 2


class TestSweepCommand:
    def test_beta_sweep(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            model={"family": "beta_binary", "params": {"gamma": 0.5},
                   "eps": 1e-2},
            eta_grid=[2**-4, 2**-6],
            replicas=32,
            functionals=[{"kind": "energy",
                          "psi": {"name": "excess_power", "q": 0.75},
                          "p": -0.5}])
        out = tmp_path / "sweep.json"
        figs = tmp_path / "figs"
        rc = main(["sweep", "--config", cfg, "--eps", "0.02,0.01",
                   "--out", str(out), "--figdir", str(figs)])
        payload = json.loads(out.read_text())
        assert len(payload["runs"]) == 2
        assert os.path.exists(figs / "sweep.png")
        assert rc in (0, 1)
        assert payload["passed"] == (rc == 0)
