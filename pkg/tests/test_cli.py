import json

import numpy as np
import pytest

from greymatch import ParameterSet, REDUCED_FORM, solve_reduced, verhulst_spec
from greymatch.cli import main, read_timeseries_csv
from greymatch.datasets import SEWAGE_VALUES


def write_csv(path, times, values):
    with open(path, "w") as handle:
        handle.write("t,x1\n")
        for t, v in zip(times, values):
            handle.write(f"{t},{v}\n")


@pytest.fixture()
def sewage_csv(tmp_path):
    path = tmp_path / "sewage.csv"
    write_csv(path, range(1, 16), SEWAGE_VALUES)
    return str(path)


@pytest.fixture()
def verhulst_csv(tmp_path):
    spec = verhulst_spec()
    truth = ParameterSet([[1.2]], [[-0.5]], [0.4], form=REDUCED_FORM)
    times = np.arange(0.0, 4.0 + 1e-9, 0.05)
    traj = solve_reduced(spec, truth, times)
    path = tmp_path / "verhulst.csv"
    write_csv(path, times, traj.states[:, 0])
    return str(path)


class TestReadCsv:
    def test_round_trip(self, sewage_csv):
        ts = read_timeseries_csv(sewage_csv)
        assert ts.n == 15 and ts.d == 1
        assert ts.values[0, 0] == 83.00

    def test_missing_value_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x1\n1,2\n2,\n")
        from greymatch.cli import ParseError
        with pytest.raises(ParseError):
            read_timeseriescsv = read_timeseries_csv(str(path))

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,x1\n1,2\n")
        from greymatch.cli import ParseError
        with pytest.raises(ParseError):
            read_timeseries_csv(str(path))


class TestFitCommand:
    def test_matching_fit_recovers_truth(self, verhulst_csv, tmp_path):
        out = tmp_path / "out"
        code = main(["fit", verhulst_csv, "--model", "igvm",
                     "--method", "matching", "--out-dir", str(out)])
        assert code == 0
        doc = json.loads((out / "fit.json").read_text())
        assert doc["schema_version"] == 1
        assert abs(doc["parameters"]["a"] - 1.2) < 0.012
        assert abs(doc["parameters"]["b_1"] + 0.5) < 0.005
        assert abs(doc["parameters"]["eta_1"] - 0.4) < 0.004
        assert doc["method_tag"] == "integral_matching"
        assert "transformed" in doc
        report_lines = (out / "report.csv").read_text().splitlines()
        assert report_lines[0] == "t,actual_x1,fitted_x1,ape_x1,segment"
        assert len(report_lines) == 82
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["command"] == "fit"
        assert manifest["input"]["sha256"]

    def test_grey_fit(self, verhulst_csv, tmp_path):
        out = tmp_path / "grey"
        code = main(["fit", verhulst_csv, "--model", "igvm", "--method", "grey",
                     "--init-strategy", "fix_first", "--out-dir", str(out)])
        assert code == 0
        doc = json.loads((out / "fit.json").read_text())
        assert doc["method_tag"] == "grey_twostep"
        assert abs(doc["parameters"]["a"] - 1.2) < 0.05

    def test_split_and_gamma_search(self, sewage_csv, tmp_path):
        out = tmp_path / "search"
        code = main(["fit", sewage_csv, "--model", "ingbm", "--method", "matching",
                     "--gamma-search", "0.9,1.1,0.01", "--split", "11",
                     "--out-dir", str(out)])
        assert code == 0
        doc = json.loads((out / "fit.json").read_text())
        assert abs(doc["gamma_search"]["gamma_star"] - 1.0) < 1e-9
        assert doc["diagnostics"]["mape_test"] is not None

    def test_parse_error_exit_2(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x1\n1,one\n")
        assert main(["fit", str(path), "--model", "igvm",
                     "--out-dir", str(tmp_path / "o")]) == 2

    def test_singular_design_exit_3(self, tmp_path):
        path = tmp_path / "zeros.csv"
        write_csv(path, range(6), [0.0] * 6)
        out = tmp_path / "o3"
        assert main(["fit", str(path), "--model", "igvm",
                     "--out-dir", str(out)]) == 3
        doc = json.loads((out / "fit.json").read_text())
        assert doc["error"]["exit_code"] == 3
        assert doc["error"]["category"] == "SingularDesignError"

    def test_domain_error_exit_5(self, tmp_path):
        path = tmp_path / "neg.csv"
        write_csv(path, range(6), [-5.0, -4.0, -3.0, -2.0, -1.0, -0.5])
        assert main(["fit", str(path), "--model", "ingbm", "--gamma", "0.5",
                     "--out-dir", str(tmp_path / "o5")]) == 5

    def test_flag_consistency_exit_6(self, sewage_csv, tmp_path):
        out = str(tmp_path / "o6")
        assert main(["fit", sewage_csv, "--model", "igvm", "--gamma", "0.5",
                     "--out-dir", out]) == 6
        assert main(["fit", sewage_csv, "--model", "ingbm",
                     "--out-dir", out]) == 6
        assert main(["fit", sewage_csv, "--model", "igvm", "--method", "matching",
                     "--init-strategy", "fix_last", "--out-dir", out]) == 6


class TestForecastCommand:
    def test_round_trip(self, sewage_csv, tmp_path):
        out = tmp_path / "fit"
        assert main(["fit", sewage_csv, "--model", "ingbm", "--gamma-search",
                     "0.95,1.05,0.01", "--split", "11", "--out-dir", str(out)]) == 0
        fc_dir = tmp_path / "fc"
        assert main(["forecast", str(out / "fit.json"), "--horizon", "7",
                     "--out-dir", str(fc_dir)]) == 0
        lines = (fc_dir / "forecast.csv").read_text().splitlines()
        assert lines[0] == "t,x1,blown_up"
        assert len(lines) == 1 + 11 + 7
        last = float(lines[-1].split(",")[1])
        assert abs(last - 124.85) / 124.85 < 0.01

    def test_blow_up_exit_4_suppresses_output(self, tmp_path):
        # super-exponential input makes the fitted quadratic model diverge
        times = np.arange(1.0, 13.0)
        write_csv(tmp_path / "expl.csv", times, 0.05 * np.exp(0.9 * times))
        fit_dir = tmp_path / "fit"
        assert main(["fit", str(tmp_path / "expl.csv"), "--model", "poly:2",
                     "--out-dir", str(fit_dir)]) == 0
        fc_dir = tmp_path / "fc"
        assert main(["forecast", str(fit_dir / "fit.json"), "--horizon", "40",
                     "--out-dir", str(fc_dir)]) == 4
        assert not (fc_dir / "forecast.csv").exists()

    def test_malformed_fit_json(self, tmp_path):
        path = tmp_path / "fit.json"
        path.write_text("{not json")
        assert main(["forecast", str(path), "--horizon", "1",
                     "--out-dir", str(tmp_path)]) == 2


class TestMcCommand:
    def scenario_file(self, tmp_path, **overrides):
        doc = {"scenario_id": "tiny", "model": "verhulst", "T": 2.0, "h": 0.1,
               "noise_level": 0.10, "replications": 5, "seed": 7}
        doc.update(overrides)
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(doc))
        return str(path)

    def test_runs_and_writes_outputs(self, tmp_path):
        scenario = self.scenario_file(tmp_path)
        out = tmp_path / "mc"
        assert main(["mc", scenario, "--out-dir", str(out)]) == 0
        report = (out / "report.csv").read_text().splitlines()
        assert report[0] == "scenario_id,estimator,replication,name,value,status"
        summary = (out / "summary.csv").read_text().splitlines()
        assert summary[0].startswith("scenario_id,estimator,name,count,failures")

    def test_deterministic_across_workers(self, tmp_path, monkeypatch):
        scenario = self.scenario_file(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        monkeypatch.setenv("GREYMATCH_MC_WORKERS", "1")
        assert main(["mc", scenario, "--out-dir", str(out1)]) == 0
        monkeypatch.setenv("GREYMATCH_MC_WORKERS", "2")
        assert main(["mc", scenario, "--out-dir", str(out2)]) == 0
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()
        assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()

    def test_seed_changes_values_not_schema(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["mc", self.scenario_file(tmp_path, seed=1),
                     "--out-dir", str(out1)]) == 0
        assert main(["mc", self.scenario_file(tmp_path, seed=2),
                     "--out-dir", str(out2)]) == 0
        r1 = (out1 / "report.csv").read_text().splitlines()
        r2 = (out2 / "report.csv").read_text().splitlines()
        assert len(r1) == len(r2)
        assert r1 != r2
        cols1 = [",".join(line.split(",")[:4]) for line in r1]
        cols2 = [",".join(line.split(",")[:4]) for line in r2]
        assert cols1 == cols2

    def test_bundled_scenario_with_override(self, tmp_path):
        out = tmp_path / "sweep"
        assert main(["mc", "verhulst-n-sweep", "--replications", "2",
                     "--out-dir", str(out)]) == 0
        lines = (out / "report.csv").read_text().splitlines()
        ids = {line.split(",")[0] for line in lines[1:]}
        assert ids == {"verhulst-n11", "verhulst-n21", "verhulst-n51", "verhulst-n101"}

    def test_config_error_names_key(self, tmp_path, capsys):
        scenario = self.scenario_file(tmp_path, extra_key=1)
        assert main(["mc", scenario, "--out-dir", str(tmp_path / "x")]) == 6
        assert "extra_key" in capsys.readouterr().err

    def test_missing_key_named(self, tmp_path, capsys):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps({"model": "verhulst", "T": 2.0, "h": 0.1,
                                    "noise_level": 0.1, "seed": 1}))
        assert main(["mc", str(path), "--out-dir", str(tmp_path / "x")]) == 6
        assert "replications" in capsys.readouterr().err

    def test_lv_scenario_with_true_initials(self, tmp_path):
        doc = {"scenario_id": "lv-tiny", "model": "lv", "T": 5.0, "h": 0.05,
               "noise_level": 0.04, "replications": 2, "seed": 3,
               "grey_initial": "true"}
        path = tmp_path / "lv.json"
        path.write_text(json.dumps(doc))
        out = tmp_path / "lv-out"
        assert main(["mc", str(path), "--out-dir", str(out)]) == 0
        lines = (out / "report.csv").read_text().splitlines()
        names = {line.split(",")[3] for line in lines[1:]}
        assert {"a1", "b1", "a2", "b2", "eta1", "eta2", "rmse"} <= names


class TestReproduceCommand:
    def test_table3(self, tmp_path):
        out = tmp_path / "t3"
        assert main(["reproduce", "--table", "3", "--out-dir", str(out)]) == 0
        lines = (out / "table3_comparison.csv").read_text().splitlines()
        assert lines[0].startswith("model,gamma_star,mape_train")
        rows = {line.split(",")[0]: line.split(",") for line in lines[1:]}
        assert set(rows) == {"igvm", "ingm", "ingbm"}
        # delta columns stay small for the sewage benchmark
        assert abs(float(rows["ingbm"][7])) < 0.5
