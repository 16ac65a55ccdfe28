import json

import numpy as np
import pytest

from excessdeaths.cli import main

SCENARIO = """
start = 2015-06-01
end = 2017-06-30
baseline = 8.5
population = 3300000
seasonal_amplitude = 0.08
seasonal_phase = 1.2
effect = 2016-09-20:2016-09-30:1.5
effect = 2016-10-01:2016-10-31:1.25
seed = 17
"""

MOVEMENT_CSV = """month,leaving,arriving,net
2017-09,194571,149848,44723
2017-10,258662,159465,99197
2017-11,265606,215356,50250
2017-12,354865,332710,22155
2018-01,289231,359921,-70690
"""

ANCHOR_CSV = """date,population,kind
2015-07-01,3473177,census_vintage
2016-07-01,3406672,census_vintage
2017-07-01,3337177,census_vintage
"""


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("sim")
    scenario = outdir / "scenario.cfg"
    scenario.write_text(SCENARIO, encoding="utf-8")
    code = main(["simulate", str(scenario), "--outdir", str(outdir)])
    assert code == 0
    return outdir


def model2_args(sim_dir, outdir, seed="3"):
    return ["model2",
            "--deaths", str(sim_dir / "deaths.csv"),
            "--population-anchors", str(sim_dir / "population_anchors.csv"),
            "--emergency-date", "2016-09-20",
            "--boundaries", "2016-09-30,2016-10-31",
            "--basis-dim", "8", "--draws", "1500", "--seed", seed,
            "--outdir", str(outdir)]


class TestSimulateCommand:
    def test_outputs_exist_and_roundtrip(self, sim_dir):
        assert (sim_dir / "deaths.csv").exists()
        assert (sim_dir / "population_anchors.csv").exists()
        truth = json.loads((sim_dir / "truth.json").read_text())
        assert truth["cumulative_excess"] > 0
        lines = (sim_dir / "deaths.csv").read_text().splitlines()
        assert lines[0] == "date,deaths"
        assert len(lines) == 1 + 761  # 2015-06-01..2017-06-30


class TestModel1Command:
    def test_artifacts_and_interval(self, sim_dir, tmp_path):
        outdir = tmp_path / "m1"
        code = main(["model1",
                     "--deaths", str(sim_dir / "deaths.csv"),
                     "--emergency-date", "2016-09-20",
                     "--pre-start", "2016-05-01",
                     "--post-end", "2016-10-31",
                     "--outdir", str(outdir)])
        assert code == 0
        result = json.loads((outdir / "model1_result.json").read_text())
        assert result["alpha"] == 0.05  # documented default
        lo, hi = result["ci_cumulative"]
        assert lo < result["cumulative_excess"] < hi
        assert lo > 0  # strong simulated effect is detected
        assert (outdir / "model1_profile.svg").exists()
        rows = (outdir / "model1_cumulative.csv").read_text().splitlines()
        assert rows[0] == "horizon_end,days,excess_mle,lo,hi"
        assert len(rows) == 1 + result["counts"]["post_days"]
        manifest = json.loads((outdir / "run_manifest.json").read_text())
        assert "deaths.csv" in manifest["inputs"]

    def test_no_effect_interval_straddles_zero(self, tmp_path):
        scenario = tmp_path / "flat.cfg"
        scenario.write_text("start = 2016-01-01\nend = 2016-12-31\n"
                            "baseline = 9.0\nseed = 4\n", encoding="utf-8")
        assert main(["simulate", str(scenario), "--outdir",
                     str(tmp_path)]) == 0
        outdir = tmp_path / "m1"
        code = main(["model1",
                     "--deaths", str(tmp_path / "deaths.csv"),
                     "--emergency-date", "2016-07-01",
                     "--outdir", str(outdir)])
        assert code == 0
        result = json.loads((outdir / "model1_result.json").read_text())
        lo, hi = result["ci_excess_rate"]
        assert lo < 0 < hi

    def test_missing_input_exit_one(self, tmp_path, capsys):
        code = main(["model1", "--deaths", str(tmp_path / "nope.csv"),
                     "--emergency-date", "2016-07-01",
                     "--outdir", str(tmp_path)])
        assert code == 1
        err = capsys.readouterr().err
        assert "nope.csv" in err


class TestModel2Command:
    def test_artifacts(self, sim_dir, tmp_path):
        outdir = tmp_path / "m2"
        code = main(model2_args(sim_dir, outdir))
        assert code == 0
        fit = json.loads((outdir / "model2_fit.json").read_text())
        assert fit["converged"]
        assert fit["seed"] == 3
        p1 = fit["coefficients"]["period_1"]
        assert p1["p"] < 0.01
        assert p1["multiplicative_effect"] == pytest.approx(
            np.exp(p1["coef"]))
        for name in ("excess_daily.csv", "excess_cumulative.csv",
                     "fit_band.svg", "cumulative_band.svg", "population.svg",
                     "run_manifest.json"):
            assert (outdir / name).exists(), name
        rows = (outdir / "excess_cumulative.csv").read_text().splitlines()
        header = rows[0].split(",")
        assert header == ["date", "cumulative_excess", "lo_pointwise",
                          "hi_pointwise", "lo_simultaneous",
                          "hi_simultaneous"]
        last = rows[-1].split(",")
        assert float(last[4]) <= float(last[2]) <= float(last[1]) \
            <= float(last[3]) <= float(last[5])

    def test_seed_required(self, sim_dir, tmp_path, capsys):
        args = model2_args(sim_dir, tmp_path / "x")
        i = args.index("--seed")
        del args[i:i + 2]
        assert main(args) == 1
        assert "--seed" in capsys.readouterr().err

    def test_byte_identical_reruns(self, sim_dir, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(model2_args(sim_dir, out1, seed="9")) == 0
        assert main(model2_args(sim_dir, out2, seed="9")) == 0
        for name in ("model2_fit.json", "excess_daily.csv",
                     "excess_cumulative.csv", "run_manifest.json"):
            a = (out1 / name).read_bytes()
            b = (out2 / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"

    def test_config_file_with_flag_override(self, sim_dir, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            f"deaths = {sim_dir / 'deaths.csv'}\n"
            f"population_anchors = {sim_dir / 'population_anchors.csv'}\n"
            "emergency_date = 2016-09-20\n"
            "boundaries = 2016-09-30,2016-10-31\n"
            "basis_dim = 8\n"
            "draws = 1500\n"
            "seed = 5\n", encoding="utf-8")
        outdir = tmp_path / "cfg_run"
        code = main(["model2", "--config", str(cfg), "--outdir", str(outdir),
                     "--seed", "6"])  # flag beats config
        assert code == 0
        fit = json.loads((outdir / "model2_fit.json").read_text())
        assert fit["seed"] == 6
        manifest = json.loads((outdir / "run_manifest.json").read_text())
        assert manifest["options"]["seed"] == 6
        assert "seed = 5" in manifest["config_file_text"]


class TestGlrtCommand:
    def test_report(self, sim_dir, tmp_path, capsys):
        outdir = tmp_path / "glrt"
        code = main(["glrt",
                     "--deaths", str(sim_dir / "deaths.csv"),
                     "--population-anchors",
                     str(sim_dir / "population_anchors.csv"),
                     "--emergency-date", "2016-09-20",
                     "--boundaries", "2016-09-30,2016-10-31",
                     "--basis-dim", "8",
                     "--null-periods", "1",
                     "--outdir", str(outdir)])
        assert code == 0
        out = capsys.readouterr().out
        assert "GLRT" in out
        report = json.loads((outdir / "glrt_result.json").read_text())
        assert report["df"] == 1
        assert report["p"] < 0.05  # dropping the real October effect
        assert report["null_periods"] == [1]
        assert report["alt_periods"] == [1, 2]


class TestPopulationCommand:
    def test_decline_table(self, tmp_path, capsys):
        anchors = tmp_path / "anchors.csv"
        anchors.write_text(ANCHOR_CSV, encoding="utf-8")
        movement = tmp_path / "movement.csv"
        movement.write_text(MOVEMENT_CSV, encoding="utf-8")
        outdir = tmp_path / "pop"
        code = main(["population", "--population-anchors", str(anchors),
                     "--net-movement", str(movement), "--extrapolate",
                     "--outdir", str(outdir)])
        assert code == 0
        report = json.loads((outdir / "population_declines.json").read_text())
        pct = [d["pct_below_reference"] for d in report["declines"]]
        assert pct == pytest.approx([1.34, 4.31, 5.82, 6.48, 4.36], abs=0.05)
        assert (outdir / "population_daily.csv").exists()
        assert (outdir / "population.svg").exists()


class TestAdjustmentContrast:
    def test_migration_effect_detected_only_with_adjustment(self, tmp_path):
        # heavy emigration plus a modest December-like effect: the excess
        # is visible against the adjusted offset, invisible without it
        scenario = tmp_path / "mig.cfg"
        scenario.write_text(
            "start = 2015-01-01\nend = 2017-02-28\nbaseline = 8.5\n"
            "seasonal_amplitude = 0.05\nseasonal_phase = 1.2\n"
            "effect = 2016-12-01:2016-12-31:1.10\nseed = 23\n",
            encoding="utf-8")
        # population falls ~9% by December, roughly cancelling the 1.10
        # effect when the offset ignores the displacement
        anchors = tmp_path / "anchors.csv"
        anchors.write_text(
            "date,population,kind\n"
            "2015-01-01,3300000,census_vintage\n"
            "2016-09-30,3300000,census_vintage\n", encoding="utf-8")
        movement = tmp_path / "movement.csv"
        movement.write_text(
            "month,leaving,arriving\n"
            "2016-10,160000,10000\n"
            "2016-11,160000,10000\n"
            "2016-12,30000,10000\n"
            "2017-01,20000,10000\n"
            "2017-02,10000,10000\n", encoding="utf-8")
        # simulate deaths against the *declining* population
        import excessdeaths.ingest as ingest
        from excessdeaths.simulate import PeriodEffect, Scenario, simulate
        from excessdeaths.reporting import write_csv
        adjusted = ingest.apply_net_movement(
            ingest.load_population_anchors(anchors),
            ingest.load_net_movement(movement))
        pop = ingest.interpolate_population(adjusted, "2015-01-01",
                                            "2017-02-28", extrapolate=True)
        sc = Scenario("2015-01-01", "2017-02-28", baseline=8.5,
                      population=[a for a in adjusted],
                      seasonal_amplitude=0.05, seasonal_phase=1.2,
                      effects=(PeriodEffect("2016-12-01", "2016-12-31",
                                            1.10),),
                      seed=23)
        sim = simulate(sc)
        deaths_csv = tmp_path / "deaths.csv"
        write_csv(deaths_csv, ["date", "deaths"],
                  list(zip(sim.deaths.dates, sim.deaths.counts)))

        common = ["--deaths", str(deaths_csv),
                  "--population-anchors", str(anchors),
                  "--net-movement", str(movement),
                  "--emergency-date", "2016-10-01",
                  "--boundaries",
                  "2016-10-31,2016-11-30,2016-12-31,2017-01-31,2017-02-28",
                  "--basis-dim", "8", "--draws", "1500", "--extrapolate"]
        out_adj = tmp_path / "adj"
        out_raw = tmp_path / "raw"
        assert main(["model2", *common, "--seed", "1",
                     "--outdir", str(out_adj)]) == 0
        assert main(["model2", *common, "--seed", "1", "--no-adjustment",
                     "--outdir", str(out_raw)]) == 0
        p_adj = json.loads((out_adj / "model2_fit.json").read_text())[
            "coefficients"]["period_3"]["p"]
        p_raw = json.loads((out_raw / "model2_fit.json").read_text())[
            "coefficients"]["period_3"]["p"]
        assert p_adj < 0.05
        assert p_raw > 0.05
