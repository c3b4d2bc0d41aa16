import copy
import json

import pandas as pd
import pytest

from uav_isac.cli import columns, main, parse_scenario
from uav_isac.cli.commands import EXIT_INFEASIBLE, EXIT_OK, EXIT_SCHEMA, EXIT_VERIFY, VERIFY_SCHEMA_VERSION
from uav_isac.errors import ScenarioFileError


@pytest.fixture
def write(tmp_path, default_data):
    """Writes a modified copy of the default scenario and returns its path."""

    def build(edit=None, name="scenario.json"):
        data = copy.deepcopy(default_data)
        if edit is not None:
            edit(data)
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)

    return build


######################################
# Scenario files
######################################


def test_default_scenario(default_file):
    assert default_file.scenario.num_uavs == 3
    assert default_file.scheme == "s-ao"
    assert default_file.rate_floor == 2.0
    assert default_file.total_power == 1.0
    assert default_file.delta == 1.0
    assert default_file.p_out == 0.05
    assert default_file.montecarlo.samples == 100000
    assert default_file.sweep.grid == (0.5, 1.0, 2.0, 4.0)


def _error(data):
    with pytest.raises(ScenarioFileError) as caught:
        parse_scenario(data)
    return str(caught.value)


def test_errors_name_the_entry(default_data):
    data = copy.deepcopy(default_data)
    del data["radio"]["noise_psd"]
    assert "radio.noise_psd" in _error(data)

    data = copy.deepcopy(default_data)
    data["uavs"][1]["position"] = [1.0, 2.0]
    assert "uavs[1].position" in _error(data)

    data = copy.deepcopy(default_data)
    data["radio"]["wavelength"] = -0.1
    assert "radio.wavelength" in _error(data)

    data = copy.deepcopy(default_data)
    data["robustness"]["p_out"] = 1.5
    assert "robustness.p_out" in _error(data)

    data = copy.deepcopy(default_data)
    data["allocator"]["scheme"] = "greedy"
    assert "allocator.scheme" in _error(data)

    data = copy.deepcopy(default_data)
    data["montecarlo"]["families"] = ["cauchy"]
    assert "montecarlo.families" in _error(data)


def test_unknown_top_level_key(default_data):
    data = copy.deepcopy(default_data)
    data["beamforming"] = {}
    assert "beamforming" in _error(data)


def test_optional_blocks(default_data):
    data = copy.deepcopy(default_data)
    for key in ("robustness", "montecarlo", "sweep"):
        del data[key]
    data["uavs"][0]["array"] = {"rows": 2, "cols": 8}
    scenario_file = parse_scenario(data)
    assert scenario_file.montecarlo is None and scenario_file.sweep is None
    assert scenario_file.delta == 1.0 and scenario_file.p_out == 0.05
    assert scenario_file.scenario.antenna_offsets[0].shape == (3, 16)


def test_with_parameter(default_file):
    assert default_file.with_parameter("p_out", 0.1).p_out == 0.1
    assert default_file.with_parameter("rate_floor", 1.0).config().rate_floor == 1.0
    with pytest.raises(ScenarioFileError):
        default_file.with_parameter("wavelength", 0.2)


######################################
# Command line
######################################


def test_missing_noise_psd_exits_schema(write, capsys):
    path = write(lambda data: data["radio"].pop("noise_psd"))
    assert main(["solve", "--scenario", path]) == EXIT_SCHEMA
    assert "radio.noise_psd" in capsys.readouterr().err


def test_unreadable_file_exits_schema(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["solve", "--scenario", str(path)]) == EXIT_SCHEMA
    assert main(["solve", "--scenario", str(tmp_path / "missing.json")]) == EXIT_SCHEMA


def test_bad_sample_count_exits_schema(write):
    assert main(["verify", "--scenario", write(), "--samples", "0"]) == EXIT_SCHEMA


def test_bad_sweep_grid_exits_schema(write, tmp_path):
    out = str(tmp_path / "sweep.csv")
    assert main(["sweep", "--scenario", write(), "--parameter", "total_power", "--grid", "1,x",
                 "--out", out]) == EXIT_SCHEMA
    assert main(["sweep", "--scenario", write(), "--parameter", "p_out", "--grid", "0.1,1.5",
                 "--out", out]) == EXIT_SCHEMA
    assert main(["sweep", "--scenario", write(), "--parameter", "noise_psd", "--grid", "1",
                 "--out", out]) == EXIT_SCHEMA


def test_column_order():
    assert columns(2) == [
        "scheme", "parameter", "value", "status", "message", "crb", "total_power_used", "iterations",
        "wall_time", "ps_1", "ps_2", "pc_1", "pc_2", "outage_ellipsoid", "outage_gaussian",
        "outage_uniform_ellipsoid", "outage_rademacher_mixture",
    ]


def test_empty_grid_writes_header_only(write, tmp_path):
    out = tmp_path / "empty.csv"
    assert main(["sweep", "--scenario", write(), "--parameter", "total_power", "--grid", "",
                 "--out", str(out)]) == EXIT_OK
    assert out.read_text().strip() == ",".join(columns(3))


def test_single_uav_solve_is_infeasible(write, tmp_path):
    def single(data):
        data["uavs"] = data["uavs"][:1]
        data.pop("sweep")

    out = tmp_path / "single.csv"
    assert main(["solve", "--scenario", write(single), "--scheme", "s-ao", "--out", str(out)]) == EXIT_INFEASIBLE
    frame = pd.read_csv(out)
    assert frame.loc[0, "status"] == "infeasible"
    assert "RankDeficientGeometryError" in frame.loc[0, "message"]
    assert pd.isna(frame.loc[0, "crb"])


def test_coincident_uav_exits_infeasible(write):
    def collide(data):
        data["uavs"][0]["position"] = data["ue_estimate"]

    assert main(["solve", "--scenario", write(collide)]) == EXIT_INFEASIBLE


def test_compare_all_infeasible(write, tmp_path):
    out = tmp_path / "compare.csv"
    path = write(lambda data: data["allocator"].update(total_power=0.1))
    assert main(["compare", "--scenario", path, "--out", str(out)]) == EXIT_INFEASIBLE
    frame = pd.read_csv(out)
    assert list(frame["scheme"]) == ["nonrobust", "s-ao", "bi-sca", "cvar-ao"]
    assert set(frame["status"]) == {"infeasible"}


@pytest.mark.slow
def test_sweep_is_reproducible_without_timing(write, tmp_path):
    runs = []
    for i in range(2):
        out = tmp_path / f"sweep{i}.csv"
        assert main(["sweep", "--scenario", write(), "--scheme", "nonrobust", "--parameter", "total_power",
                     "--grid", "0.5,1", "--samples", "500", "--seed", "3", "--no_timing",
                     "--out", str(out)]) == EXIT_OK
        runs.append(out.read_bytes())
    assert runs[0] == runs[1]
    frame = pd.read_csv(tmp_path / "sweep0.csv")
    assert list(frame.columns) == columns(3)
    assert list(frame["value"]) == [0.5, 1.0]
    assert frame["wall_time"].isna().all()
    assert (frame["total_power_used"] <= frame["value"]).all()


@pytest.mark.slow
def test_sweep_worker_pool_matches_inline(write, tmp_path):
    outputs = {}
    for workers in (1, 2):
        out = tmp_path / f"sweep_w{workers}.csv"
        assert main(["sweep", "--scenario", write(), "--scheme", "nonrobust", "--parameter", "total_power",
                     "--grid", "0.5,1,2", "--samples", "200", "--seed", "3", "--no_timing",
                     "--workers", str(workers), "--out", str(out)]) == EXIT_OK
        outputs[workers] = out.read_bytes()
    assert outputs[1] == outputs[2]
    assert list(pd.read_csv(tmp_path / "sweep_w2.csv")["value"]) == [0.5, 1.0, 2.0]


@pytest.mark.slow
def test_verify_report_schema(write, tmp_path):
    out = tmp_path / "report.json"
    code = main(["verify", "--scenario", write(), "--scheme", "nonrobust", "--samples", "2000", "--out", str(out)])
    report = json.loads(out.read_text())
    assert report["schema_version"] == VERIFY_SCHEMA_VERSION == 1
    assert report["scheme"] == "nonrobust"
    assert report["samples"] == 2000
    assert set(report["families"]) == {"gaussian"}
    # perfect-CSI powers miss the floor for about half the LSEs
    assert code == EXIT_VERIFY
    assert report["pass"] is False


@pytest.mark.slow
def test_verify_sao_passes(write, tmp_path):
    out = tmp_path / "report.json"
    assert main(["verify", "--scenario", write(), "--scheme", "s-ao", "--samples", "20000",
                 "--out", str(out)]) == EXIT_OK
    entry = json.loads(out.read_text())["families"]["ellipsoid"]
    assert entry["pass"] is True
    assert entry["worst_case_violation"] == [False, False, False]


@pytest.mark.slow
def test_solve_prints_summary(write, capsys):
    assert main(["solve", "--scenario", write(), "--scheme", "nonrobust", "--samples", "100"]) == EXIT_OK
    printed = capsys.readouterr().out
    assert "[nonrobust] status: optimal" in printed
    assert "UAV 3" in printed
