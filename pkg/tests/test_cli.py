import json
import math

import pytest

from redfluct.cli import log_coefficient_ratio, main
from redfluct.config import defaults_text, float_grid, load_config
from redfluct.errors import ConfigError
from redfluct.results import HEADER, read_rows_csv, validate_rows_file
from redfluct.scaling import ScalingSeries


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path), "--workers", "1"])


def test_defaults_round_trip(tmp_path, capsys):
    assert main(["defaults"]) == 0
    text = capsys.readouterr().out
    assert text == defaults_text()
    cfg_path = tmp_path / "all.ini"
    cfg_path.write_text(text)
    for kind in ("ground", "scaling", "phase_diagram", "visibility_cut", "sampling"):
        assert load_config(kind, cfg_path) == load_config(kind)


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config("ground", overrides={"L": "12,14"})
    with pytest.raises(ConfigError):
        load_config("scaling", overrides={"L": "8,9"})
    with pytest.raises(ConfigError):
        load_config("ground", overrides={"backend": "tensor"})
    with pytest.raises(ConfigError):
        load_config("ground", overrides={"bogus": "1"})
    with pytest.raises(ConfigError):
        load_config("ground", overrides={"L": "24", "backend": "ed"})
    with pytest.raises(ConfigError):
        float_grid(0, 1, 0)
    bad = tmp_path / "bad.ini"
    bad.write_text("[ground]\nJz = strong\n")
    with pytest.raises(ConfigError):
        load_config("ground", bad)


def test_malformed_config_exits_before_work(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[ground]\nsweeps = many\n")
    assert main(["ground", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_auto_backend_rule():
    cfg = load_config("scaling", overrides={"L": "8,20,22"})
    assert [cfg.backend_for(L) for L in cfg.lengths] == ["ed", "ed", "dmrg"]


def test_float_grid():
    assert float_grid(0, 0.6, 0.05)[-1] == 0.6
    assert len(float_grid(-1, 1, 0.1)) == 21


def test_ground_two_sites_full_sector(tmp_path):
    assert run(tmp_path, "ground", "--sector", "full", "--set", "L=2", "--set", "Jz=0") == 0
    rows = read_rows_csv(tmp_path / "ground.csv")
    assert len(rows) == 3
    assert all(abs(r.energy + 0.25) < 1e-12 for r in rows)
    assert rows[0].backend == "ed+dmrg"


def test_ground_conserved_case(tmp_path):
    assert run(tmp_path, "ground", "--backend", "ed", "--set", "L=12", "--set", "Jz=0.5") == 0
    text = (tmp_path / "ground.csv").read_text().splitlines()
    assert text[0] == ",".join(HEADER)
    z = [r for r in read_rows_csv(tmp_path / "ground.csv") if r.axis == "z"][0]
    assert z.var_total < 1e-10
    assert z.beta == pytest.approx(1.0, abs=1e-8)
    mirror = json.loads((tmp_path / "ground.json").read_text())
    assert mirror["header"] == list(HEADER) and len(mirror["rows"]) == 3
    assert validate_rows_file(tmp_path / "ground.csv") == []


def test_cross_check_rejects_mismatch(tmp_path):
    # degenerate ferromagnetic level: the two solvers land on different members
    assert run(tmp_path, "ground", "--set", "L=8", "--set", "Jz=0.5") == 3
    rows = read_rows_csv(tmp_path / "ground.csv")
    assert all(r.energy is None and r.backend == "ed+dmrg" for r in rows)
    flags = json.loads((tmp_path / "ground.json").read_text())["rows"][0]["flags"]
    assert any(f.startswith("rejected") for f in flags)


def test_dmrg_backend_row(tmp_path):
    assert run(tmp_path, "ground", "--backend", "dmrg", "--chi-max", "32", "--set", "L=24",
               "--set", "gamma=0.5", "--set", "Jz=0", "--set", "axes=z") == 0
    (row,) = read_rows_csv(tmp_path / "ground.csv")
    assert row.backend == "dmrg" and row.energy_residual_or_variance < 1e-8
    assert row.xi is not None and row.xi > 0


def test_visibility_cut_outputs(tmp_path):
    assert run(tmp_path, "visibility-cut", "--backend", "ed", "--set", "L=10", "--set", "gamma_step=0.2") == 0
    lines = (tmp_path / "visibility.csv").read_text().splitlines()
    assert lines[0] == "gamma,beta_x,beta_y,beta_z"
    assert len(lines) == 1 + 4
    # gamma=0 here is a fully polarized product state: beta_z is 0/0 and left empty
    assert lines[1].split(",")[3] == ""
    g04 = lines[3].split(",")
    assert float(g04[0]) == pytest.approx(0.4) and float(g04[2]) == pytest.approx(1.0, abs=1e-6)
    assert validate_rows_file(tmp_path / "rows.csv") == []


def test_phase_diagram_grid_shape(tmp_path):
    assert run(tmp_path, "phase-diagram", "--backend", "ed", "--set", "L=8", "--set", "gamma_step=0.5",
               "--set", "Jz_step=1.0", "--set", "axes=x,z") == 0
    lines = (tmp_path / "grid.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[4] == "critical_line_distance"
    assert len(lines) - 1 == 3 * 3
    rec = dict(zip(header, lines[1 + 2 * 3 + 1].split(",")))  # gamma=1, Jz=0
    assert float(rec["critical_line_distance"]) == pytest.approx(-1.0)
    assert rec["beta_y"] == ""  # axis not requested


def test_gapped_point_shows_order(tmp_path):
    assert run(tmp_path, "ground", "--backend", "ed", "--set", "L=12", "--set", "gamma=0.5", "--set", "Jz=0") == 0
    row = read_rows_csv(tmp_path / "ground.csv")[0]
    assert abs(row.imbalance) > 0.05 or row.G_r > 0.05


@pytest.mark.slow
def test_critical_points_maximize_entropy(tmp_path):
    """At fixed L, critical points carry the largest half-cut entropy of their row and column."""
    assert run(tmp_path / "col", "phase-diagram", "--backend", "ed", "--set", "L=14", "--set", "axes=z",
               "--set", "gamma_min=0.4", "--set", "gamma_max=0.4") == 0
    assert run(tmp_path / "row", "phase-diagram", "--backend", "ed", "--set", "L=14", "--set", "axes=z",
               "--set", "Jz_min=0.7", "--set", "Jz_max=0.7") == 0
    for sub in ("col", "row"):
        lines = (tmp_path / sub / "grid.csv").read_text().splitlines()
        header = lines[0].split(",")
        recs = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
        best = max(float(r["S_vN"]) for r in recs)
        for r in recs:
            if abs(float(r["critical_line_distance"])) < 1e-9:
                assert float(r["S_vN"]) == pytest.approx(best, abs=1e-12), (sub, r["gamma"], r["Jz"])


def test_scaling_study_outputs(tmp_path):
    assert run(tmp_path, "scaling", "--backend", "ed", "--set", "L=8,10,12,14",
               "--set", "gamma=0.5", "--set", "Jz=0", "--set", "axes=x,z") == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["gaps"] == []
    assert set(summary["comparison"]) == {"x", "z"}
    assert all("same_scaling" in c and "log_ratio" in c for c in summary["comparison"].values())
    assert (tmp_path / "series" / "S_vN.csv").read_text().startswith("L,value\n8,")
    assert main(["fit", str(tmp_path / "series" / "var_half_x.csv")]) == 0


def test_sampling_study_is_reproducible(tmp_path):
    args = ["sampling", "--set", "L=8", "--set", "shots=100,1000,10000", "--set", "n_seeds=3", "--seed", "5"]
    assert run(tmp_path / "a", *args) == 0
    assert run(tmp_path / "b", *args) == 0
    for name in ("estimates.csv", "slope.json", "rows.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    summary = json.loads((tmp_path / "a" / "slope.json").read_text())
    assert abs(summary["axes"]["z"]["mean_slope"] + 0.5) < 0.1


def test_sampling_shot_export_import(tmp_path):
    base = ["--set", "L=6", "--set", "shots=50", "--set", "n_seeds=1"]
    assert run(tmp_path / "a", "sampling", *base, "--set", "export_shots=true") == 0
    shot_file = tmp_path / "a" / "shots" / "z_seed0_N50.csv"
    assert shot_file.exists()
    assert run(tmp_path / "b", "sampling", *base, "--set", f"shots_file={shot_file}") == 0
    summary = json.loads((tmp_path / "b" / "slope.json").read_text())
    est = [ln.split(",") for ln in (tmp_path / "a" / "estimates.csv").read_text().splitlines()[1:]]
    assert summary["imported"]["estimate"] == pytest.approx(float(est[0][3]), abs=1e-15)


def test_parallel_matches_serial(tmp_path):
    args = ["visibility-cut", "--backend", "ed", "--set", "L=8", "--set", "gamma_step=0.1"]
    assert main([*args, "--out", str(tmp_path / "s"), "--workers", "1"]) == 0
    assert main([*args, "--out", str(tmp_path / "p"), "--workers", "3"]) == 0
    for name in ("rows.csv", "visibility.csv", "rows.json"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_validator(tmp_path, capsys):
    good = tmp_path / "g"
    assert run(good, "ground", "--backend", "ed", "--set", "L=6", "--set", "gamma=0.3") == 0
    assert main(["validate", str(good / "ground.csv")]) == 0
    lines = (good / "ground.csv").read_text().splitlines()
    cols = lines[1].split(",")
    i_beta, i_red = HEADER.index("beta"), HEADER.index("reduced")

    bad = list(cols)
    bad[i_beta] = "1.5"
    (tmp_path / "beta.csv").write_text("\n".join([lines[0], ",".join(bad)]) + "\n")
    bad = list(cols)
    bad[i_red] = "0"
    (tmp_path / "red.csv").write_text("\n".join([lines[0], ",".join(bad)]) + "\n")
    bad = list(cols)
    bad[HEADER.index("S_vN")] = "abc"
    (tmp_path / "num.csv").write_text("\n".join([lines[0], ",".join(bad)]) + "\n")
    (tmp_path / "hdr.csv").write_text("L,J\n1,2\n")
    # beta reported for a vanishing denominator is a silent value
    zero = list(cols)
    for name in ("var_omega", "var_complement", "var_total", "reduced"):
        zero[HEADER.index(name)] = "0"
    zero[i_beta] = "0"
    (tmp_path / "zero.csv").write_text("\n".join([lines[0], ",".join(zero)]) + "\n")
    for name in ("beta", "red", "num", "hdr", "zero"):
        assert main(["validate", str(tmp_path / f"{name}.csv")]) == 4, name
    assert validate_rows_file(tmp_path / "zero.csv")


def test_log_coefficient_ratio():
    Ls = range(8, 21, 2)
    S = ScalingSeries([(L, 1 + 0.2 * math.log(L)) for L in Ls])
    half = ScalingSeries([(L, 0.5 + 0.1 * math.log(L)) for L in Ls])
    res = log_coefficient_ratio(S, half, 8)
    assert res["ratio_all"] == pytest.approx(0.5) and res["stable"]
    drift = ScalingSeries([(L, 0.1 * math.log(L) + 0.02 * L) for L in Ls])
    assert not log_coefficient_ratio(S, drift, 8)["stable"]
    assert log_coefficient_ratio(S, half, 16)["ratio_all"] is None
