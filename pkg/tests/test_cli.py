import csv
import json
from pathlib import Path

import numpy as np
import pytest

from vibpol import __version__, cli
from vibpol.config import ConfigError, load_config, parse_config
from vibpol.liouvillian import DefectiveGeneratorError

PRESET_DIR = Path(__file__).resolve().parents[1] / "src" / "vibpol" / "presets"

SMALL = """\
run = "{run}"

[system]
N = 2
omega = ["1983 cm^-1", "1985 cm^-1"]
delta_omega = "18 cm^-1"
g = "2.1 cm^-1"
v = "62 cm^-1"
gamma = "0.18 cm^-1"
mu = "0.122 D"
omega_c = "1983 cm^-1"
cavity_loss = "0.04 cm^-1"
T = "300 K"

[output]
dir = "out"
prefix = "small"
"""

TWODIR = """
[twodir]
initial = "thermal"
T2 = ["0 ps", "2.5 ps", "10 ps"]
omega1 = { start = "-25 cm^-1", stop = "25 cm^-1", num = 21 }
omega3 = { start = "-25 cm^-1", stop = "25 cm^-1", num = 17 }
components = true

[twodir.pulses]
k1 = { center = "1983 cm^-1", sigma = "50 cm^-1" }
k2 = { center = "1983 cm^-1", sigma = "50 cm^-1" }
k3 = { center = "1993 cm^-1", sigma = "50 cm^-1" }
lo = { center = "1993 cm^-1", sigma = "50 cm^-1" }
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_presets_all_parse():
    for name in ("fig2", "fig3", "fig4", "fig5", "fig6"):
        cfg = load_config(name)
        assert cfg.system.N == 3
        assert cfg.prefix == name


def test_fig2_preset_trajectory_columns(tmp_path):
    assert cli.main(["run", "fig2", "-o", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "fig2_dynamics.csv")
    assert header == ["t_ps", "pop_1", "pop_2", "pop_3", "pop_photon", "coh_12", "coh_13", "coh_23",
                      "LP", "UP", "dark", "ground"]
    assert data.shape == (401, 12)
    total = data[:, 1:5].sum(axis=1) + data[:, -1]
    np.testing.assert_allclose(total, 1.0, atol=1e-8)


def test_fig4_preset_writes_four_grids(tmp_path):
    assert cli.main(["run", "fig4", "-o", str(tmp_path)]) == 0
    files = sorted(p.name for p in tmp_path.glob("fig4_twodir_*.csv"))
    assert files == ["fig4_twodir_T2_0ps.csv", "fig4_twodir_T2_15ps.csv", "fig4_twodir_T2_30ps.csv",
                     "fig4_twodir_T2_5ps.csv"]
    header, data = read_csv(tmp_path / "fig4_twodir_T2_15ps.csv")
    assert header == ["omega1_cm", "omega3_cm", "omega1_flipped_cm", "signal", "ese", "gsb", "esd"]
    assert data.shape == (200 * 200, 7)
    np.testing.assert_array_equal(data[:, 2], -data[:, 0])
    np.testing.assert_allclose(data[:, 3], data[:, 4] + data[:, 6], rtol=1e-12, atol=1e-20)


def test_sidecar_contents(tmp_path):
    cli.main(["run", "fig3", "-o", str(tmp_path)])
    side = json.loads((tmp_path / "fig3.json").read_text())
    assert side["version"] == __version__
    assert side["derived"]["dim_L"] == 128
    assert side["derived"]["nbar"][0] == pytest.approx(2.89, abs=0.01)
    assert side["derived"]["g_sqrtN"][0] == pytest.approx(3.637, abs=1e-3)
    assert side["wall_time_s"] >= 0
    assert side["outputs"] == ["fig3_trps.csv"]
    header, data = read_csv(tmp_path / "fig3_trps.csv")
    assert header == ["omega_cm", "S_tau_0ps", "S_tau_20ps", "S_tau_40ps", "S_tau_50ps", "S_tau_100ps"]


def test_round_trip_bit_identical(tmp_path):
    path = write(tmp_path, SMALL.format(run="twodir") + TWODIR)
    assert cli.main(["run", str(path)]) == 0
    first = tmp_path / "out"
    assert cli.main(["run", str(first / "small.json"), "-o", str(tmp_path / "again")]) == 0
    for f in first.glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "again" / f.name).read_bytes()
    a = json.loads((first / "small.json").read_text())["resolved_config"]
    b = json.loads((tmp_path / "again" / "small.json").read_text())["resolved_config"]
    assert a == b


def test_output_independent_of_worker_count(tmp_path, monkeypatch):
    path = write(tmp_path, SMALL.format(run="twodir") + TWODIR)
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    cli.main(["run", str(path), "-o", str(tmp_path / "one")])
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    cli.main(["run", str(path), "-o", str(tmp_path / "three")])
    for f in (tmp_path / "one").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "three" / f.name).read_bytes()


def test_bad_thread_env_is_config_error(tmp_path, monkeypatch):
    path = write(tmp_path, SMALL.format(run="twodir") + TWODIR)
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    assert cli.main(["run", str(path)]) == 2


def test_absolute_axis(tmp_path):
    text = SMALL.format(run="trps") + """
[trps]
initial = "UP"
tau_pr = ["5 ps"]
omega = { start = "-10 cm^-1", stop = "10 cm^-1", num = 5 }
probe = { center = "1993 cm^-1", sigma = "50 cm^-1" }
lo = { center = "1993 cm^-1", sigma = "50 cm^-1" }
axis_convention = "absolute"
"""
    assert cli.main(["run", str(write(tmp_path, text))]) == 0
    _, data = read_csv(tmp_path / "out" / "small_trps.csv")
    np.testing.assert_allclose(data[:, 0], [1973.0, 1978.0, 1983.0, 1988.0, 1993.0])


def test_dynamics_with_spatial_density(tmp_path):
    text = SMALL.format(run="dynamics") + """
[dynamics]
initial = "SITE:2"
times = { start = "0 ps", stop = "10 ps", num = 3 }
spatial = { x = { start = "-0.2 nm", stop = "0.8 nm", num = 2001 }, times = ["0 ps", "5 ps"] }
"""
    assert cli.main(["run", str(write(tmp_path, text))]) == 0
    header, data = read_csv(tmp_path / "out" / "small_density.csv")
    assert header == ["t_ps", "x_nm", "density"]
    first = data[data[:, 0] == 0.0]
    assert np.trapezoid(first[:, 2], first[:, 1]) == pytest.approx(1.0, rel=0.01)


def test_dipoles_run(tmp_path):
    text = SMALL.format(run="dipoles") + """
[dipoles]
N = 50
g_sqrtN = "19 cm^-1"
detuned_count = 5
delta_omega = "18 cm^-1"
"""
    assert cli.main(["run", str(write(tmp_path, text))]) == 0
    header, data = read_csv(tmp_path / "out" / "small_dipoles_5.csv")
    assert header == ["omega_cm", "strength", "photon_weight"]
    assert data.shape == (51, 3)


def test_malformed_unit_reports_location(tmp_path, capsys):
    text = SMALL.format(run="dynamics").replace('g = "2.1 cm^-1"', 'g = "2.1 cm^-2"')
    assert cli.main(["run", str(write(tmp_path, text))]) == 2
    err = capsys.readouterr().err
    assert "line 7, column 5" in err and "cm^-2" in err


def test_missing_unit_is_config_error(tmp_path, capsys):
    text = SMALL.format(run="dynamics").replace('v = "62 cm^-1"', "v = 62")
    assert cli.main(["run", str(write(tmp_path, text))]) == 2
    assert "line 8" in capsys.readouterr().err


def test_toml_syntax_error_location(tmp_path, capsys):
    assert cli.main(["run", str(write(tmp_path, 'run = "dynamics"\n[system\n'))]) == 2
    assert "line 2" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    text = SMALL.format(run="dynamics") + '\n[dynamics]\ntimes = { start = "0 ps", stop = "1 ps", num = 2 }\n' \
                                          'colour = "blue"\n'
    assert cli.main(["run", str(write(tmp_path, text))]) == 2
    assert "unknown key 'colour'" in capsys.readouterr().err


def test_misspelt_key_hint(tmp_path, capsys):
    text = SMALL.format(run="dynamics").replace("gamma =", "gama =")
    assert cli.main(["run", str(write(tmp_path, text))]) == 2
    assert "gama" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.toml")]) == 2


def test_conditioning_abort_exit_code(tmp_path, monkeypatch):
    def broken(params):
        raise DefectiveGeneratorError("singular")

    monkeypatch.setattr(cli, "decompose", broken)
    path = write(tmp_path, SMALL.format(run="twodir") + TWODIR)
    assert cli.main(["run", str(path)]) == 3


@pytest.mark.parametrize("edit,fragment", [
    (lambda t: t.replace('cavity_loss = "0.04 cm^-1"', ""), "exactly one of Q"),
    (lambda t: t.replace('cavity_loss = "0.04 cm^-1"', 'cavity_loss = "0.04 cm^-1"\nQ = 100'), "exactly one"),
    (lambda t: t.replace('omega = ["1983 cm^-1", "1985 cm^-1"]', 'omega = ["1983 cm^-1"]'), "per-molecule"),
    (lambda t: t.replace('mu = "0.122 D"', 'mu = "0.122 D"\nmu_direction = [1.0, 1.0, 0.0]'), "unit"),
    (lambda t: t.replace('T = "300 K"', 'T = "300 K"\ntime_convention = "hourly"'), "time_convention"),
    (lambda t: t.replace('run = "dynamics"', 'run = "movie"'), "not one of"),
])
def test_config_validation(tmp_path, edit, fragment):
    text = edit(SMALL.format(run="dynamics") + '\n[dynamics]\ntimes = { start = "0 ps", stop = "1 ps", num = 2 }\n')
    with pytest.raises(ConfigError, match=fragment):
        load_config(write(tmp_path, text))


def test_negative_delay_rejected(tmp_path):
    with pytest.raises(ConfigError, match="non-negative"):
        load_config(write(tmp_path, SMALL.format(run="twodir") + TWODIR.replace('"2.5 ps"', '"-2.5 ps"')))


def test_cyclic_time_convention(tmp_path):
    text = SMALL.format(run="dynamics").replace('T = "300 K"', 'T = "300 K"\ntime_convention = "cyclic"')
    cfg = parse_config(__import__("tomli").loads(text + '\n[dynamics]\ntimes = { start = "0 ps", stop = "1 ps", '
                                                         'num = 2 }\n'))
    assert cfg.system.rate_per_cm == pytest.approx(0.1883652 / (2 * np.pi), rel=1e-6)


def test_presets_command(capsys):
    assert cli.main(["presets"]) == 0
    assert capsys.readouterr().out.split() == ["fig2", "fig3", "fig4", "fig5", "fig6"]


def test_validate_command(tmp_path, capsys):
    report = tmp_path / "report.json"
    assert cli.main(["validate", "--json", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["passed"]
    assert data["derived"]["dim_L"] == 128
    assert data["derived"]["nbar"] == pytest.approx(2.89, abs=0.01)
    assert {r["name"] for r in data["reports"]} >= {"spectral_vs_rk4_N1", "spectral_vs_rk4_N2",
                                                   "spectral_vs_rk4_N3", "trps_peak_position"}
    assert "FAIL" not in capsys.readouterr().out
