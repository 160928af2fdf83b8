import csv
import math

import numpy as np
import pytest

from rydspin import ConfigError, DriveParams, characteristic_radii, sample_channels, spin_couplings
from rydspin.cli import main
from rydspin.config import load_config, parse_config

BASE = """[drive]
omega_p = 10
omega_m = 2.5
delta_p = -50
delta_m = 50

[channels]
file = rb87_60p12_sample.ini
"""


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def run(tmp_path, command, config, *extra, name="out.csv"):
    out = tmp_path / name
    code = main([command, "--config", str(config), "--out", str(out), *extra])
    return code, out


def write_cfg(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---- config parsing

def test_parse_base():
    cfg = parse_config(BASE)
    assert cfg.drive == DriveParams(10, 2.5, -50, 50)
    assert cfg.channels == sample_channels()
    assert cfg.lattice is None and cfg.design is None
    assert cfg.scan.n_r == 50 and cfg.scan.theta == math.pi / 2


def test_inline_channels():
    cfg = parse_config(BASE.split("[channels]")[0] + "[channels]\nn = 60\nc6_a = 1\nc6_b = 2\nc6_c = 3\nc6_d = 3\n")
    assert (cfg.channels.c6_a, cfg.channels.c6_d) == (1.0, 3.0)
    assert cfg.channels_ref == "inline"


@pytest.mark.parametrize("extra, line, field", [
    ("[scan]\nn_r = -3\n", 11, "[scan] n_r"),
    ("[scan]\nbogus = 1\n", 11, "[scan] bogus"),
    ("[nope]\n", 10, "[nope]"),
    ("[scan]\nr_min = 5\nr_max = 2\n", 12, "[scan] r_max"),
    ("[lattice]\nkind = hexagonal\n", 11, "[lattice] kind"),
    ("[design]\ntarget_1 = J_q@1 == 0\n", 11, "[design] target_1"),
])
def test_config_errors_point_at_line(extra, line, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(BASE + "\n" + extra, None)
    msg = str(exc.value)
    assert f"<config>:{line}:" in msg and field in msg


def test_missing_sections_and_fields():
    with pytest.raises(ConfigError, match="drive"):
        parse_config("[channels]\nfile = rb87_60p12_sample.ini\n")
    with pytest.raises(ConfigError, match="delta_m"):
        parse_config(BASE.replace("delta_m = 50\n", ""))
    with pytest.raises(ConfigError, match="channels"):
        parse_config(BASE.split("[channels]")[0])
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.ini")


def test_missing_channel_file(tmp_path):
    p = write_cfg(tmp_path, BASE.replace("rb87_60p12_sample.ini", "missing.ini"))
    with pytest.raises(ConfigError, match=r"run.ini:\d+: \[channels\] file"):
        load_config(p)


def test_channel_file_relative_to_config(tmp_path):
    ch = tmp_path / "mine.ini"
    ch.write_text("[channels]\nn = 60\nc6_a = -1\nc6_b = -2\nc6_c = 3\nc6_d = 3\n")
    cfg = load_config(write_cfg(tmp_path, BASE.replace("rb87_60p12_sample.ini", "mine.ini")))
    assert cfg.channels.c6_b == -2.0


def test_shipped_configs_parse(configs):
    for p in sorted(configs.glob("*.ini")):
        load_config(p)


# ---- couplings

def test_couplings_spin_ice_has_no_flip_flop(tmp_path, configs, ch):
    code, out = run(tmp_path, "couplings", configs / "fig1c.ini")
    assert code == 0
    head, rows = read_csv(out)
    assert head == ["r_um", "theta_rad", "J_z", "J_par", "J_pm", "J_pp", "valid_flag"]
    J = np.array([[float(x) for x in r[2:6]] for r in rows])
    assert len(rows) == 50
    assert np.abs(J[:, 2]).max() <= 1e-10 * np.abs(J[:, 3]).max()
    r0 = float(rows[7][0])
    assert float(rows[7][2]) == spin_couplings(r0, DriveParams(10, 2.5, -50, 50), ch).j_z


def test_units_line(tmp_path, configs):
    _, out = run(tmp_path, "couplings", configs / "fig1c.ini")
    first = out.read_text().splitlines()[0]
    assert first.startswith("# units:") and "um" in first and "2pi*MHz" in first


def test_zero_drive_is_all_zero(tmp_path, configs):
    code, out = run(tmp_path, "couplings", configs / "zero_drive.ini")
    assert code == 0
    _, rows = read_csv(out)
    assert all(float(x) == 0.0 for r in rows for x in r[2:6])


def test_grid_override(tmp_path, configs):
    _, out = run(tmp_path, "couplings", configs / "fig1c.ini", "--grid", "7")
    assert len(read_csv(out)[1]) == 7
    assert main(["couplings", "--config", str(configs / "fig1c.ini"), "--grid", "1"]) == 1


def test_seventeen_digits(tmp_path, configs):
    _, out = run(tmp_path, "couplings", configs / "fig1c.ini")
    _, rows = read_csv(out)
    assert all(x == "%.17g" % float(x) for r in rows for x in r[:6])


# ---- angular

def test_angular_equator_matches_couplings(tmp_path, configs):
    p = write_cfg(tmp_path, BASE + "[scan]\nn_r = 12\ntheta_min_deg = 0\ntheta_max_deg = 90\nn_theta = 4\n")
    _, a = run(tmp_path, "angular", p, name="a.csv")
    _, c = run(tmp_path, "couplings", p, name="c.csv")
    _, arows = read_csv(a)
    _, crows = read_csv(c)
    eq = [r for r in arows if float(r[1]) == math.pi / 2]
    assert eq == crows


def test_angular_resonance_cells_flagged(tmp_path, configs):
    code, out = run(tmp_path, "angular", configs / "fig4.ini")
    assert code == 0
    _, rows = read_csv(out)
    polar = [r for r in rows if float(r[1]) == 0.0]
    flagged = [r for r in polar if r[6] == "resonance"]
    assert flagged and all(x == "nan" for r in flagged for x in r[2:6])


def test_strict_turns_warnings_into_exit_2(tmp_path, configs):
    assert run(tmp_path, "angular", configs / "fig4.ini", "--strict")[0] == 2


# ---- pair energies

def test_pair_energy_branches(tmp_path, configs, ch):
    code, out = run(tmp_path, "pair-energies", configs / "fig2c.ini")
    assert code == 0
    text = out.read_text().splitlines()
    assert text[0].startswith("# r_c_um = ")
    head, rows = read_csv(out)
    assert head == ["x", "rho_um", "E_pp", "E_mm", "E_pm", "E_mp", "E_single_p", "E_single_m"]
    E = np.array([[float(x) for x in r] for r in rows])
    last = E[-1]
    tail = sorted(last[2:6])
    assert tail == pytest.approx(sorted([-100.0, 100.0, 0.0, 0.0]), abs=0.5)
    assert np.all(E[:, 6] == -50) and np.all(E[:, 7] == 50)
    # no jumps: successive steps stay within a bounded multiple of the local slope scale
    d = np.abs(np.diff(E[:, 2:6], axis=0))
    assert np.all(d[1:] <= 10 * d[:-1] + 1e-9 * np.abs(E[1:, 2:6]).max())


# ---- lattice / design / verify

def test_lattice_spin_ice_report(tmp_path, configs):
    rep = tmp_path / "rep.txt"
    code, out = run(tmp_path, "lattice", configs / "fig1c.ini", "--report", str(rep))
    assert code == 0
    kv = dict(ln.split(" = ", 1) for ln in rep.read_text().splitlines() if " = " in ln)
    assert kv["symmetry.class"] == "Z2"
    assert float(kv["symmetry.rel_comm_parity"]) <= 1e-12
    assert float(kv["symmetry.rel_comm_total_sz"]) > 1e-3
    head, rows = read_csv(out)
    assert head[:2] == ["bond_i", "bond_j"]
    assert {round(float(r[2]), 9) for r in rows} == {1.8, round(1.8 * 3**0.5, 9), 3.6}


def test_lattice_shells_override(tmp_path, configs):
    _, out = run(tmp_path, "lattice", configs / "fig1c.ini", "--shells", "1")
    assert {float(r[2]) for r in read_csv(out)[1]} == {1.8}


def test_lattice_needs_section(tmp_path, configs):
    assert run(tmp_path, "lattice", configs / "fig2c.ini")[0] == 1


def test_design_report(tmp_path, configs):
    rep = tmp_path / "rep.txt"
    code, _ = run(tmp_path, "design", configs / "square_compass.ini", "--report", str(rep), "--seed", "3")
    assert code == 0
    text = rep.read_text()
    assert "residual_1 = " in text
    kv = dict(ln.split(" = ", 1) for ln in text.splitlines() if " = " in ln)
    assert float(kv["drive.delta_m"]) == pytest.approx(50.0, rel=1e-6)


def test_verify_passes(tmp_path, configs):
    import json
    code, out = run(tmp_path, "verify", configs / "verify.ini", name="v.json")
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["pass"] and {c["name"] for c in rep["checks"]} >= {"closed_vs_exact", "omega_halving_ratio"}


def test_verify_failure_exit_3(tmp_path):
    # strong drive: the perturbative bound fails
    p = write_cfg(tmp_path, BASE.replace("omega_p = 10", "omega_p = 60").replace("omega_m = 2.5", "omega_m = 40")
                  + "[verify]\nrho_min = 3\nrho_max = 10\nn_rho = 10\n")
    assert run(tmp_path, "verify", p, name="v.json")[0] == 3


def test_corrupted_channel_file_exit_1(tmp_path):
    (tmp_path / "bad.ini").write_text("[channels]\nn = sixty\n")
    p = write_cfg(tmp_path, BASE.replace("rb87_60p12_sample.ini", "bad.ini"))
    assert run(tmp_path, "verify", p)[0] == 1
    assert run(tmp_path, "couplings", p)[0] == 1


def test_spin_ice_has_no_divergence_radii(ch):
    # the spin-ice drive is regular everywhere on the scan
    assert characteristic_radii(DriveParams(10, 2.5, -50, 50), ch).r_div == []
