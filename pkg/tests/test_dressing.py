import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydspin import (
    CouplingSet,
    DriveParams,
    InvalidArgumentError,
    PairGeometry,
    PoleError,
    VdwChannelSet,
    characteristic_radii,
    decay_figure_of_merit,
    dressed_potentials,
    gamma_eff,
    light_shifts,
    numeric_effective_hamiltonian,
    relative_height,
    spin_couplings,
    tilde_v,
    tilde_w,
)
from rydspin.pair import divergence_radii
from rydspin.verify import coupling_deviation

REGULAR_DRIVES = [
    DriveParams(10, 2.5, -50, 50),
    DriveParams(9, 3, -55, 45),
    DriveParams(6, 4, -70, 35),
]


@pytest.mark.parametrize("drive", REGULAR_DRIVES)
def test_closed_forms_equal_fourth_order(ch, drive):
    rhos = np.geomspace(1, 10, 50)
    assert coupling_deviation(rhos, drive, ch, reference="fourth_order") <= 1e-10


@pytest.mark.parametrize("drive", REGULAR_DRIVES)
def test_closed_forms_entrywise(ch, drive):
    for r in (1.3, 2.2, 3.7, 6.0):
        d = dressed_potentials(r, drive, ch)
        h = numeric_effective_hamiltonian(PairGeometry(r), drive, ch)
        scale = np.abs(h).max()
        assert abs(h[0, 0] - d.v_pp) <= 1e-11 * scale
        assert abs(h[3, 3] - d.v_mm) <= 1e-11 * scale
        assert abs(h[1, 1] - d.v_pm) <= 1e-11 * scale
        assert abs(h[0, 3] - d.w_pp) <= 1e-11 * scale
        assert abs(h[1, 2] - d.w_pm) <= 1e-11 * scale


@settings(max_examples=20, deadline=None)
@given(st.floats(1.0, 8.0), st.floats(0, math.pi), st.floats(0, 2 * math.pi), st.sampled_from(["fourth_order", "exact"]))
def test_effective_hamiltonian_hermitian(r, theta, phi, method):
    ch = VdwChannelSet(-60000, -190900, 179100, 179100)
    try:
        h = numeric_effective_hamiltonian(PairGeometry(r, theta, phi), DriveParams(9, 3, -55, 45, 0.3, 1.1), ch,
                                          method=method)
    except (PoleError, ArithmeticError):
        return
    assert np.abs(h - h.conj().T).max() <= 1e-12 * np.abs(h).max()


def test_light_shift_limits(ch, fig4_drive):
    d = fig4_drive
    ls = light_shifts(d)
    for got, want in zip(tilde_v(1e3, d, ch), ls):
        assert got == pytest.approx(want, rel=1e-12)
    assert all(abs(x) < 1e-12 for x in tilde_v(1e3, d, ch, absorbed=True))


def test_short_distance_steps(ch, fig4_drive):
    d = fig4_drive
    op, om, dp, dm = d.omega_p, d.omega_m, d.delta_p, d.delta_m
    v_pp, v_mm, v_pm = tilde_v(0.1, d, ch, absorbed=True)
    assert v_pp == pytest.approx(-(om**4) * 2 * dm / (16 * dm**4), rel=1e-6)
    assert v_mm == pytest.approx(-(op**4) * 2 * dp / (16 * dp**4), rel=1e-6)
    assert v_pm == pytest.approx(-(om**2) * op**2 * (dm + dp) / (16 * dm**2 * dp**2), rel=1e-6)


def test_beta_minus_one_kills_mixed_terms(ch, ice_drive):
    for r in np.geomspace(0.5, 20, 30):
        _, _, v_pm = tilde_v(r, ice_drive, ch, absorbed=True)
        _, w_pm = tilde_w(r, ice_drive, ch)
        assert abs(v_pm) <= 1e-15 and w_pm == 0


def test_w_vanishes_at_both_ends(ch, fig4_drive):
    peak = max(abs(tilde_w(r, fig4_drive, ch)[0]) for r in np.geomspace(1, 10, 200))
    for r in (0.05, 200.0):
        wpp, wpm = tilde_w(r, fig4_drive, ch)
        assert abs(wpp) < 1e-6 * peak and abs(wpm) < 1e-6 * peak


def test_w_phase_factors(ch, ice_drive):
    w0, _ = tilde_w(2.5, ice_drive, ch)
    w1, _ = tilde_w(2.5, ice_drive, ch, phase_pp=0.7)
    assert w1 == pytest.approx(w0 * np.exp(0.7j), rel=1e-15)


def test_spin_ice_couplings(ch, ice_drive):
    rhos = np.geomspace(1, 10, 200)
    js = np.array([spin_couplings(PairGeometry(r), ice_drive, ch).as_array() for r in rhos])
    assert np.all(js[:, 2] == 0)
    assert js[0, 0] > 0 and js[-1, 0] < 0
    k = int(np.argmax(np.abs(js[:, 3])))
    assert 0 < k < len(rhos) - 1
    assert rhos[k] == pytest.approx(2.5, abs=0.1)


def test_zero_drive(ch):
    c = spin_couplings(PairGeometry(2.0, 0.4), DriveParams(0, 0, 10, 10), ch)
    assert c.values() == (0.0, 0.0, 0.0, 0.0)


def test_exchange_of_atoms(ch, fig4_drive):
    for theta in (0.3, math.pi / 2):
        g = PairGeometry(3.3, theta, 0.4)
        a = spin_couplings(g, fig4_drive, ch)
        b = spin_couplings(g.reversed(), fig4_drive, ch)
        assert np.abs(a.as_array() - b.as_array()).max() <= 1e-12 * np.abs(a.as_array()).max()


def test_no_vdw_gives_pure_light_shifts(fig4_drive):
    off = VdwChannelSet(0, 0, 0, 0)
    h = numeric_effective_hamiltonian(PairGeometry(2.0, 0.5), fig4_drive, off)
    assert np.abs(h - np.diag(np.diag(h))).max() <= 1e-15
    ls = light_shifts(fig4_drive)
    assert np.diag(h).real == pytest.approx([ls[0], ls[2], ls[2], ls[1]], rel=1e-12)
    c = spin_couplings(PairGeometry(2.0, 0.5), fig4_drive, off)
    assert np.abs(c.as_array()).max() <= 1e-15


def test_w_pp_vanishes_on_axis(ch, fig4_drive):
    for r in (1.5, 3.0, 6.0):
        h = numeric_effective_hamiltonian(PairGeometry(r, 0.0), fig4_drive, ch)
        assert abs(h[0, 3]) <= 1e-12 * np.abs(h).max()


def test_pm_antisymmetry_with_channel_flip(ch):
    d = DriveParams(9, 3, -55, 45)
    mirror = DriveParams(d.omega_m, d.omega_p, -d.delta_m, -d.delta_p)
    for r in (1.5, 2.5, 4.0):
        a = spin_couplings(PairGeometry(r), d, ch).j_pm
        b = spin_couplings(PairGeometry(r), mirror, ch.scaled(-1), check_validity=False).j_pm
        assert b == pytest.approx(-a, rel=1e-12)


def test_tail_decays_like_r6(ch, ice_drive):
    rs = np.array([20.0, 40.0])
    js = np.array([np.abs(spin_couplings(PairGeometry(r), ice_drive, ch).as_array()) for r in rs])
    for k in (0, 1, 3):
        slope = -np.log(js[1, k] / js[0, k]) / np.log(rs[1] / rs[0])
        assert slope >= 6 - 0.1


def test_pole_detected(ch):
    d = DriveParams(9, 3, -45, 55)
    r_div = divergence_radii(d, ch)["pm"][0]
    with pytest.raises(PoleError) as exc:
        dressed_potentials(r_div, d, ch)
    assert exc.value.radius == pytest.approx(r_div)


def test_method_errors(ch, ice_drive):
    with pytest.raises(InvalidArgumentError):
        spin_couplings(PairGeometry(2.0, 0.3), ice_drive, ch, method="closed")
    with pytest.raises(InvalidArgumentError):
        spin_couplings(PairGeometry(2.0), ice_drive, ch, method="magic")
    with pytest.raises(InvalidArgumentError):
        spin_couplings(PairGeometry(2.0), ice_drive, ch, light_shifts_mode="both")


def test_keep_phase(ch):
    d = DriveParams(10, 2.5, -50, 50, phi_p=0.4, phi_m=0.1)
    g = PairGeometry(2.5, math.pi / 2, 0.3)
    plain = spin_couplings(g, d, ch)
    kept = spin_couplings(g, d, ch, keep_phase=True)
    assert isinstance(plain.j_pp, float)
    assert abs(kept.j_pp) == pytest.approx(abs(plain.j_pp), rel=1e-14)
    assert np.angle(kept.j_pp / plain.j_pp) == pytest.approx(2 * (0.3 - 0.4 + 0.1), abs=1e-12)


def test_raw_light_shifts_mode(ch, ice_drive):
    raw = spin_couplings(PairGeometry(3.0), ice_drive, ch, light_shifts_mode="raw")
    ab = spin_couplings(PairGeometry(3.0), ice_drive, ch)
    ls = light_shifts(ice_drive)
    assert raw.j_par - ab.j_par == pytest.approx((ls[0] - ls[1]) / 4, rel=1e-10)
    assert raw.j_pp == ab.j_pp


def test_relative_height_single_level_limit():
    ch = VdwChannelSet(2e5, 2e5, 2e5, 2e5)  # w = 0, so alpha1 = 0
    d = DriveParams(10, 2.5, -50, -40)
    c = ch.scalars()
    r1 = (abs(c.c_pp) / (2 * abs(d.delta_m))) ** (1 / 6)
    sigma = np.sign(c.c_pp) * np.sign(d.delta_m)
    assert sigma == -1
    for x in (0.5, 1.0, 1.7):
        want = -1 / (1 - sigma * x**6)
        assert relative_height("v_pp", x * r1, d, ch) == pytest.approx(want, rel=1e-12)
    assert relative_height("v_pp", r1, d, ch) == pytest.approx(-0.5, rel=1e-12)


@pytest.mark.parametrize("drive", REGULAR_DRIVES[1:] + [DriveParams(4, 4, -60, 20)])
def test_relative_height_matches_closed_forms(ch, drive):
    v0 = drive.omega_m**4 / (8 * drive.delta_m**3)
    rng = np.random.default_rng(7)
    for r in rng.uniform(1, 8, 20):
        vpp, vmm, vpm = tilde_v(r, drive, ch, absorbed=True)
        wpp, wpm = tilde_w(r, drive, ch)
        for kind, val in (("v_pp", vpp), ("v_mm", vmm), ("v_pm", vpm), ("w_pp", wpp.real), ("w_pm", wpm.real)):
            assert relative_height(kind, r, drive, ch) * v0 == pytest.approx(val, rel=1e-9, abs=1e-15)
    with pytest.raises(InvalidArgumentError):
        relative_height("j_zz", 2.0, drive, ch)


def test_characteristic_radii(ch, ice_drive):
    rad = characteristic_radii(ice_drive, ch)
    assert rad.r_div_prime == []
    assert rad.r_c == pytest.approx(2.6915, abs=1e-4)
    assert rad.r1_max == pytest.approx(2.4979, abs=1e-4)
    deg = VdwChannelSet.degenerate(1e5)
    d = DriveParams(5, 5, -30, 10)
    c = deg.scalars()
    assert characteristic_radii(d, deg).r_pm ** 6 == pytest.approx(abs(c.c_pm) / abs(d.delta_sum), rel=1e-12)


def test_peak_radius_scan(ch, ice_drive):
    rad = characteristic_radii(ice_drive, ch)
    rs = np.geomspace(1, 10, 4000)
    w = [abs(tilde_w(r, ice_drive, ch)[0]) for r in rs]
    assert rs[int(np.argmax(w))] == pytest.approx(rad.r1_max, rel=5e-3)
    assert rad.w_pp_peak == pytest.approx(tilde_w(rad.r1_max, ice_drive, ch)[0].real, rel=1e-14)


def test_gamma_eff():
    tau = 133e-6
    assert gamma_eff(5, 50, tau) == 2.5e-3 / tau
    assert gamma_eff(0, 50, tau) == 0.0
    assert gamma_eff(5, 100, tau) == pytest.approx(gamma_eff(5, 50, tau) / 4, rel=1e-15)
    with pytest.raises(InvalidArgumentError):
        gamma_eff(5, 50, 0)
    with pytest.raises(InvalidArgumentError):
        gamma_eff(5, 0, tau)


def test_decay_figure(ch, ice_drive):
    c = spin_couplings(PairGeometry(1.8), ice_drive, ch)
    fig = decay_figure_of_merit(ice_drive, 133e-6, c)
    assert fig.admixture_up == pytest.approx((2.5 / 100) ** 2)
    assert fig.gamma_eff == max(fig.gamma_up, fig.gamma_down)
    assert fig.j_over_gamma["j_z"] == pytest.approx(2 * math.pi * 1e6 * abs(c.j_z) / fig.gamma_eff)


def test_coupling_set_helpers():
    c = CouplingSet(1.0, 2.0, 3.0, 4.0)
    assert c.scaled(2).values() == (2.0, 4.0, 6.0, 8.0)
    assert CouplingSet.zero().as_array().tolist() == [0, 0, 0, 0]
