import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydspin import (
    BRANCHES,
    DOUBLE,
    DriveParams,
    InvalidArgumentError,
    PairGeometry,
    VdwChannelSet,
    bo_branches,
    bo_spectrum_closed_form,
    build_pair_hamiltonian,
    find_resonances,
    perturbation_parameter,
    validity_report,
    vdw_hamiltonian,
)
from rydspin.pair import divergence_radii, mixing_angle

detuning = st.floats(10, 200).flatmap(lambda x: st.sampled_from([x, -x]))
rabi = st.floats(0.1, 20)


@st.composite
def drives(draw):
    return DriveParams(draw(rabi), draw(rabi), draw(detuning), draw(detuning),
                       draw(st.floats(0, 2 * math.pi)), draw(st.floats(0, 2 * math.pi)))


def test_drive_validation():
    with pytest.raises(InvalidArgumentError):
        DriveParams(-1, 1, 1, 1)
    with pytest.raises(InvalidArgumentError):
        DriveParams(1, 1, float("inf"), 1)
    d = DriveParams(1, 2, -50, 50)
    assert d.delta_sum == 0 and d.beta == -1 and d.scaled_rabi(0.5).omega_m == 1


def test_hamiltonian_hermitian_and_decoupled(ch):
    d = DriveParams(0.0, 0.0, -30.0, 70.0)
    h = build_pair_hamiltonian(d, PairGeometry(2.0, 0.6, 0.3), ch)
    m = h.matrix
    assert np.abs(m - np.diag(np.diag(m))).max() == 0 or np.allclose(m, m.conj().T)
    # double block of the decoupled pair: vdW eigenvalues shifted by detunings
    shifts = np.array([-2 * d.delta_p, -d.delta_sum, -d.delta_sum, -2 * d.delta_m])
    h2 = h.block(2)
    want = vdw_hamiltonian(PairGeometry(2.0, 0.6, 0.3), ch) + np.diag(shifts)
    assert np.abs(h2 - want).max() <= 1e-12 * np.abs(want).max()
    assert np.abs(h.block(0, 1)).max() == 0


def test_large_distance_limits(ch, fig4_drive):
    h = build_pair_hamiltonian(fig4_drive, 1e4, ch)
    ev = np.sort(np.linalg.eigvalsh(h.block(2)))
    d = fig4_drive
    want = np.sort([-2 * d.delta_p, -d.delta_sum, -d.delta_sum, -2 * d.delta_m])
    assert np.abs(ev - want).max() <= 1e-9


@settings(max_examples=30, deadline=None)
@given(drives(), st.floats(0.8, 12), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_spectrum_gauge_invariance(d, r, theta, phi):
    ch = VdwChannelSet(-60000, -190900, 179100, 179100)
    ref = build_pair_hamiltonian(DriveParams(d.omega_p, d.omega_m, d.delta_p, d.delta_m), PairGeometry(r, theta), ch)
    ev0 = ref.eigvalsh()
    scale = np.abs(ev0).max()
    ev1 = build_pair_hamiltonian(d, PairGeometry(r, theta, phi), ch).eigvalsh()
    assert np.abs(ev1 - ev0).max() <= 1e-12 * scale
    m = ref.matrix
    assert np.abs(m - m.conj().T).max() <= 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(drives(), st.floats(0.8, 12))
def test_trace_identity(d, r):
    ch = VdwChannelSet(-60000, -190900, 179100, 179100)
    c = ch.scalars()
    tr = np.trace(build_pair_hamiltonian(d, r, ch).block(2)).real
    # the four detuning shifts -2D+, -(D+ + D-) twice, -2D- add to -4(D+ + D-)
    want = 2 * c.c_pp / r**6 + 2 * c.c_pm / r**6 - 4 * d.delta_sum
    assert tr == pytest.approx(want, rel=1e-12, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(drives())
def test_closed_form_spectrum_matches_numeric(d):
    ch = VdwChannelSet(-60000, -190900, 179100, 179100)
    for r in np.geomspace(1, 10, 50):
        bo = bo_spectrum_closed_form(r, d, ch)
        h2 = build_pair_hamiltonian(d, r, ch).block(2)
        scale = max(1.0, np.abs(bo.energies).max())
        assert np.abs(np.sort(bo.energies) - np.linalg.eigvalsh(h2)).max() <= 1e-10 * scale
        resid = h2 @ bo.states - bo.states * bo.energies
        assert np.abs(resid).max() <= 1e-10 * scale


def test_closed_form_labels_and_asymptotes(ch, ice_drive):
    bo = bo_spectrum_closed_form(1e3, ice_drive, ch)
    d = ice_drive
    assert bo.energy("++") == pytest.approx(-2 * d.delta_p, abs=1e-9)
    assert bo.energy("--") == pytest.approx(-2 * d.delta_m, abs=1e-9)
    assert bo.energy("+-") == pytest.approx(-d.delta_sum, abs=1e-9)
    assert bo.energy("-+") == pytest.approx(-d.delta_sum, abs=1e-9)


def test_mixing_angle():
    assert mixing_angle(0.0, 0.0) == 0.0
    assert mixing_angle(0.0, -3.0) == -math.pi / 4
    assert math.tan(2 * mixing_angle(2.0, 1.0)) == pytest.approx(0.5)
    bo = bo_spectrum_closed_form(2.0, DriveParams(1, 1, -50, 50), VdwChannelSet.degenerate(1e5))
    assert bo.chi == 0.0
    assert np.array_equal(np.abs(bo.states[:, 0]), [1, 0, 0, 0])


def test_branch_tracking_matches_closed_form(ch, ice_drive):
    rhos = np.geomspace(0.8, 12, 300)
    e, s = bo_branches(rhos, ice_drive, ch)
    closed = np.array([[bo_spectrum_closed_form(r, ice_drive, ch).energy(b) for b in BRANCHES] for r in rhos])
    assert np.abs(e - closed).max() <= 1e-9 * np.abs(closed).max()


def test_branch_tracking_continuous_off_axis(ch, fig4_drive):
    rhos = np.geomspace(1, 10, 800)
    e, _ = bo_branches(rhos, fig4_drive, ch, theta=0.3)
    assert np.all(np.isfinite(e))
    # labels follow eigenvectors, so steps shrink with the grid spacing
    steps = np.abs(np.diff(e, axis=0))
    e2, _ = bo_branches(np.geomspace(1, 10, 1600), fig4_drive, ch, theta=0.3)
    steps2 = np.abs(np.diff(e2, axis=0))
    assert steps2.max() < 0.75 * steps.max()
    with pytest.raises(InvalidArgumentError):
        bo_branches([1.0, -1.0], fig4_drive, ch)


def test_no_resonances_symmetric_drive(ch):
    assert find_resonances(DriveParams(10, 10, 50, -50), ch, math.pi / 2) == []


def test_resonances_on_axis(ch, fig4_drive):
    res = find_resonances(fig4_drive, ch, 0.0)
    assert len(res) >= 1
    radii = sorted(r.rho for r in res)
    assert radii[0] == pytest.approx(2.1119, abs=1e-3)
    assert radii[-1] == pytest.approx(4.0099, abs=1e-3)
    scale = abs(fig4_drive.delta_p) + abs(fig4_drive.delta_m)
    assert all(abs(r.energy) <= 1e-8 * scale for r in res)


def test_no_vdw_no_resonances(fig4_drive):
    assert find_resonances(fig4_drive, VdwChannelSet(0, 0, 0, 0), 0.4) == []


def test_perpendicular_resonances_equal_divergence_radii(ch):
    d = DriveParams(9, 3, -45, 55)
    res = find_resonances(d, ch, math.pi / 2, (1, 10))
    div = divergence_radii(d, ch)
    assert sorted(r.rho for r in res) == pytest.approx(sorted(div["pp"] + div["pm"]), rel=1e-9)


def test_validity_sample(ch, ice_drive):
    rep = validity_report(ice_drive, ch)
    assert rep.alpha1_sq == pytest.approx(1.41, abs=0.005)
    assert rep.alpha2_sq == pytest.approx(0.46, abs=0.005)
    assert rep.marginal_pm and rep.regular_pm
    assert rep.ratio_negative and not rep.sum_negative
    assert rep.valid


def test_validity_zero_drive(ch):
    rep = validity_report(DriveParams(0, 0, -50, 50), ch)
    assert rep.perturbation_parameter == 0.0 and rep.valid


def test_validity_flags_divergence(ch):
    rep = validity_report(DriveParams(9, 3, -45, 55), ch)
    assert rep.divergences_in_range and not rep.valid


def test_perturbation_parameter_scales_with_rabi(ch, ice_drive):
    geoms = [PairGeometry(r) for r in np.geomspace(1, 10, 20)]
    e1 = perturbation_parameter(ice_drive, ch, geoms)
    e2 = perturbation_parameter(ice_drive.scaled_rabi(0.5), ch, geoms)
    assert e2 == pytest.approx(e1 / 2, rel=1e-12)
    assert e1 == pytest.approx(0.2, rel=1e-12)


def test_double_indices():
    assert list(DOUBLE) == [10, 11, 14, 15]
