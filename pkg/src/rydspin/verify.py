"""Oracle checks: closed forms against brute-force numerics for one parameter set."""

from __future__ import annotations

import math

import numpy as np

from .dressing import characteristic_radii, dressed_potentials, spin_couplings
from .exceptions import PoleError, ResonanceError
from .pair import DriveParams, bo_spectrum_closed_form, build_pair_hamiltonian, find_resonances, perturbation_parameter
from .vdw import PairGeometry, VdwChannelSet, channel_d_matrix, d0_matrix, reconstruct_d_matrices, scalar_coefficients

__all__ = ["coupling_deviation", "halving_study", "run_checks", "REFERENCE_D0"]

# D0 at theta = 0 and theta = pi/2 (phi = 0), times 81
REFERENCE_D0 = {
    0.0: np.array([[14, 0, 0, 0], [0, 10, -8, 0], [0, -8, 10, 0], [0, 0, 0, 14]], dtype=float),
    math.pi / 2: np.array([[8, 0, 0, 6], [0, 16, -2, 0], [0, -2, 16, 0], [6, 0, 0, 8]], dtype=float),
}


def _jmat(rhos, drive, ch, method, theta=math.pi / 2):
    return np.array(
        [spin_couplings(PairGeometry(float(r), theta), drive, ch, method=method, check_validity=False).as_array()
         for r in rhos]
    )


def coupling_deviation(rhos, drive: DriveParams, ch: VdwChannelSet, *, reference: str = "exact",
                       candidate: str = "closed") -> float:
    """max |J_candidate - J_reference| / max |J_reference| over the grid and all four couplings."""
    a = _jmat(rhos, drive, ch, candidate)
    b = _jmat(rhos, drive, ch, reference)
    scale = float(np.abs(b).max())
    return float(np.abs(a - b).max() / scale) if scale > 0 else float(np.abs(a - b).max())


def halving_study(rhos, drive: DriveParams, ch: VdwChannelSet) -> dict:
    """Closed-form deviation from the all-order result before and after halving both Rabi frequencies."""
    d1 = coupling_deviation(rhos, drive, ch)
    half = drive.scaled_rabi(0.5)
    d2 = coupling_deviation(rhos, half, ch)
    geoms = [PairGeometry(float(r)) for r in rhos]
    e1 = perturbation_parameter(drive, ch, geoms)
    e2 = perturbation_parameter(half, ch, geoms)
    return {
        "deviation": d1, "eps": e1, "bound": 5 * e1**2,
        "deviation_half": d2, "eps_half": e2, "bound_half": 5 * e2**2,
        "ratio": d1 / d2 if d2 > 0 else math.inf,
    }


def _check(name, value, limit, ok, **extra):
    d = {"name": name, "value": value, "limit": limit, "pass": bool(ok)}
    d.update(extra)
    return d


def run_checks(drive: DriveParams, ch: VdwChannelSet, rho_range=(1.0, 10.0), n_rho: int = 50) -> dict:
    """All closed-form vs numeric checks; returns a JSON-ready dict with an overall ``pass``."""
    checks = []
    dev = max(float(np.abs(d0_matrix(th, 0.0) * 81 - ref).max()) for th, ref in REFERENCE_D0.items())
    checks.append(_check("d0_special_orientations", dev, 1e-14, dev <= 1e-14))

    dev = 0.0
    for th in np.linspace(0, math.pi, 5):
        for ph in np.linspace(0, 2 * math.pi, 5):
            rec = reconstruct_d_matrices(th, ph)
            dev = max(dev, max(float(np.abs(rec[k] - channel_d_matrix(k, th, ph)).max()) for k in rec))
    checks.append(_check("wigner_reconstruction", dev, 1e-12, dev <= 1e-12))

    c = scalar_coefficients(ch)
    dev = abs(c.w_pm + c.w_pp / 3) / max(abs(c.w_pp), 1e-300) if c.w_pp else abs(c.w_pm)
    checks.append(_check("w_pm_equals_minus_w_pp_over_3", dev, 1e-15, dev <= 1e-15))

    rhos = np.geomspace(rho_range[0], rho_range[1], n_rho)
    dev = 0.0
    for r in rhos:
        cf = np.sort(bo_spectrum_closed_form(r, drive, ch).energies)
        num = np.linalg.eigvalsh(build_pair_hamiltonian(drive, r, ch).block(2))
        dev = max(dev, float(np.abs(cf - num).max() / max(1.0, np.abs(num).max())))
    checks.append(_check("bo_closed_vs_numeric", dev, 1e-10, dev <= 1e-10))

    report = {"checks": checks, "resonances": [], "warnings": []}
    res = find_resonances(drive, ch, math.pi / 2, rho_range)
    report["resonances"] = [{"rho_um": x.rho, "branch": x.branch} for x in res]
    if res:
        report["warnings"].append("Born-Oppenheimer zero crossings inside the verification range")

    if drive.omega_p > 0 and drive.omega_m > 0:
        try:
            dev = coupling_deviation(rhos, drive, ch, reference="fourth_order")
            checks.append(_check("closed_vs_fourth_order", dev, 1e-10, dev <= 1e-10))
            hs = halving_study(rhos, drive, ch)
            checks.append(_check("closed_vs_exact", hs["deviation"], hs["bound"], hs["deviation"] <= hs["bound"],
                                 eps=hs["eps"]))
            checks.append(_check("omega_halving_ratio", hs["ratio"], [3.0, 5.0], 3.0 <= hs["ratio"] <= 5.0,
                                 deviation_half=hs["deviation_half"]))
        except (PoleError, ResonanceError) as exc:
            report["warnings"].append(f"elimination checks skipped: {exc}")

        jm = _jmat(rhos, drive, ch, "closed")
        if drive.delta_p == -drive.delta_m:
            val = float(np.abs(jm[:, 2]).max())
            lim = 1e-10 * float(np.abs(jm[:, 3]).max())
            checks.append(_check("flip_flop_cancellation", val, lim, val <= lim))
        radii = characteristic_radii(drive, ch)
        for name, col, target in (("w_pp_peak_radius", 3, radii.r1_max), ("w_pm_peak_radius", 2, radii.r2_max)):
            if target is None or not rho_range[0] < target < rho_range[1]:
                continue
            fine = np.geomspace(rho_range[0], rho_range[1], 4000)
            try:
                vals = np.array([abs(getattr(dressed_potentials(r, drive, ch), "w_pp" if col == 3 else "w_pm"))
                                 for r in fine])
            except PoleError as exc:
                report["warnings"].append(f"{name} skipped: {exc}")
                continue
            got = float(fine[int(np.argmax(vals))])
            rel = abs(got - target) / target
            checks.append(_check(name, rel, 5e-3, rel <= 5e-3, scanned=got, closed_form=target))
    report["pass"] = all(ch_["pass"] for ch_ in checks)
    return report
