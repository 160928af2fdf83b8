"""Fourth-order dressed ground-state interactions and the derived spin couplings.

Ground pair basis ``(g+g+, g+g-, g-g+, g-g-)``; ``g+`` is spin up.  The
spin couplings follow the bond Hamiltonian written in :mod:`rydspin.lattice`::

    J_par = (V_pp - V_mm) / 4
    J_z   = (V_mm - 2 V_pm + V_pp) / 4
    J_pm  = 2 W_pm          (element <g+g-|H|g-g+>)
    J_pp  = 2 W_pp          (element <g+g+|H|g-g->)

with the single-atom light shifts removed from the V's by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _validation as V
from .exceptions import InvalidArgumentError, PoleError, ResonanceError
from .pair import (
    DOUBLE,
    GROUND,
    SINGLE,
    DriveParams,
    PairGeometry,
    _geom,
    build_pair_hamiltonian,
    divergence_radii,
    perturbation_parameter,
)
from .vdw import VdwChannelSet, scalar_coefficients

__all__ = [
    "DressedPotentials",
    "CouplingSet",
    "CharacteristicRadii",
    "DecayFigure",
    "light_shifts",
    "exact_light_shifts",
    "dressed_potentials",
    "tilde_v",
    "tilde_w",
    "spin_couplings",
    "couplings_from_matrix",
    "relative_height",
    "characteristic_radii",
    "numeric_effective_hamiltonian",
    "decay_figure_of_merit",
    "gamma_eff",
    "scan_couplings",
    "POLE_WINDOW",
]

POLE_WINDOW = 1e-6
COUPLING_NAMES = ("j_z", "j_par", "j_pm", "j_pp")
HEIGHT_KINDS = ("v_pp", "v_mm", "v_pm", "w_pp", "w_pm")


@dataclass(frozen=True)
class DressedPotentials:
    """Dressed matrix elements in 2pi*MHz; ``light_shift_*`` are the r -> infinity values."""

    v_pp: float
    v_mm: float
    v_pm: float
    w_pp: complex
    w_pm: complex
    light_shift_pp: float
    light_shift_mm: float
    light_shift_pm: float

    def absorbed(self) -> tuple[float, float, float]:
        return (
            self.v_pp - self.light_shift_pp,
            self.v_mm - self.light_shift_mm,
            self.v_pm - self.light_shift_pm,
        )

    @classmethod
    def from_matrix(cls, h: np.ndarray, shifts) -> DressedPotentials:
        return cls(
            float(h[0, 0].real), float(h[3, 3].real), float(h[1, 1].real),
            complex(h[0, 3]), complex(h[1, 2]), *shifts,
        )


@dataclass(frozen=True)
class CouplingSet:
    """Spin couplings of one bond, 2pi*MHz.

    ``j_pp`` is complex only when a bond-direction phase is kept; otherwise
    all four are real.
    """

    j_z: float
    j_par: float
    j_pm: float
    j_pp: complex | float
    geometry: PairGeometry | None = None
    valid: bool = True
    diagnostic: str = ""
    eps: float = 0.0

    def values(self) -> tuple:
        return (self.j_z, self.j_par, self.j_pm, self.j_pp)

    def as_array(self) -> np.ndarray:
        return np.array([self.j_z, self.j_par, self.j_pm, np.real(self.j_pp)], dtype=float)

    def scaled(self, k: float) -> CouplingSet:
        return CouplingSet(self.j_z * k, self.j_par * k, self.j_pm * k, self.j_pp * k,
                           self.geometry, self.valid, self.diagnostic, self.eps)

    @classmethod
    def zero(cls, geometry=None) -> CouplingSet:
        return cls(0.0, 0.0, 0.0, 0.0, geometry)


# -- closed forms -----------------------------------------------------------


def light_shifts(drive: DriveParams) -> tuple[float, float, float]:
    """Fourth-order pair light shifts (V_pp, V_mm, V_pm) at infinite separation."""
    om, op, dm, dp = drive.omega_m, drive.omega_p, drive.delta_m, drive.delta_p
    s_up = _single4(om, dm)
    s_dn = _single4(op, dp)
    return 2 * s_up, 2 * s_dn, s_up + s_dn


def _single4(omega, delta):
    if omega == 0:
        return 0.0
    if delta == 0:
        raise InvalidArgumentError("driven transition with zero detuning")
    return omega**2 / (4 * delta) - omega**4 / (16 * delta**3)


def _single_exact(omega, delta):
    # lower-magnitude eigenvalue of [[0, W/2], [W/2, -delta]]
    if omega == 0:
        return 0.0
    sgn = 1.0 if delta >= 0 else -1.0
    return 0.5 * (-delta + sgn * math.hypot(delta, omega))


def exact_light_shifts(drive: DriveParams) -> tuple[float, float, float]:
    s_up = _single_exact(drive.omega_m, drive.delta_m)
    s_dn = _single_exact(drive.omega_p, drive.delta_p)
    return 2 * s_up, 2 * s_dn, s_up + s_dn


def _check_poles(rho, radii, what):
    for rd in radii:
        if abs(rho - rd) <= POLE_WINDOW * rd:
            raise PoleError(f"{what} evaluated at separation {rho:.12g} um", rd)


def dressed_potentials(rho: float, drive: DriveParams, ch: VdwChannelSet, *, check_poles: bool = True) -> DressedPotentials:
    """Closed forms for atoms in the plane normal to the beams, light shifts kept."""
    rho = V.positive("rho", rho)
    drive.require_detunings()
    c = scalar_coefficients(ch)
    op, om, dp, dm = drive.omega_p, drive.omega_m, drive.delta_p, drive.delta_m
    if check_poles:
        div = divergence_radii(drive, ch)
        _check_poles(rho, div["pp"], "dressed potential")
        _check_poles(rho, div["pm"], "mixed dressed potential")
    r6 = rho**6
    v, w, v2, w2 = c.c_pp / r6, c.w_pp / r6, c.c_pm / r6, c.w_pm / r6
    ds = dp + dm
    den = w * w - (v - 2 * dp) * (v - 2 * dm)
    v_pp = om**2 / (2 * dm) - om**4 / (4 * dm**3) + om**4 / (4 * dm**2) * (v - 2 * dp) / den
    v_mm = op**2 / (2 * dp) - op**4 / (4 * dp**3) + op**4 / (4 * dp**2) * (v - 2 * dm) / den
    w_pp = -(om**2) * op**2 / (4 * dm * dp) * w / den
    k = om**2 * op**2 / (16 * dm**2 * dp**2)
    mixed_den = (ds - v2) ** 2 - w2 * w2
    if ds == 0:
        v_mix, w_pm = 0.0, 0.0
    else:
        v_mix = k * ds * ds * (ds - v2) / mixed_den
        w_pm = k * ds * ds * w2 / mixed_den
    v_pm = (
        om**2 / (4 * dm) + op**2 / (4 * dp) - om**4 / (16 * dm**3) - op**4 / (16 * dp**3)
        - k * dp - k * dm + v_mix
    )
    ls = light_shifts(drive)
    return DressedPotentials(v_pp, v_mm, v_pm, complex(w_pp), complex(w_pm), *ls)


def tilde_v(rho: float, drive: DriveParams, ch: VdwChannelSet, *, absorbed: bool = False) -> tuple[float, float, float]:
    """(V_pp, V_mm, V_pm); with ``absorbed=True`` the r -> infinity light shifts are removed."""
    d = dressed_potentials(rho, drive, ch)
    return d.absorbed() if absorbed else (d.v_pp, d.v_mm, d.v_pm)


def tilde_w(
    rho: float, drive: DriveParams, ch: VdwChannelSet, *, phase_pp: float = 0.0, phase_pm: float = 0.0
) -> tuple[complex, complex]:
    """(W_pp, W_pm) with optional phase factors exp(i*phase)."""
    d = dressed_potentials(rho, drive, ch)
    return d.w_pp * np.exp(1j * phase_pp), d.w_pm * np.exp(1j * phase_pm)


def bond_phase(geom: PairGeometry, drive: DriveParams) -> float:
    """Phase of <g+g+|H|g-g-> relative to the gauge-fixed closed form."""
    return 2.0 * (geom.phi - drive.phi_p + drive.phi_m)


def couplings_from_matrix(h: np.ndarray, shifts=(0.0, 0.0, 0.0)) -> tuple[float, float, float, complex]:
    """(J_z, J_par, J_pm, J_pp) from an effective ground-pair matrix; J_pp keeps its phase."""
    vpp = float(h[0, 0].real) - shifts[0]
    vmm = float(h[3, 3].real) - shifts[1]
    vpm = float(h[1, 1].real) - shifts[2]
    jz = (vmm - 2 * vpm + vpp) / 4
    jpar = (vpp - vmm) / 4
    return jz, jpar, float(2 * h[1, 2].real), complex(2 * h[0, 3])


def spin_couplings(
    geom,
    drive: DriveParams,
    ch: VdwChannelSet,
    *,
    method: str = "auto",
    light_shifts_mode: str = "absorbed",
    keep_phase: bool = False,
    eps_max: float = 1.0,
    check_validity: bool = True,
) -> CouplingSet:
    """Spin couplings for one bond.

    ``method``: ``"auto"`` uses the closed forms for perpendicular bonds and
    the fourth-order elimination otherwise; ``"closed"``, ``"fourth_order"``
    and ``"exact"`` force a path.  ``light_shifts_mode`` is ``"absorbed"`` or
    ``"raw"``.
    """
    geom = _geom(geom)
    if light_shifts_mode not in ("absorbed", "raw"):
        raise InvalidArgumentError(f"light_shifts_mode must be 'absorbed' or 'raw', got {light_shifts_mode!r}")
    if method not in ("auto", "closed", "fourth_order", "exact"):
        raise InvalidArgumentError(f"unknown method {method!r}")
    if drive.omega_p == 0 and drive.omega_m == 0:
        return CouplingSet.zero(geom)
    if method == "auto":
        method = "closed" if geom.is_perpendicular else "fourth_order"
    if method == "closed":
        if not geom.is_perpendicular:
            raise InvalidArgumentError("closed forms hold only for bonds perpendicular to the beams")
        d = dressed_potentials(geom.r, drive, ch)
        h = np.zeros((4, 4), dtype=complex)
        h[0, 0], h[3, 3], h[1, 1], h[2, 2] = d.v_pp, d.v_mm, d.v_pm, d.v_pm
        h[0, 3] = d.w_pp * np.exp(1j * bond_phase(geom, drive))
        h[1, 2] = d.w_pm
        shifts = light_shifts(drive)
    else:
        h = numeric_effective_hamiltonian(geom, drive, ch, method=method)
        shifts = exact_light_shifts(drive) if method == "exact" else light_shifts(drive)
    if light_shifts_mode == "raw":
        shifts = (0.0, 0.0, 0.0)
    jz, jpar, jpm, jpp = couplings_from_matrix(h, shifts)
    if not keep_phase:
        # rotate the bond-direction and laser phases away; what is left is real
        jpp = (jpp * np.exp(-1j * bond_phase(geom, drive))).real
    valid, diag, eps = True, "", 0.0
    if check_validity:
        eps = perturbation_parameter(drive, ch, [geom])
        if not eps < eps_max:
            valid = False
            diag = f"perturbation parameter {eps:.4g} exceeds {eps_max:g}"
    return CouplingSet(jz, jpar, jpm, jpp, geom, valid, diag, eps)


# -- dimensionless forms ----------------------------------------------------


def relative_height(kind: str, rho: float, drive: DriveParams, ch: VdwChannelSet) -> float:
    """Dimensionless potential height (X - X_inf) / V0 with V0 = Omega-^4 / (8 Delta-^3).

    ``kind`` is one of ``v_pp``, ``v_mm``, ``v_pm``, ``w_pp``, ``w_pm``.
    Written in terms of alpha1, alpha2, beta and the reduced separations
    u = sigma (r/R1)^6, t = (1+beta) sigma' (r/R2)^6 / 2.
    """
    if kind not in HEIGHT_KINDS:
        raise InvalidArgumentError(f"kind must be one of {HEIGHT_KINDS}, got {kind!r}")
    rho = V.positive("rho", rho)
    drive.require_detunings()
    if drive.omega_m == 0:
        raise InvalidArgumentError("relative heights are normalized by Omega-, which is zero")
    c = scalar_coefficients(ch)
    div = divergence_radii(drive, ch)
    _check_poles(rho, div["pp" if kind in ("v_pp", "v_mm", "w_pp") else "pm"], f"relative height {kind}")
    dm = drive.delta_m
    beta = drive.delta_p / dm
    ratio = drive.omega_p / drive.omega_m
    sgn_dm = 1.0 if dm > 0 else -1.0
    if kind in ("v_pp", "v_mm", "w_pp"):
        a1 = c.w_pp / c.c_pp
        sigma = (1.0 if c.c_pp > 0 else -1.0) * sgn_dm
        r1_6 = abs(c.c_pp) / (2 * abs(dm))
        u = sigma * rho**6 / r1_6
        den = a1 * a1 - (1 - u) * (1 - beta * u)
        if kind == "v_pp":
            return (1 - a1 * a1 - beta * u) / den
        if kind == "v_mm":
            return ratio**4 / beta**3 * (1 - a1 * a1 - u) / den
        return -(ratio**2) / beta * a1 * u / den
    a2 = c.w_pm / c.c_pm
    sigma_p = (1.0 if c.c_pm > 0 else -1.0) * sgn_dm
    r2_6 = abs(c.c_pm) / (2 * abs(dm))
    t = 0.5 * (1 + beta) * sigma_p * rho**6 / r2_6
    pref = (1 + beta) / (2 * beta * beta) * ratio**2
    den = (t - 1) ** 2 - a2 * a2
    if kind == "v_pm":
        return pref * (t - 1 + a2 * a2) / den
    return pref * a2 * t / den


# -- characteristic radii ---------------------------------------------------


@dataclass
class CharacteristicRadii:
    """Length scales of the dressed interactions (um); None when the formula has no real value."""

    r1: float
    r2: float
    r_c: float | None
    r_pm: float | None
    r_pp: float | None
    r1_max: float | None
    r2_max: float | None
    r_div: list = field(default_factory=list)
    r_div_prime: list = field(default_factory=list)
    w_pp_peak: float | None = None
    w_pm_peak: float | None = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _root6(x):
    return x ** (1 / 6) if x is not None and x > 0 and math.isfinite(x) else None


def characteristic_radii(drive: DriveParams, ch: VdwChannelSet) -> CharacteristicRadii:
    """Peak, crossover and divergence radii for atoms in the plane normal to the beams."""
    c = scalar_coefficients(ch)
    dp, dm = drive.delta_p, drive.delta_m
    ds = dp + dm
    r1_6 = abs(c.c_pp) / (2 * abs(dm)) if dm else math.inf
    r2_6 = abs(c.c_pm) / (2 * abs(dm)) if dm else math.inf
    r_c = _root6(abs(c.c_pp) / (2 * abs(dp))) if dp else None
    r_pm = _root6(math.sqrt(c.c_pm**2 - c.w_pm**2) / abs(ds)) if ds and c.c_pm**2 >= c.w_pm**2 else None
    arg = (c.c_pp**2 - c.w_pp**2) / (4 * dp * dm) if dp and dm else -1.0
    r_pp = _root6(math.sqrt(arg)) if arg > 0 else None
    # equivalently sqrt((1 - alpha1^2)/beta) R1^6 and sqrt(1 - alpha2^2) |c_pm| / |Delta+ + Delta-|
    r1_max = r_pp
    r2_max = r_pm
    div = divergence_radii(drive, ch)
    w_pp_peak = w_pm_peak = None
    if dp and dm:
        if r1_max is not None:
            try:
                w_pp_peak = dressed_potentials(r1_max, drive, ch).w_pp.real
            except PoleError:
                w_pp_peak = None
        if r2_max is not None:
            try:
                w_pm_peak = dressed_potentials(r2_max, drive, ch).w_pm.real
            except PoleError:
                w_pm_peak = None
    return CharacteristicRadii(
        r1=_root6(r1_6) or math.inf, r2=_root6(r2_6) or math.inf, r_c=r_c, r_pm=r_pm, r_pp=r_pp,
        r1_max=r1_max, r2_max=r2_max, r_div=div["pp"], r_div_prime=div["pm"],
        w_pp_peak=w_pp_peak, w_pm_peak=w_pm_peak,
    )


# -- numeric elimination ----------------------------------------------------


def _inverse_on(h: np.ndarray, rhs: np.ndarray, left: np.ndarray, what: str) -> np.ndarray:
    """h^-1 @ rhs, tolerating singular directions that ``left`` and ``rhs`` never reach."""
    w, u = np.linalg.eigh(h)
    scale = max(float(np.abs(w).max()), 1e-300)
    proj_r = u.conj().T @ rhs
    proj_l = left @ u
    tiny = np.abs(w) <= 1e-12 * scale
    if np.any(tiny):
        bright = np.linalg.norm(proj_r, axis=1) * np.linalg.norm(proj_l, axis=0)
        ref = max(float(bright.max()), 1e-300)
        for k in np.flatnonzero(tiny):
            if bright[k] > 1e-10 * ref:
                raise ResonanceError(f"{what} block is singular on a laser-coupled state", float(w[k]))
        inv = np.where(tiny, 0.0, 1.0 / np.where(tiny, 1.0, w))
    else:
        inv = 1.0 / w
    return u @ (inv[:, None] * proj_r)


def numeric_effective_hamiltonian(geom, drive: DriveParams, ch: VdwChannelSet, *, method: str = "fourth_order") -> np.ndarray:
    """Effective 4x4 ground-pair Hamiltonian from the full 16x16 pair problem.

    ``fourth_order`` evaluates the block-resolvent expansion

        H0 - B + (A B + B A)/2 - O1 H1^-1 O2 H2^-1 O2^+ H1^-1 O1^+,
        B = O1 H1^-1 O1^+,  A = O1 H1^-2 O1^+,

    with O1, O2 the laser blocks linking zero to one and one to two
    excitations.  ``exact`` returns the block-diagonalized (des Cloizeaux)
    Hamiltonian of the four dressed ground states, to all orders.
    """
    geom = _geom(geom)
    h = build_pair_hamiltonian(drive, geom, ch).matrix
    if method == "fourth_order":
        h0 = h[np.ix_(GROUND, GROUND)]
        o1 = h[np.ix_(GROUND, SINGLE)]
        h1 = h[np.ix_(SINGLE, SINGLE)]
        o2 = h[np.ix_(SINGLE, DOUBLE)]
        h2 = h[np.ix_(DOUBLE, DOUBLE)]
        if np.any(np.abs(np.diag(h1)) == 0) and np.abs(o1).max() > 0:
            d = np.diag(h1)
            k = int(np.argmin(np.abs(d)))
            raise ResonanceError("singly excited block is singular", float(d[k].real))
        h1i_o1d = _inverse_on(h1, o1.conj().T, o1, "singly excited")
        b = o1 @ h1i_o1d
        a = h1i_o1d.conj().T @ h1i_o1d
        t = h1i_o1d.conj().T @ o2  # O1 H1^-1 O2
        four = t @ _inverse_on(h2, t.conj().T, t, "doubly excited")
        heff = h0 - b + 0.5 * (a @ b + b @ a) - four
        return 0.5 * (heff + heff.conj().T)
    if method == "exact":
        w, u = np.linalg.eigh(h)
        weight = np.sum(np.abs(u[GROUND, :]) ** 2, axis=0)
        pick = np.sort(np.argsort(-weight, kind="stable")[:4])
        if weight[pick].min() <= 0.5:
            k = pick[int(np.argmin(weight[pick]))]
            raise ResonanceError("dressed ground states are strongly mixed with Rydberg pairs", float(w[k]))
        x = u[np.ix_(GROUND, pick)]
        s = x @ x.conj().T
        sw, su = np.linalg.eigh(s)
        s_ih = su @ np.diag(sw**-0.5) @ su.conj().T
        heff = s_ih @ x @ np.diag(w[pick]) @ x.conj().T @ s_ih
        return 0.5 * (heff + heff.conj().T)
    raise InvalidArgumentError(f"method must be 'fourth_order' or 'exact', got {method!r}")


# -- decay ----------------------------------------------------------------


def gamma_eff(omega: float, delta: float, lifetime_s: float) -> float:
    """Ground-state decay rate (1/s) from the Rydberg admixture (Omega / 2 Delta)^2."""
    lifetime_s = V.positive("lifetime_s", lifetime_s)
    if omega == 0:
        return 0.0
    if delta == 0:
        raise InvalidArgumentError("zero detuning: admixture undefined")
    return omega * omega / (4 * delta * delta) / lifetime_s


@dataclass(frozen=True)
class DecayFigure:
    admixture_up: float
    admixture_down: float
    gamma_up: float
    gamma_down: float
    gamma_eff: float
    j_over_gamma: dict


def decay_figure_of_merit(drive: DriveParams, lifetime_s: float, couplings: CouplingSet | None = None) -> DecayFigure:
    """Dressed-state decay rates (1/s) and |J| / Gamma_eff for an optional reference bond.

    Spin up (g+) is dressed by Omega-, spin down (g-) by Omega+.  Coupling
    energies in 2pi*MHz are converted to angular frequency before the ratio.
    """
    g_up = gamma_eff(drive.omega_m, drive.delta_m, lifetime_s)
    g_dn = gamma_eff(drive.omega_p, drive.delta_p, lifetime_s)
    ad_up = g_up * lifetime_s
    ad_dn = g_dn * lifetime_s
    g = max(g_up, g_dn)
    ratios = {}
    if couplings is not None:
        for name, val in zip(COUPLING_NAMES, couplings.values()):
            ratios[name] = math.inf if g == 0 else 2 * math.pi * 1e6 * abs(val) / g
    return DecayFigure(ad_up, ad_dn, g_up, g_dn, g, ratios)


# -- scans ----------------------------------------------------------------


def scan_couplings(rhos, drive: DriveParams, ch: VdwChannelSet, *, theta: float = math.pi / 2, phi: float = 0.0,
                   method: str = "auto", eps_max: float = 1.0, **kw) -> list[CouplingSet]:
    """spin_couplings along a list of separations at fixed orientation; order preserved."""
    return [spin_couplings(PairGeometry(float(r), theta, phi), drive, ch, method=method, eps_max=eps_max, **kw)
            for r in rhos]
