"""Two-atom microscopic Hamiltonian and its Born-Oppenheimer surfaces.

Single-atom basis ``(g+, g-, r+, r-)``; the pair basis is the Kronecker
product with index ``4*i + j`` for atom i in state ``i`` and atom j in
state ``j``.  The laser drives ``g- <-> r+`` with (Omega+, Delta+, phi+) and
``g+ <-> r-`` with (Omega-, Delta-, phi-).  The doubly excited sector is
ordered like :data:`rydspin.vdw.PAIR_BASIS`.

Born-Oppenheimer branches carry the labels ``"++"``, ``"--"``, ``"+-"``,
``"-+"``.  They are assigned by continuation from large separation, where
``"++" -> -2 Delta+``, ``"--" -> -2 Delta-`` and both mixed branches go to
``-(Delta+ + Delta-)``.  ``"+-"`` is the exchange-symmetric mixed state and
``"-+"`` the antisymmetric one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment

from . import _validation as V
from .exceptions import InvalidArgumentError
from .vdw import PairGeometry, VdwChannelSet, scalar_coefficients, vdw_hamiltonian

__all__ = [
    "SINGLE_BASIS",
    "GROUND",
    "SINGLE",
    "DOUBLE",
    "BRANCHES",
    "DriveParams",
    "PairHamiltonian",
    "BoSpectrum",
    "Resonance",
    "ValidityReport",
    "build_pair_hamiltonian",
    "bo_spectrum_closed_form",
    "bo_branches",
    "find_resonances",
    "divergence_radii",
    "perturbation_parameter",
    "validity_report",
]

SINGLE_BASIS = ("g+", "g-", "r+", "r-")
PAIR_LABELS = tuple(a + b for a in SINGLE_BASIS for b in SINGLE_BASIS)
EXCITATION = np.array([(i >= 2) + (j >= 2) for i in range(4) for j in range(4)])
GROUND = np.flatnonzero(EXCITATION == 0)  # g+g+, g+g-, g-g+, g-g-
SINGLE = np.flatnonzero(EXCITATION == 1)
DOUBLE = np.flatnonzero(EXCITATION == 2)  # r+r+, r+r-, r-r+, r-r-
BRANCHES = ("++", "--", "+-", "-+")

_SQ2 = math.sqrt(0.5)
# columns: |++>, (|+-> + |-+>)/sqrt2, |-->, (|+-> - |-+>)/sqrt2
_EXCHANGE_BASIS = np.array(
    [[1, 0, 0, 0], [0, _SQ2, 0, _SQ2], [0, _SQ2, 0, -_SQ2], [0, 0, 1, 0]], dtype=complex
)


@dataclass(frozen=True)
class DriveParams:
    """Laser parameters, all in 2pi*MHz except the phases (rad)."""

    omega_p: float
    omega_m: float
    delta_p: float
    delta_m: float
    phi_p: float = 0.0
    phi_m: float = 0.0

    def __post_init__(self):
        for name in ("omega_p", "omega_m", "delta_p", "delta_m", "phi_p", "phi_m"):
            object.__setattr__(self, name, V.finite(name, getattr(self, name)))
        if self.omega_p < 0 or self.omega_m < 0:
            raise InvalidArgumentError(
                f"Rabi frequencies must be non-negative, got omega_p={self.omega_p}, omega_m={self.omega_m}"
            )

    @property
    def delta_sum(self) -> float:
        return self.delta_p + self.delta_m

    @property
    def delta_diff(self) -> float:
        return self.delta_p - self.delta_m

    @property
    def beta(self) -> float:
        return self.delta_p / self.delta_m if self.delta_m else math.copysign(math.inf, self.delta_p or 1.0)

    def scaled_rabi(self, factor: float) -> DriveParams:
        return replace(self, omega_p=self.omega_p * factor, omega_m=self.omega_m * factor)

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("omega_p", "omega_m", "delta_p", "delta_m", "phi_p", "phi_m")}

    def require_detunings(self) -> None:
        if self.delta_p == 0 or self.delta_m == 0:
            raise InvalidArgumentError(
                f"detunings must be nonzero, got delta_p={self.delta_p}, delta_m={self.delta_m}"
            )


def single_atom_hamiltonian(drive: DriveParams) -> np.ndarray:
    h = np.zeros((4, 4), dtype=complex)
    h[2, 2] = -drive.delta_p
    h[3, 3] = -drive.delta_m
    h[1, 2] = 0.5 * drive.omega_p * np.exp(1j * drive.phi_p)
    h[0, 3] = 0.5 * drive.omega_m * np.exp(1j * drive.phi_m)
    h[2, 1] = np.conj(h[1, 2])
    h[3, 0] = np.conj(h[0, 3])
    return h


@dataclass(frozen=True)
class PairHamiltonian:
    matrix: np.ndarray = field(repr=False)
    excitation: np.ndarray = field(default_factory=lambda: EXCITATION.copy(), repr=False)
    labels: tuple = PAIR_LABELS

    def block(self, n: int, m: int | None = None) -> np.ndarray:
        rows = np.flatnonzero(self.excitation == n)
        cols = rows if m is None else np.flatnonzero(self.excitation == m)
        return self.matrix[np.ix_(rows, cols)]

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def _geom(geom) -> PairGeometry:
    if isinstance(geom, PairGeometry):
        return geom
    if np.isscalar(geom):
        return PairGeometry(float(geom))
    raise InvalidArgumentError(f"expected a PairGeometry or a separation, got {geom!r}")


def _double_block(drive: DriveParams, geom: PairGeometry, ch: VdwChannelSet) -> np.ndarray:
    det = np.diag([-2 * drive.delta_p, -drive.delta_sum, -drive.delta_sum, -2 * drive.delta_m])
    return vdw_hamiltonian(geom, ch) + det


def build_pair_hamiltonian(drive: DriveParams, geom, ch: VdwChannelSet) -> PairHamiltonian:
    """Rotating-frame 16x16 Hamiltonian ``H_A + H_L`` on each atom plus the vdW block."""
    geom = _geom(geom)
    h1 = single_atom_hamiltonian(drive)
    eye = np.eye(4)
    h = np.kron(h1, eye) + np.kron(eye, h1)
    h[np.ix_(DOUBLE, DOUBLE)] += vdw_hamiltonian(geom, ch)
    return PairHamiltonian(h)


# -- Born-Oppenheimer surfaces ---------------------------------------------


@dataclass(frozen=True)
class BoSpectrum:
    """Energies and states of the doubly-excited block at one separation.

    ``states[:, k]`` is the eigenvector of branch ``labels[k]`` in the
    ``PAIR_BASIS`` ordering.
    """

    rho: float
    energies: np.ndarray
    states: np.ndarray = field(repr=False)
    chi: float
    labels: tuple = BRANCHES

    def energy(self, label: str) -> float:
        return float(self.energies[self.labels.index(label)])

    def as_dict(self) -> dict[str, float]:
        return {lab: float(e) for lab, e in zip(self.labels, self.energies)}


def _sgn(x: float) -> float:
    return -1.0 if x < 0 else 1.0


def mixing_angle(delta_diff: float, w: float) -> float:
    """chi with tan(2 chi) = W / delta, principal branch; chi = 0 when both vanish."""
    if delta_diff == 0:
        return 0.0 if w == 0 else math.copysign(math.pi / 4, w)
    return 0.5 * math.atan(w / delta_diff)


def bo_spectrum_closed_form(rho: float, drive: DriveParams, ch: VdwChannelSet) -> BoSpectrum:
    """Analytic Born-Oppenheimer spectrum for atoms in the plane normal to the beams."""
    rho = V.positive("rho", rho)
    c = scalar_coefficients(ch)
    r6 = rho**6
    v, w, v2, w2 = c.c_pp / r6, c.w_pp / r6, c.c_pm / r6, c.w_pm / r6
    dsum, d = drive.delta_sum, drive.delta_diff
    s = _sgn(d)
    root = math.hypot(d, w)
    chi = mixing_angle(d, w)
    cs, sn = math.cos(chi), math.sin(chi)
    energies = np.array([v - dsum - s * root, v - dsum + s * root, v2 - dsum + w2, v2 - dsum - w2])
    states = np.zeros((4, 4), dtype=complex)
    # for either sign of delta: |E_++> = cos chi |++> - sin chi |-->
    states[:, 0] = [cs, 0, 0, -sn]
    states[:, 1] = [sn, 0, 0, cs]
    states[:, 2] = [0, _SQ2, _SQ2, 0]
    states[:, 3] = [0, _SQ2, -_SQ2, 0]
    return BoSpectrum(rho, energies, states, chi)


def _sym_block(drive, geom, ch):
    h2 = _double_block(drive, geom, ch)
    t = _EXCHANGE_BASIS.conj().T @ h2 @ _EXCHANGE_BASIS
    return t[:3, :3], float(t[3, 3].real)


def bo_branches(rhos, drive: DriveParams, ch: VdwChannelSet, theta: float = math.pi / 2, phi: float = 0.0):
    """Labeled Born-Oppenheimer energies on a grid of separations.

    Returns ``(energies, states)`` with shapes ``(n, 4)`` and ``(n, 4, 4)``;
    columns follow :data:`BRANCHES`.  Labels are carried by eigenvector
    continuation starting from the largest separation in ``rhos``.
    """
    rhos = np.asarray(rhos, dtype=float)
    if rhos.ndim != 1 or rhos.size == 0 or np.any(rhos <= 0):
        raise InvalidArgumentError("rhos must be a non-empty 1D array of positive separations")
    order = np.argsort(-rhos, kind="stable")
    n = rhos.size
    energies = np.empty((n, 4))
    states = np.empty((n, 4, 4), dtype=complex)
    prev = None
    for idx in order:
        hs, e_anti = _sym_block(drive, PairGeometry(rhos[idx], theta, phi), ch)
        w, u = np.linalg.eigh(hs)
        if prev is None:
            # bare symmetric basis order (++, +-, --) maps to branches (++, +-, --)
            ref = np.eye(3, dtype=complex)
        else:
            ref = prev
        ov = np.abs(ref.conj().T @ u) ** 2
        rows, cols = linear_sum_assignment(-ov)
        perm = cols[np.argsort(rows)]
        u = u[:, perm]
        w = w[perm]
        ph = np.diag(ref.conj().T @ u)
        u = u * np.where(np.abs(ph) > 0, np.conj(ph) / np.maximum(np.abs(ph), 1e-300), 1.0)
        prev = u
        full = np.zeros((4, 4), dtype=complex)
        sym = _EXCHANGE_BASIS[:, :3] @ u
        # sym columns are in the (++, +-, --) order
        energies[idx] = [w[0], w[2], w[1], e_anti]
        full[:, 0], full[:, 1], full[:, 2] = sym[:, 0], sym[:, 2], sym[:, 1]
        full[:, 3] = _EXCHANGE_BASIS[:, 3]
        states[idx] = full
    return energies, states


# -- resonances and divergences ---------------------------------------------


@dataclass(frozen=True)
class Resonance:
    rho: float
    branch: str
    energy: float


def _branch_energy_closed(label: str):
    k = BRANCHES.index(label)

    def f(rho, drive, ch):
        return float(bo_spectrum_closed_form(rho, drive, ch).energies[k])

    return f


def find_resonances(
    drive: DriveParams,
    ch: VdwChannelSet,
    theta: float = math.pi / 2,
    rho_range=(1.0, 10.0),
    *,
    phi: float = 0.0,
    points_per_decade: int = 400,
    rtol: float = 1e-10,
) -> list[Resonance]:
    """Zeros of the Born-Oppenheimer energies inside ``rho_range``."""
    lo, hi = V.rho_range(rho_range)
    grid = V.log_grid(lo, hi, points_per_decade)
    perpendicular = abs(math.cos(theta)) < 1e-12
    if perpendicular:
        energies = np.array([bo_spectrum_closed_form(r, drive, ch).energies for r in grid])
        states = None
    else:
        energies, states = bo_branches(grid, drive, ch, theta, phi)
    scale = abs(drive.delta_p) + abs(drive.delta_m)
    scale = scale if scale > 0 else 1.0
    found: list[Resonance] = []
    for k, label in enumerate(BRANCHES):
        e = energies[:, k]
        for i in range(len(grid) - 1):
            a, b = e[i], e[i + 1]
            if a == 0.0:
                found.append(Resonance(float(grid[i]), label, 0.0))
                continue
            if a * b >= 0:
                continue
            if perpendicular:
                fcl = _branch_energy_closed(label)
                f = lambda r: fcl(r, drive, ch)  # noqa: E731
            else:
                vec = states[i, :, k]
                f = _tracked_energy(vec, drive, ch, theta, phi)
            root = brentq(f, grid[i], grid[i + 1], xtol=1e-15 * grid[i], rtol=max(rtol, 1e-15), maxiter=200)
            val = f(root)
            if abs(val) <= 1e-8 * scale:
                found.append(Resonance(float(root), label, float(val)))
        if e[-1] == 0.0:
            found.append(Resonance(float(grid[-1]), label, 0.0))
    found.sort(key=lambda r: (r.rho, BRANCHES.index(r.branch)))
    return found


def _tracked_energy(vec, drive, ch, theta, phi):
    def f(rho):
        h2 = _double_block(drive, PairGeometry(rho, theta, phi), ch)
        w, u = np.linalg.eigh(h2)
        return float(w[int(np.argmax(np.abs(vec.conj() @ u)))])

    return f


def divergence_radii(drive: DriveParams, ch: VdwChannelSet) -> dict[str, list[float]]:
    """Real positive separations where a bright surface crosses the ground pair energy.

    ``"pp"`` are the roots for the (r+r+, r-r-) block and ``"pm"`` those of the
    mixed block, all for atoms in the plane normal to the beams.
    """
    c = scalar_coefficients(ch)
    dp, dm = drive.delta_p, drive.delta_m
    # w^2 - (c - 2 dp x)(c - 2 dm x) = 0 with x = r^6
    qa, qb, qc = -4 * dp * dm, 2 * c.c_pp * (dp + dm), c.w_pp**2 - c.c_pp**2
    pp = []
    if qa != 0:
        disc = qb * qb - 4 * qa * qc
        if disc >= 0:
            sq = math.sqrt(disc)
            pp = [(-qb + sq) / (2 * qa), (-qb - sq) / (2 * qa)]
    elif qb != 0:
        pp = [-qc / qb]
    pm = []
    dsum = drive.delta_sum
    if dsum != 0:
        pm = [(c.c_pm + c.w_pm) / dsum, (c.c_pm - c.w_pm) / dsum]
    to_r = lambda xs: sorted({x ** (1 / 6) for x in xs if x > 0 and math.isfinite(x)})  # noqa: E731
    return {"pp": to_r(pp), "pm": to_r(pm)}


# -- validity -------------------------------------------------------------


def two_photon_operator(drive: DriveParams, geom, ch: VdwChannelSet) -> np.ndarray:
    """Omega_1 H_1^-1 Omega_2: ground pairs (rows) to doubly excited pairs (columns)."""
    h = build_pair_hamiltonian(drive, geom, ch)
    o1 = h.block(0, 1)
    h1 = h.block(1)
    o2 = h.block(1, 2)
    return o1 @ np.linalg.solve(h1, o2)


def bright_weights(drive: DriveParams, geom, ch: VdwChannelSet, vecs: np.ndarray) -> np.ndarray:
    t = two_photon_operator(drive, geom, ch)
    return np.linalg.norm(t @ vecs, axis=0)


def perturbation_parameter(drive: DriveParams, ch: VdwChannelSet, geoms, *, bright_rtol: float = 1e-8) -> float:
    """max Omega / min(|Delta|, |E_k|) over the given geometries.

    Only Born-Oppenheimer states reachable by a two-photon process count;
    a surface with no two-photon amplitude cannot be populated.
    """
    omega = max(drive.omega_p, drive.omega_m)
    if omega == 0:
        return 0.0
    gaps = []
    if drive.omega_p > 0:
        gaps.append(abs(drive.delta_p))
    if drive.omega_m > 0:
        gaps.append(abs(drive.delta_m))
    if min(gaps) == 0:
        return math.inf
    for g in geoms:
        g = _geom(g)
        h2 = _double_block(drive, g, ch)
        w, u = np.linalg.eigh(h2)
        amp = bright_weights(drive, g, ch, u)
        ref = max(float(amp.max()), 1e-300)
        for e, a in zip(w, amp):
            if a > bright_rtol * ref:
                gaps.append(abs(e))
    m = min(gaps)
    return math.inf if m == 0 else omega / m


@dataclass
class ValidityReport:
    ratio_negative: bool
    sum_negative: bool
    alpha1_sq: float
    alpha2_sq: float
    beta: float
    sigma: int
    sigma_prime: int
    regular_pp: bool
    regular_pm: bool
    regular_pp_criterion: bool | None
    regular_pm_criterion: bool
    marginal_pm: bool
    divergence_radii: dict
    perturbation_parameter: float
    eps_max: float
    divergences_in_range: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.perturbation_parameter < self.eps_max and not self.divergences_in_range

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["valid"] = self.valid
        return d


def validity_report(
    drive: DriveParams,
    ch: VdwChannelSet,
    geom=None,
    *,
    rho_range=None,
    n_grid: int = 50,
    theta: float = math.pi / 2,
    eps_max: float = 1.0,
) -> ValidityReport:
    """Sign conditions, regularity flags and the perturbation parameter.

    The perturbation parameter is evaluated at ``geom`` if given, otherwise
    on a log grid over ``rho_range`` at polar angle ``theta``.
    """
    c = scalar_coefficients(ch)
    a1sq = (c.w_pp / c.c_pp) ** 2 if c.c_pp else math.inf
    a2sq = (c.w_pm / c.c_pm) ** 2 if c.c_pm else math.inf
    dp, dm = drive.delta_p, drive.delta_m
    beta = dp / dm if dm else math.nan
    sigma = int(_sgn(c.c_pp) * _sgn(dm))
    sigma_p = int(_sgn(c.c_pm) * _sgn(dm))
    div = divergence_radii(drive, ch)
    crit_pp = None
    if a1sq > 1 and math.isfinite(beta):
        a1 = math.sqrt(a1sq)
        crit_pp = beta < 1 - 2 * a1sq + 2 * a1 * math.sqrt(a1sq - 1)
    marginal = math.isfinite(beta) and math.isclose(beta, -1.0, rel_tol=1e-12)
    crit_pm = a2sq < 1 and math.isfinite(beta) and beta < -1
    msgs = []
    if geom is not None:
        geoms = [_geom(geom)]
    else:
        lo, hi = V.rho_range(rho_range if rho_range is not None else (1.0, 10.0))
        geoms = [PairGeometry(r, theta) for r in np.geomspace(lo, hi, n_grid)]
    eps = perturbation_parameter(drive, ch, geoms)
    rs = [g.r for g in geoms]
    in_range = []
    if all(g.is_perpendicular for g in geoms):
        lo_r, hi_r = min(rs), max(rs)
        weights = _pm_bright(drive)
        for key, lst in div.items():
            if key == "pm" and not weights:
                continue
            in_range += [x for x in lst if lo_r <= x <= hi_r]
    if eps >= eps_max:
        msgs.append(f"perturbation parameter {eps:.4g} >= {eps_max:g}")
    if in_range:
        msgs.append("divergence radii inside range: " + ", ".join(f"{x:.6g}" for x in sorted(in_range)))
    if marginal:
        msgs.append("beta = -1: mixed-state couplings vanish identically (marginal regularity)")
    return ValidityReport(
        ratio_negative=bool(dm != 0 and dp / dm < 0),
        sum_negative=bool(dp + dm < 0),
        alpha1_sq=a1sq,
        alpha2_sq=a2sq,
        beta=beta,
        sigma=sigma,
        sigma_prime=sigma_p,
        regular_pp=not div["pp"],
        regular_pm=not div["pm"] or not _pm_bright(drive),
        regular_pp_criterion=crit_pp,
        regular_pm_criterion=crit_pm,
        marginal_pm=marginal,
        divergence_radii=div,
        perturbation_parameter=eps,
        eps_max=eps_max,
        messages=msgs,
        divergences_in_range=sorted(in_range),
    )


def _pm_bright(drive: DriveParams) -> bool:
    # the mixed states are reached with amplitude ~ (1/Delta+ + 1/Delta-)
    return drive.delta_sum != 0 and drive.omega_p > 0 and drive.omega_m > 0
