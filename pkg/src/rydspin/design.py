"""Choosing drive parameters that realize a requested coupling pattern."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize

from .dressing import spin_couplings
from .exceptions import InfeasibleError, InvalidArgumentError, NotFoundError, PoleError, ResonanceError
from .pair import DriveParams, divergence_radii, two_photon_operator
from .vdw import PairGeometry, VdwChannelSet

__all__ = [
    "QUANTITIES",
    "PARAMS",
    "Location",
    "Target",
    "DesignTarget",
    "DesignResult",
    "parse_target",
    "solve_zero_flip_flop",
    "optimize",
    "evaluate_targets",
    "format_report",
]

QUANTITIES = ("J_z", "J_par", "J_pm", "J_pp")
PARAMS = ("omega_p", "omega_m", "delta_p", "delta_m")
PENALTY = 1e6
_Q_INDEX = {q: k for k, q in enumerate(QUANTITIES)}


@dataclass(frozen=True)
class Location:
    """A bond: shell number (1 = nearest neighbours) of a lattice, or an explicit distance in um."""

    shell: int | None = None
    r: float | None = None
    theta: float = math.pi / 2

    def __post_init__(self):
        if (self.shell is None) == (self.r is None):
            raise InvalidArgumentError("a location needs exactly one of shell or r")
        if self.shell is not None and self.shell < 1:
            raise InvalidArgumentError(f"shells are numbered from 1, got {self.shell}")
        if self.r is not None and not self.r > 0:
            raise InvalidArgumentError(f"r must be positive, got {self.r}")

    def distance(self, lattice=None) -> float:
        if self.r is not None:
            return self.r
        if lattice is None:
            raise InvalidArgumentError(f"shell {self.shell} requested but no lattice given")
        if self.shell > len(lattice.shells):
            raise InvalidArgumentError(f"lattice has only {len(lattice.shells)} shells, asked for {self.shell}")
        return float(lattice.shells[self.shell - 1])

    def label(self) -> str:
        base = f"{self.shell}" if self.shell is not None else f"r={self.r:g}"
        if abs(self.theta - math.pi / 2) > 1e-15:
            base += f",theta_deg={math.degrees(self.theta):g}"
        return base


@dataclass(frozen=True)
class Target:
    quantity: str
    location: Location
    value: float
    relation: str = "equals"
    weight: float = 1.0
    denominator: tuple | None = None  # (quantity, Location) for ratios

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise InvalidArgumentError(f"unknown quantity {self.quantity!r}; expected one of {QUANTITIES}")
        if self.relation not in ("equals", "ratio"):
            raise InvalidArgumentError(f"relation must be 'equals' or 'ratio', got {self.relation!r}")
        if self.relation == "ratio":
            if self.denominator is None or self.denominator[0] not in QUANTITIES:
                raise InvalidArgumentError("a ratio target needs a denominator (quantity, location)")
        if not (math.isfinite(self.value) and math.isfinite(self.weight) and self.weight > 0):
            raise InvalidArgumentError("target value must be finite and weight positive")

    def label(self) -> str:
        lhs = f"{self.quantity}@{self.location.label()}"
        if self.relation == "ratio":
            lhs += f" / {self.denominator[0]}@{self.denominator[1].label()}"
        return f"{lhs} == {self.value:.17g}"


@dataclass
class DesignTarget:
    targets: list[Target]
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.targets:
            raise InvalidArgumentError("at least one design target is required")
        for k, (lo, hi) in self.bounds.items():
            if k not in PARAMS:
                raise InvalidArgumentError(f"unknown bound parameter {k!r}; expected one of {PARAMS}")
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise InvalidArgumentError(f"bounds for {k} must be finite with lo <= hi, got ({lo}, {hi})")
            if k.startswith("omega") and lo < 0:
                raise InvalidArgumentError(f"Rabi frequency bounds must be non-negative, got ({lo}, {hi}) for {k}")
            if k.startswith("delta") and (lo <= 0 <= hi):
                raise InvalidArgumentError(f"detuning bounds must not include zero, got ({lo}, {hi}) for {k}")

    def complete_bounds(self, seed: DriveParams) -> dict[str, tuple[float, float]]:
        out = {}
        for k in PARAMS:
            v = getattr(seed, k)
            out[k] = tuple(float(x) for x in self.bounds.get(k, (v, v)))
            lo, hi = out[k]
            if not lo <= v <= hi:
                raise InvalidArgumentError(f"seed {k}={v} lies outside its bounds ({lo}, {hi})")
        return out


_T_RE = re.compile(
    r"^\s*(?P<q>J_\w+)@(?P<loc>[^/]+?)\s*(?:/\s*(?P<dq>J_\w+)@(?P<dloc>[^/]+?)\s*)?==\s*(?P<val>\S+)\s*$"
)


def _parse_location(text: str) -> Location:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise InvalidArgumentError("empty location")
    shell = r = None
    theta = math.pi / 2
    for p in parts:
        if p.startswith("r="):
            r = float(p[2:])
        elif p.startswith("theta_deg="):
            theta = math.radians(float(p[len("theta_deg="):]))
        elif p.startswith("theta="):
            theta = float(p[len("theta="):])
        else:
            shell = int(p)
    return Location(shell=shell, r=r, theta=theta)


def parse_target(text: str, weight: float = 1.0) -> Target:
    """Parse ``J_pm@1 == 0`` or ``J_z@1 / J_pp@2 == -1.5``.

    A location is a shell number or ``r=<um>``, optionally followed by
    ``,theta_deg=<deg>`` (default 90).
    """
    m = _T_RE.match(text)
    if not m:
        raise InvalidArgumentError(f"cannot parse target {text!r}")
    try:
        loc = _parse_location(m["loc"])
        val = float(m["val"])
        if m["dq"]:
            return Target(m["q"], loc, val, "ratio", weight, (m["dq"], _parse_location(m["dloc"])))
        return Target(m["q"], loc, val, "equals", weight)
    except ValueError as exc:
        raise InvalidArgumentError(f"cannot parse target {text!r}: {exc}") from None


# -- zero flip-flop ------------------------------------------------------


def _flip_flop_amplitude(drive: DriveParams, ch: VdwChannelSet) -> float:
    # two-photon amplitude g+g- -> r-r+; independent of the separation
    t = two_photon_operator(drive, PairGeometry(1.0), ch)
    return float(t[1, 2].real)


def _flip_flop_ok(drive, ch, rhos, tol) -> tuple[bool, float, float]:
    jpm = jpp = 0.0
    for r in rhos:
        c = spin_couplings(PairGeometry(float(r)), drive, ch, method="closed", check_validity=False)
        jpm = max(jpm, abs(c.j_pm))
        jpp = max(jpp, abs(c.j_pp))
    return jpm <= tol * jpp, jpm, jpp


def solve_zero_flip_flop(
    seed: DriveParams,
    ch: VdwChannelSet,
    *,
    rho_range=(1.0, 10.0),
    n_grid: int = 50,
    bounds: tuple[float, float] | None = None,
    tol: float = 1e-10,
) -> DriveParams:
    """Tune Delta- with Delta+ fixed so that the flip-flop coupling vanishes at all separations.

    The root is searched on the two-photon g+g- -> r-r+ amplitude, which has
    a simple zero where J_pm has a double one.  ``bounds`` defaults to
    detunings of opposite sign between |Delta+|/10 and 10 |Delta+|.
    """
    seed.require_detunings()
    rhos = np.geomspace(rho_range[0], rho_range[1], n_grid)
    ok, _, _ = _flip_flop_ok(seed, ch, rhos, tol)
    if ok:
        return seed
    if seed.omega_p == 0 or seed.omega_m == 0:
        return seed
    dp = seed.delta_p
    if bounds is None:
        s = -math.copysign(1.0, dp)
        lo, hi = sorted((s * abs(dp) / 10, s * abs(dp) * 10))
    else:
        lo, hi = sorted(float(b) for b in bounds)
        if lo <= 0 <= hi:
            raise InvalidArgumentError(f"Delta- bounds must not contain zero, got {bounds}")

    def f(dm):
        return _flip_flop_amplitude(replace(seed, delta_m=dm), ch)

    fa, fb = f(lo), f(hi)
    if fa == 0:
        root = lo
    elif fb == 0:
        root = hi
    elif fa * fb > 0:
        raise NotFoundError(f"no zero of the flip-flop amplitude for Delta- in [{lo}, {hi}]")
    else:
        root = brentq(f, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    out = replace(seed, delta_m=float(root))
    ok, jpm, jpp = _flip_flop_ok(out, ch, rhos, tol)
    if not ok:
        raise NotFoundError(f"flip-flop coupling {jpm:.3g} not below {tol:g} x peak J_pp {jpp:.3g} at Delta-={root}")
    return out


# -- general optimizer ----------------------------------------------------


def _bond_value(cache, drive, ch, loc: Location, quantity: str, lattice, method):
    key = (loc.distance(lattice), loc.theta)
    if key not in cache:
        cache[key] = spin_couplings(PairGeometry(key[0], loc.theta), drive, ch, method=method)
    return cache[key]


def evaluate_targets(design: DesignTarget, drive: DriveParams, ch: VdwChannelSet, lattice=None,
                     *, method: str = "auto") -> tuple[np.ndarray, list]:
    """Raw residuals (achieved - wanted) per target and the coupling sets used."""
    cache: dict = {}
    res = []
    for t in design.targets:
        c = _bond_value(cache, drive, ch, t.location, t.quantity, lattice, method)
        val = float(np.real(c.values()[_Q_INDEX[t.quantity]]))
        if t.relation == "ratio":
            dq, dloc = t.denominator
            cd = _bond_value(cache, drive, ch, dloc, dq, lattice, method)
            den = float(np.real(cd.values()[_Q_INDEX[dq]]))
            val = val / den if den != 0 else math.inf
        res.append(val - t.value)
    return np.array(res), list(cache.values())


@dataclass
class DesignResult:
    drive: DriveParams
    residuals: dict[str, float]
    objective: float
    seed_objective: float
    valid: bool
    violations: list[str]
    n_evaluations: int
    targets: DesignTarget = field(repr=False, default=None)


def _scales(design, ch, seed, lattice, method):
    # equals-targets are measured against the coupling scale at the seed
    try:
        _, sets = evaluate_targets(design, seed, ch, lattice, method=method)
        jscale = max((max(abs(v) for v in s.values()) for s in sets), default=0.0)
    except (PoleError, ResonanceError):
        jscale = 0.0
    jscale = jscale if jscale > 0 else 1.0
    out = []
    for t in design.targets:
        out.append(max(abs(t.value), 1.0) if t.relation == "ratio" else max(abs(t.value), jscale))
    return np.array(out)


def _violations(drive, ch, sets, eps_max, r_lo, r_hi) -> list[str]:
    v = []
    for s in sets:
        if not s.eps < eps_max:
            v.append(f"perturbation parameter {s.eps:.3g} at r={s.geometry.r:.6g}")
    div = divergence_radii(drive, ch)
    for key, lst in div.items():
        if key == "pm" and (drive.delta_sum == 0 or drive.omega_p == 0 or drive.omega_m == 0):
            continue
        for x in lst:
            if r_lo <= x <= r_hi:
                v.append(f"divergence radius {x:.6g} um inside the target range")
    return v


def optimize(
    design: DesignTarget,
    ch: VdwChannelSet,
    lattice=None,
    seed: DriveParams | None = None,
    *,
    max_iter: int = 4000,
    restarts: int = 2,
    rng_seed: int = 0,
    eps_max: float = 1.0,
    method: str = "auto",
    xatol: float = 1e-12,
    fatol: float = 1e-30,
) -> DesignResult:
    """Nelder-Mead search over the drive parameters whose bounds are not degenerate.

    The objective is the weighted sum of squared scaled residuals plus a
    fixed penalty of 1e6 for each validity violation.  Restarts rebuild the
    simplex around the incumbent (the first restart deterministically,
    later ones perturbed with ``rng_seed``).
    """
    if seed is None:
        raise InvalidArgumentError("a seed DriveParams is required")
    bounds = design.complete_bounds(seed)
    free = [k for k in PARAMS if bounds[k][1] > bounds[k][0]]
    lo = np.array([bounds[k][0] for k in free])
    span = np.array([bounds[k][1] - bounds[k][0] for k in free])
    scales = _scales(design, ch, seed, lattice, method)
    weights = np.array([t.weight for t in design.targets])
    dists = [t.location.distance(lattice) for t in design.targets]
    dists += [t.denominator[1].distance(lattice) for t in design.targets if t.denominator]
    r_lo, r_hi = min(dists), max(dists)
    count = [0]

    def to_drive(x):
        vals = seed.as_dict()
        for k, xi, l, s in zip(free, x, lo, span):
            vals[k] = float(l + s * min(1.0, max(0.0, xi)))
        return DriveParams(**vals)

    def score(drive):
        count[0] += 1
        try:
            res, sets = evaluate_targets(design, drive, ch, lattice, method=method)
        except (PoleError, ResonanceError, InvalidArgumentError) as exc:
            return PENALTY * 10, None, [str(exc)]
        if not np.all(np.isfinite(res)):
            return PENALTY * 10, res, ["non-finite coupling ratio"]
        viol = _violations(drive, ch, sets, eps_max, r_lo, r_hi)
        obj = float(np.sum(weights * (res / scales) ** 2)) + PENALTY * len(viol)
        return obj, res, viol

    seed_obj, seed_res, seed_viol = score(seed)
    best_drive, best = seed, (seed_obj, seed_res, seed_viol)
    if free:
        x0 = (np.array([getattr(seed, k) for k in free]) - lo) / span
        rng = np.random.default_rng(rng_seed)
        fun = lambda x: score(to_drive(x))[0]  # noqa: E731
        step = 0.05
        for attempt in range(restarts + 1):
            simplex = [x0]
            for i in range(len(free)):
                e = x0.copy()
                e[i] = e[i] + step if e[i] + step <= 1 else e[i] - step
                simplex.append(e)
            sol = minimize(fun, x0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(free),
                           options={"initial_simplex": np.array(simplex), "maxiter": max_iter,
                                    "maxfev": 2 * max_iter, "xatol": xatol, "fatol": fatol})
            cand = to_drive(sol.x)
            cand_score = score(cand)
            if cand_score[0] < best[0]:
                best_drive, best = cand, cand_score
            base = (np.array([getattr(best_drive, k) for k in free]) - lo) / span
            if attempt == 0:
                x0, step = base, 0.01
            else:
                x0 = np.clip(base + rng.normal(0.0, 0.02, size=len(free)), 0.0, 1.0)
                step = 0.02
    obj, res, viol = best
    if viol and free:
        report = {"violations": viol, "objective": obj}
        raise InfeasibleError("no parameter point in the bounds satisfies the validity constraints", report)
    # with nothing free the seed comes back as is, flagged if invalid
    res = res if res is not None else np.full(len(design.targets), math.nan)
    residuals = {t.label(): float(r) for t, r in zip(design.targets, res)}
    return DesignResult(best_drive, residuals, obj, seed_obj, not viol, viol, count[0], design)


def format_report(result: DesignResult) -> str:
    """Key-value text report of a design run."""
    lines = ["# design report; energies in 2pi*MHz"]
    for k, v in result.drive.as_dict().items():
        lines.append(f"drive.{k} = {v:.17g}")
    lines.append(f"objective = {result.objective:.17g}")
    lines.append(f"seed_objective = {result.seed_objective:.17g}")
    lines.append(f"valid = {str(result.valid).lower()}")
    lines.append(f"evaluations = {result.n_evaluations}")
    for i, (lab, r) in enumerate(result.residuals.items(), 1):
        lines.append(f"target_{i} = {lab}")
        lines.append(f"residual_{i} = {r:.17g}")
    for i, v in enumerate(result.violations, 1):
        lines.append(f"violation_{i} = {v}")
    return "\n".join(lines) + "\n"
