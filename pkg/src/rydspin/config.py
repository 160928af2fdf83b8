"""Run configuration files.

INI format, one file per run.  Sections and keys (energies in 2pi*MHz,
lengths in um, angles in degrees unless the key ends in ``_rad``)::

    [drive]     omega_p, omega_m, delta_p, delta_m, phi_p, phi_m
    [channels]  file = <path>   or inline   n, c6_a, c6_b, c6_c, c6_d
    [scan]      r_min, r_max, n_r, spacing (log|linear), theta_deg,
                theta_min_deg, theta_max_deg, n_theta,
                method (auto|closed|fourth_order|exact),
                light_shifts (absorbed|raw), eps_max
    [pair]      x_min, x_max, n_x, theta_deg       (x = rho / r_c)
    [lattice]   kind, spacing, extent = nx, ny, periodic, tilt_deg,
                shells, phase_gauge (radial|bond), cap, ground_state
    [design]    target_<k> = J_pm@1 == 0, weight_<k>, bound_<param> = lo, hi,
                max_iter, restarts, seed
    [verify]    rho_min, rho_max, n_rho

A channel ``file`` is resolved relative to the config file, then in
``$RYDSPIN_DATA_DIR``, then among the bundled data files.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .design import PARAMS, DesignTarget, parse_target
from .exceptions import ConfigError, InvalidArgumentError
from .lattice import LATTICE_KINDS
from .pair import DriveParams
from .vdw import VdwChannelSet, _parse_channel_section, load_channel_file, resolve_channel_file

__all__ = ["RunConfig", "ScanSpec", "PairSpec", "LatticeSpec", "DesignSpec", "VerifySpec", "load_config", "parse_config"]

_KNOWN = {
    "drive": {"omega_p", "omega_m", "delta_p", "delta_m", "phi_p", "phi_m"},
    "channels": {"file", "n", "c6_a", "c6_b", "c6_c", "c6_d", "units", "manifold", "source"},
    "scan": {"r_min", "r_max", "n_r", "spacing", "theta_deg", "theta_min_deg", "theta_max_deg", "n_theta",
             "method", "light_shifts", "eps_max"},
    "pair": {"x_min", "x_max", "n_x", "theta_deg"},
    "lattice": {"kind", "spacing", "extent", "periodic", "tilt_deg", "shells", "phase_gauge", "cap", "ground_state"},
    "design": {"max_iter", "restarts", "seed"},
    "verify": {"rho_min", "rho_max", "n_rho"},
}
_DESIGN_KEY = re.compile(r"^(target|weight)_\w+$|^bound_(omega_p|omega_m|delta_p|delta_m)$")


@dataclass
class ScanSpec:
    r_min: float = 1.0
    r_max: float = 10.0
    n_r: int = 50
    spacing: str = "log"
    theta: float = math.pi / 2
    theta_min: float = 0.0
    theta_max: float = math.pi / 2
    n_theta: int = 10
    method: str = "auto"
    light_shifts: str = "absorbed"
    eps_max: float = 1.0


@dataclass
class PairSpec:
    x_min: float = 0.5
    x_max: float = 3.0
    n_x: int = 200
    theta: float = math.pi / 2


@dataclass
class LatticeSpec:
    kind: str = "kagome"
    spacing: float = 1.8
    extent: tuple[int, int] = (1, 1)
    periodic: bool = False
    tilt: float = 0.0
    shells: int = 3
    phase_gauge: str = "radial"
    cap: int = 14
    ground_state: bool = False


@dataclass
class DesignSpec:
    target: DesignTarget
    max_iter: int = 4000
    restarts: int = 2
    seed: int = 0


@dataclass
class VerifySpec:
    rho_min: float = 1.0
    rho_max: float = 10.0
    n_rho: int = 50


@dataclass
class RunConfig:
    path: Path | None
    drive: DriveParams
    channels: VdwChannelSet
    channels_ref: str
    scan: ScanSpec = field(default_factory=ScanSpec)
    pair: PairSpec = field(default_factory=PairSpec)
    lattice: LatticeSpec | None = None
    design: DesignSpec | None = None
    verify: VerifySpec = field(default_factory=VerifySpec)


class _Reader:
    """Typed access to a ConfigParser with file:line diagnostics."""

    def __init__(self, cp: configparser.ConfigParser, text: str, where: str):
        self.cp = cp
        self.where = where
        self.lines = text.splitlines()

    def line_of(self, section: str, key: str | None = None) -> int | None:
        cur = None
        for n, raw in enumerate(self.lines, 1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                cur = s[1:-1].strip()
                if key is None and cur == section:
                    return n
                continue
            if cur == section and key is not None and re.match(rf"^{re.escape(key)}\s*[=:]", s):
                return n
        return None

    def fail(self, section, key, msg):
        ln = self.line_of(section, key)
        loc = f"{self.where}:{ln}" if ln else self.where
        field_ = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{loc}: {field_}: {msg}")

    def get(self, section, key, conv, default=None, required=False):
        if not self.cp.has_section(section) or not self.cp.has_option(section, key):
            if required:
                self.fail(section, None, f"missing required field {key!r}")
            return default
        raw = self.cp.get(section, key).strip()
        try:
            return conv(raw)
        except (ValueError, InvalidArgumentError) as exc:
            self.fail(section, key, f"bad value {raw!r} ({exc})")

    def check_known(self):
        for sec in self.cp.sections():
            if sec not in _KNOWN:
                self.fail(sec, None, "unknown section")
            for key in self.cp[sec]:
                if key in _KNOWN[sec] or (sec == "design" and _DESIGN_KEY.match(key)):
                    continue
                self.fail(sec, key, "unknown field")


def _bool(s: str) -> bool:
    v = s.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _choice(*opts):
    def conv(s):
        if s not in opts:
            raise ValueError(f"expected one of {opts}")
        return s

    return conv


def _pos_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


def _pos_float(s: str) -> float:
    v = float(s)
    if not (math.isfinite(v) and v > 0):
        raise ValueError("must be positive and finite")
    return v


def _pair_floats(s: str) -> tuple[float, float]:
    parts = [p for p in re.split(r"[,\s]+", s) if p]
    if len(parts) != 2:
        raise ValueError("expected two numbers 'lo, hi'")
    return float(parts[0]), float(parts[1])


def _extent(s: str) -> tuple[int, int]:
    parts = [p for p in re.split(r"[,\s]+", s) if p]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ValueError("expected 'nx, ny'")
    return _pos_int(parts[0]), _pos_int(parts[1])


def parse_config(text: str, path: Path | None = None) -> RunConfig:
    where = str(path) if path else "<config>"
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=where)
    except configparser.Error as exc:
        raise ConfigError(f"{where}: {exc}") from None
    rd = _Reader(cp, text, where)
    rd.check_known()

    if not cp.has_section("drive"):
        raise ConfigError(f"{where}: missing [drive] section")
    vals = {k: rd.get("drive", k, float, required=k.startswith(("omega", "delta")))
            for k in ("omega_p", "omega_m", "delta_p", "delta_m")}
    vals["phi_p"] = rd.get("drive", "phi_p", float, 0.0)
    vals["phi_m"] = rd.get("drive", "phi_m", float, 0.0)
    try:
        drive = DriveParams(**vals)
    except InvalidArgumentError as exc:
        rd.fail("drive", None, str(exc))

    if not cp.has_section("channels"):
        raise ConfigError(f"{where}: missing [channels] section")
    sec = cp["channels"]
    if "file" in sec:
        base = path.parent if path else None
        try:
            resolved = resolve_channel_file(sec["file"].strip(), base)
            channels = load_channel_file(resolved)
        except ConfigError as exc:
            rd.fail("channels", "file", str(exc))
        ref = sec["file"].strip()
    else:
        try:
            channels = _parse_channel_section(sec, f"{where}: [channels]")
        except ConfigError as exc:
            raise ConfigError(str(exc)) from None
        ref = "inline"

    deg = lambda s: math.radians(float(s))  # noqa: E731
    scan = ScanSpec(
        r_min=rd.get("scan", "r_min", _pos_float, 1.0),
        r_max=rd.get("scan", "r_max", _pos_float, 10.0),
        n_r=rd.get("scan", "n_r", _pos_int, 50),
        spacing=rd.get("scan", "spacing", _choice("log", "linear"), "log"),
        theta=rd.get("scan", "theta_deg", deg, math.pi / 2),
        theta_min=rd.get("scan", "theta_min_deg", deg, 0.0),
        theta_max=rd.get("scan", "theta_max_deg", deg, math.pi / 2),
        n_theta=rd.get("scan", "n_theta", _pos_int, 10),
        method=rd.get("scan", "method", _choice("auto", "closed", "fourth_order", "exact"), "auto"),
        light_shifts=rd.get("scan", "light_shifts", _choice("absorbed", "raw"), "absorbed"),
        eps_max=rd.get("scan", "eps_max", _pos_float, 1.0),
    )
    if scan.r_max <= scan.r_min:
        rd.fail("scan", "r_max", "must exceed r_min")
    for k, th in (("theta_deg", scan.theta), ("theta_min_deg", scan.theta_min), ("theta_max_deg", scan.theta_max)):
        if not -1e-12 <= th <= math.pi + 1e-12:
            rd.fail("scan", k, "polar angle must lie in [0, 180] degrees")
    pair = PairSpec(
        x_min=rd.get("pair", "x_min", _pos_float, 0.5),
        x_max=rd.get("pair", "x_max", _pos_float, 3.0),
        n_x=rd.get("pair", "n_x", _pos_int, 200),
        theta=rd.get("pair", "theta_deg", deg, math.pi / 2),
    )
    if pair.x_max <= pair.x_min:
        rd.fail("pair", "x_max", "must exceed x_min")

    lattice = None
    if cp.has_section("lattice"):
        lattice = LatticeSpec(
            kind=rd.get("lattice", "kind", _choice(*LATTICE_KINDS[:-1]), "kagome"),
            spacing=rd.get("lattice", "spacing", _pos_float, 1.8),
            extent=rd.get("lattice", "extent", _extent, (1, 1)),
            periodic=rd.get("lattice", "periodic", _bool, False),
            tilt=rd.get("lattice", "tilt_deg", deg, 0.0),
            shells=rd.get("lattice", "shells", _pos_int, 3),
            phase_gauge=rd.get("lattice", "phase_gauge", _choice("radial", "bond"), "radial"),
            cap=rd.get("lattice", "cap", _pos_int, 14),
            ground_state=rd.get("lattice", "ground_state", _bool, False),
        )

    design = None
    if cp.has_section("design"):
        dsec = cp["design"]
        targets = []
        for key in sorted(k for k in dsec if k.startswith("target_")):
            suffix = key[len("target_"):]
            w = rd.get("design", f"weight_{suffix}", _pos_float, 1.0)
            try:
                targets.append(parse_target(dsec[key], w))
            except InvalidArgumentError as exc:
                rd.fail("design", key, str(exc))
        bounds = {}
        for p in PARAMS:
            b = rd.get("design", f"bound_{p}", _pair_floats)
            if b is not None:
                bounds[p] = b
        try:
            dt = DesignTarget(targets, bounds)
        except InvalidArgumentError as exc:
            rd.fail("design", None, str(exc))
        design = DesignSpec(
            dt,
            max_iter=rd.get("design", "max_iter", _pos_int, 4000),
            restarts=rd.get("design", "restarts", int, 2),
            seed=rd.get("design", "seed", int, 0),
        )

    verify = VerifySpec(
        rho_min=rd.get("verify", "rho_min", _pos_float, 1.0),
        rho_max=rd.get("verify", "rho_max", _pos_float, 10.0),
        n_rho=rd.get("verify", "n_rho", _pos_int, 50),
    )
    if verify.rho_max <= verify.rho_min:
        rd.fail("verify", "rho_max", "must exceed rho_min")
    return RunConfig(path, drive, channels, ref, scan, pair, lattice, design, verify)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    return parse_config(text, path)
