"""Angular structure of the van der Waals interaction between j=1/2 Rydberg pairs.

Rydberg pair basis, fixed once for the whole package::

    PAIR_BASIS = (|+1/2,+1/2>, |+1/2,-1/2>, |-1/2,+1/2>, |-1/2,-1/2>)
               = (r+ r+,        r+ r-,       r- r+,       r- r-)

The first label is atom i, the second atom j of the relative vector
``r_ij = r_i - r_j``.  The main-text ordering used for the 4x4 vdW matrix at
theta = pi/2 is obtained with :data:`MAIN_TEXT_ORDER`.

Units: lengths in um, C6 in 2pi*MHz*um^6, energies in 2pi*MHz.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, InvalidArgumentError
from .wigner import clebsch_gordan, wigner_3j, wigner_6j

__all__ = [
    "PAIR_BASIS",
    "MAIN_TEXT_ORDER",
    "CHANNELS",
    "VdwChannelSet",
    "PairGeometry",
    "d0_matrix",
    "channel_d_matrix",
    "reconstruct_d_matrices",
    "vdw_hamiltonian",
    "scalar_coefficients",
    "ScalarCoefficients",
    "spherical_harmonic_2",
    "azimuthal_gauge",
    "load_channel_file",
    "write_channel_file",
    "sample_channels",
]

PAIR_BASIS = ("r+r+", "r+r-", "r-r+", "r-r-")
# permutation taking PAIR_BASIS to {r-r-, r-r+, r+r-, r+r+}
MAIN_TEXT_ORDER = (3, 2, 1, 0)
TOTAL_M = np.array([1, 0, 0, -1])
CHANNELS = ("a", "b", "c", "d")

_S = (0, 0.5)
_P12 = (1, 0.5)
_P32 = (1, 1.5)
_D32 = (2, 1.5)

# (initial (l, j), {channel: ((l_alpha, j_alpha), (l_beta, j_beta))})
_CHANNEL_TABLE = {
    "P1/2": (_P12, {"a": (_S, _S), "b": (_D32, _D32), "c": (_S, _D32), "d": (_D32, _S)}),
    "S1/2": (_S, {"a": (_P12, _P12), "b": (_P32, _P32), "c": (_P12, _P32), "d": (_P32, _P12)}),
}

ENV_DATA_DIR = "RYDSPIN_DATA_DIR"


@dataclass(frozen=True)
class VdwChannelSet:
    """Channel van der Waals coefficients C6^(nu) for nu in a, b, c, d.

    ``c6_c`` and ``c6_d`` describe the two exchange-related mixed channels
    and must agree for the P1/2 manifold.
    """

    c6_a: float
    c6_b: float
    c6_c: float
    c6_d: float
    n: int | None = None
    manifold: str = "P1/2"
    source: str = field(default="", compare=False)

    def __post_init__(self):
        vals = (self.c6_a, self.c6_b, self.c6_c, self.c6_d)
        if not all(math.isfinite(float(v)) for v in vals):
            raise InvalidArgumentError(f"C6 coefficients must be finite, got {vals}")
        if self.manifold not in _CHANNEL_TABLE:
            raise InvalidArgumentError(f"unknown manifold {self.manifold!r}")
        if not math.isclose(self.c6_c, self.c6_d, rel_tol=1e-12, abs_tol=1e-12):
            raise InvalidArgumentError(
                f"channels c and d are related by atom exchange; got c6_c={self.c6_c}, c6_d={self.c6_d}"
            )

    @classmethod
    def degenerate(cls, c6: float, **kw) -> VdwChannelSet:
        return cls(c6, c6, c6, c6, **kw)

    def scaled(self, factor: float) -> VdwChannelSet:
        return VdwChannelSet(
            self.c6_a * factor, self.c6_b * factor, self.c6_c * factor, self.c6_d * factor,
            n=self.n, manifold=self.manifold, source=self.source,
        )

    @property
    def isotropic_part(self) -> float:
        """Coefficient of the identity, (2/9)(C6a + 2 C6b)."""
        # written so that equal channels give exactly (2/3) C6
        mean = self.c6_a + 2.0 * (self.c6_b - self.c6_a) / 3.0
        return 2.0 / 3.0 * mean

    @property
    def anisotropic_part(self) -> float:
        """Coefficient of D0, C6c + C6d - C6a - C6b."""
        return self.c6_c + self.c6_d - self.c6_a - self.c6_b

    def scalars(self) -> ScalarCoefficients:
        return scalar_coefficients(self)


@dataclass(frozen=True)
class PairGeometry:
    """Relative vector r_ij in spherical coordinates about the laser axis."""

    r: float
    theta: float = math.pi / 2
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise InvalidArgumentError(f"separation must be positive and finite, got r={self.r}")
        if not (-1e-12 <= self.theta <= math.pi + 1e-12):
            raise InvalidArgumentError(f"theta must lie in [0, pi], got {self.theta}")

    @classmethod
    def from_vector(cls, vec) -> PairGeometry:
        x, y, z = (float(v) for v in vec)
        r = math.sqrt(x * x + y * y + z * z)
        if r == 0:
            raise InvalidArgumentError("coincident atoms")
        theta = math.acos(max(-1.0, min(1.0, z / r)))
        phi = math.atan2(y, x) if (x or y) else 0.0
        return cls(r, theta, phi)

    def reversed(self) -> PairGeometry:
        """Geometry of r_ji = -r_ij."""
        return PairGeometry(self.r, math.pi - self.theta, self.phi + math.pi)

    @property
    def is_perpendicular(self) -> bool:
        return abs(math.cos(self.theta)) < 1e-12


@dataclass(frozen=True)
class ScalarCoefficients:
    c_pp: float
    c_pm: float
    w_pp: float
    w_pm: float

    def __iter__(self):
        return iter((self.c_pp, self.c_pm, self.w_pp, self.w_pm))

    @property
    def alpha1(self) -> float:
        """Signed ratio w_pp / c_pp."""
        return self.w_pp / self.c_pp

    @property
    def alpha2(self) -> float:
        """Signed ratio w_pm / c_pm."""
        return self.w_pm / self.c_pm


def d0_matrix(theta: float, phi: float = 0.0) -> np.ndarray:
    """The dimensionless 4x4 angular matrix D0(theta, phi), prefactor 1/81 included."""
    c2 = math.cos(2 * theta)
    s2 = math.sin(2 * theta)
    ss = math.sin(theta) ** 2
    e = complex(math.cos(phi), math.sin(phi))
    ec = e.conjugate()
    diag_a = 3 * c2 + 11
    diag_b = 13 - 3 * c2
    off = -3 * c2 - 5
    m = np.array(
        [
            [diag_a, 3 * ec * s2, 3 * ec * s2, 6 * ec * ec * ss],
            [3 * e * s2, diag_b, off, -3 * ec * s2],
            [3 * e * s2, off, diag_b, -3 * ec * s2],
            [6 * e * e * ss, -3 * e * s2, -3 * e * s2, diag_a],
        ],
        dtype=complex,
    )
    return m / 81.0


def channel_d_matrix(channel: str, theta: float, phi: float = 0.0) -> np.ndarray:
    """Angular matrix of a single P1/2 channel expressed through D0."""
    d0 = d0_matrix(theta, phi)
    if channel == "a":
        return 2.0 / 9.0 * np.eye(4) - d0
    if channel == "b":
        return 4.0 / 9.0 * np.eye(4) - d0
    if channel in ("c", "d"):
        return d0
    raise InvalidArgumentError(f"unknown channel {channel!r}; expected one of {CHANNELS}")


def spherical_harmonic_2(m: int, theta: float, phi: float) -> complex:
    """Y_2^m(theta, phi) with the Condon-Shortley phase."""
    ct, st = math.cos(theta), math.sin(theta)
    if m == 0:
        return complex(0.25 * math.sqrt(5 / math.pi) * (3 * ct * ct - 1))
    if abs(m) == 1:
        val = -math.copysign(1.0, m) * 0.5 * math.sqrt(15 / (2 * math.pi)) * st * ct
        return val * complex(math.cos(m * phi), math.sin(m * phi))
    if abs(m) == 2:
        val = 0.25 * math.sqrt(15 / (2 * math.pi)) * st * st
        return val * complex(math.cos(m * phi), math.sin(m * phi))
    raise InvalidArgumentError(f"|m| <= 2 required, got {m}")


def _ms(j: float):
    tj = round(2 * j)
    return [k / 2 for k in range(tj, -tj - 1, -2)]


@lru_cache(maxsize=32)
def _radial_angular_factor(l1: int, j1: float, la: int, ja: float, s: float = 0.5) -> float:
    # the m-independent reduced-matrix-element factor of one atom
    return (
        math.sqrt((2 * l1 + 1) * (2 * j1 + 1) * (2 * la + 1) * (2 * ja + 1))
        * wigner_6j(l1, la, 1, ja, j1, s)
        * wigner_3j(la, 1, l1, 0, 0, 0)
    )


def _coupling_matrix(initial, alpha, beta, theta: float, phi: float) -> np.ndarray:
    """<m1, m2| M |m_alpha, m_beta> for one channel; rows in PAIR_BASIS order."""
    (l1, j1), (la, ja), (lb, jb) = initial, alpha, beta
    s = 0.5
    y2c = {mu: spherical_harmonic_2(mu, theta, phi).conjugate() for mu in range(-2, 3)}
    m_init = _ms(j1)
    rows = [(a, b) for a in m_init for b in m_init]
    cols = [(a, b) for a in _ms(ja) for b in _ms(jb)]
    fa = _radial_angular_factor(l1, j1, la, ja)
    fb = _radial_angular_factor(l1, j1, lb, jb)
    pref = -math.sqrt(24 * math.pi / 5)
    out = np.zeros((len(rows), len(cols)), dtype=complex)
    for i, (m1, m2) in enumerate(rows):
        phase = (-1) ** round(s - m1) * (-1) ** round(s - m2)
        for k, (ma, mb) in enumerate(cols):
            acc = 0j
            for mu in (-1, 0, 1):
                w_a = wigner_3j(ja, 1, j1, ma, mu, -m1)
                if w_a == 0.0:
                    continue
                for kap in (-1, 0, 1):
                    w_b = wigner_3j(jb, 1, j1, mb, kap, -m2)
                    if w_b == 0.0:
                        continue
                    cg = clebsch_gordan(1, mu, 1, kap, 2, mu + kap)
                    acc += cg * w_a * w_b * y2c[mu + kap]
            out[i, k] = phase * fa * fb * pref * acc
    return out


def reconstruct_d_matrices(theta: float, phi: float = 0.0, manifold: str = "P1/2") -> dict[str, np.ndarray]:
    """Channel angular matrices D_nu built from 3j/6j algebra and Y_2^m.

    Each D_nu = M M^dagger, summed over the intermediate Zeeman states of
    the channel's final fine-structure pair.  For the P1/2 manifold this
    reproduces :func:`channel_d_matrix` to rounding error.
    """
    try:
        initial, table = _CHANNEL_TABLE[manifold]
    except KeyError:
        raise InvalidArgumentError(f"unknown manifold {manifold!r}") from None
    out = {}
    for name, (alpha, beta) in table.items():
        m = _coupling_matrix(initial, alpha, beta, theta, phi)
        out[name] = m @ m.conj().T
    return out


def vdw_hamiltonian(geom: PairGeometry, ch: VdwChannelSet) -> np.ndarray:
    """Total vdW matrix in PAIR_BASIS, 2pi*MHz."""
    if not geom.r > 0:
        raise InvalidArgumentError(f"separation must be positive, got {geom.r}")
    h = ch.isotropic_part * np.eye(4, dtype=complex) + ch.anisotropic_part * d0_matrix(geom.theta, geom.phi)
    return h / geom.r**6


def scalar_coefficients(ch: VdwChannelSet) -> ScalarCoefficients:
    """c_pp, c_pm, w_pp, w_pm of the theta = pi/2 vdW matrix (2pi*MHz*um^6)."""
    a, b, c = ch.c6_a, ch.c6_b, 0.5 * (ch.c6_c + ch.c6_d)
    s = a + b - 2 * c
    return ScalarCoefficients(
        c_pp=2.0 / 81.0 * (5 * a + 14 * b + 8 * c),
        c_pm=2.0 / 81.0 * (a + 10 * b + 16 * c),
        w_pp=-2.0 / 27.0 * s,
        w_pm=2.0 / 81.0 * s,
    )


def azimuthal_gauge(phi: float) -> np.ndarray:
    """Diagonal U(phi) with vdw(r, theta, phi) = U vdw(r, theta, 0) U^dagger."""
    return np.diag(np.exp(-1j * phi * TOTAL_M)).astype(complex)


# -- channel files ---------------------------------------------------------

_CHANNEL_KEYS = ("c6_a", "c6_b", "c6_c", "c6_d")
CHANNEL_UNITS = "2pi*MHz*um^6"


def _parse_channel_section(sec, where: str) -> VdwChannelSet:
    missing = [k for k in _CHANNEL_KEYS if k not in sec]
    if missing:
        raise ConfigError(f"{where}: missing field(s) {', '.join(missing)}")
    units = sec.get("units", CHANNEL_UNITS).strip()
    if units != CHANNEL_UNITS:
        raise ConfigError(f"{where}: unsupported units {units!r}; expected {CHANNEL_UNITS!r}")
    vals = {}
    for k in _CHANNEL_KEYS:
        try:
            vals[k] = float(sec[k])
        except ValueError:
            raise ConfigError(f"{where}: field {k} = {sec[k]!r} is not a number") from None
    n = sec.get("n")
    try:
        n = int(n) if n is not None else None
    except ValueError:
        raise ConfigError(f"{where}: field n = {n!r} is not an integer") from None
    try:
        return VdwChannelSet(
            **vals, n=n, manifold=sec.get("manifold", "P1/2").strip(), source=sec.get("source", "").strip()
        )
    except InvalidArgumentError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_channel_file(path) -> VdwChannelSet:
    """Read a channel-coefficient file.

    The file is INI-style with a single ``[channels]`` section::

        [channels]
        n = 60
        manifold = P1/2
        units = 2pi*MHz*um^6
        c6_a = ...
        c6_b = ...
        c6_c = ...
        c6_d = ...
        source = free text
    """
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not cp.has_section("channels"):
        raise ConfigError(f"{path}: no [channels] section")
    return _parse_channel_section(cp["channels"], str(path))


def write_channel_file(ch: VdwChannelSet, path) -> None:
    cp = configparser.ConfigParser()
    sec = {"manifold": ch.manifold, "units": CHANNEL_UNITS}
    if ch.n is not None:
        sec["n"] = str(ch.n)
    for k in _CHANNEL_KEYS:
        sec[k] = repr(float(getattr(ch, k)))
    if ch.source:
        sec["source"] = ch.source
    cp["channels"] = sec
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)


def resolve_channel_file(name, base_dir=None) -> Path:
    """Locate a channel file: as given, relative to base_dir, in $RYDSPIN_DATA_DIR, then bundled."""
    p = Path(name)
    candidates = [p]
    if base_dir is not None and not p.is_absolute():
        candidates.append(Path(base_dir) / p)
    env = os.environ.get(ENV_DATA_DIR)
    if env:
        candidates.append(Path(env) / p)
    for c in candidates:
        if c.is_file():
            return c
    bundled = resources.files("rydspin") / "data" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"channel file {name!r} not found (searched {[str(c) for c in candidates]} and bundled data)")


def sample_channels() -> VdwChannelSet:
    """Bundled synthetic n=60 P1/2 channel set (see the file header for provenance)."""
    return load_channel_file(resolve_channel_file("rb87_60p12_sample.ini"))
