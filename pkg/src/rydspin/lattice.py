"""2D lattices, bond coupling tables and small-cluster spin Hamiltonians.

The bond Hamiltonian, summed over all pairs i < j, is::

    J_z Sz_i Sz_j + J_par (Sz_i + Sz_j)
        + 1/2 (J_pm S+_i S-_j + J_pp S+_i S+_j + h.c.)

with S = sigma/2.  The J_par field acts on both ends of every bond, so the
field on a site is the sum of J_par over its partners.

Geometry: lattice coordinates (u, v) are embedded as (u, v cos T, v sin T)
with the beams along z.  ``tilt`` T = 0 puts the lattice in the plane normal
to the beams (couplings depend on distance only); T = pi/2 puts it in the
zx plane.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from . import _validation as V
from .dressing import CouplingSet, spin_couplings
from .exceptions import InvalidArgumentError, PoleError
from .pair import DriveParams
from .vdw import PairGeometry, VdwChannelSet

__all__ = [
    "LATTICE_KINDS",
    "Bond",
    "SpinLattice",
    "CouplingTable",
    "SpinHamiltonian",
    "SymmetryReport",
    "GroundState",
    "generate_lattice",
    "custom_lattice",
    "bond_geometry",
    "coupling_table",
    "assemble_hamiltonian",
    "symmetry_report",
    "ground_state_small",
    "write_coupling_csv",
    "dump_terms",
]

LATTICE_KINDS = ("kagome", "square", "triangular", "custom")
SHELL_TOL = 1e-9
DEFAULT_CAP = 14

_CELLS = {
    "kagome": (((2.0, 0.0), (1.0, math.sqrt(3.0))), ((0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3.0) / 2))),
    "square": (((1.0, 0.0), (0.0, 1.0)), ((0.0, 0.0),)),
    "triangular": (((1.0, 0.0), (0.5, math.sqrt(3.0) / 2)), ((0.0, 0.0),)),
}


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    vector: tuple[float, float]
    distance: float
    shell: int


@dataclass
class SpinLattice:
    kind: str
    spacing: float
    sites: np.ndarray
    bonds: list[Bond]
    shells: list[float]
    periodic: bool = False

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def bonds_in_shell(self, k: int) -> list[Bond]:
        return [b for b in self.bonds if b.shell == k]


def _extent(extent) -> tuple[int, int]:
    if np.isscalar(extent):
        nx = ny = extent
    else:
        nx, ny = extent
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidArgumentError(f"extent must be at least one unit cell per direction, got {extent!r}")
    return int(nx), int(ny)


def _build_bonds(sites: np.ndarray, images: list[np.ndarray]) -> tuple[list[Bond], list[float]]:
    raw = []
    n = len(sites)
    for i in range(n):
        for j in range(i + 1, n):
            best = None
            for shift in images:
                vec = sites[i] - sites[j] + shift
                d = math.hypot(vec[0], vec[1])
                if best is None or d < best[1] - SHELL_TOL:
                    best = (vec, d)
            if best[1] <= SHELL_TOL:
                raise InvalidArgumentError(f"sites {i} and {j} coincide")
            raw.append((i, j, best[0], best[1]))
    shells: list[float] = []
    for d in sorted(r[3] for r in raw):
        if not shells or d - shells[-1] > SHELL_TOL:
            shells.append(d)
    bonds = []
    shell_arr = np.array(shells)
    for i, j, vec, d in raw:
        k = int(np.argmin(np.abs(shell_arr - d)))
        bonds.append(Bond(i, j, (float(vec[0]), float(vec[1])), float(shells[k]), k))
    return bonds, shells


def generate_lattice(kind: str, spacing_um: float, extent=1, *, periodic: bool = False) -> SpinLattice:
    """Sites of a kagome, square or triangular patch of ``extent`` unit cells.

    The kagome cell has three sites and nearest-neighbour distance equal to
    ``spacing_um``.  All site pairs become bonds, grouped into distance shells.
    """
    if kind not in _CELLS:
        raise InvalidArgumentError(f"unknown lattice kind {kind!r}; expected one of {LATTICE_KINDS}")
    a = V.positive("spacing_um", spacing_um)
    nx, ny = _extent(extent)
    (a1, a2), basis = _CELLS[kind]
    a1, a2 = a * np.array(a1), a * np.array(a2)
    sites = np.array(
        [ix * a1 + iy * a2 + a * np.array(b) for iy in range(ny) for ix in range(nx) for b in basis]
    )
    if periodic:
        if kind == "kagome":
            raise InvalidArgumentError("periodic boundaries are supported for square and triangular lattices only")
        L1, L2 = nx * a1, ny * a2
        images = [p * L1 + q * L2 for p in (0, -1, 1) for q in (0, -1, 1)]
    else:
        images = [np.zeros(2)]
    bonds, shells = _build_bonds(sites, images)
    return SpinLattice(kind, a, sites, bonds, shells, periodic)


def custom_lattice(sites, spacing_um: float = 1.0) -> SpinLattice:
    """Lattice from explicit 2D positions (um) scaled by ``spacing_um``."""
    a = V.positive("spacing_um", spacing_um)
    pts = np.asarray(sites, dtype=float) * a
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1:
        raise InvalidArgumentError("sites must be an (N, 2) array")
    bonds, shells = _build_bonds(pts, [np.zeros(2)])
    return SpinLattice("custom", a, pts, bonds, shells, False)


def bond_geometry(bond: Bond, tilt: float = 0.0, phase_gauge: str = "radial") -> PairGeometry:
    u, v = bond.vector
    vec = (u, v * math.cos(tilt), v * math.sin(tilt))
    g = PairGeometry.from_vector(vec)
    if phase_gauge == "radial":
        # the azimuth enters only as a phase of J_pp
        return PairGeometry(g.r, g.theta, 0.0)
    if phase_gauge == "bond":
        return g
    raise InvalidArgumentError(f"phase_gauge must be 'radial' or 'bond', got {phase_gauge!r}")


# -- coupling tables --------------------------------------------------------


@dataclass
class CouplingTable:
    lattice: SpinLattice
    bonds: list[Bond]
    couplings: list[CouplingSet]
    cutoff_shells: int
    truncation_bound: float
    tilt: float = 0.0
    phase_gauge: str = "radial"

    def __iter__(self):
        return iter(zip(self.bonds, self.couplings))

    def __len__(self):
        return len(self.bonds)

    @property
    def all_valid(self) -> bool:
        return all(c.valid for c in self.couplings)

    @classmethod
    def uniform(cls, lat: SpinLattice, per_shell: dict[int, CouplingSet], cutoff_shells: int | None = None) -> CouplingTable:
        """Table assigning a fixed CouplingSet to every bond of a shell (shells missing from the map are dropped)."""
        bonds = [b for b in lat.bonds if b.shell in per_shell]
        k = cutoff_shells if cutoff_shells is not None else (max(per_shell) + 1 if per_shell else 0)
        return cls(lat, bonds, [per_shell[b.shell] for b in bonds], k, 0.0)


def coupling_table(
    lat: SpinLattice,
    drive: DriveParams,
    ch: VdwChannelSet,
    cutoff_shells: int = 3,
    *,
    tilt: float = 0.0,
    phase_gauge: str = "radial",
    method: str = "auto",
    eps_max: float = 1.0,
) -> CouplingTable:
    """Evaluate spin couplings for every bond in the first ``cutoff_shells`` shells.

    Bonds sharing the same (r, theta) are computed once.  The truncation
    bound sums the largest coupling of the outermost included shell,
    scaled by (r_cut / r)^6, over all discarded bonds.
    """
    if int(cutoff_shells) != cutoff_shells or cutoff_shells < 1:
        raise InvalidArgumentError(f"cutoff_shells must be a positive integer, got {cutoff_shells!r}")
    cutoff_shells = int(cutoff_shells)
    kept = [b for b in lat.bonds if b.shell < cutoff_shells]
    cache: dict[tuple, CouplingSet] = {}
    out = []
    for b in kept:
        g = bond_geometry(b, tilt, phase_gauge)
        key = (round(g.r, 9), round(g.theta, 12), round(g.phi, 12))
        if key not in cache:
            try:
                cache[key] = spin_couplings(g, drive, ch, method=method, eps_max=eps_max,
                                            keep_phase=phase_gauge == "bond")
            except PoleError as exc:
                raise PoleError(f"bond ({b.i}, {b.j}) at r={g.r:.6g} um, theta={g.theta:.6g}: {exc}", exc.radius) from None
        out.append(cache[key])
    bound = 0.0
    dropped = [b for b in lat.bonds if b.shell >= cutoff_shells]
    if dropped and out:
        r_cut = max(b.distance for b in kept)
        jmax = max(max(abs(v) for v in c.values()) for b, c in zip(kept, out) if b.distance == r_cut)
        bound = float(sum(jmax * (r_cut / b.distance) ** 6 for b in dropped))
    return CouplingTable(lat, kept, out, cutoff_shells, bound, tilt, phase_gauge)


def write_coupling_csv(table: CouplingTable, stream) -> None:
    stream.write("# units: r_um um, theta_rad rad, J 2pi*MHz\n")
    stream.write("bond_i,bond_j,r_um,theta_rad,J_z,J_par,J_pm,J_pp\n")
    for b, c in table:
        g = c.geometry if c.geometry is not None else bond_geometry(b, table.tilt, table.phase_gauge)
        vals = (g.r, g.theta, c.j_z, c.j_par, c.j_pm, float(np.real(c.j_pp)))
        stream.write(f"{b.i},{b.j}," + ",".join(f"{x:.17g}" for x in vals) + "\n")


# -- spin Hamiltonian -------------------------------------------------------


@dataclass
class SpinHamiltonian:
    """Sparse 2^N matrix plus the term list it was built from.

    Basis states are integers; bit k set means site k is spin up (g+).
    Terms are ``(kind, sites, coefficient)`` with kind ``"zz"``, ``"z"``,
    ``"pm"`` (S+_i S-_j + h.c. with the given weight on the first) or
    ``"pp"`` (S+_i S+_j + h.c.).
    """

    n_sites: int
    terms: list
    matrix: sp.csr_matrix = field(repr=False)
    constant: float = 0.0

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def shifted(self, c: float) -> SpinHamiltonian:
        return SpinHamiltonian(self.n_sites, list(self.terms), (self.matrix + c * sp.identity(self.dim, format="csr")).tocsr(),
                               self.constant + c)

    def scaled(self, k: float) -> SpinHamiltonian:
        terms = [(kind, s, k * c) for kind, s, c in self.terms]
        return SpinHamiltonian(self.n_sites, terms, (k * self.matrix).tocsr(), k * self.constant)


def _sz(states: np.ndarray, k: int) -> np.ndarray:
    return ((states >> k) & 1) - 0.5


def _matrix_from_terms(n: int, terms) -> sp.csr_matrix:
    dim = 1 << n
    states = np.arange(dim, dtype=np.int64)
    diag = np.zeros(dim)
    rows, cols, vals = [], [], []
    for kind, s, c in terms:
        if kind == "zz":
            diag += c.real * _sz(states, s[0]) * _sz(states, s[1])
        elif kind == "z":
            diag += c.real * _sz(states, s[0])
        elif kind in ("pm", "pp"):
            i, j = s
            bi, bj = (states >> i) & 1, (states >> j) & 1
            if kind == "pm":
                src = states[(bi == 0) & (bj == 1)]  # S+_i S-_j acts here
            else:
                src = states[(bi == 0) & (bj == 0)]  # S+_i S+_j acts here
            dst = src ^ ((1 << i) | (1 << j))
            amp = 0.5 * complex(c)
            rows += [dst, src]
            cols += [src, dst]
            vals += [np.full(len(src), amp), np.full(len(src), np.conj(amp))]
        else:
            raise InvalidArgumentError(f"unknown term kind {kind!r}")
    m = sp.diags(diag.astype(complex), format="coo")
    if rows:
        off = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
        m = m + off
    return m.tocsr()


def assemble_hamiltonian(lat: SpinLattice, table: CouplingTable, *, cap: int = DEFAULT_CAP) -> SpinHamiltonian:
    """Build the spin Hamiltonian of a coupling table on its lattice."""
    n = lat.n_sites
    if n > cap:
        raise InvalidArgumentError(f"lattice has {n} sites; exact assembly is capped at {cap}")
    terms = []
    for b, c in table:
        i, j = b.i, b.j
        if c.j_z:
            terms.append(("zz", (i, j), float(c.j_z)))
        if c.j_par:
            terms.append(("z", (i,), float(c.j_par)))
            terms.append(("z", (j,), float(c.j_par)))
        if c.j_pm:
            terms.append(("pm", (i, j), complex(c.j_pm)))
        if c.j_pp:
            terms.append(("pp", (i, j), complex(c.j_pp)))
    return SpinHamiltonian(n, terms, _matrix_from_terms(n, terms))


def dump_terms(h: SpinHamiltonian, stream=None) -> str:
    """Plain-text term list: one ``kind sites... re im`` line per term."""
    buf = io.StringIO()
    buf.write("# spin-1/2 Hamiltonian terms, S = sigma/2, energies in 2pi*MHz\n")
    buf.write("# zz i j c: c Sz_i Sz_j | z i c: c Sz_i | pm i j c: c/2 S+_i S-_j + h.c. | pp i j c: c/2 S+_i S+_j + h.c.\n")
    buf.write(f"n_sites {h.n_sites}\n")
    buf.write(f"n_terms {len(h.terms)}\n")
    for kind, s, c in h.terms:
        c = complex(c)
        buf.write(f"{kind} " + " ".join(str(x) for x in s) + f" {c.real:.17g} {c.imag:.17g}\n")
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


# -- symmetry and spectra ---------------------------------------------------


@dataclass(frozen=True)
class SymmetryReport:
    norm_h: float
    comm_total_sz: float
    comm_parity: float
    u1: bool
    z2: bool
    tol: float

    @property
    def symmetry_class(self) -> str:
        return "U(1)" if self.u1 else ("Z2" if self.z2 else "none")

    def as_dict(self) -> dict:
        return {
            "norm_h": self.norm_h, "comm_total_sz": self.comm_total_sz, "comm_parity": self.comm_parity,
            "rel_comm_total_sz": self.comm_total_sz / self.norm_h if self.norm_h else 0.0,
            "rel_comm_parity": self.comm_parity / self.norm_h if self.norm_h else 0.0,
            "u1": self.u1, "z2": self.z2, "class": self.symmetry_class,
        }


def _diag_commutator_norm(m: sp.csr_matrix, d: np.ndarray) -> float:
    coo = m.tocoo()
    return float(np.sqrt(np.sum(np.abs(coo.data * (d[coo.col] - d[coo.row])) ** 2)))


def symmetry_report(h: SpinHamiltonian, *, tol: float = 1e-12) -> SymmetryReport:
    """Frobenius norms of [H, sum Sz] and [H, prod sigma_z] relative to the traceless part of H."""
    dim = h.dim
    states = np.arange(dim, dtype=np.int64)
    bits = np.array([(states >> k) & 1 for k in range(h.n_sites)]) if h.n_sites else np.zeros((0, dim), int)
    total = bits.sum(axis=0) - 0.5 * h.n_sites
    parity = np.where((h.n_sites - bits.sum(axis=0)) % 2 == 0, 1.0, -1.0)
    m = h.matrix
    tr = m.diagonal().sum() / dim
    shifted = (m - tr * sp.identity(dim, format="csr")).tocoo()
    norm = float(np.sqrt(np.sum(np.abs(shifted.data) ** 2)))
    c1 = _diag_commutator_norm(m, total.astype(float))
    c2 = _diag_commutator_norm(m, parity)
    thresh = tol * norm
    return SymmetryReport(norm, c1, c2, c1 <= thresh, c2 <= thresh, tol)


@dataclass(frozen=True)
class GroundState:
    energy: float
    degeneracy: int
    magnetization: float | None
    sectors: tuple
    method: str


def ground_state_small(h: SpinHamiltonian, *, cap: int = DEFAULT_CAP, dense_max_sites: int = 10,
                       degeneracy_rtol: float = 1e-9) -> GroundState:
    """Lowest eigenvalue, its degeneracy and, when total Sz is conserved, the magnetization sectors."""
    if h.n_sites > cap:
        raise InvalidArgumentError(f"{h.n_sites} sites exceeds the cap of {cap}")
    m = h.matrix
    herm = abs(m - m.getH())
    if herm.nnz and herm.max() > 1e-12 * max(abs(m).max(), 1e-300):
        raise InvalidArgumentError("Hamiltonian is not Hermitian")
    dim = h.dim
    if h.n_sites <= dense_max_sites or dim <= 16:
        w, u = np.linalg.eigh(m.toarray())
        method = "dense"
    else:
        k = min(12, dim - 2)
        v0 = np.full(dim, 1.0 / math.sqrt(dim), dtype=complex)
        w, u = eigsh(m, k=k, which="SA", v0=v0, tol=1e-13, maxiter=20000)
        order = np.argsort(w, kind="stable")
        w, u = w[order], u[:, order]
        method = "lanczos"
    e0 = float(w[0])
    scale = max(abs(e0), float(np.max(np.abs(w))), 1e-300)
    deg = int(np.sum(np.abs(w - e0) <= degeneracy_rtol * scale))
    rep = symmetry_report(h)
    mag, sectors = None, ()
    if rep.u1:
        states = np.arange(dim, dtype=np.int64)
        total = np.array([bin(s).count("1") for s in states]) - 0.5 * h.n_sites
        # the Sz-diagonal basis of the degenerate subspace
        sub = u[:, :deg]
        proj = sub.conj().T @ (total[:, None] * sub)
        mz = np.linalg.eigvalsh(0.5 * (proj + proj.conj().T))
        sectors = tuple(sorted({round(float(x) * 2) / 2 for x in mz}))
        mag = float(np.mean(mz))
    return GroundState(e0, deg, mag, sectors, method)


def shell_table_map(lat: SpinLattice, table: CouplingTable) -> dict[int, CouplingSet]:
    """First CouplingSet found per shell (for isotropic tables these are all equal)."""
    out = {}
    for b, c in table:
        out.setdefault(b.shell, c)
    return out


def neighbours(lat: SpinLattice, shell: int = 0) -> dict[int, list[int]]:
    nb: dict[int, list[int]] = {i: [] for i in range(lat.n_sites)}
    for b in lat.bonds_in_shell(shell):
        nb[b.i].append(b.j)
        nb[b.j].append(b.i)
    return nb

