"""Triangular-lattice geometry, symmetry operations, and coefficient fields.

Builds the honeycomb-type media: a smooth background coefficient with the full
C3v + inversion symmetry, an inversion-breaking perturbation that vanishes in a
band around the horizontal interface, and the derived interface / bent-interface
coefficients.

Units: lattice constant = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io

import numpy as np

__all__ = [
    "LatticeGeometry",
    "SymmetryOp",
    "MediumSpec",
    "FourierTable",
    "build_geometry",
    "build_medium",
    "fourier_coefficients",
]


# ---------------------------------------------------------------------------
# Geometry and symmetry operations
# ---------------------------------------------------------------------------

ROT = np.array([[-0.5, -np.sqrt(3) / 2], [np.sqrt(3) / 2, -0.5]])   # 2pi/3 rotation
REFL = np.array([[-1.0, 0.0], [0.0, 1.0]])                          # y-axis reflection
INV = np.array([[-1.0, 0.0], [0.0, -1.0]])                          # inversion
REFL_G = REFL @ ROT                                                 # reflection about Gamma


@dataclass(frozen=True)
class SymmetryOp:
    """Orthogonal point-group operation acting on spatial variables."""

    matrix: np.ndarray
    tag: str

    def __call__(self, x):
        return np.asarray(x) @ self.matrix.T


@dataclass(frozen=True)
class LatticeGeometry:
    """Direct/reciprocal basis and derived objects for the triangular lattice.

    e1, e2 span the direct lattice; e1s, e2s the reciprocal one (ei.ejs = 2pi dij).
    K is the Brillouin-zone vertex hosting the band touching, Gdir = 2 e1 + e2 the
    transverse strip vector, nu the unit right-pointing normal of the auxiliary
    interface Gamma = R * Gdir.
    """

    e1: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    e2: np.ndarray = field(default_factory=lambda: np.array([-0.5, np.sqrt(3) / 2]))
    e1s: np.ndarray = field(default_factory=lambda: 2 * np.pi * np.array([1.0, 1 / np.sqrt(3)]))
    e2s: np.ndarray = field(default_factory=lambda: 2 * np.pi * np.array([0.0, 2 / np.sqrt(3)]))
    K: np.ndarray = field(default_factory=lambda: (2 * np.pi / 3) * np.array([1.0, np.sqrt(3)]))
    Kp: np.ndarray = field(default_factory=lambda: (2 * np.pi / 3) * np.array([-1.0, np.sqrt(3)]))
    Gdir: np.ndarray = field(default_factory=lambda: np.array([1.5, np.sqrt(3) / 2]))
    nu: np.ndarray = field(default_factory=lambda: np.array([0.5, -np.sqrt(3) / 2]))

    @property
    def cell_matrix(self):
        """Columns e1, e1+e2: the parallelogram cell Y."""
        return np.column_stack([self.e1, self.e1 + self.e2])

    @property
    def strip_matrix(self):
        """Columns e1, Gdir: the skew map of strip coordinates."""
        return np.column_stack([self.e1, self.Gdir])

    @property
    def recip_matrix(self):
        return np.column_stack([self.e1s, self.e2s])

    @property
    def cell_area(self):
        return abs(np.linalg.det(np.column_stack([self.e1, self.e2])))

    def ops(self):
        return {
            "R": SymmetryOp(ROT, "R"),
            "F": SymmetryOp(REFL, "F"),
            "V": SymmetryOp(INV, "V"),
            "F_Gamma": SymmetryOp(REFL_G, "F_Gamma"),
        }

    def fold_quasimomentum(self, kappa):
        """Fold a quasi-momentum into the reciprocal cell Y* (coeffs in [-1/2, 1/2))."""
        st = np.linalg.solve(self.recip_matrix, np.asarray(kappa, dtype=float))
        st = st - np.round(st)
        return self.recip_matrix @ st

    def fold_point(self, x):
        """Fold spatial points into the cell Y (coeffs in [0, 1))."""
        x = np.asarray(x, dtype=float)
        st = np.linalg.solve(self.cell_matrix, x.reshape(-1, 2).T)
        st = st - np.floor(st)
        out = (self.cell_matrix @ st).T
        return out.reshape(x.shape)


def build_geometry() -> LatticeGeometry:
    """Construct the lattice geometry and check its invariants."""
    g = LatticeGeometry()
    gram = np.array([[g.e1s @ g.e1, g.e1s @ g.e2], [g.e2s @ g.e1, g.e2s @ g.e2]])
    if not np.allclose(gram, 2 * np.pi * np.eye(2), atol=1e-12):
        raise AssertionError("reciprocal basis fails duality")
    if not np.allclose(ROT @ ROT @ ROT, np.eye(2), atol=1e-12):
        raise AssertionError("R^3 != I")
    if abs(np.linalg.norm(g.nu) - 1) > 1e-12 or abs(g.nu @ g.Gdir) > 1e-12:
        raise AssertionError("nu is not a unit normal of Gamma")
    # K is rotation-fixed modulo the reciprocal lattice
    res = g.fold_quasimomentum(ROT @ g.K) - g.fold_quasimomentum(g.K)
    if np.linalg.norm(res) > 1e-10:
        raise AssertionError("R*K is not equivalent to K")
    return g


# ---------------------------------------------------------------------------
# Medium construction
# ---------------------------------------------------------------------------

# Honeycomb site centers in the cell Y (cell coordinates 1/3 and 2/3 along e1, e1+e2)
SITE_A = np.array([0.5, np.sqrt(3) / 6])
SITE_B = np.array([1.0, np.sqrt(3) / 3])


def _bump(r2, r0, p=8):
    """C-infinity bump exp(1 - 1/(1 - (r/r0)^p)) on r < r0, vectorized in r^2.

    p = 2 is the classical mollifier; larger (even) p flattens the plateau while
    keeping compact support and smoothness.
    """
    u = np.asarray(r2) / (r0 * r0)
    out = np.zeros_like(u, dtype=float)
    inside = u < 1.0
    ui = u[inside] ** (p / 2)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui))
    return out


@dataclass(frozen=True)
class MediumSpec:
    """Coefficient fields of the photonic medium.

    a = a0 + ampA * (bumps at both honeycomb sites)      (R, F, V symmetric)
    b = ampB * (bumps at site A) - ampB * (bumps at B)   (R, F symmetric, V odd)
    b vanishes on |x2| < l by the clearance condition r0 < sqrt(3)/6 - l.

    Defaults are flat-bottomed wells (negative amplitude, plateau profile): the
    resulting nearly flat Dirac cone keeps the in-gap interface modes localized
    within a couple of cells, which the downstream strip and boundary-operator
    stages rely on.
    """

    a0: float = 1.0
    amp_a: float = -0.99
    amp_b: float = 0.0038
    r0: float = 0.26
    delta: float = 0.05
    l: float = 0.02
    bump_p: int = 8
    geometry: LatticeGeometry = field(default_factory=LatticeGeometry)

    def __post_init__(self):
        clearance = np.sqrt(3) / 6 - self.l
        if self.r0 >= clearance:
            raise ValueError(
                f"bump radius r0={self.r0} must stay below sqrt(3)/6 - l = {clearance:.4f} "
                "so the perturbation clears the interface band"
            )
        if self.a0 <= 0:
            raise ValueError("background a0 must be positive")
        # worst case per site: a0 + (amp_a -+ delta*amp_b) * bump, bump in [0, 1]
        if self.a0 + min(0.0, self.amp_a - self.delta * abs(self.amp_b)) <= 0:
            raise ValueError("coefficient a +- delta*b not uniformly positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    # -- samplers ----------------------------------------------------------

    def _site_sum(self, x, site):
        """Sum of the periodized bump at one site over the 3x3 nearest translates."""
        geo = self.geometry
        xf = geo.fold_point(np.asarray(x, dtype=float))
        pts = xf.reshape(-1, 2)
        total = np.zeros(len(pts))
        for m1 in (-1, 0, 1):
            for m2 in (-1, 0, 1):
                c = site + m1 * geo.e1 + m2 * geo.e2
                d = pts - c
                total += _bump(np.einsum("ij,ij->i", d, d), self.r0, self.bump_p)
        return total.reshape(np.asarray(x).shape[:-1])

    def a(self, x):
        return self.a0 + self.amp_a * (self._site_sum(x, SITE_A) + self._site_sum(x, SITE_B))

    def b(self, x):
        return self.amp_b * (self._site_sum(x, SITE_A) - self._site_sum(x, SITE_B))

    def a_bulk(self, x, sign: int):
        """a + sign*delta*b: the gapped bulk coefficient."""
        return self.a(x) + sign * self.delta * self.b(x)

    def a_interface(self, x):
        """a - delta*b below the interface E, a + delta*b above."""
        x = np.asarray(x, dtype=float)
        s = np.where(x[..., 1] < 0, -1.0, 1.0)
        return self.a(x) + s * self.delta * self.b(x)

    def a_bend(self, x):
        """a - delta*b inside the bent wedge 0 > x2 > sqrt(3) x1, a + delta*b outside."""
        x = np.asarray(x, dtype=float)
        inside = (x[..., 1] < 0) & (x[..., 1] > np.sqrt(3) * x[..., 0])
        s = np.where(inside, -1.0, 1.0)
        return self.a(x) + s * self.delta * self.b(x)

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        return {
            "a0": self.a0,
            "amp_a": self.amp_a,
            "amp_b": self.amp_b,
            "r0": self.r0,
            "delta": self.delta,
            "l": self.l,
            "bump_p": self.bump_p,
        }

    @classmethod
    def from_dict(cls, d) -> "MediumSpec":
        kw = {k: float(d[k]) for k in ("a0", "amp_a", "amp_b", "r0", "delta", "l")}
        kw["bump_p"] = int(d.get("bump_p", 8))
        return cls(**kw)

    def sample_csv(self, n: int = 64) -> str:
        """Cell-grid samples (x1, x2, a, b) as CSV text."""
        geo = self.geometry
        s, t = np.meshgrid(np.arange(n) / n, np.arange(n) / n, indexing="ij")
        pts = np.stack([s, t], axis=-1) @ geo.cell_matrix.T
        a = self.a(pts)
        b = self.b(pts)
        buf = io.StringIO()
        buf.write("x1,x2,a,b\n")
        for p, av, bv in zip(pts.reshape(-1, 2), a.ravel(), b.ravel()):
            buf.write(f"{p[0]:.12g},{p[1]:.12g},{av:.12g},{bv:.12g}\n")
        return buf.getvalue()


def build_medium(amp_a=-0.99, amp_b=0.0038, r0=0.26, delta=0.05, l=0.02, a0=1.0,
                 bump_p=8) -> MediumSpec:
    """Construct a medium and verify positivity on a sample grid."""
    m = MediumSpec(a0=a0, amp_a=amp_a, amp_b=amp_b, r0=r0, delta=delta, l=l, bump_p=bump_p)
    geo = m.geometry
    s, t = np.meshgrid(np.arange(48) / 48, np.arange(48) / 48, indexing="ij")
    pts = np.stack([s, t], axis=-1) @ geo.cell_matrix.T
    for sgn in (-1, 0, 1):
        vals = m.a(pts) + sgn * m.delta * m.b(pts)
        if vals.min() <= 0:
            raise ValueError("medium violates uniform positivity")
    return m


# ---------------------------------------------------------------------------
# Fourier table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FourierTable:
    """Plane-wave coefficients f(x) = sum_G c(G) exp(i G x) on a centered index grid.

    coeffs[p, q] corresponds to G = m1*e1s + m2*e2s with (m1, m2) = (p - nmax, q - nmax).
    """

    coeffs: np.ndarray
    nmax: int
    geometry: LatticeGeometry

    def get(self, m1, m2):
        """Coefficient at integer reciprocal index (vectorized); zero outside the table."""
        m1, m2 = np.broadcast_arrays(np.asarray(m1), np.asarray(m2))
        p = m1 + self.nmax
        q = m2 + self.nmax
        ok = (p >= 0) & (p < self.coeffs.shape[0]) & (q >= 0) & (q < self.coeffs.shape[1])
        out = np.zeros(m1.shape, dtype=complex)
        out[ok] = self.coeffs[p[ok], q[ok]]
        return out


def _rot_index(m1, m2):
    # G -> R G on integer reciprocal coordinates
    return -m1 - m2, m1


def _refl_index(m1, m2):
    # G -> F G
    return -m1, m1 + m2


def fourier_coefficients(medium: MediumSpec, which: str, nmax: int = 24, ngrid: int = 192,
                         symmetrize: bool = True) -> FourierTable:
    """FFT Fourier coefficients of the periodic field 'a' or 'b' over |m| <= nmax.

    The index set is the full square [-nmax, nmax]^2 (closed under R and F, which act
    as integer maps on reciprocal coordinates). Coefficients are optionally projected
    onto exact R/F symmetry, which both fields possess.
    """
    if which not in ("a", "b"):
        raise ValueError("which must be 'a' or 'b'")
    if ngrid <= 2 * nmax:
        raise ValueError("FFT grid too coarse for requested cutoff")
    geo = medium.geometry
    s, t = np.meshgrid(np.arange(ngrid) / ngrid, np.arange(ngrid) / ngrid, indexing="ij")
    pts = np.stack([s, t], axis=-1) @ geo.cell_matrix.T
    vals = medium.a(pts) if which == "a" else medium.b(pts)
    fft = np.fft.fft2(vals) / (ngrid * ngrid)

    # cell coordinates are along (e1, e1+e2): G = m1 e1s + m2 e2s has phase
    # exp(2i pi (m1 s + (m1+m2) t)), so FFT index (p, q) = (m1, m1+m2) up to sign.
    n = 2 * nmax + 1
    coeffs = np.zeros((n, n), dtype=complex)
    for m1 in range(-nmax, nmax + 1):
        for m2 in range(-nmax, nmax + 1):
            p = (-m1) % ngrid
            q = (-(m1 + m2)) % ngrid
            coeffs[m1 + nmax, m2 + nmax] = fft[p, q]

    if symmetrize:
        idx = np.arange(-nmax, nmax + 1)
        M1, M2 = np.meshgrid(idx, idx, indexing="ij")
        acc = np.zeros_like(coeffs)
        count = 0
        for use_f in (False, True):
            a1, a2 = (M1, M2) if not use_f else _refl_index(M1, M2)
            for _ in range(3):
                inside = (np.abs(a1) <= nmax) & (np.abs(a2) <= nmax)
                if not inside.all():
                    # boundary orbit leaves the table: fall back by zero padding
                    contrib = np.zeros_like(coeffs)
                    contrib[inside] = coeffs[a1[inside] + nmax, a2[inside] + nmax]
                else:
                    contrib = coeffs[a1 + nmax, a2 + nmax]
                acc = acc + contrib
                count += 1
                a1, a2 = _rot_index(a1, a2)
        coeffs = acc / count
        # real field: c(-G) = conj(c(G))
        coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1, ::-1]))

    return FourierTable(coeffs=coeffs, nmax=nmax, geometry=geo)
