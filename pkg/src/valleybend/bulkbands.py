"""Plane-wave Floquet-Bloch solver for the bulk operators, Dirac-point analysis,
perturbation coupling, and gap/band-inversion diagnostics.

The quasi-periodic eigenproblem -div((a + s*delta*b) grad u) = lambda u on the
torus becomes the Hermitian matrix A[i,j] = c_eff(Gi-Gj) (kappa+Gi).(kappa+Gj)
in the plane-wave basis exp(i(kappa+G)x). The truncation set is the circular,
kappa-centered set {G : |kappa+G| <= Gmax}, which is closed under the (twisted)
rotation and reflection actions, so the symmetry-forced degeneracies are exact
at the discrete level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeGeometry, MediumSpec, FourierTable, fourier_coefficients

__all__ = [
    "BlochBandResult",
    "DiracPointData",
    "NoDiracPoint",
    "GapClosed",
    "BulkSolver",
    "shell_radius",
    "solve_bloch",
    "detect_dirac",
    "perturbation_identities",
    "gap_and_inversion",
]


class NoDiracPoint(Exception):
    """Degeneracy gap at K above tolerance: medium does not produce touching bands."""


class GapClosed(Exception):
    """No common spectral gap found at this delta."""


TAU = np.exp(2j * np.pi / 3)


def shell_radius(geometry: LatticeGeometry, nshells: int) -> float:
    """Radius enclosing the first `nshells` nonzero shells of the reciprocal lattice."""
    rng = np.arange(-3 * nshells, 3 * nshells + 1)
    M1, M2 = np.meshgrid(rng, rng, indexing="ij")
    G = M1[..., None] * geometry.e1s + M2[..., None] * geometry.e2s
    mags = np.unique(np.round(np.linalg.norm(G, axis=-1), 9))
    mags = mags[mags > 1e-9]
    if nshells > len(mags):
        raise ValueError("nshells too large for the scanned index range")
    return float(mags[nshells - 1]) * (1 + 1e-9)


def basis_set(geometry: LatticeGeometry, kappa, gmax: float) -> np.ndarray:
    """Integer indices (m1, m2) with |kappa + m1 e1s + m2 e2s| <= gmax."""
    kappa = np.asarray(kappa, dtype=float)
    B = geometry.recip_matrix
    # bounding box in integer coordinates
    corners = np.linalg.solve(B, (np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]]) * gmax - kappa).T).T
    lo = np.floor(corners.min(axis=0)).astype(int) - 1
    hi = np.ceil(corners.max(axis=0)).astype(int) + 1
    m1 = np.arange(lo[0], hi[0] + 1)
    m2 = np.arange(lo[1], hi[1] + 1)
    M1, M2 = np.meshgrid(m1, m2, indexing="ij")
    G = M1[..., None] * geometry.e1s + M2[..., None] * geometry.e2s
    keep = np.linalg.norm(kappa + G, axis=-1) <= gmax
    idx = np.stack([M1[keep], M2[keep]], axis=-1)
    # deterministic ordering: by |kappa+G|, then lexicographic
    key = np.linalg.norm(kappa + idx @ np.stack([geometry.e1s, geometry.e2s]), axis=-1)
    order = np.lexsort((idx[:, 1], idx[:, 0], np.round(key, 9)))
    return idx[order]


@dataclass
class BlochBandResult:
    """Eigenpairs of the quasi-periodic bulk operator at one quasi-momentum."""

    kappa: np.ndarray
    eigenvalues: np.ndarray          # ascending, first nbands
    eigenvectors: np.ndarray         # columns, plane-wave coefficients
    basis: np.ndarray                # (n, 2) integer reciprocal indices
    delta_sign: int


@dataclass
class DiracPointData:
    lambda_star: float
    alpha_star: float
    u1: np.ndarray                   # rotation eigenvector with eigenvalue tau
    u2: np.ndarray                   # rotation eigenvector with eigenvalue conj(tau)
    tau1: complex
    tau2: complex
    t_star: float
    basis: np.ndarray
    c0: float = 0.9
    slopes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    curvature_correction: float = 0.0

    def gap_interval(self, delta: float):
        """Predicted gap interval (lambda* -+ c0 |t* delta|) at perturbation strength delta."""
        half = self.c0 * abs(self.t_star) * delta
        return (self.lambda_star - half, self.lambda_star + half)


class BulkSolver:
    """Caches Fourier tables of a medium and solves bulk Bloch problems."""

    def __init__(self, medium: MediumSpec, nshells: int = 15, table_nmax: int = 40,
                 table_ngrid: int = 320):
        self.medium = medium
        self.geometry = medium.geometry
        self.gmax = shell_radius(self.geometry, nshells)
        self.nshells = nshells
        self.tab_a = fourier_coefficients(medium, "a", nmax=table_nmax, ngrid=table_ngrid)
        self.tab_b = fourier_coefficients(medium, "b", nmax=table_nmax, ngrid=table_ngrid)

    # -- matrix assembly ---------------------------------------------------

    def _coef_matrix(self, tab: FourierTable, basis: np.ndarray) -> np.ndarray:
        d1 = basis[:, 0][:, None] - basis[:, 0][None, :]
        d2 = basis[:, 1][:, None] - basis[:, 1][None, :]
        return tab.get(d1, d2)

    def assemble(self, kappa, delta_sign: int, basis: np.ndarray | None = None):
        kappa = np.asarray(kappa, dtype=float)
        if basis is None:
            basis = basis_set(self.geometry, kappa, self.gmax)
        kg = kappa + basis @ np.stack([self.geometry.e1s, self.geometry.e2s])
        dots = kg @ kg.T
        chat = self._coef_matrix(self.tab_a, basis)
        if delta_sign:
            chat = chat + delta_sign * self.medium.delta * self._coef_matrix(self.tab_b, basis)
        A = chat * dots
        herm = np.max(np.abs(A - A.conj().T))
        if herm > 1e-10 * max(1.0, np.max(np.abs(A))):
            raise AssertionError("non-Hermitian assembly: symmetry bug in Fourier table")
        return 0.5 * (A + A.conj().T), basis

    def solve(self, kappa, nbands: int = 6, delta_sign: int = 0,
              basis: np.ndarray | None = None, fold: bool = True) -> BlochBandResult:
        kappa = np.asarray(kappa, dtype=float)
        if fold and basis is None:
            kappa = self.geometry.fold_quasimomentum(kappa)
        A, basis = self.assemble(kappa, delta_sign, basis)
        w, v = np.linalg.eigh(A)
        return BlochBandResult(kappa=kappa, eigenvalues=w[:nbands],
                               eigenvectors=v[:, :nbands], basis=basis,
                               delta_sign=delta_sign)

    # -- symmetry action ---------------------------------------------------

    def rotation_matrix_at_K(self, basis: np.ndarray) -> np.ndarray:
        """Permutation representing u(x) -> u(Rx) on plane-wave coefficients at K.

        (Rot c)_{G'} = c_{R G' - e1s}; the kappa-centered set at K is closed under
        the affine index map, and the cube of the map is the identity.
        """
        index = {(int(m1), int(m2)): i for i, (m1, m2) in enumerate(basis)}
        n = len(basis)
        P = np.zeros((n, n))
        for j, (m1, m2) in enumerate(basis):
            # R G in integer coords: (m1, m2) -> (-m1 - m2, m1); then subtract e1s
            r1, r2 = -int(m1) - int(m2) - 1, int(m1)
            i = index.get((r1, r2))
            if i is None:
                raise AssertionError("basis not closed under rotation at K")
            P[j, i] = 1.0
        return P

    def perturbation_matrix(self, kappa, basis: np.ndarray) -> np.ndarray:
        """Quadratic-form matrix of the perturbation operator in the plane-wave basis."""
        kappa = np.asarray(kappa, dtype=float)
        kg = kappa + basis @ np.stack([self.geometry.e1s, self.geometry.e2s])
        return self._coef_matrix(self.tab_b, basis) * (kg @ kg.T)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def solve_bloch(medium: MediumSpec, kappa, nbands: int = 6, delta_sign: int = 0,
                nshells: int = 15) -> BlochBandResult:
    return BulkSolver(medium, nshells=nshells).solve(kappa, nbands=nbands, delta_sign=delta_sign)


def detect_dirac(solver: BulkSolver, degeneracy_rtol: float = 1e-8,
                 fit_mags=(1e-3, 8e-3), nfit: int = 7) -> DiracPointData:
    """Locate the band-1/2 touching at K, fit the cone slope, and extract the
    rotation eigenvalues and the perturbation coupling."""
    geo = solver.geometry
    K = geo.K
    res = solver.solve(K, nbands=3, delta_sign=0, fold=False)
    lam1, lam2 = res.eigenvalues[0], res.eigenvalues[1]
    lam_star = 0.5 * (lam1 + lam2)
    if abs(lam2 - lam1) > degeneracy_rtol * max(1.0, abs(lam_star)):
        raise NoDiracPoint(
            f"bands 1-2 split by {abs(lam2 - lam1):.3e} at K; re-tune medium parameters"
        )

    # rotation eigenvalues in the degenerate subspace
    P = solver.rotation_matrix_at_K(res.basis)
    V2 = res.eigenvectors[:, :2]
    Mrot = V2.conj().T @ (P @ V2)
    tau_eig, tau_vec = np.linalg.eig(Mrot)
    # order so the first has eigenvalue tau = exp(2 pi i / 3)
    order = np.argsort(np.abs(tau_eig - TAU))
    tau_eig = tau_eig[order]
    tau_vec = tau_vec[:, order]
    u1 = V2 @ tau_vec[:, 0]
    u2 = V2 @ tau_vec[:, 1]
    u1 /= np.linalg.norm(u1)
    u2 /= np.linalg.norm(u2)

    # cone slopes along >= 3 directions, linear fit with quadratic correction
    dirs = [np.array([1.0, 0.0])]
    from .lattice import ROT
    dirs.append(ROT @ dirs[0])
    dirs.append(ROT @ dirs[1])
    dirs.append(np.array([0.0, 1.0]))
    qs = np.linspace(fit_mags[0], fit_mags[1], nfit)
    slopes = []
    curv_corr = 0.0
    for d in dirs:
        lam2_vals = []
        for q in qs:
            r = solver.solve(K + q * d, nbands=2, delta_sign=0, basis=res.basis, fold=False)
            lam2_vals.append(r.eigenvalues[1])
        lam2_vals = np.array(lam2_vals)
        # least squares lam2 - lam* = alpha q + beta q^2
        Amat = np.stack([qs, qs ** 2], axis=1)
        coef, *_ = np.linalg.lstsq(Amat, lam2_vals - lam_star, rcond=None)
        slopes.append(coef[0])
        curv_corr = max(curv_corr, abs(coef[1]) * qs[-1] / abs(coef[0]))
    slopes = np.array(slopes)
    alpha_star = float(np.mean(slopes))

    B = solver.perturbation_matrix(K, res.basis)
    t_star = float(np.real(u1.conj() @ (B @ u1)))

    return DiracPointData(lambda_star=float(lam_star), alpha_star=alpha_star,
                          u1=u1, u2=u2, tau1=complex(tau_eig[0]), tau2=complex(tau_eig[1]),
                          t_star=t_star, basis=res.basis, slopes=slopes,
                          curvature_correction=float(curv_corr))


def perturbation_identities(solver: BulkSolver, dirac: DiracPointData) -> dict:
    """Quadratic forms of the perturbation on the degenerate eigenpair."""
    B = solver.perturbation_matrix(solver.geometry.K, dirac.basis)
    diag_p = complex(dirac.u1.conj() @ (B @ dirac.u1))
    diag_m = complex(dirac.u2.conj() @ (B @ dirac.u2))
    off = complex(dirac.u1.conj() @ (B @ dirac.u2))
    return {"diag_plus": diag_p, "diag_minus": diag_m, "offdiag": off}


def _bz_mesh(geometry: LatticeGeometry, n: int) -> np.ndarray:
    """Symmetric fractional mesh over the Brillouin-zone parallelogram."""
    fr = (np.arange(n) - n // 2) / n
    S, T = np.meshgrid(fr, fr, indexing="ij")
    return np.stack([S, T], axis=-1).reshape(-1, 2) @ np.stack(
        [geometry.e1s, geometry.e2s])


def gap_and_inversion(solver: BulkSolver, dirac: DiracPointData, mesh_n: int = 18,
                      require_gap: bool = True) -> dict:
    """Scan bands 1-3 over a symmetric BZ mesh for both perturbation signs.

    Returns the measured common gap around lambda*, the first-order width
    2|t* delta|, the band-inversion flag, and no-fold diagnostics.
    """
    if solver.medium.delta <= 0:
        raise GapClosed("delta = 0 closes the gap at the Dirac point")
    if abs(dirac.t_star) < 1e-12:
        raise GapClosed("t* vanishes: perturbation does not open a gap")
    geo = solver.geometry
    mesh = _bz_mesh(geo, mesh_n)
    gaps = {}
    band3_min = np.inf
    near_vertex = []
    for sign in (+1, -1):
        lam1_max, lam2_min = -np.inf, np.inf
        for kappa in mesh:
            r = solver.solve(kappa, nbands=3, delta_sign=sign, fold=False)
            lam1_max = max(lam1_max, r.eigenvalues[0])
            lam2_min = min(lam2_min, r.eigenvalues[1])
            band3_min = min(band3_min, r.eigenvalues[2])
            if sign == +1 and abs(r.eigenvalues[0] - dirac.lambda_star) < 0.25 * abs(
                    dirac.t_star) * solver.medium.delta:
                near_vertex.append(kappa)
        gaps[sign] = (lam1_max, lam2_min)
    lo = max(gaps[+1][0], gaps[-1][0])
    hi = min(gaps[+1][1], gaps[-1][1])
    if require_gap and hi <= lo:
        raise GapClosed(f"no common gap: ({lo:.6g}, {hi:.6g}); mesh too coarse or delta too small")

    # band inversion: rotation eigenvalue of the upper band at K swaps with the sign
    P = solver.rotation_matrix_at_K(dirac.basis)
    taus = {}
    for sign in (+1, -1):
        r = solver.solve(geo.K, nbands=2, delta_sign=sign, basis=dirac.basis, fold=False)
        v = r.eigenvectors[:, 1]
        taus[sign] = complex(v.conj() @ (P @ v))
    inversion = abs(taus[+1] - taus[-1]) > 0.5  # tau vs conj(tau) differ by sqrt(3)

    return {
        "gap": (float(lo), float(hi)),
        "width": float(hi - lo),
        "first_order_width": 2 * abs(dirac.t_star) * solver.medium.delta,
        "inversion": bool(inversion),
        "tau_upper": taus,
        "band3_min": float(band3_min),
        "vertices_near_lambda_star": near_vertex,
    }
