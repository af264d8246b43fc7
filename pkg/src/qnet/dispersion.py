"""Intermediate-operator eigenvalues as roots of the dispersion equation.

On the spectral band the eigenvalue condition DN_mm(lam) nu = K_-(lam) nu
is symmetrized into

    M(lam) w = -w,    M = |K_-|^{-1/2} DN_mm |K_-|^{-1/2},

so roots are energies where an eigenvalue branch of M crosses -1 (the
dispersion equation as printed without the sign also admits +1 crossings;
those fail the defining residual and are discarded).  Branches are
tracked through the scan by eigenvector overlap to stay on one branch
across crossings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BandEdgeError, NoConvergenceError
from .network import ChannelBasis, k_minus

#: eigenvector-overlap threshold for branch identification between scan points
OVERLAP_MIN = 0.7
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class DispersionRoot:
    """One intermediate eigenvalue with its closed-channel trace vector."""

    lam: float
    nu: np.ndarray
    residual: float

    def __post_init__(self):
        self.nu.setflags(write=False)


def closed_map(dnmm: np.ndarray, kminus: np.ndarray) -> np.ndarray:
    """Symmetrized closed-channel map |K_-|^{-1/2} DN_mm |K_-|^{-1/2}."""
    w = 1.0 / np.sqrt(np.abs(kminus))
    m = w[:, None] * dnmm * w[None, :]
    return 0.5 * (m + m.T)


def secular_function(dnmm: np.ndarray, kminus: np.ndarray) -> float:
    """Largest-magnitude eigenvalue of the closed map, minus one.

    Zero at (and only at) energies where some branch reaches modulus one;
    the physical roots are the -1 crossings, enforced downstream through
    the residual of DN_mm - K_-.
    """
    if dnmm.shape[0] == 0:
        return -1.0
    mu = np.linalg.eigvalsh(closed_map(dnmm, kminus))
    return float(np.max(np.abs(mu)) - 1.0)


def _root_candidate(dnmm: np.ndarray, kminus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(closed_map(dnmm, kminus))


def _residual(dnmm: np.ndarray, kminus: np.ndarray, nu: np.ndarray) -> float:
    return float(np.linalg.norm((dnmm - np.diag(kminus)) @ nu) / np.linalg.norm(nu))


def _scan_segments(band: tuple[float, float], exclusions, n_scan: int):
    """Split the band into open segments avoiding pole exclusion windows."""
    lo, hi = band
    edges = [(max(lo, a), min(hi, b)) for a, b in exclusions if a < hi and b > lo]
    edges.sort()
    segments = []
    cur = lo
    for a, b in edges:
        if a > cur:
            segments.append((cur, a))
        cur = max(cur, b)
    if cur < hi:
        segments.append((cur, hi))
    total = sum(b - a for a, b in segments)
    out = []
    for a, b in segments:
        n = max(8, int(round(n_scan * (b - a) / total)))
        out.append((a, b, n))
    return out


def find_roots(mm_of_lam, basis: ChannelBasis, band: tuple[float, float],
               n_scan: int = 256, exclusions=(), resid_tol: float = RESIDUAL_TOL,
               rtol: float = 1e-13, _depth: int = 0) -> list[DispersionRoot]:
    """All dispersion roots inside the band.

    ``mm_of_lam`` evaluates the closed-closed DN block; ``exclusions``
    holds (lo, hi) windows around compact-part eigenvalues where the
    block itself is singular.
    """
    if basis.n_closed == 0:
        return []
    lo, hi = band
    if not lo < hi:
        raise BandEdgeError(f"empty band ({lo}, {hi})")
    guard = 1e-6 * (hi - lo)
    roots: list[DispersionRoot] = []
    for a, b, n in _scan_segments((lo + guard, hi - guard), exclusions, n_scan):
        roots.extend(
            _roots_in_segment(mm_of_lam, basis, a, b, n, resid_tol, rtol, _depth)
        )
    roots.sort(key=lambda r: r.lam)
    unique: list[DispersionRoot] = []
    for r in roots:
        if not unique or abs(r.lam - unique[-1].lam) > 1e-9 * max(1.0, abs(r.lam)):
            unique.append(r)
    return unique


def _roots_in_segment(mm_of_lam, basis, a, b, n, resid_tol, rtol, depth):
    grid = np.linspace(a, b, n)
    evals, evecs = [], []
    for lam in grid:
        mu, v = _root_candidate(mm_of_lam(lam), k_minus(basis, lam))
        evals.append(mu)
        evecs.append(v)
    roots = []
    nb = evals[0].size
    for i in range(len(grid) - 1):
        overlap = np.abs(evecs[i].T @ evecs[i + 1])
        match = np.argmax(overlap, axis=1)
        ok = overlap[np.arange(nb), match] >= OVERLAP_MIN
        if not (np.all(ok) and np.array_equal(np.sort(match), np.arange(nb))):
            if depth >= 1:
                raise NoConvergenceError(
                    f"unresolved branch crossing in [{grid[i]}, {grid[i+1]}]"
                )
            roots.extend(
                _roots_in_segment(mm_of_lam, basis, grid[i], grid[i + 1],
                                  4 * max(n // (len(grid) - 1), 8),
                                  resid_tol, rtol, depth + 1)
            )
            continue
        for j in range(nb):
            jj = match[j]
            for target in (-1.0, 1.0):
                f0 = evals[i][j] - target
                f1 = evals[i + 1][jj] - target
                if f0 == 0.0 or np.sign(f0) == np.sign(f1):
                    continue
                lam_root, nu = _refine(mm_of_lam, basis, grid[i], grid[i + 1],
                                       evecs[i][:, j], target, rtol)
                resid = _residual(mm_of_lam(lam_root), k_minus(basis, lam_root), nu)
                if resid <= resid_tol:
                    roots.append(DispersionRoot(lam_root, nu, resid))
    return roots


def _refine(mm_of_lam, basis, a, b, ref_vec, target, rtol):
    """Bisection on one tracked branch of the closed map."""
    def branch(lam, ref):
        mu, v = _root_candidate(mm_of_lam(lam), k_minus(basis, lam))
        j = int(np.argmax(np.abs(ref @ v)))
        return mu[j] - target, v[:, j]

    fa, _ = branch(a, ref_vec)
    while b - a > rtol * max(1.0, abs(b)):
        mid = 0.5 * (a + b)
        fm, vm = branch(mid, ref_vec)
        if np.sign(fm) == np.sign(fa):
            a, fa, ref_vec = mid, fm, vm
        else:
            b = mid
    lam_root = 0.5 * (a + b)
    _, w = branch(lam_root, ref_vec)
    km = k_minus(basis, lam_root)
    nu = w / np.sqrt(np.abs(km))
    nu = nu / np.linalg.norm(nu)
    return lam_root, nu
