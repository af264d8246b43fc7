"""Scattering matrices, resonance zeros, and the one-/few-pole approximations.

All scattering formulas are Cayley-type fractions of a real symmetric
DN matrix against the open-channel wavenumbers, with the denominator as
the left factor:

    S = -(DN - i K_+)^{-1} (DN + i K_+) = (i K_+ - DN)^{-1} (i K_+ + DN).

With equal wavenumbers across open modes the result is plainly unitary;
in general K_+^{1/2} S K_+^{-1/2} is the unitary, complex-symmetric
flux-normalized matrix.  Replacing DN by polar terms of the
intermediate-operator resonances gives the one-pole and essential
(few-pole) approximations used everywhere downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dnmap import DnBlocks, IntermediateDn, intermediate_dn
from .errors import NoConvergenceError, RegimeError, SingularDenominatorError

_RES_H_FRACTION = 1e-4  # default probe step for numeric residue extraction


@dataclass(frozen=True)
class ScatteringMatrix:
    """Open-channel scattering matrix at one energy."""

    lam: float
    s: np.ndarray
    unitarity_defect: float = float("nan")

    def __post_init__(self):
        self.s.setflags(write=False)
        if np.isnan(self.unitarity_defect):
            d = np.linalg.norm(self.s.conj().T @ self.s - np.eye(self.s.shape[0]), 2)
            object.__setattr__(self, "unitarity_defect", float(d))

    @property
    def transmissions(self) -> np.ndarray:
        return np.abs(self.s) ** 2


@dataclass(frozen=True)
class ResonanceZero:
    """Zero of the one-pole scattering matrix in the upper half-plane."""

    lam: complex
    residual: float


@dataclass(frozen=True)
class EvanescentAmplitudes:
    """Closed-channel (decaying) coefficients of the scattered wave."""

    lam: float
    s: np.ndarray


def s_from_dn(dn_open: np.ndarray, kplus: np.ndarray, lam: float) -> ScatteringMatrix:
    """Cayley fraction of an open-channel DN matrix (denominator first)."""
    n = dn_open.shape[0]
    denom = 1j * np.diag(kplus) - dn_open
    if n and np.linalg.cond(denom) > 1e13:
        raise SingularDenominatorError(
            "i K_+ - DN is numerically singular; with a real symmetric DN and "
            "positive K_+ this signals an assembly bug"
        )
    s = np.linalg.solve(denom, 1j * np.diag(kplus) + dn_open)
    return ScatteringMatrix(lam, s)


def s_full(blocks: DnBlocks, kplus: np.ndarray, kminus: np.ndarray) -> ScatteringMatrix:
    """Scattering matrix from the framed compact-part blocks (route a)."""
    idn = intermediate_dn(blocks, kminus)
    return s_from_dn(idn.matrix, kplus, blocks.lam)


def s_intermediate(idn: IntermediateDn, kplus: np.ndarray) -> ScatteringMatrix:
    """Scattering matrix from the intermediate-operator DN map (route b)."""
    return s_from_dn(idn.matrix, kplus, idn.lam)


def s_one_pole(lam0: float, phi0: np.ndarray, kplus: np.ndarray,
               lam: float) -> ScatteringMatrix:
    """One-pole approximation via the rank-one update (no dense inverse).

    phi0 is the residue vector of the intermediate DN map at its pole
    lam0; at lam = lam0 the removable limit is evaluated directly.
    """
    phi0 = np.ravel(phi0)
    n = kplus.size
    if not np.any(phi0):
        return ScatteringMatrix(lam, np.eye(n, dtype=complex))
    w = lam - lam0
    kg = phi0 / kplus
    q = float(phi0 @ kg)          # <K^{-1} phi, phi>, real positive
    if w == 0.0:
        s = np.eye(n, dtype=complex) - 2.0 * np.outer(kg, phi0) / q
    else:
        s = np.eye(n, dtype=complex) - 2j * np.outer(kg, phi0) / (w + 1j * q)
    return ScatteringMatrix(lam, s)


def resonance_zero(lam0: float, phi0: np.ndarray, kplus_fn, max_iter: int = 100,
                   tol: float = 1e-12) -> ResonanceZero:
    """Zero of the one-pole numerator: lam = lam0 + i <K_+^{-1}(lam) phi0, phi0>.

    Solved by fixed-point iteration (the dominance conditions make it a
    contraction); a 2D complex Newton fallback covers slow cases.
    """
    phi0 = np.ravel(phi0)

    def g(lam):
        return lam0 + 1j * np.sum(phi0 * phi0 / kplus_fn(lam))

    lam = complex(lam0) + 1e-12j
    prev_step = np.inf
    for _ in range(max_iter):
        nxt = g(lam)
        step = abs(nxt - lam)
        lam = nxt
        if step <= tol * max(1.0, abs(lam)):
            return ResonanceZero(lam, abs(lam - g(lam)))
        if step > 0.9 * prev_step and step > 1e-8:
            break
        prev_step = step
    # Newton on F(lam) = lam - g(lam)
    for _ in range(max_iter):
        f = lam - g(lam)
        if abs(f) <= tol * max(1.0, abs(lam)):
            break
        h = 1e-7 * max(1.0, abs(lam))
        df = ((lam + h - g(lam + h)) - f) / h
        lam = lam - f / df
    resid = abs(lam - g(lam))
    if resid > 1e-8 * max(1.0, abs(lam)):
        raise NoConvergenceError(f"resonance-zero iteration stalled at residual {resid}")
    return ResonanceZero(lam, resid)


def subordination_d(dn0_of_lam, kplus_of_lam, window: tuple[float, float],
                    n_grid: int = 64) -> float:
    """sup over the window of || K_+^{-1/2} DN0 K_+^{-1/2} ||.

    DN0 is the non-resonance remainder of the intermediate DN map; small
    d marks the one-pole regime.
    """
    lo, hi = window
    worst = 0.0
    for lam in np.linspace(lo, hi, n_grid):
        w = 1.0 / np.sqrt(kplus_of_lam(lam))
        m = w[:, None] * dn0_of_lam(lam) * w[None, :]
        worst = max(worst, float(np.linalg.norm(0.5 * (m + m.T), 2)))
    return worst


def deviation_bound(d: float, kplus_at_lam0: np.ndarray) -> float:
    """One-pole deviation bound (2d/(1-d)) * (3/2) * ||K^{1/2}|| ||K^{-1/2}||."""
    if d >= 1.0:
        raise RegimeError(f"subordination d={d} >= 1: outside the one-pole regime")
    cond = float(np.sqrt(np.max(kplus_at_lam0) / np.min(kplus_at_lam0)))
    return (2.0 * d / (1.0 - d)) * 1.5 * cond


def s_essential(poles, kplus: np.ndarray, lam: float) -> ScatteringMatrix:
    """Few-pole (essential band) approximation.

    ``poles``: (lam_r, residue) pairs, each residue a vector or a matrix
    of dyad columns.  With no poles the DN map is zero and S = I.
    """
    n = kplus.size
    dn = np.zeros((n, n))
    for lam_r, res in poles:
        v = np.atleast_2d(np.asarray(res, dtype=float))
        if v.shape[0] != n:
            v = v.T
        dn = dn + (v @ v.T) / (lam - lam_r)
    return s_from_dn(dn, kplus, lam)


def evanescent_amplitudes(blocks: DnBlocks, kminus: np.ndarray, nu_in: np.ndarray,
                          smat: ScatteringMatrix) -> EvanescentAmplitudes:
    """Closed-channel coefficients u_- = -(DN_mm - K_-)^{-1} DN_mp (nu + S nu)."""
    denom = blocks.mm - np.diag(kminus)
    if blocks.n_closed and np.linalg.cond(denom) > 1e13:
        raise SingularDenominatorError("closed-block denominator singular (dispersion root)")
    drive = nu_in + smat.s @ nu_in
    return EvanescentAmplitudes(blocks.lam, -np.linalg.solve(denom, blocks.mp @ drive))


# ------------------------------------------------------------- residues

def residue_dyad(dn_of_lam, pole: float, h: float) -> np.ndarray:
    """Residue matrix of a DN map at a simple pole by two-point Richardson.

    (lam - pole) DN(lam) at pole +/- h averages to residue + O(h^2).
    """
    up = h * dn_of_lam(pole + h)
    dn = -h * dn_of_lam(pole - h)
    r = 0.5 * (up + dn)
    return 0.5 * (r + r.T)


def residue_vector(dn_of_lam, pole: float, h: float, rank: int = 1) -> np.ndarray:
    """Leading residue direction(s) scaled to reproduce the dyad.

    Returns a vector for rank 1, else a matrix of scaled columns; small
    negative eigenvalues from the O(h^2) probe error are clipped.
    """
    r = residue_dyad(dn_of_lam, pole, h)
    vals, vecs = np.linalg.eigh(r)
    order = np.argsort(vals)[::-1]
    vals, vecs = np.maximum(vals[order], 0.0), vecs[:, order]
    cols = vecs[:, :rank] * np.sqrt(vals[:rank])
    # fix the sign convention: largest-magnitude component positive
    for j in range(cols.shape[1]):
        i = int(np.argmax(np.abs(cols[:, j])))
        if cols[i, j] < 0:
            cols[:, j] = -cols[:, j]
    return cols[:, 0] if rank == 1 else cols
