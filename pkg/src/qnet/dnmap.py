"""Framed DN blocks, the intermediate-operator DN map, and resonance algebra.

The framed DN map of the compact part is split over the open/closed
channel decomposition into four blocks.  Eliminating the closed block
against the evanescent decrements K_- produces the DN map of the
intermediate operator,

    DN_L = DN_pp - DN_pm (DN_mm - K_-)^{-1} DN_mp,

whose poles are the intermediate eigenvalues.  Around a resonance
eigenvalue lam0 of the compact part the blocks split into the resonance
dyad and a regular remainder; the scalar denominator

    D(lam) = (2 mu)^2 (lam - lam0) + <phi-, (Kmm - K_-)^{-1} phi->

carries the relocated pole, and its zero matches the dispersion root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DispersionRootProximityError,
    PoleProximityError,
    ThinNetworkError,
    TieError,
)
from .network import ChannelBasis
from .spectra import GROUP_TOL, SpectralData

#: relative exclusion radius around retained eigenvalues for direct evaluation
EPS_POLE = 1e-7
#: condition-number guard for the closed-block inversion
COND_GUARD = 1e12


@dataclass(frozen=True)
class DnBlocks:
    """The four framed DN blocks at one energy (open/closed decomposition)."""

    lam: float
    pp: np.ndarray
    pm: np.ndarray
    mp: np.ndarray
    mm: np.ndarray

    def __post_init__(self):
        for a in (self.pp, self.pm, self.mp, self.mm):
            a.setflags(write=False)

    @property
    def n_open(self) -> int:
        return self.pp.shape[0]

    @property
    def n_closed(self) -> int:
        return self.mm.shape[0]

    @property
    def full(self) -> np.ndarray:
        return np.block([[self.pp, self.pm], [self.mp, self.mm]])

    @staticmethod
    def from_full(lam: float, m: np.ndarray, n_open: int) -> "DnBlocks":
        return DnBlocks(
            lam,
            m[:n_open, :n_open].copy(),
            m[:n_open, n_open:].copy(),
            m[n_open:, :n_open].copy(),
            m[n_open:, n_open:].copy(),
        )


@dataclass(frozen=True)
class IntermediateDn:
    """Open-channel DN map of the intermediate operator at one energy."""

    lam: float
    matrix: np.ndarray
    regular: bool = True

    def __post_init__(self):
        self.matrix.setflags(write=False)


def guard_poles(data: SpectralData, lam: float, eps_pole: float = EPS_POLE) -> None:
    """Reject evaluation within the exclusion radius of a retained eigenvalue."""
    if data.n == 0:
        return
    scale = np.maximum(1.0, np.abs(data.eigenvalues))
    gaps = np.abs(lam - data.eigenvalues) / scale
    j = int(np.argmin(gaps))
    if gaps[j] <= eps_pole:
        raise PoleProximityError(
            f"lambda={lam} is within the exclusion radius of eigenvalue "
            f"{data.eigenvalues[j]} (index {j})"
        )


def dn_blocks(data: SpectralData, basis: ChannelBasis, lam: float,
              eps_pole: float = EPS_POLE) -> DnBlocks:
    """Framed truncated DN series at energy lam (raw spectral sum).

    Each retained eigenvalue contributes its trace dyad weighted by
    1/(2 mu_well)^2 / (lam - lam_r).  The sum omits the tail above the
    cutoff; see ``tail_sensitivity`` and the exact well evaluators.
    """
    guard_poles(data, lam, eps_pole)
    w = 1.0 / (2.0 * data.masses) ** 2 / (lam - data.eigenvalues)
    m = (data.trace * w[:, None]).T @ data.trace
    return DnBlocks.from_full(lam, m, basis.n_open)


def exact_dn_blocks(evaluators: dict, basis: ChannelBasis, lam: float,
                    data: SpectralData | None = None,
                    eps_pole: float = EPS_POLE) -> DnBlocks:
    """Fully summed DN blocks from the exact well evaluators."""
    from .welldn import assemble_dn_matrix

    if data is not None:
        guard_poles(data, lam, eps_pole)
    m = assemble_dn_matrix(evaluators, basis, lam)
    return DnBlocks.from_full(lam, m, basis.n_open)


def tail_sensitivity(data: SpectralData, basis: ChannelBasis, lam: float) -> float:
    """Diagnostic: spectral-norm change of the series when the top half of
    the retained window is dropped.  Large values mean the raw series is far
    from converged at this cutoff."""
    full = dn_blocks(data, basis, lam).full
    half_cut = data.lam_cut / 2.0
    keep = data.eigenvalues <= half_cut
    half = SpectralData(
        data.eigenvalues[keep].copy(), data.trace[keep].copy(),
        tuple(w for w, k in zip(data.wells, keep) if k), half_cut,
        masses=data.masses[keep].copy(),
    )
    return float(np.linalg.norm(full - dn_blocks(half, basis, lam).full, 2))


def intermediate_dn(blocks: DnBlocks, kminus: np.ndarray,
                    cond_guard: float = COND_GUARD) -> IntermediateDn:
    """Eliminate the closed block: DN_pp - DN_pm (DN_mm - K_-)^{-1} DN_mp."""
    if blocks.n_closed == 0:
        return IntermediateDn(blocks.lam, blocks.pp.copy())
    denom = blocks.mm - np.diag(kminus)
    if np.linalg.cond(denom) > cond_guard:
        raise DispersionRootProximityError(
            f"closed-block denominator is singular at lambda={blocks.lam}: "
            "this energy is an intermediate-operator eigenvalue"
        )
    m = blocks.pp - blocks.pm @ scipy_solve_sym(denom, blocks.mp)
    return IntermediateDn(blocks.lam, 0.5 * (m + m.T))


def scipy_solve_sym(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Symmetric-factorization solve (the closed block is real symmetric)."""
    from scipy.linalg import solve

    return solve(0.5 * (a + a.T), b, assume_a="sym")


@dataclass(frozen=True)
class ResonanceSplit:
    """Resonance dyad vectors and the non-resonance remainders at one energy.

    ``phi_plus``/``phi_minus`` hold the open/closed projections of the
    resonance boundary traces as columns (one column per degenerate
    member); for a simple resonance they are single columns.
    """

    lam0: float
    mass: float
    phi_plus: np.ndarray
    phi_minus: np.ndarray
    kpp: np.ndarray
    kpm: np.ndarray
    kmm: np.ndarray

    @property
    def multiplicity(self) -> int:
        return self.phi_plus.shape[1]

    def reassembled(self, lam: float) -> np.ndarray:
        """Remainders plus the resonance polar term: reproduces the blocks."""
        w = 1.0 / (2.0 * self.mass) ** 2 / (lam - self.lam0)
        phi = np.vstack([self.phi_plus, self.phi_minus])
        n_open = self.phi_plus.shape[0]
        k = np.block([[self.kpp, self.kpm], [self.kpm.T, self.kmm]])
        return k + w * (phi @ phi.T)


def nearest_resonance(data: SpectralData, lam_ref: float,
                      tie_tol: float = GROUP_TOL) -> float:
    """Retained eigenvalue nearest to lam_ref; ties raise ``TieError``."""
    groups = data.groups()
    reps = np.array([data.eigenvalues[g[0]] for g in groups])
    gaps = np.abs(reps - lam_ref)
    order = np.argsort(gaps)
    if len(order) > 1:
        g0, g1 = gaps[order[0]], gaps[order[1]]
        if abs(g1 - g0) <= tie_tol * max(1.0, abs(lam_ref)):
            raise TieError(
                f"eigenvalues {reps[order[0]]} and {reps[order[1]]} are equally "
                f"near {lam_ref}; pass lam0 explicitly"
            )
    return float(reps[order[0]])


def resonance_split(blocks: DnBlocks, data: SpectralData, lam0: float,
                    group_tol: float = GROUP_TOL) -> ResonanceSplit:
    """Remove the lam0 polar term (summed over its degenerate group)."""
    group = data.group_of(lam0, group_tol)
    n_open = blocks.n_open
    mass = float(data.masses[group[0]])
    phi = data.trace[list(group)].T            # (n_modes, multiplicity)
    phi_plus = phi[:n_open]
    phi_minus = phi[n_open:]
    w = 1.0 / (2.0 * mass) ** 2 / (blocks.lam - data.eigenvalues[group[0]])
    kpp = blocks.pp - w * (phi_plus @ phi_plus.T)
    kpm = blocks.pm - w * (phi_plus @ phi_minus.T)
    kmm = blocks.mm - w * (phi_minus @ phi_minus.T)
    return ResonanceSplit(float(data.eigenvalues[group[0]]), mass,
                          phi_plus, phi_minus, kpp, kpm, kmm)


def thin_network_norm(kmm: np.ndarray, kminus: np.ndarray) -> float:
    """|K_-|^{-1/2} Kmm |K_-|^{-1/2} spectral norm; the network is thin iff < 1."""
    if kmm.shape[0] == 0:
        return 0.0
    w = 1.0 / np.sqrt(np.abs(kminus))
    sym = w[:, None] * kmm * w[None, :]
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (sym + sym.T)))))


def _closed_denominator(kmm: np.ndarray, kminus: np.ndarray) -> np.ndarray:
    k = kmm - np.diag(kminus)
    if np.linalg.cond(k) > COND_GUARD:
        raise ThinNetworkError("closed-block remainder Kmm - K_- is singular")
    return k


def denominator_d(phi_minus: np.ndarray, kmm: np.ndarray, kminus: np.ndarray,
                  lam: float, lam0: float, mass: float) -> float:
    """Resonance denominator D(lam); its zero is the relocated pole.

    For a simple resonance this is the scalar
    (2 mu)^2 (lam - lam0) + <phi-, (Kmm - K_-)^{-1} phi->; a degenerate
    group of multiplicity m gets the determinant of the m x m analogue.
    """
    phi = np.atleast_2d(phi_minus.T).T if phi_minus.ndim == 1 else phi_minus
    k = _closed_denominator(kmm, kminus)
    core = (2.0 * mass) ** 2 * (lam - lam0) * np.eye(phi.shape[1]) \
        + phi.T @ np.linalg.solve(k, phi)
    if phi.shape[1] == 1:
        return float(core[0, 0])
    return float(np.linalg.det(core))


def denominator_root(d_of_lam, lam0: float, lo: float, hi: float,
                     rtol: float = 1e-12) -> float:
    """Bracketed zero of the resonance denominator near lam0.

    ``d_of_lam`` must evaluate D at band energies off the compact-part
    eigenvalues (the resonance-split subtraction degenerates at lam0
    itself); the search expands below lam0 first (the shift is negative
    for attractive closed-channel coupling), then above.
    """
    off = 3e-6 * max(1.0, abs(lam0))
    d_lo, d_hi = d_of_lam(lam0 - off), d_of_lam(lam0 + off)
    if np.sign(d_lo) != np.sign(d_hi):
        # decoupled (or nearly) resonance: the zero sits inside the tiny
        # exclusion window around lam0; secant through the window edges
        return float(lam0 - off + d_lo * (-2.0 * off) / (d_hi - d_lo))
    for a, b in _expanding_brackets(lam0, lo, hi):
        da, db = d_of_lam(a), d_of_lam(b)
        if np.sign(da) != np.sign(db):
            return float(brentq(d_of_lam, a, b, xtol=abs(lam0) * rtol + 1e-14))
    raise ThinNetworkError("no sign change of the resonance denominator inside the band")


def _expanding_brackets(lam0: float, lo: float, hi: float):
    off = 3e-6 * max(1.0, abs(lam0))
    span = hi - lo
    for frac in (1e-4, 1e-3, 1e-2, 0.05, 0.15, 0.4, 1.0):
        a = max(lo, lam0 - frac * span)
        if a < lam0 - off:
            yield a, lam0 - off
    for frac in (1e-3, 1e-2, 0.05, 0.15, 0.4, 1.0):
        b = min(hi, lam0 + frac * span)
        if b > lam0 + off:
            yield lam0 + off, b


def shift_estimate(phi0_minus: np.ndarray, kminus: np.ndarray, lam0: float,
                   mass: float) -> float:
    """First-order resonance shift: lam0 - (1/(2mu)^2) <phi0, |K_-|^{-1} phi0>."""
    phi = np.ravel(phi0_minus)
    return lam0 - float(phi @ (phi / np.abs(kminus))) / (2.0 * mass) ** 2


def residue_vector_approx(phi_plus: np.ndarray, phi_minus: np.ndarray,
                          kpm: np.ndarray, kmm: np.ndarray,
                          kminus: np.ndarray) -> np.ndarray:
    """Thin-network residue direction: phi+ - Kpm (Kmm - K_-)^{-1} phi-."""
    phi_p = np.ravel(phi_plus)
    phi_m = np.ravel(phi_minus)
    if phi_m.size == 0:
        return phi_p.copy()
    k = _closed_denominator(kmm, kminus)
    return phi_p - kpm @ np.linalg.solve(k, phi_m)
